"""Per-category parametric grasp templates with a contact-closure simulation,
resampled until the grasp criteria pass on the isolated object."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shelfdex.errors import PriorSamplingError
from shelfdex.shelfsim.grasp import F_MIN, SUCCESS, evaluate_grasp
from shelfdex.shelfsim.robot import FINGERTIP_RADIUS, HAND_LIMITS, finger_chain
from shelfdex.shelfsim.scene import STIFFNESS, SimObject
from shelfdex.shelfsim.tactile import _object_sdf

PRE_SHAPE = np.full(15, -0.05)  # slightly splayed: fingertip ring opens to ~43 mm
CLOSE_STEP = 0.02
MAX_CLOSE_ITERS = 160


def _tip_forward_reach(q_finger3: np.ndarray) -> float:
    """Forward reach of a fingertip along the approach axis for one finger's
    three curl angles."""
    from shelfdex.shelfsim.robot import FINGER_LINK_LENGTHS

    curl = np.cumsum(q_finger3)
    return float((FINGER_LINK_LENGTHS * np.cos(curl)).sum())


# palm standoff placing pre-shaped fingertips level with the object center
# (slightly proud, so closing sweeps the side faces front-of-center)
BASE_STANDOFF = _tip_forward_reach(PRE_SHAPE[:3]) - 0.008


@dataclass
class GraspPrior:
    category: str
    palm_offset: np.ndarray   # palm position relative to the object center
    approach: np.ndarray      # palm approach axis (world)
    q_hand_pre: np.ndarray
    q_hand_close: np.ndarray
    jitter_std: float = 0.015

    def pregrasp_pos(self, obj: SimObject) -> np.ndarray:
        return obj.pos + self.palm_offset


def _palm_frame(approach):
    from shelfdex.demogen.ik import approach_frame

    return approach_frame(approach)


def close_on_object(obj: SimObject, palm_pos: np.ndarray, palm_rot: np.ndarray,
                    q_pre: np.ndarray):
    """Curl fingers from the pre-shape until the grasp criteria hold; returns
    (q_close, outcome). Force per finger is stiffness x fingertip penetration."""
    q = q_pre.copy()
    stiffness = STIFFNESS[obj.category]
    if obj.category == "Deformable":
        per_finger_stop = 0.22 * obj.deform_limit
        total_cap = 0.75 * obj.deform_limit
    else:
        per_finger_stop = 0.45
        total_cap = 6.0

    def grip():
        pts = finger_chain(palm_pos, palm_rot, q)
        tips = pts[:, 3, :]
        sd, _ = _object_sdf(obj, tips)
        pen = np.maximum(FINGERTIP_RADIUS - sd, 0.0)
        return tips, stiffness * pen

    outcome = None
    for _ in range(MAX_CLOSE_ITERS):
        tips, force = grip()
        total = force.sum()
        outcome = evaluate_grasp(tips, force, obj, contact_threshold=0.02)
        if outcome == SUCCESS and total >= max(F_MIN * 1.15, 0.0):
            break
        moved = False
        for f in range(5):
            if force[f] >= per_finger_stop or total >= total_cap:
                continue
            hi = HAND_LIMITS[:, 1]
            sl = slice(3 * f, 3 * f + 3)
            if np.all(q[sl] >= hi[sl] - 1e-9):
                continue
            q[sl] = np.minimum(q[sl] + CLOSE_STEP, hi[sl])
            moved = True
        if not moved:
            break
    tips, force = grip()
    return q, evaluate_grasp(tips, force, obj, contact_threshold=0.02)


def sample_grasp_prior(
    obj: SimObject, rng: np.random.Generator, min_palm_z: float | None = None
) -> GraspPrior:
    """Category template plus seeded jitter, resampled (<= 20 tries) until the
    closure achieves Success on the isolated object. min_palm_z raises the
    palm when the object sits too close to its tier floor for the finger
    ring."""
    approach = np.array([0.0, 1.0, 0.0])
    palm_rot = _palm_frame(approach)
    base_standoff = BASE_STANDOFF
    dz_base = 0.0
    if min_palm_z is not None:
        dz_base = max(0.0, float(min_palm_z) - float(obj.pos[2]))
    last_outcome = ""
    for attempt in range(20):
        jx = rng.normal(0.0, 0.004)
        jz = dz_base + rng.normal(0.0, 0.004)
        js = rng.normal(0.0, 0.004)
        offset = np.array([jx, -(base_standoff + js), jz])
        palm_pos = obj.pos + offset
        q_close, outcome = close_on_object(obj, palm_pos, palm_rot, PRE_SHAPE)
        last_outcome = outcome
        if outcome == SUCCESS:
            return GraspPrior(
                category=obj.category,
                palm_offset=offset,
                approach=approach,
                q_hand_pre=PRE_SHAPE.copy(),
                q_hand_close=q_close,
            )
    raise PriorSamplingError(
        f"no successful prior for {obj.category} id={obj.id} after 20 tries "
        f"(last outcome {last_outcome})"
    )
