"""Category-conditioned grasp outcome model."""

from __future__ import annotations

import numpy as np

from shelfdex.shelfsim.robot import RobotState, forward_kinematics
from shelfdex.shelfsim.scene import SceneGraph, SimObject
from shelfdex.shelfsim.tactile import TactileRaw

SUCCESS = "Success"
SLIP_FAIL = "SlipFail"
CRUSH_FAIL = "CrushFail"
NO_CONTACT = "NoContact"

F_MIN = 0.5
F_MAX_RIGID = 10.0
CONTACT_FORCE_EPS = 0.02  # per-finger force below this is sensor noise

# rolling/slip-prone categories need a wider wrap
SPREAD_REQUIRED_DEG = {
    "RigidCuboid": 60.0,
    "Deformable": 60.0,
    "RigidCylinder": 90.0,
    "NearSpherical": 90.0,
}


def spread_deg_at(fingertips: np.ndarray, target: SimObject, fingers) -> float:
    """Max pairwise angular separation of the given fingertip positions around
    the target's vertical axis, degrees."""
    if len(fingers) < 2:
        return 0.0
    rel = fingertips[list(fingers)] - target.pos[None, :]
    az = np.arctan2(rel[:, 1], rel[:, 0])
    best = 0.0
    for i in range(len(az)):
        for j in range(i + 1, len(az)):
            d = abs(az[i] - az[j]) % (2 * np.pi)
            d = min(d, 2 * np.pi - d)
            best = max(best, d)
    return float(np.rad2deg(best))


def contact_spread_deg(state: RobotState, target: SimObject, fingers) -> float:
    fk = forward_kinematics(state, check_limits=False)
    return spread_deg_at(fk.fingertips, target, fingers)


def f_max_for(target: SimObject) -> float:
    if target.category == "Deformable":
        return target.deform_limit
    return F_MAX_RIGID


def evaluate_grasp(fingertips: np.ndarray, per_finger: np.ndarray, target: SimObject,
                   contact_threshold: float) -> str:
    fingers = [f for f in range(5) if per_finger[f] > contact_threshold]
    if not fingers:
        return NO_CONTACT
    total = float(per_finger[fingers].sum())
    if target.category == "Deformable" and total > target.deform_limit:
        return CRUSH_FAIL
    if len(fingers) < 2:
        return SLIP_FAIL
    if spread_deg_at(fingertips, target, fingers) < SPREAD_REQUIRED_DEG[target.category]:
        return SLIP_FAIL
    if total < F_MIN or total > f_max_for(target):
        return SLIP_FAIL
    return SUCCESS


def grasp_outcome(state: RobotState, tactile: TactileRaw, target: SimObject) -> str:
    """Success needs >= 2 contacting fingertips, enough angular spread around
    the target axis, and total normal force inside the category band."""
    per_finger = np.linalg.norm(tactile.per_finger_force(), axis=-1)
    threshold = max(2.0 * tactile.noise_floor, CONTACT_FORCE_EPS)
    fk = forward_kinematics(state, check_limits=False)
    return evaluate_grasp(fk.fingertips, per_finger, target, threshold)
