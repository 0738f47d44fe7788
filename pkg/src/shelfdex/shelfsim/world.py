"""Kinematic episode runtime: action integration with collision rollback,
grasp attachment, slip/crush/lift logic, and staging placement for cleared
blockers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from shelfdex.errors import DimensionError
from shelfdex.shelfsim.collision import check_collision, contacts_against
from shelfdex.shelfsim.grasp import (
    CRUSH_FAIL,
    F_MIN,
    SPREAD_REQUIRED_DEG,
    SUCCESS,
    contact_spread_deg,
    grasp_outcome,
)
from shelfdex.shelfsim.robot import RobotState, clamp_to_limits, forward_kinematics
from shelfdex.shelfsim.scene import STIFFNESS, SceneGraph, add_object_body
from shelfdex.shelfsim.geometry import BodySet, rot_z
from shelfdex.shelfsim.tactile import (
    DEFAULT_NOISE_FLOOR,
    TactileRaw,
    fingertip_contacts,
    simulate_tactile,
)

MAX_STEP_RAD = 0.05
LIFT_HEIGHT = 0.03
HOLD_STEPS = 3
STAGING_X0, STAGING_Y, STAGING_DX = 0.50, -0.40, 0.14
SHELF_EXIT_Y = -0.06  # palm y past which a carried blocker counts as extracted

COLLISION = "Collision"
CONTACT = "Contact"
SLIP_FAIL_EVENT = "SlipFail"
CRUSH_FAIL_EVENT = "CrushFail"
MASK_LOST_EVENT = "MaskLost"
GRASP_RESULT = "GraspResult"
SUBTASK_DONE = "SubTaskDone"

EVENT_KINDS = (
    COLLISION,
    CONTACT,
    SLIP_FAIL_EVENT,
    CRUSH_FAIL_EVENT,
    MASK_LOST_EVENT,
    GRASP_RESULT,
    SUBTASK_DONE,
)


@dataclass(frozen=True)
class Event:
    kind: str
    body: str = ""
    obj_id: int = 0
    value: float = 0.0
    outcome: str = ""


def step(
    state: RobotState,
    action: np.ndarray,
    scene: SceneGraph,
    target_id: int | None = None,
    max_step: float = MAX_STEP_RAD,
):
    """One kinematic integration step with joint-limit clamping.

    Colliding motion (against shelf or non-target objects) is rolled back per
    joint; contacts with the grasp target become Contact events instead.
    Returns (next_state, events).
    """
    action = np.asarray(action, float)
    if action.shape != (22,):
        raise DimensionError(f"action length {action.shape} != 22")
    action = np.clip(action, -max_step, max_step)
    exclude = (target_id,) if target_id is not None else ()

    s_old = state.s
    s_want = clamp_to_limits(s_old + action)
    events: list[Event] = []

    trial = RobotState.from_s(s_want)
    contacts = check_collision(trial, scene, exclude_ids=exclude)
    if contacts:
        seen = set()
        for c in contacts:
            key = (c.body, c.surface, c.obj_id)
            if key not in seen:
                seen.add(key)
                events.append(
                    Event(COLLISION, body=c.body, obj_id=c.obj_id, value=c.penetration)
                )
        # greedy per-joint rollback: keep each joint's motion only if the pose
        # stays collision-free
        s_cur = s_old.copy()
        for j in range(22):
            if s_want[j] == s_cur[j]:
                continue
            s_try = s_cur.copy()
            s_try[j] = s_want[j]
            if not check_collision(RobotState.from_s(s_try), scene, exclude_ids=exclude):
                s_cur = s_try
        next_state = RobotState.from_s(s_cur)
    else:
        next_state = trial

    if target_id is not None:
        for c in fingertip_contacts(next_state, scene):
            if c.obj_id == target_id:
                events.append(
                    Event(CONTACT, body=f"finger{c.finger}", obj_id=c.obj_id, value=c.penetration)
                )
    return next_state, events


@dataclass
class World:
    """Mutable episode state around a copied scene."""

    scene: SceneGraph
    final_target: int
    rng: np.random.Generator
    noise_floor: float = DEFAULT_NOISE_FLOOR
    max_step: float = MAX_STEP_RAD
    state: RobotState = field(default_factory=RobotState.ready)
    grasp_target: int | None = None
    is_blocker_task: bool = False
    attached: int | None = None
    grasp_z: float = 0.0
    hold_count: int = 0
    staged_count: int = 0
    step_count: int = 0
    terminal_outcome: str = ""

    def __post_init__(self):
        self.scene = self.scene.copy()
        if self.grasp_target is None:
            self.grasp_target = self.final_target

    def set_grasp_target(self, obj_id: int, is_blocker: bool) -> None:
        self.grasp_target = obj_id
        self.is_blocker_task = is_blocker
        self.attached = None
        self.hold_count = 0

    def tactile(self, noisy: bool = True) -> TactileRaw:
        return simulate_tactile(
            self.state,
            self.scene,
            noise_floor=self.noise_floor if noisy else 0.0,
            rng=self.rng if noisy else None,
        )

    def _target_grip(self):
        """Per-finger force on the grasp target plus contacting finger set."""
        force = np.zeros(5)
        fingers = []
        target = self.scene.objects[self.grasp_target]
        for c in fingertip_contacts(self.state, self.scene):
            if c.obj_id == self.grasp_target:
                force[c.finger] += STIFFNESS[target.category] * c.penetration
        fingers = [f for f in range(5) if force[f] > 0.0]
        return force, fingers

    def _stable(self, force: np.ndarray, fingers: list[int]) -> bool:
        if len(fingers) < 2:
            return False
        target = self.scene.objects[self.grasp_target]
        total = float(force[fingers].sum())
        if total < F_MIN:
            return False
        if target.category == "Deformable" and total > target.deform_limit:
            return False
        return contact_spread_deg(self.state, target, fingers) >= SPREAD_REQUIRED_DEG[target.category]

    def _rest_z_at(self, obj, x: float, y: float) -> float:
        s = self.scene.spec
        h = obj.half_extents()[2]
        if abs(x) <= s.width / 2.0 and 0.0 <= y <= s.depth:
            return s.tier_floor_z(obj.tier) + h
        return h  # ground

    def _drop(self, obj) -> None:
        obj.pos = obj.pos.copy()
        obj.pos[2] = self._rest_z_at(obj, obj.pos[0], obj.pos[1])

    def _stage(self, obj) -> None:
        obj.pos = np.array(
            [STAGING_X0 + STAGING_DX * self.staged_count, STAGING_Y, obj.half_extents()[2]]
        )
        self.staged_count += 1

    def force_release(self) -> list[Event]:
        """Detach and drop the held object (perturbation injection hook)."""
        if self.attached is None:
            return []
        obj = self.scene.objects[self.attached]
        self.attached = None
        self.hold_count = 0
        self._drop(obj)
        return [Event(SLIP_FAIL_EVENT, obj_id=obj.id, value=0.0)]

    def step(self, action: np.ndarray) -> list[Event]:
        self.step_count += 1
        fk_before = forward_kinematics(self.state, check_limits=False)
        exclude = self.grasp_target

        next_state, events = step(
            self.state, action, self.scene, target_id=exclude, max_step=self.max_step
        )

        # carry the attached object rigidly with the palm
        if self.attached is not None:
            fk_after = forward_kinematics(next_state, check_limits=False)
            obj = self.scene.objects[self.attached]
            new_pos = obj.pos + (fk_after.palm_pos - fk_before.palm_pos)
            d_yaw = np.arctan2(fk_after.palm_rot[1, 0], fk_after.palm_rot[0, 0]) - np.arctan2(
                fk_before.palm_rot[1, 0], fk_before.palm_rot[0, 0]
            )
            carried = BodySet()
            moved = type(obj)(
                id=obj.id,
                category=obj.category,
                pos=new_pos,
                yaw=obj.yaw + d_yaw,
                dims=obj.dims,
                tier=obj.tier,
                color=obj.color,
                color_name=obj.color_name,
                deform_limit=obj.deform_limit,
            )
            add_object_body(carried, moved)
            blocked = False
            sb = self.scene.shelf_bodies()
            others = self.scene.object_bodies(exclude=(obj.id,))
            for bodies in (sb, others):
                if _bodyset_overlaps(carried, bodies):
                    blocked = True
                    break
            if blocked:
                events.append(Event(COLLISION, body="carried_object", obj_id=obj.id))
                return events  # whole step vetoed
            obj.pos = new_pos
            obj.yaw = obj.yaw + d_yaw

        self.state = next_state

        force, fingers = self._target_grip()
        target = self.scene.objects[self.grasp_target]
        total = float(force.sum())

        if target.category == "Deformable" and total > target.deform_limit:
            events.append(Event(CRUSH_FAIL_EVENT, obj_id=target.id, value=total))
            self.terminal_outcome = CRUSH_FAIL
            return events

        stable = self._stable(force, fingers)
        if self.attached is None:
            if stable:
                self.attached = target.id
                self.grasp_z = float(target.pos[2])
                self.hold_count = 0
        else:
            if not stable:
                lifted = target.pos[2] > self.grasp_z + 0.005
                self.attached = None
                self.hold_count = 0
                if lifted:
                    self._drop(target)
                    events.append(Event(SLIP_FAIL_EVENT, obj_id=target.id, value=total))
            else:
                if target.pos[2] - self.grasp_z >= LIFT_HEIGHT:
                    self.hold_count += 1
                else:
                    self.hold_count = 0
                fk_now = forward_kinematics(self.state, check_limits=False)
                if self.is_blocker_task and fk_now.palm_pos[1] < SHELF_EXIT_Y:
                    self._stage(target)
                    self.attached = None
                    self.hold_count = 0
                    events.append(Event(SUBTASK_DONE, obj_id=target.id))
                elif not self.is_blocker_task and self.hold_count >= HOLD_STEPS:
                    outcome = grasp_outcome(self.state, self.tactile(noisy=False), target)
                    events.append(Event(GRASP_RESULT, obj_id=target.id, outcome=outcome))
                    if outcome == SUCCESS:
                        self.terminal_outcome = SUCCESS
                    else:
                        self.attached = None
                        self.hold_count = 0
                        self._drop(target)
                        if outcome != SUCCESS:
                            events.append(Event(SLIP_FAIL_EVENT, obj_id=target.id, value=total))
        return events


def _bodyset_overlaps(a: BodySet, b: BodySet) -> bool:
    """Coarse solid-vs-solid test via sampled surface points of a inside b."""
    pts = _surface_samples(a)
    if pts.shape[0] == 0:
        return False
    from shelfdex.shelfsim.geometry import signed_distance_point

    sds = signed_distance_point(b, pts)
    for family in sds.values():
        if family.size and family.min() < -1e-4:
            return True
    return False


def _surface_samples(bodies: BodySet, n_per: int = 64) -> np.ndarray:
    pts = []
    grid = np.linspace(-1.0, 1.0, 4)
    for i in range(len(bodies.box_id)):
        gx, gy, gz = np.meshgrid(grid, grid, grid)
        cube = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
        on_face = np.abs(np.abs(cube).max(axis=1) - 1.0) < 1e-9
        local = cube[on_face] * bodies.box_half[i]
        pts.append(local @ bodies.box_rot[i] + bodies.box_center[i])
    for i in range(len(bodies.cyl_id)):
        r, hh = bodies.cyl_rh[i]
        ang = np.linspace(0, 2 * np.pi, 12, endpoint=False)
        zs = np.linspace(-hh, hh, 4)
        aa, zz = np.meshgrid(ang, zs)
        side = np.stack([r * np.cos(aa), r * np.sin(aa), zz], axis=-1).reshape(-1, 3)
        cap = np.stack([0.5 * r * np.cos(ang), 0.5 * r * np.sin(ang), np.full_like(ang, hh)], -1)
        pts.append(np.vstack([side, cap, cap * [1, 1, -1]]) + bodies.cyl_center[i])
    for i in range(len(bodies.sph_id)):
        r = bodies.sph_r[i]
        u = np.linspace(0, 2 * np.pi, 10, endpoint=False)
        v = np.linspace(0.3, np.pi - 0.3, 5)
        uu, vv = np.meshgrid(u, v)
        sph = np.stack(
            [r * np.sin(vv) * np.cos(uu), r * np.sin(vv) * np.sin(uu), r * np.cos(vv)], -1
        ).reshape(-1, 3)
        pts.append(np.vstack([sph, [[0, 0, r]], [[0, 0, -r]]]) + bodies.sph_center[i])
    return np.vstack(pts) if pts else np.zeros((0, 3))
