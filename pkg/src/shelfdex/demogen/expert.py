"""Scripted collision-free expert: waypoint plans through the tier corridor,
closed-loop joint-space following, and full per-step episode recording.

Finger close angles are recomputed in the palm frame the arm actually
reaches, so the grasp matches the verified prior regardless of which roll
polarity inverse kinematics settled on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from shelfdex.demogen.ik import solve_palm_ik
from shelfdex.demogen.priors import close_on_object, sample_grasp_prior
from shelfdex.demogen.records import EpisodeRecord, StepRow
from shelfdex.demogen.scenes import SampledScene
from shelfdex.errors import ExpertFailure
from shelfdex.pipeline import PerceptRuntime, plan_for
from shelfdex.planner import GRASP_TARGET, REMOVE_BLOCKER
from shelfdex.shelfsim.collision import check_collision
from shelfdex.shelfsim.grasp import SUCCESS
from shelfdex.shelfsim.robot import BASE_POS, RobotState, clamp_to_limits, forward_kinematics
from shelfdex.shelfsim.scene import SceneGraph, SimObject, scene_to_text
from shelfdex.shelfsim.world import MAX_STEP_RAD, World

ENTRY_Y = -0.14
ADVANCE_STEP = 0.025
LIFT_DZ = 0.035
PALM_FLOOR_CLEARANCE = 0.046
PALM_CEIL_CLEARANCE = 0.055
BASE_STANDOFF_BALL = 0.18  # waypoints keep this far from the shoulder
STEP_BUDGET = 1200
STALL_LIMIT = 5


@dataclass
class Waypoint:
    q_arm: np.ndarray
    q_hand: np.ndarray
    expect_block: bool = False  # perturbation waypoints are allowed to stall


@dataclass
class EpisodeDriver:
    """Closed-loop follower that records one row per simulator step."""

    world: World
    pr: PerceptRuntime
    record_images: bool = True
    rows: list[StepRow] = field(default_factory=list)

    def drive_to(self, wp: Waypoint) -> bool:
        goal = clamp_to_limits(np.concatenate([wp.q_arm, wp.q_hand]))
        stall = 0
        while True:
            if self.world.step_count >= STEP_BUDGET:
                raise ExpertFailure("step budget exhausted")
            s = self.world.state.s
            delta = goal - s
            if np.max(np.abs(delta)) < 1e-9:
                return True
            obs, obs_events = self.pr.observe(self.world)
            if obs.mask_lost:
                self.pr.reselect(self.world.scene, self.world.state)
            # move along the straight joint-space segment (the validated path)
            scale = min(1.0, MAX_STEP_RAD / np.max(np.abs(delta)))
            action = delta * scale
            events = self.world.step(action)
            self.rows.append(
                StepRow(
                    s=s.copy(),
                    a=action.copy(),
                    tau=obs.tau.tau.copy(),
                    events=obs_events + events,
                    rgbm=obs.rgbm.planes if self.record_images else None,
                    wrist_rgb=obs.wrist_rgb if self.record_images else None,
                )
            )
            if self.world.terminal_outcome:
                return True
            moved = np.max(np.abs(self.world.state.s - s))
            if moved < 1e-12:
                stall += 1
                if stall >= (2 if wp.expect_block else STALL_LIMIT):
                    return wp.expect_block
            else:
                stall = 0

    def hold(self, n: int) -> None:
        for _ in range(n):
            if self.world.terminal_outcome:
                return
            obs, obs_events = self.pr.observe(self.world)
            s = self.world.state.s
            action = np.zeros(22)
            events = self.world.step(action)
            self.rows.append(
                StepRow(
                    s=s.copy(), a=action, tau=obs.tau.tau.copy(),
                    events=obs_events + events,
                    rgbm=obs.rgbm.planes if self.record_images else None,
                    wrist_rgb=obs.wrist_rgb if self.record_images else None,
                )
            )


def corridor_palm_z(scene: SceneGraph, obj: SimObject, extra: float = 0.0) -> float:
    spec = scene.spec
    floor = spec.tier_floor_z(obj.tier)
    ceil = spec.tier_ceiling_z(obj.tier)
    return float(
        np.clip(obj.pos[2] + extra, floor + PALM_FLOOR_CLEARANCE, ceil - PALM_CEIL_CLEARANCE)
    )


def _push_outside_shoulder_ball(p: np.ndarray) -> np.ndarray:
    """Keep waypoints outside a standoff ball around the shoulder, expanding
    in the x-z plane only so they never drift toward the shelf opening."""
    rel = p - BASE_POS
    d = float(np.linalg.norm(rel))
    if d >= BASE_STANDOFF_BALL:
        return p
    dy = rel[1]
    need_xz = np.sqrt(max(BASE_STANDOFF_BALL**2 - dy * dy, 1e-6))
    xz = np.array([rel[0], rel[2]])
    n = float(np.linalg.norm(xz))
    if n < 1e-9:
        xz = np.array([0.0, 1.0])  # straight up by default
        n = 1.0
    xz = xz * (need_xz / n)
    out = p.copy()
    out[0] = BASE_POS[0] + xz[0]
    out[2] = BASE_POS[2] + xz[1]
    return out


def _validate_path(scene: SceneGraph, q_from: np.ndarray, q_to: np.ndarray,
                   q_hand: np.ndarray, exclude: tuple) -> bool:
    """Every interpolated state along the joint-space segment is collision-free."""
    dist = np.max(np.abs(q_to - q_from))
    n = max(2, int(np.ceil(dist / MAX_STEP_RAD)) + 1)
    for t in np.linspace(0.0, 1.0, n):
        q = q_from + (q_to - q_from) * t
        state = RobotState(q, q_hand.copy())
        if check_collision(state, scene, exclude_ids=exclude):
            return False
    return True


def plan_approach_waypoints(
    scene: SceneGraph,
    obj: SimObject,
    palm_target: np.ndarray,
    approach: np.ndarray,
    q_arm_start: np.ndarray,
    q_hand_open: np.ndarray,
    misalign_dx: float = 0.0,
    graze_entry: bool = False,
) -> tuple[list[Waypoint], np.ndarray]:
    """Free-space hops to the corridor entry, then a straight advance to the
    pre-grasp palm pose. Raises ExpertFailure when IK or validation fails."""
    exclude = (obj.id,)
    x, pre_y, palm_z = float(palm_target[0]), float(palm_target[1]), float(palm_target[2])

    def ik_or_fail(target, warm, what):
        q_sol, ok = solve_palm_ik(target, approach, q_init=warm)
        if not ok:
            raise ExpertFailure(f"IK failed at {what} {np.round(target, 3)}")
        return q_sol

    wps: list[Waypoint] = []
    q = q_arm_start
    start_palm = forward_kinematics(RobotState(q, q_hand_open), check_limits=False).palm_pos
    entry = np.array([x, ENTRY_Y, palm_z])
    n_hops = 4
    hop_targets = []
    for i in range(1, n_hops + 1):
        t = i / n_hops
        hop = start_palm + (entry - start_palm) * t
        hop[1] = min(hop[1], ENTRY_Y)  # stay outside the opening until entry
        hop_targets.append(_push_outside_shoulder_ball(hop))
    if graze_entry:
        floor = scene.spec.tier_floor_z(obj.tier)
        hop_targets += [
            np.array([x, ENTRY_Y, floor - 0.004]),
            np.array([x, 0.03, floor - 0.004]),  # pokes the tier front edge
        ]
    hop_targets.append(entry)

    for i, hop in enumerate(hop_targets):
        expect_block = graze_entry and i == len(hop_targets) - 2
        q_next = ik_or_fail(hop, q, f"approach hop {i}")
        if not expect_block and not _validate_path(scene, q, q_next, q_hand_open, exclude):
            raise ExpertFailure(f"approach hop {i} path collides")
        wps.append(Waypoint(q_next, q_hand_open.copy(), expect_block=expect_block))
        q = q_next

    ys = list(np.arange(ENTRY_Y + ADVANCE_STEP, pre_y, ADVANCE_STEP)) + [pre_y]
    adv_x = x + misalign_dx
    for y in ys:
        q_next = ik_or_fail((adv_x, y, palm_z), q, "advance")
        if not _validate_path(scene, q, q_next, q_hand_open, exclude):
            raise ExpertFailure("advance path collides")
        wps.append(Waypoint(q_next, q_hand_open.copy()))
        q = q_next
    if misalign_dx != 0.0:
        q_fix = ik_or_fail((x, pre_y, palm_z), q, "misalign correction")
        if not _validate_path(scene, q, q_fix, q_hand_open, exclude):
            raise ExpertFailure("misalign correction collides")
        wps.append(Waypoint(q_fix, q_hand_open.copy()))
        q = q_fix
    return wps, q


def run_expert_episode(
    sampled: SampledScene,
    rng: np.random.Generator,
    resolution: tuple = (64, 64),
    record_images: bool = True,
    perturbation: str = "",
    noise_floor: float | None = None,
) -> EpisodeRecord:
    """Execute the clearing plan and the final grasp; returns a Success record
    or raises ExpertFailure. A perturbation kind turns the episode into an
    error-recovery demonstration (flagged, still ends in Success)."""
    from shelfdex.shelfsim.tactile import DEFAULT_NOISE_FLOOR

    world = World(
        scene=sampled.scene,
        final_target=sampled.target_id,
        rng=rng,
        noise_floor=DEFAULT_NOISE_FLOOR if noise_floor is None else noise_floor,
    )
    _, tasks = plan_for(world.scene, sampled.target_id, world.state)
    pr = PerceptRuntime(target_id=tasks[0].object, rng=rng, resolution=resolution)
    driver = EpisodeDriver(world=world, pr=pr, record_images=record_images)

    for task in tasks:
        is_blocker = task.kind == REMOVE_BLOCKER
        world.set_grasp_target(task.object, is_blocker=is_blocker)
        pr.set_target(task.object, world.scene, world.state)
        obj = world.scene.objects[task.object]
        perturb_here = perturbation if task.kind == GRASP_TARGET else ""
        _run_grasp_subtask(driver, obj, rng, perturb_here, is_blocker)
        if world.terminal_outcome == SUCCESS and task.kind == GRASP_TARGET:
            break
        if is_blocker and world.scene.in_shelf(world.scene.objects[task.object]):
            raise ExpertFailure("blocker was not staged")

    if world.terminal_outcome != SUCCESS:
        raise ExpertFailure(f"episode ended without success ({world.terminal_outcome!r})")
    return EpisodeRecord(
        seed=sampled.scene.seed,
        scene_text=scene_to_text(sampled.scene),
        instruction=sampled.instruction,
        outcome=SUCCESS,
        is_recovery=bool(perturbation),
        perturbation=perturbation,
        rows=driver.rows,
    )


def _grasp_once(driver: EpisodeDriver, obj: SimObject, rng: np.random.Generator,
                misalign_dx: float = 0.0, graze_entry: bool = False) -> None:
    """Approach, close in the achieved palm frame, lift."""
    world, scene = driver.world, driver.world.scene
    min_palm_z = scene.spec.tier_floor_z(obj.tier) + PALM_FLOOR_CLEARANCE
    prior = sample_grasp_prior(obj, rng, min_palm_z=min_palm_z)
    palm_z = corridor_palm_z(scene, obj, extra=float(prior.palm_offset[2]))
    palm_target = np.array(
        [obj.pos[0] + prior.palm_offset[0], obj.pos[1] + prior.palm_offset[1], palm_z]
    )
    wps, _ = plan_approach_waypoints(
        scene, obj, palm_target, prior.approach,
        world.state.q_arm.copy(), prior.q_hand_pre,
        misalign_dx=misalign_dx, graze_entry=graze_entry,
    )
    for wp in wps:
        ok = driver.drive_to(wp)
        if not ok and not wp.expect_block:
            raise ExpertFailure("follower stalled before its waypoint")
        if world.terminal_outcome:
            return

    # close angles for the palm frame actually reached (roll may be mirrored)
    fk = forward_kinematics(world.state, check_limits=False)
    q_close, outcome = close_on_object(obj, fk.palm_pos, fk.palm_rot, prior.q_hand_pre)
    if outcome != SUCCESS:
        raise ExpertFailure(f"closure in achieved frame gives {outcome}")
    close_state = RobotState(world.state.q_arm.copy(), q_close.copy())
    shelf_only = SceneGraph(spec=scene.spec, objects={}, seed=scene.seed)
    if check_collision(close_state, shelf_only):
        raise ExpertFailure("closed hand intersects shelf")
    driver.drive_to(Waypoint(world.state.q_arm.copy(), q_close))
    if world.terminal_outcome:
        return

    q_lift, ok = solve_palm_ik(fk.palm_pos + np.array([0.0, 0.0, LIFT_DZ]),
                               prior.approach, q_init=world.state.q_arm)
    if not ok:
        raise ExpertFailure("IK failed at lift")
    driver.drive_to(Waypoint(q_lift, q_close))


def _run_grasp_subtask(driver: EpisodeDriver, obj: SimObject, rng: np.random.Generator,
                       perturbation: str, is_blocker: bool) -> None:
    world = driver.world
    misalign = 0.0
    graze = False
    if perturbation == "Misalign":
        misalign = float(rng.uniform(0.02, 0.04) * (1 if rng.random() < 0.5 else -1))
    elif perturbation == "EdgeCollide":
        graze = True

    _grasp_once(driver, obj, rng, misalign_dx=misalign, graze_entry=graze)
    if world.terminal_outcome:
        return

    if perturbation == "Drop":
        if world.attached is None:
            raise ExpertFailure("drop perturbation: nothing held after lift")
        driver.rows[-1].events.extend(world.force_release())
        obj_now = world.scene.objects[obj.id]
        _grasp_once(driver, obj_now, rng)
        if world.terminal_outcome:
            return

    if is_blocker:
        if world.attached != obj.id:
            raise ExpertFailure("blocker grasp did not attach")
        fk = forward_kinematics(world.state, check_limits=False)
        q_out, ok = solve_palm_ik(
            (float(fk.palm_pos[0]), ENTRY_Y - 0.02, float(fk.palm_pos[2])),
            (0, 1, 0), q_init=world.state.q_arm,
        )
        if not ok:
            raise ExpertFailure("IK failed at retract")
        driver.drive_to(Waypoint(q_out, world.state.q_hand.copy()))
        if world.scene.in_shelf(world.scene.objects[obj.id]):
            raise ExpertFailure("carried blocker never left the shelf")
        from shelfdex.demogen.priors import PRE_SHAPE

        driver.drive_to(Waypoint(world.state.q_arm.copy(), PRE_SHAPE.copy()))
    else:
        driver.hold(8)
        if world.terminal_outcome != SUCCESS:
            raise ExpertFailure(
                f"grasp did not conclude (outcome {world.terminal_outcome!r})"
            )
