"""Deterministic random scene sampling for data collection and evaluation
suites. Placements are constrained to the arm's comfortable workspace so the
scripted expert stays reliable."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shelfdex.errors import PlacementError
from shelfdex.shelfsim.robot import BASE_POS
from shelfdex.shelfsim.scene import (
    CATEGORIES,
    PALETTE,
    SceneGraph,
    ShelfSpec,
    SimObject,
    build_scene,
)

CATEGORY_NOUN = {
    "RigidCuboid": "box",
    "RigidCylinder": "bottle",
    "Deformable": "bag",
    "NearSpherical": "ball",
}

COLOR_NAMES = tuple(PALETTE)

TARGET_X = (-0.24, 0.24)
TARGET_Y = (0.10, 0.26)
REACH_MAX = 0.72
PREGRASP_STANDOFF = 0.08


@dataclass
class SampledScene:
    scene: SceneGraph
    target_id: int
    instruction: str
    tier: int
    category: str
    has_blocker: bool


def _sample_dims(rng: np.random.Generator, category: str):
    if category == "RigidCuboid":
        return np.array([rng.uniform(0.035, 0.055), rng.uniform(0.035, 0.06), rng.uniform(0.05, 0.09)])
    if category == "RigidCylinder":
        r = rng.uniform(0.018, 0.025)
        return np.array([r, r, rng.uniform(0.07, 0.11)])
    if category == "NearSpherical":
        r = rng.uniform(0.020, 0.028)
        return np.array([r, r, r])
    return np.array([rng.uniform(0.04, 0.055), rng.uniform(0.04, 0.055), rng.uniform(0.05, 0.08)])


def _resting_z(spec: ShelfSpec, tier: int, dims, category: str) -> float:
    half_h = dims[2] / 2.0 if category in ("RigidCuboid", "Deformable") else (
        dims[2] / 2.0 if category == "RigidCylinder" else dims[0]
    )
    return spec.tier_floor_z(tier) + half_h


def _reachable(pos) -> bool:
    pregrasp = np.array([pos[0], pos[1] - PREGRASP_STANDOFF, pos[2]])
    return float(np.linalg.norm(pregrasp - BASE_POS)) <= REACH_MAX


def _make_object(rng, obj_id, category, tier, spec, x, y, color_name):
    dims = _sample_dims(rng, category)
    yaw = rng.uniform(-0.25, 0.25) if category in ("RigidCuboid", "Deformable") else 0.0
    z = _resting_z(spec, tier, dims, category)
    return SimObject(
        id=obj_id,
        category=category,
        pos=np.array([x, y, z]),
        yaw=yaw,
        dims=dims,
        tier=tier,
        color=PALETTE[color_name],
        color_name=color_name,
        deform_limit=float(rng.uniform(1.8, 4.0)) if category == "Deformable" else 0.0,
    )


def sample_scene(
    seed: int,
    spec: ShelfSpec | None = None,
    tier: int | None = None,
    category: str | None = None,
    with_blocker: bool | None = None,
    n_distractors: int | None = None,
) -> SampledScene:
    """One deterministic scene with a resolvable instruction for the target."""
    spec = spec or ShelfSpec()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), 0x5CE)))
    tier = int(rng.integers(0, spec.tier_count)) if tier is None else tier
    category = CATEGORIES[rng.integers(0, 4)] if category is None else category
    if with_blocker is None:
        with_blocker = bool(rng.random() < 0.25)
    if n_distractors is None:
        n_distractors = int(rng.integers(0, 3))

    colors = list(COLOR_NAMES)
    rng.shuffle(colors)

    for attempt in range(60):
        objects: list[SimObject] = []
        x = rng.uniform(*TARGET_X)
        y_lo = max(TARGET_Y[0], 0.17) if with_blocker else TARGET_Y[0]
        y = rng.uniform(y_lo, TARGET_Y[1])
        target = _make_object(rng, 1, category, tier, spec, x, y, colors[0])
        if not _reachable(target.pos):
            continue
        objects.append(target)
        next_id = 2
        if with_blocker:
            bcat = CATEGORIES[rng.integers(0, 4)]
            bx = x + rng.uniform(-0.02, 0.02)
            by = rng.uniform(0.09, y - target.half_extents()[1] - 0.05)
            blocker = _make_object(rng, next_id, bcat, tier, spec, bx, by, colors[next_id - 1])
            if not _reachable(blocker.pos):
                continue
            gap = np.abs(blocker.pos - target.pos) - blocker.half_extents() - target.half_extents()
            if gap.max() < 2e-3:
                continue
            objects.append(blocker)
            next_id += 1
        for _ in range(n_distractors):
            dcat = CATEGORIES[rng.integers(0, 4)]
            dtier = int(rng.integers(0, spec.tier_count))
            dx = rng.uniform(-0.32, 0.32)
            dy = rng.uniform(0.08, 0.30)
            distractor = _make_object(rng, next_id, dcat, dtier, spec, dx, dy, colors[(next_id - 1) % len(colors)])
            # keep distractors out of the target's approach corridor
            if dtier == tier and abs(dx - x) < 0.14 and dy < y:
                continue
            ok = all(
                (np.abs(distractor.pos - o.pos) - distractor.half_extents() - o.half_extents()).max() >= 2e-3
                for o in objects
            )
            if ok:
                objects.append(distractor)
                next_id += 1
        try:
            scene = build_scene(spec, objects, seed=seed)
        except PlacementError:
            continue
        instruction = _instruction_for(scene, target)
        return SampledScene(
            scene=scene,
            target_id=target.id,
            instruction=instruction,
            tier=tier,
            category=category,
            has_blocker=with_blocker,
        )
    raise PlacementError(f"could not sample a valid scene for seed {seed}")


def _instruction_for(scene: SceneGraph, target: SimObject) -> str:
    noun = CATEGORY_NOUN[target.category]
    same_cat = [o for o in scene.objects.values() if o.category == target.category]
    if len(same_cat) > 1:
        return f"grasp the {target.color_name} {noun}"
    return f"grasp the {noun}"
