"""High-level planning: instruction parsing, occlusion/height dependency
graph, clearing-order sub-tasks, and event arbitration between levels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from shelfdex.errors import (
    AmbiguousTarget,
    PlanningError,
    UnresolvableTarget,
)
from shelfdex.shelfsim.robot import PALM_RADIUS
from shelfdex.shelfsim.scene import SceneGraph, SimObject

FRONT_BLOCK = "FrontBlock"
TOP_SUPPORT = "TopSupport"
SURROUND = "Surround"

SURROUND_RADIUS = 0.06
SURROUND_MIN_NEIGHBORS = 3
HAND_HALF_WIDTH = PALM_RADIUS + 0.015

REMOVE_BLOCKER = "RemoveBlocker"
GRASP_TARGET = "GraspTarget"

CONTINUE_LOW_LEVEL = "ContinueLowLevel"
RESELECT_VIEW = "ReselectView"
REPLAN_SUBTASKS = "ReplanSubtasks"
ABORT_EPISODE = "AbortEpisode"
WRIST_ONLY = "WristOnlyFallback"

NOUN_CATEGORIES = {
    "box": "RigidCuboid",
    "cube": "RigidCuboid",
    "block": "RigidCuboid",
    "cylinder": "RigidCylinder",
    "bottle": "RigidCylinder",
    "can": "RigidCylinder",
    "bag": "Deformable",
    "carton": "Deformable",
    "pouch": "Deformable",
    "ball": "NearSpherical",
    "fruit": "NearSpherical",
    "orb": "NearSpherical",
}

ORDINALS = {
    "first": 0, "1st": 0, "bottom": 0, "lowest": 0,
    "second": 1, "2nd": 1, "middle": 1,
    "third": 2, "3rd": 2, "top": 2, "highest": 2,
}

VERBS = ("grasp", "pick", "take")
ARTICLES = ("the", "a", "an")


@dataclass
class TargetSpec:
    noun: str
    category: str
    object_id: int
    color: str | None = None
    tier: int | None = None


@dataclass
class DependencyGraph:
    nodes: list[int]
    edges: list[tuple[int, int, str]]  # (u, v, kind): remove u before v

    def blockers_of(self, v: int) -> list[int]:
        return [u for u, vv, _ in self.edges if vv == v]

    def ancestors(self, v: int) -> set[int]:
        out: set[int] = set()
        frontier = [v]
        while frontier:
            node = frontier.pop()
            for u in self.blockers_of(node):
                if u not in out:
                    out.add(u)
                    frontier.append(u)
        return out

    def is_acyclic(self) -> bool:
        color: dict[int, int] = {}

        def visit(node) -> bool:
            color[node] = 1
            for u, v, _ in self.edges:
                if u == node:
                    if color.get(v) == 1:
                        return False
                    if color.get(v, 0) == 0 and not visit(v):
                        return False
            color[node] = 2
            return True

        return all(visit(n) for n in self.nodes if color.get(n, 0) == 0)


@dataclass
class SubTask:
    kind: str
    object: int
    order: int


def parse_instruction(text: str, scene: SceneGraph) -> TargetSpec:
    """Grammar: (grasp|pick|take) [article] [color] noun [on the <ordinal>
    tier|shelf|layer]. Resolves to a unique in-shelf object or raises."""
    words = [w for w in text.lower().replace(",", " ").split() if w]
    if not words or words[0] not in VERBS:
        raise UnresolvableTarget(f"instruction must start with one of {VERBS}: {text!r}")
    words = words[1:]
    if words and words[0] in ARTICLES:
        words = words[1:]
    color = None
    from shelfdex.shelfsim.scene import PALETTE

    if words and words[0] in PALETTE:
        color = words[0]
        words = words[1:]
    if not words:
        raise UnresolvableTarget(f"no noun in instruction {text!r}")
    noun = words[0]
    if noun not in NOUN_CATEGORIES:
        raise UnresolvableTarget(f"unknown noun {noun!r}")
    category = NOUN_CATEGORIES[noun]
    tier = None
    rest = words[1:]
    if rest:
        if rest[0] == "on" and len(rest) >= 3 and rest[1] in ARTICLES:
            rest = rest[2:]
        for w in rest:
            if w in ORDINALS:
                tier = ORDINALS[w]

    matches = [
        o
        for o in scene.objects.values()
        if scene.in_shelf(o)
        and o.category == category
        and (color is None or o.color_name == color)
        and (tier is None or o.tier == tier)
    ]
    if not matches:
        raise UnresolvableTarget(f"no {category} matches instruction {text!r}")
    if len(matches) > 1:
        raise AmbiguousTarget(
            f"{len(matches)} objects match {text!r}; add a color or tier qualifier"
        )
    target = matches[0]
    return TargetSpec(noun=noun, category=category, object_id=target.id, color=color, tier=tier)


def _approach_corridor_hit(u: SimObject, v: SimObject) -> bool:
    """Does u intersect the straight approach corridor from the shelf opening
    to v (prism inflated by the hand half-width)?"""
    hw = v.half_extents()[0] + HAND_HALF_WIDTH
    lo, hi = v.pos[0] - hw, v.pos[0] + hw
    hu = u.half_extents()
    if u.pos[0] + hu[0] < lo or u.pos[0] - hu[0] > hi:
        return False
    return u.pos[1] - hu[1] < v.pos[1]  # u starts nearer the opening


def build_dependency_graph(scene: SceneGraph, target_id: int) -> DependencyGraph:
    """Edges: FrontBlock (same tier, nearer the opening, in the approach
    corridor), TopSupport (resting within the top-face footprint in the
    adjacent height band), Surround (>= 3 close neighbors). Acyclic by
    construction: FrontBlock orients by opening distance, TopSupport by
    height, mutual Surround pairs by id order."""
    scene.object(target_id)
    objs = [o for o in scene.objects.values() if scene.in_shelf(o)]
    edges: list[tuple[int, int, str]] = []
    for v in objs:
        for u in objs:
            if u.id == v.id:
                continue
            if u.tier == v.tier and u.pos[1] < v.pos[1] and _approach_corridor_hit(u, v):
                edges.append((u.id, v.id, FRONT_BLOCK))
    for v in objs:
        for u in objs:
            if u.id == v.id:
                continue
            hv, hu = v.half_extents(), u.half_extents()
            on_top = abs(u.bottom_z() - v.top_z()) < 0.015
            inside = (
                abs(u.pos[0] - v.pos[0]) <= hv[0] and abs(u.pos[1] - v.pos[1]) <= hv[1]
            )
            if on_top and inside:
                edges.append((u.id, v.id, TOP_SUPPORT))
    for v in objs:
        ring = [
            u
            for u in objs
            if u.id != v.id
            and u.tier == v.tier
            and np.hypot(*(u.pos[:2] - v.pos[:2])) - u.radius_xy() - v.radius_xy()
            < SURROUND_RADIUS
        ]
        if len(ring) >= SURROUND_MIN_NEIGHBORS:
            for u in ring:
                # orient mutual pairs deterministically
                if u.pos[1] < v.pos[1] or (u.pos[1] == v.pos[1] and u.id < v.id):
                    edges.append((u.id, v.id, SURROUND))
    # dedupe, drop edges that would create 2-cycles against the primary orders
    seen = set()
    final = []
    for u, v, kind in edges:
        if (u, v) in seen:
            continue
        if (v, u) in {(a, b) for a, b, _ in final}:
            continue
        seen.add((u, v))
        final.append((u, v, kind))
    return DependencyGraph(nodes=[o.id for o in objs], edges=final)


def plan_subtasks(graph: DependencyGraph, target_id: int, scene: SceneGraph) -> list[SubTask]:
    """Topological order over the target's ancestors (nearest the opening
    first among independents), then the final grasp."""
    if not graph.is_acyclic():
        raise PlanningError("dependency graph contains a cycle")
    ancestors = graph.ancestors(target_id)

    def opening_distance(obj_id: int) -> float:
        return float(scene.objects[obj_id].pos[1])

    order: list[int] = []
    remaining = set(ancestors)
    placed: set[int] = set()
    while remaining:
        ready = [
            n
            for n in remaining
            if all(u in placed or u not in ancestors for u in graph.blockers_of(n))
        ]
        if not ready:
            raise PlanningError("cyclic ancestors")  # defensive; acyclic checked above
        ready.sort(key=lambda n: (opening_distance(n), n))
        nxt = ready[0]
        order.append(nxt)
        placed.add(nxt)
        remaining.remove(nxt)
    tasks = [SubTask(REMOVE_BLOCKER, obj, i) for i, obj in enumerate(order)]
    tasks.append(SubTask(GRASP_TARGET, target_id, len(order)))
    return tasks


@dataclass
class RetryBudget:
    recovery: int = 3
    reselect: int = 2
    recovery_used: int = 0
    reselect_used: int = 0


def arbitrate_event(event_kind: str, budget: RetryBudget) -> str:
    """Local-recovery policy: slips/collisions continue at the low level while
    budget remains; mask loss re-selects the view, then falls back to
    wrist-only conditioning; a crush is irreversible."""
    if event_kind in ("Collision", "SlipFail"):
        if budget.recovery_used < budget.recovery:
            budget.recovery_used += 1
            return CONTINUE_LOW_LEVEL
        return ABORT_EPISODE
    if event_kind == "MaskLost":
        if budget.reselect_used < budget.reselect:
            budget.reselect_used += 1
            return RESELECT_VIEW
        return WRIST_ONLY
    if event_kind == "CrushFail":
        return ABORT_EPISODE
    return CONTINUE_LOW_LEVEL
