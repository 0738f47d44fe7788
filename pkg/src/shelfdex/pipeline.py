"""Shared episode orchestration: view selection with the confidence gate,
mask tracking across frames, observation assembly, and clearing-plan
construction with the no-confident-view fallback."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from shelfdex import percept
from shelfdex.errors import NoConfidentView
from shelfdex.planner import (
    REMOVE_BLOCKER,
    SubTask,
    build_dependency_graph,
    plan_subtasks,
)
from shelfdex.shelfsim.render import (
    EXTERNAL_VIEWS,
    FRONT,
    CameraModel,
    external_cameras,
    render_view,
    wrist_camera,
)
from shelfdex.shelfsim.robot import RobotState
from shelfdex.shelfsim.scene import SceneGraph
from shelfdex.shelfsim.world import MASK_LOST_EVENT, Event, World


@dataclass
class ObservationBundle:
    primary_view: str
    rgbm: percept.Rgbm
    wrist_rgb: np.ndarray
    tau: percept.TactileVec
    s: np.ndarray
    mask_lost: bool
    dropout_head: bool = False  # wrist-only fallback engaged


def plan_for(scene: SceneGraph, target_id: int, state: RobotState,
             cameras: dict[str, CameraModel] | None = None):
    """Dependency-graph plan; when no external view clears the gate at episode
    start, the nearest in-shelf neighbor is cleared first to open visibility."""
    cameras = cameras or external_cameras()
    graph = build_dependency_graph(scene, target_id)
    tasks = plan_subtasks(graph, target_id, scene)
    try:
        scores = [
            percept.score_view(render_view(cameras[v], scene, state), target_id, scene,
                               cam=cameras[v])
            for v in EXTERNAL_VIEWS
        ]
        percept.select_primary_view(scores)
    except NoConfidentView:
        planned = {t.object for t in tasks}
        target = scene.objects[target_id]
        neighbors = [
            o for o in scene.objects.values()
            if o.id != target_id and scene.in_shelf(o) and o.id not in planned
        ]
        if neighbors:
            nearest = min(neighbors, key=lambda o: float(np.linalg.norm(o.pos - target.pos)))
            tasks = [SubTask(REMOVE_BLOCKER, nearest.id, 0)] + [
                SubTask(t.kind, t.object, t.order + 1) for t in tasks
            ]
    return graph, tasks


class PerceptRuntime:
    """Per-episode perception state: primary view, tracked mask, wrist-only
    fallback. front_only restricts scoring to the Front camera and bypasses
    the selection gate (single-external ablation)."""

    def __init__(
        self,
        target_id: int,
        rng: np.random.Generator,
        resolution: tuple = (64, 64),
        front_only: bool = False,
        jitter_prob: float = percept.TRACK_JITTER_PROB,
    ):
        self.cameras = external_cameras(resolution)
        self.resolution = resolution
        self.target_id = target_id
        self.rng = rng
        self.front_only = front_only
        self.jitter_prob = jitter_prob
        self.primary: str = FRONT
        self.mask: percept.Mask | None = None
        self.wrist_only = False

    def set_target(self, target_id: int, scene: SceneGraph, state: RobotState) -> bool:
        self.target_id = target_id
        self.wrist_only = False
        return self.reselect(scene, state)

    def reselect(self, scene: SceneGraph, state: RobotState) -> bool:
        """Score fresh renders, pick the primary view, segment. False if the
        gate rejected every view or segmentation came up empty."""
        if self.front_only:
            render = render_view(self.cameras[FRONT], scene, state)
            score = percept.score_view(render, self.target_id, scene, cam=self.cameras[FRONT])
            self.primary = FRONT
            self.mask = percept.segment_target(render, self.target_id, score.bbox)
            return not self.mask.lost
        scores = []
        renders = {}
        for v in EXTERNAL_VIEWS:
            renders[v] = render_view(self.cameras[v], scene, state)
            scores.append(
                percept.score_view(renders[v], self.target_id, scene, cam=self.cameras[v])
            )
        try:
            self.primary = percept.select_primary_view(scores)
        except NoConfidentView:
            # keep the best view anyway; caller decides on fallback
            self.primary = max(scores, key=lambda s: s.confidence).view
            best = next(s for s in scores if s.view == self.primary)
            self.mask = percept.segment_target(renders[self.primary], self.target_id, best.bbox)
            return False
        chosen = next(s for s in scores if s.view == self.primary)
        self.mask = percept.segment_target(renders[self.primary], self.target_id, chosen.bbox)
        return not self.mask.lost

    def observe(self, world: World) -> tuple[ObservationBundle, list[Event]]:
        """Track the mask on a fresh primary render and assemble the bundle."""
        events: list[Event] = []
        scene, state = world.scene, world.state
        render = render_view(self.cameras[self.primary], scene, state)
        if self.mask is None:
            self.mask = percept.Mask.lost_like(render.id_map.shape)
        prev_lost = self.mask.lost
        self.mask = percept.track_mask(self.mask, render, rng=self.rng, p_noise=self.jitter_prob)
        if self.mask.lost and not prev_lost:
            events.append(Event(MASK_LOST_EVENT, obj_id=self.target_id))
        rgbm = percept.assemble_rgbm(render.rgb, self.mask)
        wrist = render_view(wrist_camera(state, self.resolution), scene, state)
        tau = percept.reduce_tactile(world.tactile(noisy=True))
        return (
            ObservationBundle(
                primary_view=self.primary,
                rgbm=rgbm,
                wrist_rgb=wrist.rgb,
                tau=tau,
                s=state.s,
                mask_lost=self.mask.lost,
                dropout_head=self.wrist_only,
            ),
            events,
        )
