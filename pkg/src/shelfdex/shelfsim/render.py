"""Per-pixel ray-cast renderer over shelf boxes, object primitives, and robot
link capsules. Deterministic: identical inputs produce bit-identical output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shelfdex.errors import PlacementError
from shelfdex.shelfsim.geometry import (
    rays_vs_boxes,
    rays_vs_capsules,
    rays_vs_cylinders,
    rays_vs_spheres,
)
from shelfdex.shelfsim.robot import RobotState, forward_kinematics
from shelfdex.shelfsim.collision import link_segments
from shelfdex.shelfsim.scene import (
    ID_BACKGROUND,
    ID_ROBOT,
    ID_SHELF,
    ROBOT_COLOR,
    SceneGraph,
)

LEFT, FRONT, RIGHT, WRIST = "Left", "Front", "Right", "Wrist"
EXTERNAL_VIEWS = (LEFT, FRONT, RIGHT)

BACKGROUND_RGB = np.array([0.06, 0.06, 0.09])
LIGHT_DIR = np.array([-0.25, -0.40, -0.88])
LIGHT_DIR = LIGHT_DIR / np.linalg.norm(LIGHT_DIR)
AMBIENT = 0.35

# wrist camera rigid offset in the palm frame: behind the palm, above the pad,
# looking along the approach axis
WRIST_OFFSET = np.array([0.0, 0.055, -0.06])


def look_at(pos, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera-to-world rotation; camera frame: x right, y down, z forward."""
    pos = np.asarray(pos, float)
    fwd = np.asarray(target, float) - pos
    fwd = fwd / np.linalg.norm(fwd)
    up = np.asarray(up, float)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
    right = right / np.linalg.norm(right)
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd], axis=1)


@dataclass
class CameraModel:
    id: str
    pos: np.ndarray
    rot: np.ndarray  # camera-to-world, columns right/down/forward
    fov_deg: float = 90.0
    resolution: tuple = (64, 64)  # (H, W)

    def __post_init__(self):
        self.pos = np.asarray(self.pos, float)
        self.rot = np.asarray(self.rot, float)
        if not (0.0 < self.fov_deg < 180.0):
            raise PlacementError("fov must be inside (0, 180)")


def external_cameras(resolution: tuple = (64, 64)) -> dict[str, CameraModel]:
    """The three fixed external views around the shelf opening."""
    defs = {
        LEFT: ((-0.85, -0.55, 0.80), (0.05, 0.22, 0.55)),
        FRONT: ((0.0, -0.95, 0.85), (0.0, 0.22, 0.55)),
        RIGHT: ((0.85, -0.55, 0.80), (-0.05, 0.22, 0.55)),
    }
    return {
        vid: CameraModel(vid, np.array(p), look_at(p, t), 90.0, resolution)
        for vid, (p, t) in defs.items()
    }


def wrist_camera(state: RobotState, resolution: tuple = (64, 64)) -> CameraModel:
    fk = forward_kinematics(state, check_limits=False)
    pos = fk.palm_pos + fk.palm_rot @ WRIST_OFFSET
    # look along the approach axis, tilted slightly toward the fingertips
    fwd = fk.palm_rot[:, 2] - 0.25 * fk.palm_rot[:, 1]
    fwd = fwd / np.linalg.norm(fwd)
    right = fk.palm_rot[:, 0]
    down = np.cross(fwd, right)
    down = down / np.linalg.norm(down)
    right = np.cross(down, fwd)
    rot = np.stack([right, down, fwd], axis=1)
    return CameraModel(WRIST, pos, rot, 90.0, resolution)


@dataclass
class RenderOut:
    rgb: np.ndarray    # (H, W, 3) in [0, 1]
    id_map: np.ndarray  # (H, W) int32; 0 background, -1 robot, -2 shelf
    depth: np.ndarray  # (H, W) ray length, inf where background


def _pixel_rays(cam: CameraModel):
    h, w = cam.resolution
    f = (w / 2.0) / np.tan(np.deg2rad(cam.fov_deg) / 2.0)
    us = (np.arange(w) + 0.5 - w / 2.0) / f
    vs = (np.arange(h) + 0.5 - h / 2.0) / f
    uu, vv = np.meshgrid(us, vs)
    dirs_cam = np.stack([uu, vv, np.ones_like(uu)], axis=-1).reshape(-1, 3)
    dirs = dirs_cam @ cam.rot.T
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs


def render_view(
    cam: CameraModel,
    scene: SceneGraph,
    state: RobotState | None,
    only_objects: tuple | None = None,
    include_shelf: bool = True,
) -> RenderOut:
    """Nearest-hit ray cast; rgb is object color times a fixed-light Lambert
    term. Pass state=None to omit the robot."""
    h, w = cam.resolution
    dirs = _pixel_rays(cam)
    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    best_id = np.full(n, ID_BACKGROUND, dtype=np.int32)
    best_normal = np.zeros((n, 3))
    best_color = np.tile(BACKGROUND_RGB, (n, 1))

    def consider(t, normal, ids, colors):
        if t.shape[1] == 0:
            return
        k = np.argmin(t, axis=1)
        rows = np.arange(n)
        tk = t[rows, k]
        better = tk < best_t
        ids_arr = np.asarray(ids, dtype=np.int32)
        colors_arr = np.asarray(colors)
        best_t[better] = tk[better]
        best_id[better] = ids_arr[k[better]]
        best_normal[better] = normal[rows, k][better]
        best_color[better] = colors_arr[k[better]]

    if include_shelf:
        sb = scene.shelf_bodies()
        t, nrm = rays_vs_boxes(cam.pos, dirs, sb)
        consider(t, nrm, sb.box_id, sb.box_color)

    ob = scene.object_bodies(only=only_objects)
    if ob.box_id:
        t, nrm = rays_vs_boxes(cam.pos, dirs, ob)
        consider(t, nrm, ob.box_id, ob.box_color)
    if ob.cyl_id:
        t, nrm = rays_vs_cylinders(cam.pos, dirs, ob)
        consider(t, nrm, ob.cyl_id, ob.cyl_color)
    if ob.sph_id:
        t, nrm = rays_vs_spheres(cam.pos, dirs, ob)
        consider(t, nrm, ob.sph_id, ob.sph_color)

    if state is not None:
        fk = forward_kinematics(state, check_limits=False)
        _, p0, p1, radii = link_segments(fk)
        t, nrm = rays_vs_capsules(cam.pos, dirs, p0, p1, radii)
        ids = [ID_ROBOT] * p0.shape[0]
        colors = np.tile(np.asarray(ROBOT_COLOR), (p0.shape[0], 1))
        consider(t, nrm, ids, colors)

    lambert = AMBIENT + (1.0 - AMBIENT) * np.maximum(0.0, -(best_normal @ LIGHT_DIR))
    rgb = np.clip(best_color * lambert[:, None], 0.0, 1.0)
    rgb[best_id == ID_BACKGROUND] = BACKGROUND_RGB
    return RenderOut(
        rgb=rgb.reshape(h, w, 3),
        id_map=best_id.reshape(h, w),
        depth=best_t.reshape(h, w),
    )


def occlusion_ratio(
    target_id: int,
    cam: CameraModel,
    scene: SceneGraph,
    state: RobotState | None,
) -> float:
    """Visible target pixels divided by its lone-render pixel count (shelf kept,
    other objects and robot removed). 0 when the lone render is empty."""
    scene.object(target_id)
    full = render_view(cam, scene, state)
    lone = render_view(cam, scene, None, only_objects=(target_id,))
    lone_count = int((lone.id_map == target_id).sum())
    if lone_count == 0:
        return 0.0
    visible = int((full.id_map == target_id).sum())
    return min(1.0, visible / lone_count)
