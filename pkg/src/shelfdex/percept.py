"""Occlusion-aware perception: per-view scoring, confidence-gated primary-view
selection, target segmentation, temporal mask tracking, RGBM assembly, and the
5-D tactile reduction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from shelfdex.errors import DimensionError, NoConfidentView, NumericError
from shelfdex.shelfsim.render import EXTERNAL_VIEWS, CameraModel, RenderOut, render_view
from shelfdex.shelfsim.robot import RobotState
from shelfdex.shelfsim.scene import ID_ROBOT, SceneGraph
from shelfdex.shelfsim.tactile import TactileRaw

CONFIDENCE_GATE = 0.5
IOU_LOST_THRESHOLD = 0.05
TRACK_JITTER_PROB = 0.02
CLUTTER_PENALTY = 0.1


@dataclass(frozen=True)
class BBox:
    """Inclusive pixel rectangle; empty() when no pixel is visible."""

    r0: int = 0
    c0: int = 0
    r1: int = -1
    c1: int = -1

    def empty(self) -> bool:
        return self.r1 < self.r0 or self.c1 < self.c0

    def intersects(self, other: "BBox") -> bool:
        if self.empty() or other.empty():
            return False
        return not (
            self.r1 < other.r0 or other.r1 < self.r0 or self.c1 < other.c0 or other.c1 < self.c0
        )

    @staticmethod
    def of_pixels(mask: np.ndarray) -> "BBox":
        rows = np.nonzero(mask.any(axis=1))[0]
        cols = np.nonzero(mask.any(axis=0))[0]
        if rows.size == 0:
            return BBox()
        return BBox(int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))


@dataclass
class ViewScore:
    view: str
    bbox: BBox
    confidence: float


@dataclass
class Mask:
    bits: np.ndarray  # (H, W) bool
    frame_index: int = 0
    lost: bool = False

    def __post_init__(self):
        self.bits = np.asarray(self.bits, bool)
        if self.lost:
            self.bits = np.zeros_like(self.bits)

    @staticmethod
    def lost_like(shape: tuple, frame_index: int = 0) -> "Mask":
        return Mask(np.zeros(shape, bool), frame_index, lost=True)


@dataclass
class Rgbm:
    planes: np.ndarray  # (H, W, 4): rgb + binary mask plane

    def mask_plane(self) -> np.ndarray:
        return self.planes[:, :, 3]


@dataclass
class TactileVec:
    tau: np.ndarray  # (5,) non-negative per-finger force intensity

    def __post_init__(self):
        self.tau = np.asarray(self.tau, float)
        if self.tau.shape != (5,):
            raise DimensionError("tactile vector must have 5 entries")


def score_view(render: RenderOut, target_id: int, scene: SceneGraph, lone: RenderOut | None = None,
               cam: CameraModel | None = None, state: RobotState | None = None) -> ViewScore:
    """Geometric stand-in for a learned view scorer: confidence = visibility
    ratio x clutter penalty. Either pass the precomputed lone render of the
    target or the camera (to render it here)."""
    scene.object(target_id)
    target_px = render.id_map == target_id
    bbox = BBox.of_pixels(target_px)
    if bbox.empty():
        return ViewScore(view=cam.id if cam is not None else "", bbox=bbox, confidence=0.0)
    if lone is None:
        if cam is None:
            raise DimensionError("score_view needs either a lone render or a camera")
        lone = render_view(cam, scene, None, only_objects=(target_id,))
    lone_count = int((lone.id_map == target_id).sum())
    visibility = min(1.0, target_px.sum() / lone_count) if lone_count else 0.0
    neighbors = 0
    for obj_id in scene.objects:
        if obj_id == target_id:
            continue
        other = BBox.of_pixels(render.id_map == obj_id)
        if other.intersects(bbox):
            neighbors += 1
    confidence = visibility * max(0.0, 1.0 - CLUTTER_PENALTY * neighbors)
    return ViewScore(view=cam.id if cam is not None else "", bbox=bbox, confidence=confidence)


def select_primary_view(scores) -> str:
    """Argmax over the three external views, gate at confidence > 0.5, ties
    broken Left < Front < Right."""
    if len(scores) != 3:
        raise DimensionError("need exactly the three external view scores")
    order = {v: i for i, v in enumerate(EXTERNAL_VIEWS)}
    ranked = sorted(scores, key=lambda s: (-s.confidence, order[s.view]))
    best = ranked[0]
    if best.confidence <= CONFIDENCE_GATE:
        raise NoConfidentView(
            f"max confidence {best.confidence:.3f} <= {CONFIDENCE_GATE}"
        )
    return best.view


def segment_target(render: RenderOut, target_id: int, bbox: BBox) -> Mask:
    """Mask = pixels inside the bbox whose id matches the target."""
    h, w = render.id_map.shape
    bits = np.zeros((h, w), bool)
    if not bbox.empty():
        window = render.id_map[bbox.r0 : bbox.r1 + 1, bbox.c0 : bbox.c1 + 1] == target_id
        bits[bbox.r0 : bbox.r1 + 1, bbox.c0 : bbox.c1 + 1] = window
    if not bits.any():
        return Mask.lost_like((h, w), frame_index=0)
    return Mask(bits, frame_index=0)


def track_mask(
    prev: Mask,
    render: RenderOut,
    rng: np.random.Generator | None = None,
    p_noise: float = TRACK_JITTER_PROB,
) -> Mask:
    """Select the object-region connected component maximizing IoU with the
    previous mask; lose the track below the IoU threshold. With probability
    p_noise the mask is eroded one pixel to emulate tracker jitter."""
    frame = prev.frame_index + 1
    if prev.lost or not prev.bits.any():
        return Mask.lost_like(prev.bits.shape, frame)
    id_map = render.id_map
    best_iou, best_bits = 0.0, None
    prev_count = prev.bits.sum()
    for obj_id in np.unique(id_map):
        if obj_id <= 0 or obj_id == ID_ROBOT:
            continue
        labels, n = ndimage.label(id_map == obj_id)
        for comp in range(1, n + 1):
            bits = labels == comp
            inter = np.logical_and(bits, prev.bits).sum()
            if inter == 0:
                continue
            union = bits.sum() + prev_count - inter
            iou = inter / union
            if iou > best_iou:
                best_iou, best_bits = iou, bits
    if best_bits is None or best_iou < IOU_LOST_THRESHOLD:
        return Mask.lost_like(prev.bits.shape, frame)
    if rng is not None and p_noise > 0.0 and rng.random() < p_noise:
        eroded = ndimage.binary_erosion(best_bits)
        if eroded.any():
            best_bits = eroded
    return Mask(best_bits, frame)


def assemble_rgbm(rgb: np.ndarray, mask: Mask) -> Rgbm:
    rgb = np.asarray(rgb, float)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[:2] != mask.bits.shape:
        raise DimensionError(f"rgb {rgb.shape} does not align with mask {mask.bits.shape}")
    planes = np.concatenate([rgb, mask.bits[..., None].astype(float)], axis=2)
    return Rgbm(planes)


def reduce_tactile(raw: TactileRaw) -> TactileVec:
    """Per finger: mean over the 4 taxels of the L2 norm of the 3 force axes.

    Summation order is pinned left-to-right so the value is bit-reproducible
    against a per-element reference.
    """
    values = raw.values
    if not np.all(np.isfinite(values)):
        raise NumericError("non-finite tactile input")
    n = np.sqrt(values[:, :, 0] ** 2 + values[:, :, 1] ** 2 + values[:, :, 2] ** 2)
    tau = (((n[:, 0] + n[:, 1]) + n[:, 2]) + n[:, 3]) / 4.0
    return TactileVec(tau)
