"""Kinematic tiered-shelf world: scenes, robot kinematics, collision queries,
primitive ray-cast rendering, synthetic tactile, and grasp outcomes."""

from shelfdex.shelfsim.collision import Contact, check_collision
from shelfdex.shelfsim.grasp import (
    CRUSH_FAIL,
    NO_CONTACT,
    SLIP_FAIL,
    SUCCESS,
    grasp_outcome,
)
from shelfdex.shelfsim.render import (
    EXTERNAL_VIEWS,
    FRONT,
    LEFT,
    RIGHT,
    WRIST,
    CameraModel,
    RenderOut,
    external_cameras,
    occlusion_ratio,
    render_view,
    wrist_camera,
)
from shelfdex.shelfsim.robot import (
    FINGER_NAMES,
    HOME_PALM_POS,
    FkResult,
    RobotState,
    forward_kinematics,
)
from shelfdex.shelfsim.scene import (
    CATEGORIES,
    PALETTE,
    SceneGraph,
    ShelfSpec,
    SimObject,
    build_scene,
    scene_from_text,
    scene_to_text,
)
from shelfdex.shelfsim.tactile import TactileRaw, simulate_tactile
from shelfdex.shelfsim.world import MAX_STEP_RAD, Event, World, step

__all__ = [
    "ShelfSpec",
    "SimObject",
    "SceneGraph",
    "build_scene",
    "scene_to_text",
    "scene_from_text",
    "CATEGORIES",
    "PALETTE",
    "RobotState",
    "FkResult",
    "forward_kinematics",
    "HOME_PALM_POS",
    "FINGER_NAMES",
    "check_collision",
    "Contact",
    "CameraModel",
    "RenderOut",
    "render_view",
    "occlusion_ratio",
    "external_cameras",
    "wrist_camera",
    "EXTERNAL_VIEWS",
    "LEFT",
    "FRONT",
    "RIGHT",
    "WRIST",
    "TactileRaw",
    "simulate_tactile",
    "grasp_outcome",
    "SUCCESS",
    "SLIP_FAIL",
    "CRUSH_FAIL",
    "NO_CONTACT",
    "World",
    "Event",
    "step",
    "MAX_STEP_RAD",
]
