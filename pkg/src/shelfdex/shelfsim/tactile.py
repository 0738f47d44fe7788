"""Synthetic fingertip tactile array: 5 fingers x 4 taxels x 3 force axes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from shelfdex.errors import DimensionError
from shelfdex.shelfsim.geometry import (
    box_normal_local,
    cylinder_normal,
    sdf_box_local,
    sdf_cylinder,
    sdf_sphere,
)
from shelfdex.shelfsim.robot import FINGERTIP_RADIUS, RobotState, forward_kinematics
from shelfdex.shelfsim.scene import STIFFNESS, SceneGraph, SimObject

DEFAULT_NOISE_FLOOR = 0.00071  # force-unit std of the sensing electronics stand-in

# taxel pattern on the pad: 2x2 grid in (tangent, lateral) pad coordinates
_TAXEL_GRID = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], float) * 0.004


@dataclass
class TactileRaw:
    values: np.ndarray  # (5, 4, 3) signed force components, world frame
    noise_floor: float = DEFAULT_NOISE_FLOOR

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape != (5, 4, 3):
            raise DimensionError("tactile array must be 5x4x3")

    @staticmethod
    def zeros(noise_floor: float = DEFAULT_NOISE_FLOOR) -> "TactileRaw":
        return TactileRaw(np.zeros((5, 4, 3)), noise_floor)

    def per_finger_force(self) -> np.ndarray:
        """(5, 3) net force vector per finger."""
        return self.values.sum(axis=1)


@dataclass
class FingertipContact:
    finger: int
    obj_id: int
    penetration: float
    normal: np.ndarray  # outward from object surface toward the fingertip
    point: np.ndarray


def fingertip_contacts(state: RobotState, scene: SceneGraph, exclude_ids: tuple = ()) -> list[FingertipContact]:
    """Penetration of each fingertip sphere into each scene object."""
    fk = forward_kinematics(state, check_limits=False)
    tips = fk.fingertips  # (5,3)
    contacts: list[FingertipContact] = []
    for obj in scene.objects.values():
        if obj.id in exclude_ids:
            continue
        sd, normal = _object_sdf(obj, tips)
        for f in range(5):
            pen = FINGERTIP_RADIUS - sd[f]
            if pen > 0.0:
                contacts.append(
                    FingertipContact(
                        finger=f,
                        obj_id=obj.id,
                        penetration=float(pen),
                        normal=normal[f],
                        point=tips[f] - normal[f] * sd[f],
                    )
                )
    return contacts


def _object_sdf(obj: SimObject, pts: np.ndarray):
    """Signed distance and outward normal of points against one object."""
    if obj.category in ("RigidCuboid", "Deformable"):
        from shelfdex.shelfsim.geometry import rot_z

        rot = rot_z(-obj.yaw)
        local = (pts - obj.pos) @ rot.T
        sd = sdf_box_local(local, obj.dims / 2.0)
        n_local = box_normal_local(local, obj.dims / 2.0)
        normal = n_local @ rot
    elif obj.category == "RigidCylinder":
        rel = pts - obj.pos
        sd = sdf_cylinder(rel, obj.dims[0], obj.dims[2] / 2.0)
        normal = cylinder_normal(rel, obj.dims[0], obj.dims[2] / 2.0)
    else:
        rel = pts - obj.pos
        sd = sdf_sphere(rel, obj.dims[0])
        normal = rel / np.maximum(np.linalg.norm(rel, axis=-1, keepdims=True), 1e-12)
    return sd, normal


def simulate_tactile(
    state: RobotState,
    scene: SceneGraph,
    grip_effort: np.ndarray | None = None,
    noise_floor: float = DEFAULT_NOISE_FLOOR,
    rng: np.random.Generator | None = None,
    exclude_ids: tuple = (),
) -> TactileRaw:
    """Contact forces on the taxel grid.

    Per contacting fingertip the force magnitude is stiffness(category) x
    penetration, directed along the contact normal and split over the four
    taxels by tangential proximity to the contact point. grip_effort (15
    joint engagement scalars) scales each finger's force by the mean of its
    three entries; defaults to full engagement.
    """
    fk = forward_kinematics(state, check_limits=False)
    values = np.zeros((5, 4, 3))
    effort = np.ones(5)
    if grip_effort is not None:
        grip_effort = np.asarray(grip_effort, float)
        if grip_effort.shape != (15,):
            raise DimensionError("grip_effort must have 15 entries")
        effort = grip_effort.reshape(5, 3).mean(axis=1)

    last_dir = fk.finger_points[:, 3, :] - fk.finger_points[:, 2, :]
    last_dir /= np.maximum(np.linalg.norm(last_dir, axis=-1, keepdims=True), 1e-12)

    for c in fingertip_contacts(state, scene, exclude_ids=exclude_ids):
        f = c.finger
        tip = fk.fingertips[f]
        # pad plane basis orthogonal to the contact normal
        t1 = last_dir[f] - np.dot(last_dir[f], c.normal) * c.normal
        n1 = np.linalg.norm(t1)
        if n1 < 1e-9:
            ref = np.array([1.0, 0.0, 0.0])
            if abs(np.dot(ref, c.normal)) > 0.9:
                ref = np.array([0.0, 1.0, 0.0])
            t1 = ref - np.dot(ref, c.normal) * c.normal
            n1 = np.linalg.norm(t1)
        t1 /= n1
        t2 = np.cross(c.normal, t1)
        taxel_pts = tip[None, :] + _TAXEL_GRID[:, 0:1] * t1[None, :] + _TAXEL_GRID[:, 1:2] * t2[None, :]
        # proximity weights from tangential distance to the contact point
        rel = taxel_pts - c.point[None, :]
        tang = rel - (rel @ c.normal)[:, None] * c.normal[None, :]
        d = np.linalg.norm(tang, axis=-1)
        w = 1.0 / (d + 1e-3)
        w /= w.sum()
        cat = scene.objects[c.obj_id].category
        force = STIFFNESS[cat] * c.penetration * effort[f]
        # reaction on the fingertip points along the outward surface normal
        values[f] += w[:, None] * force * c.normal[None, :]

    if noise_floor > 0.0 and rng is not None:
        values = values + rng.standard_normal((5, 4, 3)) * noise_floor
    return TactileRaw(values, noise_floor)
