"""Sphere-swept link vs. solid queries for the whole robot against shelf
geometry and scene objects."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shelfdex.shelfsim.geometry import (
    BodySet,
    segment_box_clearance,
    segment_cylinder_clearance,
    segment_sphere_clearance,
    sdf_box_local,
    sdf_cylinder,
    sdf_sphere,
)
from shelfdex.shelfsim.robot import (
    FINGER_NAMES,
    FkResult,
    RobotState,
    forward_kinematics,
)
from shelfdex.shelfsim.scene import SceneGraph


@dataclass(frozen=True)
class Contact:
    body: str       # robot link name
    surface: str    # shelf wall / ceiling label or "Object"
    obj_id: int     # scene object id, 0 for shelf
    penetration: float


def link_segments(fk: FkResult):
    """All 22 robot capsules: names, endpoints, radii."""
    a0, a1, ar = fk.arm_segments()
    f0, f1, fr = fk.finger_segments()
    names = [f"arm{i}" for i in range(7)]
    names += [f"{FINGER_NAMES[f]}{k}" for f in range(5) for k in range(3)]
    p0 = np.vstack([a0, f0])
    p1 = np.vstack([a1, f1])
    radii = np.concatenate([ar, fr])
    return names, p0, p1, radii


def _sd_at_points(bodies: BodySet, pts_box, pts_cyl, pts_sph):
    """Signed distance of per-pair closest points, per family."""
    out = {}
    if bodies.box_id:
        local = np.einsum("bij,lbj->lbi", bodies.box_rot, pts_box - bodies.box_center[None])
        out["box"] = sdf_box_local(local, bodies.box_half[None])
    if bodies.cyl_id:
        rel = pts_cyl - bodies.cyl_center[None]
        out["cyl"] = sdf_cylinder(rel, bodies.cyl_rh[None, :, 0], bodies.cyl_rh[None, :, 1])
    if bodies.sph_id:
        rel = pts_sph - bodies.sph_center[None]
        out["sph"] = sdf_sphere(rel, bodies.sph_r[None])
    return out


def contacts_against(names, p0, p1, radii, bodies: BodySet) -> list[Contact]:
    contacts: list[Contact] = []
    if not (bodies.box_id or bodies.cyl_id or bodies.sph_id):
        return contacts
    db, tb = segment_box_clearance(p0, p1, bodies)
    dc, tc = segment_cylinder_clearance(p0, p1, bodies)
    ds, ts = segment_sphere_clearance(p0, p1, bodies)
    seg = p1 - p0

    def closest(t):
        return p0[:, None, :] + seg[:, None, :] * t[..., None]

    sd = _sd_at_points(bodies, closest(tb), closest(tc), closest(ts))
    for family, dist, ids, labels in (
        ("box", db, bodies.box_id, bodies.box_label),
        ("cyl", dc, bodies.cyl_id, bodies.cyl_label),
        ("sph", ds, bodies.sph_id, bodies.sph_label),
    ):
        if dist.shape[1] == 0:
            continue
        hit_links, hit_bodies = np.nonzero(dist < radii[:, None])
        for li, bi in zip(hit_links, hit_bodies):
            pen = float(radii[li] - sd[family][li, bi])
            contacts.append(
                Contact(body=names[li], surface=labels[bi], obj_id=ids[bi], penetration=pen)
            )
    return contacts


def check_collision(
    state: RobotState,
    scene: SceneGraph,
    exclude_ids: tuple = (),
    fk: FkResult | None = None,
) -> list[Contact]:
    """Every robot link against shelf walls, tier slabs, and all objects
    (minus ``exclude_ids``). Empty list means collision-free. Total function:
    out-of-limit states are still checked."""
    if fk is None:
        fk = forward_kinematics(state, check_limits=False)
    names, p0, p1, radii = link_segments(fk)
    contacts = contacts_against(names, p0, p1, radii, scene.shelf_bodies())
    obj_bodies = scene.object_bodies(exclude=exclude_ids)
    contacts += contacts_against(names, p0, p1, radii, obj_bodies)
    return contacts
