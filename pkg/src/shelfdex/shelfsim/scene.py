"""Tiered-shelf scene graph: shelf geometry, placed primitive objects, and a
lossless structured-text scene file."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from shelfdex.errors import PlacementError, UnknownObjectError
from shelfdex.shelfsim.geometry import BodySet, rot_z

CATEGORIES = ("RigidCuboid", "RigidCylinder", "Deformable", "NearSpherical")

# grasp force model constants (calibrated so the scripted expert clears the
# acceptance bar; see grasp.py)
STIFFNESS = {
    "RigidCuboid": 120.0,
    "RigidCylinder": 120.0,
    "NearSpherical": 100.0,
    "Deformable": 35.0,
}

PALETTE = {
    "red": (0.85, 0.15, 0.15),
    "green": (0.10, 0.70, 0.20),
    "blue": (0.15, 0.30, 0.85),
    "yellow": (0.90, 0.80, 0.10),
    "orange": (0.90, 0.50, 0.10),
    "purple": (0.60, 0.20, 0.70),
    "cyan": (0.10, 0.75, 0.75),
    "white": (0.92, 0.92, 0.92),
}

SHELF_COLOR = (0.42, 0.36, 0.30)
ROBOT_COLOR = (0.80, 0.80, 0.85)

# reserved id_map codes
ID_BACKGROUND = 0
ID_ROBOT = -1
ID_SHELF = -2


@dataclass(frozen=True)
class ShelfSpec:
    tier_count: int = 3
    bottom_height: float = 0.30
    tier_spacing: float = 0.25
    depth: float = 0.40
    width: float = 0.80
    wall_thickness: float = 0.02

    def __post_init__(self):
        if self.tier_count < 1:
            raise PlacementError("tier_count must be >= 1")
        for name in ("bottom_height", "tier_spacing", "depth", "width", "wall_thickness"):
            if getattr(self, name) <= 0:
                raise PlacementError(f"{name} must be > 0")

    def tier_floor_z(self, tier: int) -> float:
        """Top surface of tier ``tier``'s floor slab."""
        return self.bottom_height + tier * self.tier_spacing

    def tier_ceiling_z(self, tier: int) -> float:
        """Bottom surface of the slab above tier ``tier``."""
        return self.tier_floor_z(tier + 1) - self.wall_thickness


@dataclass
class SimObject:
    id: int
    category: str
    pos: np.ndarray  # center, world frame
    yaw: float
    dims: np.ndarray  # cuboid/deformable: full extents; cylinder: (r, r, h); sphere: (r, r, r)
    tier: int
    color: tuple = PALETTE["red"]
    color_name: str = "red"
    deform_limit: float = 0.0

    def __post_init__(self):
        self.pos = np.asarray(self.pos, float)
        self.dims = np.asarray(self.dims, float)
        if self.category not in CATEGORIES:
            raise PlacementError(f"unknown category {self.category!r}")

    def half_extents(self) -> np.ndarray:
        """AABB half extents (yaw widened for rotated cuboids)."""
        if self.category in ("RigidCuboid", "Deformable"):
            h = self.dims / 2.0
            c, s = abs(np.cos(self.yaw)), abs(np.sin(self.yaw))
            return np.array([h[0] * c + h[1] * s, h[0] * s + h[1] * c, h[2]])
        if self.category == "RigidCylinder":
            r, h = self.dims[0], self.dims[2]
            return np.array([r, r, h / 2.0])
        r = self.dims[0]
        return np.array([r, r, r])

    def radius_xy(self) -> float:
        h = self.half_extents()
        return float(np.hypot(h[0], h[1]))

    def top_z(self) -> float:
        return float(self.pos[2] + self.half_extents()[2])

    def bottom_z(self) -> float:
        return float(self.pos[2] - self.half_extents()[2])


@dataclass
class SceneGraph:
    spec: ShelfSpec
    objects: dict[int, SimObject]
    seed: int = 0
    _shelf_bodies: BodySet | None = field(default=None, repr=False, compare=False)

    def object(self, obj_id: int) -> SimObject:
        if obj_id not in self.objects:
            raise UnknownObjectError(f"object id {obj_id} not in scene")
        return self.objects[obj_id]

    def shelf_bodies(self) -> BodySet:
        if self._shelf_bodies is None:
            self._shelf_bodies = shelf_bodyset(self.spec)
        return self._shelf_bodies

    def object_bodies(self, exclude: tuple = (), only: tuple | None = None) -> BodySet:
        bodies = BodySet()
        for obj in self.objects.values():
            if obj.id in exclude:
                continue
            if only is not None and obj.id not in only:
                continue
            add_object_body(bodies, obj)
        return bodies

    def in_shelf(self, obj: SimObject) -> bool:
        """True while the object still sits inside the shelf footprint."""
        s = self.spec
        return (
            abs(obj.pos[0]) <= s.width / 2.0
            and 0.0 <= obj.pos[1] <= s.depth
            and obj.pos[2] >= s.bottom_height - 0.02
        )

    def copy(self) -> "SceneGraph":
        objs = {k: replace(v, pos=v.pos.copy(), dims=v.dims.copy()) for k, v in self.objects.items()}
        return SceneGraph(spec=self.spec, objects=objs, seed=self.seed)


def add_object_body(bodies: BodySet, obj: SimObject) -> None:
    if obj.category in ("RigidCuboid", "Deformable"):
        bodies.add_box(obj.pos, obj.dims / 2.0, obj.yaw, obj.id, "Object", obj.color)
    elif obj.category == "RigidCylinder":
        bodies.add_cylinder(obj.pos, obj.dims[0], obj.dims[2] / 2.0, obj.id, "Object", obj.color)
    else:
        bodies.add_sphere(obj.pos, obj.dims[0], obj.id, "Object", obj.color)


def shelf_bodyset(spec: ShelfSpec) -> BodySet:
    """Side walls, back wall, tier floor slabs, and the top slab."""
    bodies = BodySet()
    w2 = spec.width / 2.0
    t = spec.wall_thickness
    top_z = spec.tier_floor_z(spec.tier_count)
    height = top_z
    mid_z = height / 2.0 + t / 2.0

    def wall(center, half, label):
        bodies.add_box(center, half, 0.0, ID_SHELF, label, SHELF_COLOR)

    wall((-(w2 + t / 2), spec.depth / 2, mid_z), (t / 2, spec.depth / 2, height / 2 + t / 2), "ShelfWallLeft")
    wall((w2 + t / 2, spec.depth / 2, mid_z), (t / 2, spec.depth / 2, height / 2 + t / 2), "ShelfWallRight")
    wall((0.0, spec.depth + t / 2, mid_z), (w2 + t, t / 2, height / 2 + t / 2), "ShelfWallBack")
    # slab at tier k's floor height doubles as the ceiling of tier k-1
    for k in range(spec.tier_count):
        z = spec.tier_floor_z(k)
        label = "ShelfFloor0" if k == 0 else f"ShelfCeiling{k - 1}"
        wall((0.0, spec.depth / 2, z - t / 2), (w2, spec.depth / 2, t / 2), label)
    wall(
        (0.0, spec.depth / 2, top_z - t / 2),
        (w2, spec.depth / 2, t / 2),
        f"ShelfCeiling{spec.tier_count - 1}",
    )
    return bodies


def build_scene(spec: ShelfSpec, placements: list[SimObject], seed: int = 0) -> SceneGraph:
    """Validate placements (pairwise separation >= 1 mm, inside tier volume,
    resting on the tier floor) and return the scene."""
    objs: dict[int, SimObject] = {}
    for obj in placements:
        if obj.id in objs:
            raise PlacementError(f"duplicate object id {obj.id}")
        _check_in_tier(spec, obj)
        objs[obj.id] = obj
    items = list(objs.values())
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if _aabb_gap(items[i], items[j]) < 1e-3:
                raise PlacementError(
                    f"objects {items[i].id} and {items[j].id} closer than 1 mm"
                )
    return SceneGraph(spec=spec, objects=objs, seed=seed)


def _aabb_gap(a: SimObject, b: SimObject) -> float:
    ha, hb = a.half_extents(), b.half_extents()
    gaps = np.abs(a.pos - b.pos) - (ha + hb)
    return float(gaps.max())


def _check_in_tier(spec: ShelfSpec, obj: SimObject) -> None:
    if not (0 <= obj.tier < spec.tier_count):
        raise PlacementError(f"object {obj.id}: tier {obj.tier} out of range")
    h = obj.half_extents()
    floor = spec.tier_floor_z(obj.tier)
    ceil = spec.tier_ceiling_z(obj.tier)
    if abs((obj.pos[2] - h[2]) - floor) > 2e-3:
        raise PlacementError(
            f"object {obj.id}: not resting on tier {obj.tier} floor "
            f"(base z {obj.pos[2] - h[2]:.4f}, floor {floor:.4f})"
        )
    if obj.pos[2] + h[2] > ceil:
        raise PlacementError(f"object {obj.id}: taller than tier {obj.tier}")
    if abs(obj.pos[0]) + h[0] > spec.width / 2.0:
        raise PlacementError(f"object {obj.id}: outside shelf width")
    if obj.pos[1] - h[1] < 0.0 or obj.pos[1] + h[1] > spec.depth:
        raise PlacementError(f"object {obj.id}: outside shelf depth")


# -----------------------------------------------------------------------------
# Scene file: flat dotted keys, lossless round-trip
# -----------------------------------------------------------------------------


def scene_to_text(scene: SceneGraph) -> str:
    lines = [
        f"shelf.tier_count = {scene.spec.tier_count}",
        f"shelf.bottom_height = {scene.spec.bottom_height!r}",
        f"shelf.tier_spacing = {scene.spec.tier_spacing!r}",
        f"shelf.depth = {scene.spec.depth!r}",
        f"shelf.width = {scene.spec.width!r}",
        f"shelf.wall_thickness = {scene.spec.wall_thickness!r}",
        f"scene.seed = {scene.seed}",
    ]
    for i, obj in enumerate(sorted(scene.objects.values(), key=lambda o: o.id)):
        p = f"object[{i}]"
        pose = [float(obj.pos[0]), float(obj.pos[1]), float(obj.pos[2]), float(obj.yaw)]
        dims = [float(d) for d in obj.dims]
        lines.append(f"{p}.id = {obj.id}")
        lines.append(f"{p}.category = {obj.category}")
        lines.append(f"{p}.pose = " + ", ".join(repr(x) for x in pose))
        lines.append(f"{p}.dims = " + ", ".join(repr(x) for x in dims))
        lines.append(f"{p}.tier = {obj.tier}")
        lines.append(f"{p}.color = {obj.color_name}")
        lines.append(f"{p}.deform_limit = {float(obj.deform_limit)!r}")
    return "\n".join(lines) + "\n"


def scene_from_text(text: str) -> SceneGraph:
    kv: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    spec = ShelfSpec(
        tier_count=int(kv["shelf.tier_count"]),
        bottom_height=float(kv["shelf.bottom_height"]),
        tier_spacing=float(kv["shelf.tier_spacing"]),
        depth=float(kv["shelf.depth"]),
        width=float(kv["shelf.width"]),
        wall_thickness=float(kv["shelf.wall_thickness"]),
    )
    objects = []
    i = 0
    while f"object[{i}].id" in kv:
        p = f"object[{i}]"
        pose = [float(x) for x in kv[f"{p}.pose"].split(",")]
        dims = [float(x) for x in kv[f"{p}.dims"].split(",")]
        color_name = kv[f"{p}.color"]
        objects.append(
            SimObject(
                id=int(kv[f"{p}.id"]),
                category=kv[f"{p}.category"],
                pos=np.array(pose[:3]),
                yaw=pose[3],
                dims=np.array(dims),
                tier=int(kv[f"{p}.tier"]),
                color=PALETTE[color_name],
                color_name=color_name,
                deform_limit=float(kv[f"{p}.deform_limit"]),
            )
        )
        i += 1
    return build_scene(spec, objects, seed=int(kv.get("scene.seed", "0")))
