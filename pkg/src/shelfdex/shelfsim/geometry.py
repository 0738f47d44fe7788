"""Rigid-transform helpers, signed distances, segment clearance queries, and
ray intersections for the three primitive families (box, capped cylinder,
sphere) plus robot-link capsules.

Solids are convex, so point-to-solid distance along a segment is convex in
the segment parameter; clearance queries run a vectorized ternary search.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-12


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


AXIS_ROT = {"x": rot_x, "y": rot_y, "z": rot_z}


# -----------------------------------------------------------------------------
# Body arrays: scenes are flattened into per-family stacked arrays so distance
# and ray queries vectorize over (query, body) pairs.
# -----------------------------------------------------------------------------


class BodySet:
    """Stacked primitive solids with per-body ids and surface labels."""

    def __init__(self):
        self.box_center = np.zeros((0, 3))
        self.box_half = np.zeros((0, 3))
        self.box_rot = np.zeros((0, 3, 3))  # world -> box frame
        self.box_id: list[int] = []
        self.box_label: list[str] = []
        self.box_color = np.zeros((0, 3))

        self.cyl_center = np.zeros((0, 3))
        self.cyl_rh = np.zeros((0, 2))  # radius, half-height
        self.cyl_id: list[int] = []
        self.cyl_label: list[str] = []
        self.cyl_color = np.zeros((0, 3))

        self.sph_center = np.zeros((0, 3))
        self.sph_r = np.zeros((0,))
        self.sph_id: list[int] = []
        self.sph_label: list[str] = []
        self.sph_color = np.zeros((0, 3))

    def add_box(self, center, half, yaw, body_id, label, color=(0.5, 0.5, 0.5)):
        self.box_center = np.vstack([self.box_center, np.asarray(center, float)])
        self.box_half = np.vstack([self.box_half, np.asarray(half, float)])
        self.box_rot = np.concatenate([self.box_rot, rot_z(-yaw)[None]], axis=0)
        self.box_id.append(body_id)
        self.box_label.append(label)
        self.box_color = np.vstack([self.box_color, np.asarray(color, float)])

    def add_cylinder(self, center, radius, half_h, body_id, label, color=(0.5, 0.5, 0.5)):
        self.cyl_center = np.vstack([self.cyl_center, np.asarray(center, float)])
        self.cyl_rh = np.vstack([self.cyl_rh, [radius, half_h]])
        self.cyl_id.append(body_id)
        self.cyl_label.append(label)
        self.cyl_color = np.vstack([self.cyl_color, np.asarray(color, float)])

    def add_sphere(self, center, radius, body_id, label, color=(0.5, 0.5, 0.5)):
        self.sph_center = np.vstack([self.sph_center, np.asarray(center, float)])
        self.sph_r = np.append(self.sph_r, radius)
        self.sph_id.append(body_id)
        self.sph_label.append(label)
        self.sph_color = np.vstack([self.sph_color, np.asarray(color, float)])


# -----------------------------------------------------------------------------
# Point signed distances (negative inside) and outward normals
# -----------------------------------------------------------------------------


def sdf_box_local(p: np.ndarray, half: np.ndarray) -> np.ndarray:
    """p (..., 3) in the box frame; half (..., 3)."""
    q = np.abs(p) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(np.max(q, axis=-1), 0.0)
    return outside + inside


def box_normal_local(p: np.ndarray, half: np.ndarray) -> np.ndarray:
    q = np.abs(p) - half
    out = np.maximum(q, 0.0)
    n = out * np.sign(p)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    # inside: push along the axis of least separation
    face = np.argmax(q, axis=-1)
    fallback = np.zeros_like(p)
    np.put_along_axis(fallback, face[..., None], 1.0, axis=-1)
    fallback = fallback * np.sign(np.take_along_axis(p, face[..., None], axis=-1))
    use_out = norm[..., 0] > EPS
    return np.where(use_out[..., None], n / np.maximum(norm, EPS), fallback)


def sdf_cylinder(p_rel: np.ndarray, radius, half_h) -> np.ndarray:
    dr = np.linalg.norm(p_rel[..., :2], axis=-1) - radius
    dz = np.abs(p_rel[..., 2]) - half_h
    outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
    inside = np.minimum(np.maximum(dr, dz), 0.0)
    return outside + inside


def cylinder_normal(p_rel: np.ndarray, radius, half_h) -> np.ndarray:
    dr = np.linalg.norm(p_rel[..., :2], axis=-1) - radius
    dz = np.abs(p_rel[..., 2]) - half_h
    radial = np.zeros_like(p_rel)
    rxy = np.linalg.norm(p_rel[..., :2], axis=-1, keepdims=True)
    radial[..., :2] = p_rel[..., :2] / np.maximum(rxy, EPS)
    axial = np.zeros_like(p_rel)
    axial[..., 2] = np.sign(p_rel[..., 2])
    return np.where((dr > dz)[..., None], radial, axial)


def sdf_sphere(p_rel: np.ndarray, radius) -> np.ndarray:
    return np.linalg.norm(p_rel, axis=-1) - radius


# -----------------------------------------------------------------------------
# Segment clearance: min over t in [0,1] of distance(seg(t), solid)
# -----------------------------------------------------------------------------


def _ternary_min(dist_at, n_iter: int = 48):
    """Vectorized ternary search of a convex scalar function on [0, 1]."""
    lo = np.zeros(dist_at(0.0).shape)
    hi = np.ones_like(lo)
    for _ in range(n_iter):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = dist_at(m1)
        f2 = dist_at(m2)
        take_lo = f1 <= f2
        hi = np.where(take_lo, m2, hi)
        lo = np.where(take_lo, lo, m1)
    t = 0.5 * (lo + hi)
    return t, dist_at(t)


def _segment_family_min(a: np.ndarray, b: np.ndarray, outside_dist, params, cutoff: float = 0.08):
    """Exact min distance for (segment, body) pairs that might come within
    ``cutoff``; a conservative lower bound for the rest (distance fields are
    1-Lipschitz, so min over the segment is >= min(endpoints) - len/2).

    a, b: (L, nb, 3) endpoints per pair; params: tuple of (L, nb, ...) arrays
    consumed by outside_dist(p, *params).
    """
    d0 = outside_dist(a, *params)
    d1 = outside_dist(b, *params)
    seg_len = np.linalg.norm(b - a, axis=-1)
    bound = np.minimum(d0, d1) - seg_len / 2.0
    need = bound < cutoff
    dist = np.maximum(bound, 0.0)
    t_out = np.zeros_like(dist)
    if np.any(need):
        idx = np.nonzero(need)
        a_sub, b_sub = a[idx], b[idx]
        p_sub = tuple(np.broadcast_to(p, need.shape + p.shape[2:])[idx] for p in params)

        def dist_at(t):
            t = np.broadcast_to(np.asarray(t, float), a_sub.shape[:-1])
            p = a_sub + (b_sub - a_sub) * t[..., None]
            return outside_dist(p, *p_sub)

        t_sub, d_sub = _ternary_min(dist_at)
        dist[idx] = d_sub
        t_out[idx] = t_sub
    return dist, t_out


def segment_box_clearance(p0: np.ndarray, p1: np.ndarray, bodies: BodySet):
    nb = len(bodies.box_id)
    L = p0.shape[0]
    if nb == 0:
        return np.full((L, 0), np.inf), np.zeros((L, 0))
    a = np.einsum("bij,lbj->lbi", bodies.box_rot, p0[:, None, :] - bodies.box_center[None, :, :])
    b = np.einsum("bij,lbj->lbi", bodies.box_rot, p1[:, None, :] - bodies.box_center[None, :, :])
    half = np.broadcast_to(bodies.box_half[None, :, :], a.shape)

    def outside(p, h):
        return np.linalg.norm(np.maximum(np.abs(p) - h, 0.0), axis=-1)

    return _segment_family_min(a, b, outside, (half,))


def segment_cylinder_clearance(p0: np.ndarray, p1: np.ndarray, bodies: BodySet):
    nc = len(bodies.cyl_id)
    L = p0.shape[0]
    if nc == 0:
        return np.full((L, 0), np.inf), np.zeros((L, 0))
    a = p0[:, None, :] - bodies.cyl_center[None, :, :]
    b = p1[:, None, :] - bodies.cyl_center[None, :, :]
    radius = np.broadcast_to(bodies.cyl_rh[None, :, 0], a.shape[:2])
    half_h = np.broadcast_to(bodies.cyl_rh[None, :, 1], a.shape[:2])

    def outside(p, r, hh):
        dr = np.maximum(np.linalg.norm(p[..., :2], axis=-1) - r, 0.0)
        dz = np.maximum(np.abs(p[..., 2]) - hh, 0.0)
        return np.hypot(dr, dz)

    return _segment_family_min(a, b, outside, (radius, half_h))


def segment_sphere_clearance(p0: np.ndarray, p1: np.ndarray, bodies: BodySet):
    ns = len(bodies.sph_id)
    L = p0.shape[0]
    if ns == 0:
        return np.full((L, 0), np.inf), np.zeros((L, 0))
    # closed form: point-segment distance minus radius, floored at 0
    a = p0[:, None, :]
    d = p1[:, None, :] - a
    rel = bodies.sph_center[None, :, :] - a
    denom = np.maximum((d * d).sum(-1), EPS)
    t = np.clip((rel * d).sum(-1) / denom, 0.0, 1.0)
    closest = a + d * t[..., None]
    dist = np.linalg.norm(closest - bodies.sph_center[None, :, :], axis=-1) - bodies.sph_r[None, :]
    return np.maximum(dist, 0.0), t


def signed_distance_point(bodies: BodySet, p: np.ndarray):
    """Signed distances of points p (..., 3) to every body, grouped by family."""
    out = {}
    if bodies.box_id:
        local = np.einsum(
            "bij,...bj->...bi", bodies.box_rot, p[..., None, :] - bodies.box_center
        )
        out["box"] = sdf_box_local(local, bodies.box_half)
    if bodies.cyl_id:
        rel = p[..., None, :] - bodies.cyl_center
        out["cyl"] = sdf_cylinder(rel, bodies.cyl_rh[:, 0], bodies.cyl_rh[:, 1])
    if bodies.sph_id:
        rel = p[..., None, :] - bodies.sph_center
        out["sph"] = sdf_sphere(rel, bodies.sph_r)
    return out


# -----------------------------------------------------------------------------
# Ray casting
# -----------------------------------------------------------------------------

T_MIN = 1e-6


def rays_vs_boxes(origin: np.ndarray, dirs: np.ndarray, bodies: BodySet):
    """Slab test. origin (3,), dirs (N, 3) unit. Returns t (N, nb), normal (N, nb, 3)."""
    nb = len(bodies.box_id)
    n = dirs.shape[0]
    if nb == 0:
        return np.full((n, 0), np.inf), np.zeros((n, 0, 3))
    o = np.einsum("bij,bj->bi", bodies.box_rot, origin[None, :] - bodies.box_center)  # (nb,3)
    d = np.einsum("bij,nj->nbi", bodies.box_rot, dirs)  # (n,nb,3)
    half = bodies.box_half[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-half - o[None]) * inv
        t2 = (half - o[None]) * inv
    lo = np.where(np.isnan(t1), -np.inf, np.minimum(t1, t2))
    hi = np.where(np.isnan(t2), np.inf, np.maximum(t1, t2))
    # parallel rays outside the slab never hit
    par_miss = (np.abs(d) < EPS) & (np.abs(o[None]) > half)
    lo = np.where(par_miss, np.inf, lo)
    tmin = lo.max(axis=-1)
    tmax = np.where(par_miss, -np.inf, hi).min(axis=-1)
    hit = (tmax >= np.maximum(tmin, T_MIN)) & (tmax > T_MIN)
    t = np.where(hit, np.where(tmin > T_MIN, tmin, tmax), np.inf)
    # entry-face normal in box frame
    p_local = o[None] + d * t[..., None]
    q = np.abs(p_local) / np.maximum(half, EPS)
    face = np.argmax(q, axis=-1)
    n_local = np.zeros_like(p_local)
    np.put_along_axis(n_local, face[..., None], 1.0, axis=-1)
    n_local = n_local * np.sign(np.take_along_axis(p_local, face[..., None], axis=-1))
    normal = np.einsum("bji,nbj->nbi", bodies.box_rot, n_local)  # rot^T back to world
    return t, normal


def rays_vs_cylinders(origin: np.ndarray, dirs: np.ndarray, bodies: BodySet):
    nc = len(bodies.cyl_id)
    n = dirs.shape[0]
    if nc == 0:
        return np.full((n, 0), np.inf), np.zeros((n, 0, 3))
    o = origin[None, :] - bodies.cyl_center  # (nc,3)
    radius = bodies.cyl_rh[:, 0][None]
    half_h = bodies.cyl_rh[:, 1][None]
    ox, oy, oz = o[:, 0][None], o[:, 1][None], o[:, 2][None]
    dx, dy, dz = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - radius * radius
    disc = b * b - 4 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_side1 = (-b - sq) / (2 * a)
        t_side2 = (-b + sq) / (2 * a)

    def side_ok(t):
        z = oz + dz * t
        return (disc >= 0) & (t > T_MIN) & (np.abs(z) <= half_h) & (a > EPS)

    ts = np.where(side_ok(t_side1), t_side1, np.where(side_ok(t_side2), t_side2, np.inf))
    # caps
    with np.errstate(divide="ignore", invalid="ignore"):
        t_top = (half_h - oz) / dz
        t_bot = (-half_h - oz) / dz

    def cap_ok(t):
        x = ox + dx * t
        y = oy + dy * t
        return (t > T_MIN) & (np.abs(dz) > EPS) & (x * x + y * y <= radius * radius)

    t_top = np.where(cap_ok(t_top), t_top, np.inf)
    t_bot = np.where(cap_ok(t_bot), t_bot, np.inf)
    t_cap = np.minimum(t_top, t_bot)
    t = np.minimum(ts, t_cap)
    # normals
    p = o[None] + dirs[:, None, :] * np.where(np.isfinite(t), t, 0.0)[..., None]
    side_n = np.concatenate([p[..., :2], np.zeros_like(p[..., :1])], axis=-1)
    nrm = np.linalg.norm(side_n, axis=-1, keepdims=True)
    side_n = side_n / np.maximum(nrm, EPS)
    cap_n = np.zeros_like(p)
    cap_n[..., 2] = np.sign(p[..., 2])
    normal = np.where((ts <= t_cap)[..., None], side_n, cap_n)
    return t, normal


def rays_vs_spheres(origin: np.ndarray, dirs: np.ndarray, bodies: BodySet):
    ns = len(bodies.sph_id)
    n = dirs.shape[0]
    if ns == 0:
        return np.full((n, 0), np.inf), np.zeros((n, 0, 3))
    o = origin[None, :] - bodies.sph_center  # (ns,3)
    b = 2.0 * np.einsum("nj,sj->ns", dirs, o)
    c = (o * o).sum(-1)[None] - bodies.sph_r[None] ** 2
    disc = b * b - 4 * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    t1 = (-b - sq) / 2.0
    t2 = (-b + sq) / 2.0
    t = np.where((disc >= 0) & (t1 > T_MIN), t1, np.where((disc >= 0) & (t2 > T_MIN), t2, np.inf))
    p = o[None] + dirs[:, None, :] * np.where(np.isfinite(t), t, 0.0)[..., None]
    normal = p / np.maximum(np.linalg.norm(p, axis=-1, keepdims=True), EPS)
    return t, normal


def rays_vs_capsules(origin: np.ndarray, dirs: np.ndarray, p0s: np.ndarray, p1s: np.ndarray, radii: np.ndarray):
    """Capsules given by endpoints (K, 3) and radii (K,). Returns t (N, K), normal (N, K, 3).

    A bounding-sphere prefilter keeps the quadratic math on candidate
    (ray, capsule) pairs only; robot links cover few pixels in practice.
    """
    k = p0s.shape[0]
    n = dirs.shape[0]
    if k == 0:
        return np.full((n, 0), np.inf), np.zeros((n, 0, 3))
    mid = 0.5 * (p0s + p1s)
    bound = 0.5 * np.linalg.norm(p1s - p0s, axis=-1) + radii
    rel_mid = mid - origin[None, :]  # (K,3)
    proj = dirs @ rel_mid.T  # (N,K)
    perp2 = (rel_mid * rel_mid).sum(-1)[None, :] - proj * proj
    cand = (perp2 <= (bound * bound)[None, :]) & (proj > -bound[None, :])

    t = np.full((n, k), np.inf)
    normal = np.zeros((n, k, 3))
    ni, ki = np.nonzero(cand)
    if ni.size == 0:
        return t, normal

    d = dirs[ni]  # (M,3)
    p0 = p0s[ki]
    axis = (p1s - p0s)[ki]
    length = np.linalg.norm(axis, axis=-1)
    ahat = axis / np.maximum(length[:, None], EPS)
    r = radii[ki]
    oa = origin[None, :] - p0
    d_par = (d * ahat).sum(-1)
    o_par = (oa * ahat).sum(-1)
    d_perp = d - d_par[:, None] * ahat
    o_perp = oa - o_par[:, None] * ahat
    a = (d_perp * d_perp).sum(-1)
    b = 2.0 * (d_perp * o_perp).sum(-1)
    c = (o_perp * o_perp).sum(-1) - r * r
    disc = b * b - 4 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_cyl = (-b - sq) / (2 * a)
    s = o_par + d_par * t_cyl
    cyl_ok = (disc >= 0) & (a > EPS) & (t_cyl > T_MIN) & (s >= 0) & (s <= length)
    t_m = np.where(cyl_ok, t_cyl, np.inf)

    for cap_center in (p0, p0 + axis):
        o = origin[None, :] - cap_center
        bb = 2.0 * (d * o).sum(-1)
        cc = (o * o).sum(-1) - r * r
        dd = bb * bb - 4 * cc
        ss = np.sqrt(np.maximum(dd, 0.0))
        tt = (-bb - ss) / 2.0
        tt = np.where((dd >= 0) & (tt > T_MIN), tt, np.inf)
        t_m = np.minimum(t_m, tt)

    hitp = origin[None, :] + d * np.where(np.isfinite(t_m), t_m, 0.0)[:, None]
    s_hit = np.clip(((hitp - p0) * ahat).sum(-1), 0.0, length)
    closest = p0 + s_hit[:, None] * ahat
    nrm = hitp - closest
    nrm = nrm / np.maximum(np.linalg.norm(nrm, axis=-1, keepdims=True), EPS)
    t[ni, ki] = t_m
    normal[ni, ki] = nrm
    return t, normal
