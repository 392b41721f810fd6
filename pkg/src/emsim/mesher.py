"""Graded triangular meshing of a disk domain with circular conductors.

The mesh is the contract between geometry and the field solver: conductors
become polygonal subdomains tagged ``Omega_c_1`` .. ``Omega_c_N``, the
insulating background is ``Omega_i``, and the outer circle is the
``Gamma_out`` boundary loop. Element size follows a radial ramp from
``h_conductor_m`` at the conductors to ``h_far_m`` at the boundary.

The generator is a force-based smoother in the spirit of distmesh: seed a
hex lattice thinned to the size-field density, relax free points against
edge forces from repeated Delaunay triangulations, and keep a protection
band around every conductor-polygon vertex so the rim edges satisfy the
Gabriel criterion and therefore appear in the final triangulation. A
repair loop then splits long edges, removes crowded points and inserts
circumcenters until the 20 degree minimum-angle and edge-length contracts
hold, or fails loudly with MeshFailure.

Everything is deterministic: fixed RNG seed, fixed iteration counts, and
meshing happens in a layout-local frame so translating a layout translates
the node coordinates and nothing else.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .errors import GeometryError, MeshFailure
from .geometry import ConductorLayout, DomainBoundary, boundary as make_boundary, check_overlap

MIN_ANGLE_DEG = 20.0
EDGE_FACTOR_LOW = 0.5
EDGE_FACTOR_HIGH = 2.0

# Rim polygons are sampled at this fraction of h_conductor so rim edges sit
# safely above the 0.5x size-field floor while keeping the polygonal area
# deficit below 0.5%.
RIM_SAMPLE_FRACTION = 0.55

_RELAX_ITERS = 40
_RELAX_FSCALE = 1.2
_RELAX_DT = 0.2
_REPAIR_ROUNDS = 8
_REPAIR_ATTEMPTS = 3
_POLISH_ITERS = 6
_SEED = 7


@dataclass(frozen=True)
class MeshSizeSpec:
    """Target edge lengths: fine on conductors, coarse at the far boundary."""

    h_conductor_m: float
    h_far_m: float
    gradation: float = 1.5

    def __post_init__(self):
        if not (0.0 < self.h_conductor_m <= self.h_far_m):
            raise ValueError(
                "need 0 < h_conductor_m <= h_far_m, got "
                f"{self.h_conductor_m} and {self.h_far_m}")
        if self.gradation < 1.0:
            raise ValueError("gradation must be >= 1")


def default_sizes(layout: ConductorLayout, boundary: DomainBoundary) -> MeshSizeSpec:
    """Default element sizes: conductor radius / 4 and boundary radius / 10."""
    return MeshSizeSpec(h_conductor_m=layout.radius_m / 4.0,
                        h_far_m=boundary.radius_m / 10.0)


class TriMesh:
    """Conforming triangle mesh with region tags and boundary edges.

    Arrays are locked after construction; treat instances as immutable.
    """

    def __init__(self, nodes, triangles, tri_tags, boundary_edges, edge_tags,
                 groups: dict[str, int]):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int32)
        self.tri_tags = np.ascontiguousarray(tri_tags, dtype=np.int32)
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int32)
        self.edge_tags = np.ascontiguousarray(edge_tags, dtype=np.int32)
        self.groups = dict(groups)
        for arr in (self.nodes, self.triangles, self.tri_tags,
                    self.boundary_edges, self.edge_tags):
            arr.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self):
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def areas(self):
        return np.abs(self.signed_areas())

    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    def unique_edges(self):
        e = np.vstack([self.triangles[:, [0, 1]],
                       self.triangles[:, [1, 2]],
                       self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def min_angles_deg(self):
        p = self.nodes[self.triangles]
        v = [p[:, (i + 1) % 3] - p[:, i] for i in range(3)]
        lengths = [np.linalg.norm(x, axis=1) for x in v]
        angles = []
        for i in range(3):
            a, b, c = lengths[i], lengths[(i + 1) % 3], lengths[(i + 2) % 3]
            cosang = np.clip((a ** 2 + c ** 2 - b ** 2) / (2 * a * c), -1.0, 1.0)
            angles.append(np.degrees(np.arccos(cosang)))
        return np.min(angles, axis=0)

    def region_triangles(self, name: str):
        return np.nonzero(self.tri_tags == self.groups[name])[0]

    def conductor_names(self) -> list[str]:
        return sorted((n for n in self.groups if n.startswith("Omega_c_")),
                      key=lambda n: int(n.rsplit("_", 1)[1]))

    def to_json_dict(self) -> dict:
        tris = np.column_stack([self.triangles, self.tri_tags])
        edges = np.column_stack([self.boundary_edges, self.edge_tags])
        return {
            "nodes": self.nodes.tolist(),
            "triangles": tris.tolist(),
            "boundary_edges": edges.tolist(),
            "groups": dict(self.groups),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "TriMesh":
        tris = np.asarray(data["triangles"], dtype=np.int64)
        edges = np.asarray(data["boundary_edges"], dtype=np.int64)
        if edges.size == 0:
            edges = edges.reshape(0, 3)
        return cls(np.asarray(data["nodes"], dtype=float),
                   tris[:, :3], tris[:, 3],
                   edges[:, :2], edges[:, 2],
                   {str(k): int(v) for k, v in data["groups"].items()})

    def save(self, path: str) -> None:
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> "TriMesh":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    def validate(self) -> None:
        """Check conformity, orientation and tag consistency; raise on defects."""
        if np.any(self.signed_areas() <= 0):
            raise MeshFailure("negatively oriented or degenerate triangle")
        e = np.vstack([self.triangles[:, [0, 1]],
                       self.triangles[:, [1, 2]],
                       self.triangles[:, [2, 0]]])
        e = np.sort(e, axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise MeshFailure("edge shared by more than two triangles")
        boundary = np.unique(np.sort(self.boundary_edges, axis=1), axis=0)
        uniq_all, cnt = np.unique(e, axis=0, return_counts=True)
        once_edges = uniq_all[cnt == 1]
        if len(once_edges) != len(boundary) or np.any(once_edges != boundary):
            raise MeshFailure("boundary edges do not match the triangulation hull")
        tags = set(int(t) for t in np.unique(self.tri_tags))
        if not tags <= set(self.groups.values()):
            raise MeshFailure("triangle tag outside declared groups")


def discretize_circle(center, radius: float, h: float):
    """Equally spaced vertices of a circle, counter-clockwise from angle 0."""
    if radius <= 0 or h <= 0:
        raise ValueError("radius and h must be positive")
    m = max(16, math.ceil(2 * math.pi * radius / h))
    theta = 2 * math.pi * np.arange(m) / m
    cx, cy = center
    return np.column_stack([cx + radius * np.cos(theta),
                            cy + radius * np.sin(theta)])


def size_field(points, layout: ConductorLayout, boundary: DomainBoundary,
               sizes: MeshSizeSpec):
    """Target edge length at the given point(s).

    h_conductor_m on and inside every conductor disk, ramping linearly with
    the fraction of the gap to the outer circle already covered, clamped to
    h_far_m on Gamma_out.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    centers = layout.center_array()
    d_cond = np.full(len(pts), np.inf)
    if len(centers):
        d_cond = np.min(np.linalg.norm(pts[:, None, :] - centers[None, :, :],
                                       axis=2), axis=1) - layout.radius_m
    d_cond = np.maximum(d_cond, 0.0)
    d_bnd = boundary.radius_m - np.linalg.norm(
        pts - np.asarray(boundary.center, dtype=float), axis=1)
    d_bnd = np.maximum(d_bnd, 0.0)
    total = d_cond + d_bnd
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(total > 0, d_cond / np.where(total > 0, total, 1.0), 1.0)
    t = np.clip(t, 0.0, 1.0)
    h = sizes.h_conductor_m + (sizes.h_far_m - sizes.h_conductor_m) * t
    if np.ndim(points) == 1:
        return float(h[0])
    return h


def _tri_edges(simplices):
    e = np.vstack([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def _circumcenters(p):
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    ab, ac = b - a, c - a
    d = 2 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
    d = np.where(np.abs(d) < 1e-300, np.nan, d)
    ab2 = (ab ** 2).sum(axis=1)
    ac2 = (ac ** 2).sum(axis=1)
    ux = (ac[:, 1] * ab2 - ab[:, 1] * ac2) / d
    uy = (ab[:, 0] * ac2 - ac[:, 0] * ab2) / d
    return a + np.column_stack([ux, uy])


class _Frame:
    """Meshing scratch state in the layout-local frame."""

    def __init__(self, layout, boundary, sizes):
        self.layout = layout
        self.boundary = boundary
        self.sizes = sizes
        self.shift = np.asarray(boundary.center, dtype=float)
        self.local_layout = ConductorLayout(
            centers=tuple((c[0] - self.shift[0], c[1] - self.shift[1])
                          for c in layout.centers),
            radius_m=layout.radius_m)
        self.local_boundary = DomainBoundary(center=(0.0, 0.0),
                                             radius_m=boundary.radius_m)

    def h(self, pts):
        return size_field(np.atleast_2d(pts), self.local_layout,
                          self.local_boundary, self.sizes)


def _build_fixed(frame: _Frame):
    """Outer polygon plus conductor rim polygons, with protection radii."""
    sizes = frame.sizes
    outer = discretize_circle((0.0, 0.0), frame.boundary.radius_m, sizes.h_far_m)
    chord_out = np.linalg.norm(outer[1] - outer[0])
    polys = [outer]
    rims = []
    protect = [np.full(len(outer), 0.45 * chord_out)]
    start = len(outer)
    for c in frame.local_layout.centers:
        rim = discretize_circle(c, frame.layout.radius_m,
                                RIM_SAMPLE_FRACTION * sizes.h_conductor_m)
        ell = np.linalg.norm(rim[1] - rim[0])
        # any point inside a rim edge's diametral disk lies within ell/sqrt(2)
        # of an endpoint, so this band keeps those disks empty (Gabriel).
        polys.append(rim)
        protect.append(np.full(len(rim), 0.72 * ell))
        rims.append(np.arange(start, start + len(rim)))
        start += len(rim)
    fixed = np.vstack(polys)
    return fixed, np.concatenate(protect), rims, len(outer)


def _seed_interior(frame: _Frame, fixed, protect_r, r_guard, rng):
    """Hex lattice thinned to the size-field density, away from fixed points."""
    h_c = frame.sizes.h_conductor_m
    R = frame.boundary.radius_m
    dy = h_c * math.sqrt(3.0) / 2.0
    rows = int(math.ceil(2 * R / dy)) + 1
    cols = int(math.ceil(2 * R / h_c)) + 2
    pts = []
    for j in range(rows):
        y = -R + j * dy
        xoff = 0.5 * h_c if j % 2 else 0.0
        x = -R + xoff + h_c * np.arange(cols)
        pts.append(np.column_stack([x, np.full(len(x), y)]))
    pts = np.vstack(pts)
    pts = pts[np.linalg.norm(pts, axis=1) <= r_guard]
    h = frame.h(pts)
    keep = rng.random(len(pts)) < (h_c / h) ** 2
    pts = pts[keep]
    tree = cKDTree(fixed)
    dist, idx = tree.query(pts)
    pts = pts[dist > protect_r[idx]]
    return pts


def _project(frame, pts, fixed, protect_r, r_guard):
    """Clamp free points back inside the guard radius and protection bands."""
    r = np.linalg.norm(pts, axis=1)
    out = r > r_guard
    if np.any(out):
        pts[out] *= (r_guard / r[out])[:, None]
    tree = cKDTree(fixed)
    dist, idx = tree.query(pts)
    bad = dist < protect_r[idx]
    if np.any(bad):
        anchors = fixed[idx[bad]]
        vec = pts[bad] - anchors
        norms = np.linalg.norm(vec, axis=1)
        # points sitting exactly on an anchor get a deterministic nudge
        degenerate = norms < 1e-300
        vec[degenerate] = (1.0, 0.0)
        norms[degenerate] = 1.0
        pts[bad] = anchors + vec / norms[:, None] * protect_r[idx[bad]][:, None] * 1.01
    return pts


def _relax(frame, fixed, free, protect_r, r_guard, iters=_RELAX_ITERS):
    nfix = len(fixed)
    for _ in range(iters):
        pts = np.vstack([fixed, free]) if len(free) else fixed
        edges = _tri_edges(Delaunay(pts).simplices)
        vec = pts[edges[:, 1]] - pts[edges[:, 0]]
        L = np.linalg.norm(vec, axis=1)
        mid = 0.5 * (pts[edges[:, 0]] + pts[edges[:, 1]])
        hbar = frame.h(mid)
        L0 = hbar * _RELAX_FSCALE * math.sqrt((L ** 2).sum() / (hbar ** 2).sum())
        F = np.maximum(L0 - L, 0.0) / np.where(L > 1e-300, L, 1.0)
        push = F[:, None] * vec
        force = np.zeros_like(pts)
        np.add.at(force, edges[:, 0], -push)
        np.add.at(force, edges[:, 1], push)
        if not len(free):
            break
        free = free + _RELAX_DT * force[nfix:]
        free = _project(frame, free, fixed, protect_r, r_guard)
    return free


def _dedupe_free(frame, fixed, free):
    """Drop free points closer than half the local size to any neighbour."""
    if not len(free):
        return free
    pts = np.vstack([fixed, free])
    h = frame.h(pts)
    tree = cKDTree(pts)
    pairs = tree.query_pairs(r=float(h.max()) * 0.55, output_type="ndarray")
    if not len(pairs):
        return free
    nfix = len(fixed)
    drop = np.zeros(len(pts), dtype=bool)
    d = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
    close = d < 0.55 * np.minimum(h[pairs[:, 0]], h[pairs[:, 1]])
    for i, j in pairs[close]:
        i, j = int(i), int(j)
        victim = max(i, j)
        if victim >= nfix and not (drop[i] or drop[j]):
            drop[victim] = True
    return free[~drop[nfix:]]


def _missing_rim_edges(edge_set, rims):
    missing = []
    for rim in rims:
        m = len(rim)
        for k in range(m):
            a, b = int(rim[k]), int(rim[(k + 1) % m])
            if (min(a, b), max(a, b)) not in edge_set:
                missing.append((a, b))
    return missing


def _spaced(frame, cand):
    """Thin a candidate batch so no two accepted points sit closer than
    0.7 of the local size; earlier candidates win, which keeps the
    selection deterministic. Candidates are only checked against the
    existing mesh elsewhere, so without this two circumcenters of
    adjacent sliver triangles can land almost on top of each other."""
    if len(cand) < 2:
        return cand
    hc = frame.h(cand)
    keep = np.ones(len(cand), dtype=bool)
    tree = cKDTree(cand)
    for i, j in sorted(map(tuple, tree.query_pairs(r=float(hc.max()) * 0.7))):
        if keep[i] and keep[j]:
            d = float(np.linalg.norm(cand[i] - cand[j]))
            if d < 0.7 * min(hc[i], hc[j]):
                keep[j] = False
    return cand[keep]


def _deficiency(frame, fixed, free, rims):
    """How far the current point set is from the quality contracts.

    Zero means conforming: rim edges present, min angle >= MIN_ANGLE_DEG,
    edge lengths within [0.5, 2] of the local size field. Positive values
    grow with the size of the worst violation; missing rim edges are inf.
    """
    pts = np.vstack([fixed, free]) if len(free) else fixed
    simplices = Delaunay(pts).simplices
    edges = _tri_edges(simplices)
    if _missing_rim_edges(set(map(tuple, edges)), rims):
        return math.inf
    pe = pts[edges]
    L = np.linalg.norm(pe[:, 1] - pe[:, 0], axis=1)
    hmid = frame.h(0.5 * (pe[:, 0] + pe[:, 1]))
    ratio = L / hmid
    return _deficiency_from(_min_angles(pts[simplices]), ratio)


def _deficiency_from(minang, ratio):
    return (max(0.0, MIN_ANGLE_DEG - float(minang.min())) / MIN_ANGLE_DEG
            + max(0.0, 0.5 - float(ratio.min())) / 0.5
            + max(0.0, float(ratio.max()) - 2.0) / 2.0)


def generate_mesh(layout: ConductorLayout,
                  boundary: DomainBoundary | None = None,
                  sizes: MeshSizeSpec | None = None) -> TriMesh:
    """Mesh the domain and tag conductor, insulator and boundary groups.

    Deterministic for a given (layout, sizes). Raises GeometryError when the
    layout overlaps or pokes through the boundary, MeshFailure when the
    quality loop cannot meet the angle and edge-length contracts.
    """
    if boundary is None:
        boundary = make_boundary(layout)
    if sizes is None:
        sizes = default_sizes(layout, boundary)
    overlaps = check_overlap(layout)
    if overlaps:
        raise GeometryError(f"overlapping conductor pairs: {overlaps}")
    centers = layout.center_array()
    bc = np.asarray(boundary.center, dtype=float)
    reach = np.linalg.norm(centers - bc, axis=1) + layout.radius_m
    if np.any(reach > boundary.radius_m * (1 + 1e-12)):
        worst = int(np.argmax(reach))
        raise GeometryError(
            f"conductor {worst} extends outside the domain boundary")

    frame = _Frame(layout, boundary, sizes)
    fixed, protect_r, rims, n_outer = _build_fixed(frame)
    m_out = n_outer
    r_guard = boundary.radius_m * math.cos(math.pi / m_out) - 0.3 * sizes.h_far_m
    rng = np.random.default_rng(_SEED)
    free = _seed_interior(frame, fixed, protect_r, r_guard, rng)
    free = _relax(frame, fixed, free, protect_r, r_guard)
    free = _dedupe_free(frame, fixed, free)

    inserted = 0
    for _ in range(_REPAIR_ATTEMPTS):
        free, inserted, settled, best_def, best_free = _repair_pass(
            frame, fixed, free, protect_r, rims, r_guard, inserted)
        if settled:
            break
        # The insert/remove pair can cycle (inserted point -> short edge ->
        # removed -> reinserted) so exhausting the rounds is not by itself a
        # failure. Take the best state seen, smooth it a little, and try
        # again; only a contract violation that survives all attempts fails.
        d_now = _deficiency(frame, fixed, free, rims)
        if best_free is not None and best_def < d_now:
            free, d_now = best_free, best_def
        if d_now == 0.0:
            break
        free = _relax(frame, fixed, free, protect_r, r_guard, _POLISH_ITERS)
        if _deficiency(frame, fixed, free, rims) == 0.0:
            break
    else:
        raise MeshFailure("quality repair loop did not settle")

    pts = np.vstack([fixed, free]) if len(free) else fixed
    tri = Delaunay(pts)
    simplices = np.array(tri.simplices, dtype=np.int64)
    if _missing_rim_edges(set(map(tuple, _tri_edges(simplices))), rims):
        raise MeshFailure("conductor rim edges lost in final triangulation")

    # enforce counter-clockwise orientation
    p3 = pts[simplices]
    sa = 0.5 * ((p3[:, 1, 0] - p3[:, 0, 0]) * (p3[:, 2, 1] - p3[:, 0, 1])
                - (p3[:, 2, 0] - p3[:, 0, 0]) * (p3[:, 1, 1] - p3[:, 0, 1]))
    flip = sa < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]

    # canonical ordering: smallest node first inside each triangle, then rows
    roll = np.argmin(simplices, axis=1)
    for r in (1, 2):
        sel = roll == r
        simplices[sel] = np.roll(simplices[sel], -r, axis=1)
    order = np.lexsort((simplices[:, 2], simplices[:, 1], simplices[:, 0]))
    simplices = simplices[order]

    minang = _min_angles(pts[simplices])
    if minang.min() < MIN_ANGLE_DEG:
        raise MeshFailure(
            f"minimum angle {minang.min():.2f} deg below {MIN_ANGLE_DEG}")
    edges = _tri_edges(simplices)
    pe = pts[edges]
    L = np.linalg.norm(pe[:, 1] - pe[:, 0], axis=1)
    factors = L / frame.h(0.5 * (pe[:, 0] + pe[:, 1]))
    if factors.min() < EDGE_FACTOR_LOW or factors.max() > EDGE_FACTOR_HIGH:
        raise MeshFailure(
            "edge length outside [0.5, 2] x size field: "
            f"[{factors.min():.3f}, {factors.max():.3f}]")

    tags = _tag_regions(pts, simplices, frame, rims, fixed)
    groups = {"Omega_i": 0}
    for i in range(1, layout.count + 1):
        groups[f"Omega_c_{i}"] = i
    groups["Gamma_out"] = layout.count + 1

    hull = np.sort(np.array(tri.convex_hull, dtype=np.int64), axis=1)
    hull = hull[np.lexsort((hull[:, 1], hull[:, 0]))]
    edge_tags = np.full(len(hull), layout.count + 1, dtype=np.int64)

    nodes = pts + frame.shift
    mesh = TriMesh(nodes, simplices, tags, hull, edge_tags, groups)
    mesh.validate()
    return mesh


def _repair_pass(frame, fixed, free, protect_r, rims, r_guard, inserted):
    """One bounded round-loop of split/remove/insert repairs.

    Returns (free, inserted, settled, best_def, best_free): settled means a
    round made no change; best_* track the state closest to the contracts.
    """
    best_def, best_free = math.inf, None
    for _ in range(_REPAIR_ROUNDS):
        pts = np.vstack([fixed, free]) if len(free) else fixed
        tri = Delaunay(pts)
        simplices = tri.simplices
        edges = _tri_edges(simplices)
        edge_set = set(map(tuple, edges))
        changed = False

        missing = _missing_rim_edges(edge_set, rims)
        if missing:
            # free points inside a diametral disk block the rim edge; drop them
            drop = np.zeros(len(free), dtype=bool)
            for a, b in missing:
                mid = 0.5 * (pts[a] + pts[b])
                rad = 0.5 * np.linalg.norm(pts[b] - pts[a])
                d = np.linalg.norm(free - mid, axis=1)
                drop |= d <= rad * 1.05
            if not np.any(drop):
                raise MeshFailure(
                    f"cannot recover {len(missing)} conductor rim edge(s)")
            free = free[~drop]
            continue

        pe = pts[edges]
        L = np.linalg.norm(pe[:, 1] - pe[:, 0], axis=1)
        mid = 0.5 * (pe[:, 0] + pe[:, 1])
        hmid = frame.h(mid)

        # remember the state closest to the contracts so the caller can fall
        # back to it when the loop cycles instead of settling
        ratio = L / hmid
        minang_entry = _min_angles(pts[simplices])
        entry_def = _deficiency_from(minang_entry, ratio)
        if entry_def < best_def:
            best_def = entry_def
            best_free = free.copy()

        # split clearly oversized edges at their midpoints
        long_mask = L > 1.85 * hmid
        new_pts = []
        if np.any(long_mask) and inserted < 500:
            cand = mid[long_mask]
            tree = cKDTree(fixed)
            dist, idx = tree.query(cand)
            ok = (dist > protect_r[idx]) & (np.linalg.norm(cand, axis=1) < r_guard)
            cand = cand[ok][:500 - inserted]
            if len(cand):
                new_pts.append(cand)
                inserted += len(cand)
                changed = True

        # remove a free endpoint of clearly undersized edges
        short_mask = L < 0.56 * hmid
        if np.any(short_mask):
            drop = np.zeros(len(pts), dtype=bool)
            nfix = len(fixed)
            for a, b in edges[short_mask]:
                a, b = int(a), int(b)
                victim = max(a, b)
                if victim >= nfix and not (drop[a] or drop[b]):
                    drop[victim] = True
            if np.any(drop):
                free = free[~drop[nfix:]]
                changed = True

        # circumcenter insertion for sliver triangles
        p3 = pts[simplices]
        minang = minang_entry
        bad = minang < MIN_ANGLE_DEG + 1.0
        if np.any(bad) and inserted < 500:
            cc = _circumcenters(p3[bad])
            cc = cc[np.isfinite(cc).all(axis=1)]
            if len(cc):
                tree = cKDTree(fixed)
                dist, idx = tree.query(cc)
                ok = (dist > protect_r[idx]) & (np.linalg.norm(cc, axis=1) < r_guard)
                cc = cc[ok]
                if len(cc):
                    all_tree = cKDTree(pts)
                    d2, _ = all_tree.query(cc)
                    cc = cc[d2 > 0.5 * frame.h(cc)]
                cc = cc[:500 - inserted]
                if len(cc):
                    new_pts.append(cc)
                    inserted += len(cc)
                    changed = True

        if new_pts:
            cand = _spaced(frame, np.vstack(new_pts))
            if len(cand):
                free = np.vstack([free, cand]) if len(free) else cand
        if not changed:
            return free, inserted, True, best_def, best_free
    return free, inserted, False, best_def, best_free


def _min_angles(p3):
    v0 = p3[:, 1] - p3[:, 0]
    v1 = p3[:, 2] - p3[:, 1]
    v2 = p3[:, 0] - p3[:, 2]
    a = np.linalg.norm(v0, axis=1)
    b = np.linalg.norm(v1, axis=1)
    c = np.linalg.norm(v2, axis=1)
    angs = []
    for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
        cosang = np.clip((x ** 2 + z ** 2 - y ** 2) / (2 * x * z), -1.0, 1.0)
        angs.append(np.degrees(np.arccos(cosang)))
    return np.min(angs, axis=0)


def _tag_regions(pts, simplices, frame, rims, fixed):
    """Assign each triangle to a conductor via its centroid, else Omega_i."""
    centroids = pts[simplices].mean(axis=1)
    tags = np.zeros(len(simplices), dtype=np.int64)
    for k, rim in enumerate(rims, start=1):
        poly = fixed[rim]
        nxt = np.roll(poly, -1, axis=0)
        edge = nxt - poly
        # inside a convex CCW polygon: centroid left of every directed edge
        rel = centroids[:, None, :] - poly[None, :, :]
        cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
        inside = (cross >= -1e-15 * frame.layout.radius_m).all(axis=1)
        tags[inside] = k
    return tags
