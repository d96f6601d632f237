"""Exact-ish 3D primitives for city-scale scenes.

Everything downstream (solar simulation, feature extraction, synthetic city
generation) sits on the types in this module: planar polygons with explicit
winding, indexed triangle meshes with per-triangle surface ids, and a
bounding-volume hierarchy for fast boolean occlusion queries.

Conventions
-----------
* Coordinates are metric, in a local east/north/up frame: +x east, +y north,
  +z up.
* Polygon vertices are ordered counter-clockwise when viewed from the outside,
  so the Newell normal points away from the solid.
* Tilt is the angle between the surface normal and +z (0 = flat, 90 = wall).
  Azimuth is the compass bearing of the normal's horizontal projection
  (0 = north, 90 = east, 180 = south); flat surfaces report azimuth 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import GeometryError, MeshNotWatertightError

# Geometric tolerances (metres unless noted).
COPLANAR_TOL = 0.01          # max vertex distance from the best-fit plane
DEGENERATE_AREA = 1e-6       # polygons below this area are rejected (m^2)
_EPS_DET = 1e-12             # ray/triangle parallelism guard
_EPS_BARY = 1e-9             # inclusive barycentric slack (watertight edges)

BVH_LEAF_SIZE = 8


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class Point3:
    """A point in the local metric frame. All coordinates must be finite."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise GeometryError(f"non-finite point: ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


def _as_vertex_array(vertices) -> np.ndarray:
    arr = np.asarray(
        [[v.x, v.y, v.z] if isinstance(v, Point3) else v for v in vertices],
        dtype=np.float64,
    )
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise GeometryError(f"expected an (n, 3) vertex list, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise GeometryError("non-finite vertex coordinate")
    return arr


class Polygon3:
    """Planar polygon in 3D with outward (CCW-from-outside) winding.

    Construction validates the contract: at least three vertices, coplanar
    within ``COPLANAR_TOL``, area above ``DEGENERATE_AREA``, and no
    self-intersection of the boundary.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        arr = _as_vertex_array(vertices)
        if arr.shape[0] < 3:
            raise GeometryError(f"polygon needs >= 3 vertices, got {arr.shape[0]}")
        self.vertices = arr
        self.vertices.setflags(write=False)
        n = _newell(arr)
        norm = float(np.linalg.norm(n))
        if norm / 2.0 < DEGENERATE_AREA:
            raise GeometryError(f"degenerate polygon (area {norm / 2.0:g} m^2)")
        unit = n / norm
        # coplanarity: every vertex within tolerance of the mean plane
        d = (arr - arr.mean(axis=0)) @ unit
        worst = float(np.abs(d).max())
        if worst > COPLANAR_TOL:
            raise GeometryError(f"vertices deviate {worst:.4f} m from a common plane")
        if _self_intersects(_project(arr, unit)):
            raise GeometryError("polygon boundary self-intersects")

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def __repr__(self) -> str:
        return f"Polygon3({self.vertices.shape[0]} vertices)"

    def transformed(self, rotation: np.ndarray, translation=(0.0, 0.0, 0.0)) -> "Polygon3":
        return Polygon3(self.vertices @ np.asarray(rotation).T + np.asarray(translation))


@dataclass(frozen=True)
class Ray:
    """Half-open segment ``origin + t * direction`` for t in [t_min, t_max]."""

    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if not np.isfinite(o).all() or not np.isfinite(d).all():
            raise GeometryError("non-finite ray")
        norm = float(np.linalg.norm(d))
        if norm < 1e-12:
            raise GeometryError("ray direction has zero length")
        if abs(norm - 1.0) > 1e-9:
            d = d / norm
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)
        if self.t_min < 0 or not self.t_max > self.t_min:
            raise GeometryError(f"bad ray interval [{self.t_min}, {self.t_max}]")


class TriangleMesh:
    """Indexed triangle mesh with a surface id per triangle.

    Surface ids are stored as an int code per triangle plus a name table, so
    large merged scenes stay compact; ``surface_id_of`` resolves the string.
    """

    __slots__ = ("vertices", "triangles", "surface_codes", "surface_names")

    def __init__(self, vertices, triangles, surface_ids=None, *, surface_codes=None, surface_names=None):
        self.vertices = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
        self.triangles = np.ascontiguousarray(np.asarray(triangles, dtype=np.int32))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise GeometryError("vertices must be (n, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise GeometryError("triangles must be (m, 3)")
        if not np.isfinite(self.vertices).all():
            raise GeometryError("non-finite mesh vertex")
        nt = self.triangles.shape[0]
        if nt and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise GeometryError("triangle index out of range")
        if surface_codes is not None:
            self.surface_codes = np.ascontiguousarray(np.asarray(surface_codes, dtype=np.int32))
            self.surface_names = tuple(surface_names or ())
        else:
            if surface_ids is None:
                surface_ids = ["mesh"] * nt
            names: dict[str, int] = {}
            codes = np.empty(nt, dtype=np.int32)
            for i, sid in enumerate(surface_ids):
                codes[i] = names.setdefault(str(sid), len(names))
            self.surface_codes = codes
            self.surface_names = tuple(names)
        if len(self.surface_codes) != nt:
            raise GeometryError("one surface id required per triangle")

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def surface_id_of(self, tri_index: int) -> str:
        return self.surface_names[self.surface_codes[tri_index]]

    def surface_code(self, surface_id: str) -> int:
        try:
            return self.surface_names.index(surface_id)
        except ValueError:
            return -1

    def transformed(self, rotation: np.ndarray, translation=(0.0, 0.0, 0.0)) -> "TriangleMesh":
        return TriangleMesh(
            self.vertices @ np.asarray(rotation).T + np.asarray(translation),
            self.triangles,
            surface_codes=self.surface_codes,
            surface_names=self.surface_names,
        )

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


# ---------------------------------------------------------------------------
# polygon operations


def _newell(arr: np.ndarray) -> np.ndarray:
    nxt = np.roll(arr, -1, axis=0)
    n = np.empty(3)
    n[0] = np.sum((arr[:, 1] - nxt[:, 1]) * (arr[:, 2] + nxt[:, 2]))
    n[1] = np.sum((arr[:, 2] - nxt[:, 2]) * (arr[:, 0] + nxt[:, 0]))
    n[2] = np.sum((arr[:, 0] - nxt[:, 0]) * (arr[:, 1] + nxt[:, 1]))
    return n


def polygon_normal(poly: Polygon3) -> np.ndarray:
    """Unit Newell normal; orientation follows the vertex winding."""
    n = _newell(poly.vertices)
    return n / np.linalg.norm(n)


def polygon_area(poly: Polygon3) -> float:
    """Planar polygon area in m^2 (half the Newell vector magnitude)."""
    return float(np.linalg.norm(_newell(poly.vertices)) / 2.0)


def polygon_tilt_azimuth(poly: Polygon3) -> tuple[float, float]:
    """(tilt, azimuth) of the outward normal, in degrees.

    Flat surfaces (horizontal normal projection below 1e-12) return
    azimuth 0.0 by convention.
    """
    n = polygon_normal(poly)
    tilt = math.degrees(math.acos(max(-1.0, min(1.0, n[2]))))
    horiz = math.hypot(n[0], n[1])
    if horiz < 1e-12:
        return tilt, 0.0
    az = math.degrees(math.atan2(n[0], n[1])) % 360.0
    return tilt, az


def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(normal, a)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    return u, v


def _project(arr: np.ndarray, normal: np.ndarray) -> np.ndarray:
    u, v = _plane_basis(normal)
    return np.column_stack((arr @ u, arr @ v))


def _self_intersects(pts2: np.ndarray) -> bool:
    n = len(pts2)

    def seg_cross(p, q, a, b):
        d1 = q - p
        d2 = b - a
        denom = d1[0] * d2[1] - d1[1] * d2[0]
        if abs(denom) < 1e-14:
            return False
        t = ((a[0] - p[0]) * d2[1] - (a[1] - p[1]) * d2[0]) / denom
        s = ((a[0] - p[0]) * d1[1] - (a[1] - p[1]) * d1[0]) / denom
        return 1e-12 < t < 1 - 1e-12 and 1e-12 < s < 1 - 1e-12

    for i in range(n):
        p, q = pts2[i], pts2[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if seg_cross(p, q, pts2[j], pts2[(j + 1) % n]):
                return True
    return False


def polygon_centroid(poly: Polygon3) -> np.ndarray:
    """Area centroid of the planar polygon (works for concave shapes)."""
    arr = poly.vertices
    normal = polygon_normal(poly)
    ref = arr.mean(axis=0)
    total = 0.0
    acc = np.zeros(3)
    for i in range(len(arr)):
        a = arr[i] - ref
        b = arr[(i + 1) % len(arr)] - ref
        w = float(np.cross(a, b) @ normal) / 2.0  # signed triangle area
        total += w
        acc += w * (arr[i] + arr[(i + 1) % len(arr)] + ref) / 3.0
    if abs(total) < DEGENERATE_AREA:
        return ref
    return acc / total


def _point_in_polygon_2d(pt: np.ndarray, pts2: np.ndarray) -> bool:
    # even-odd crossing rule
    x, y = pt
    inside = False
    n = len(pts2)
    for i in range(n):
        x1, y1 = pts2[i]
        x2, y2 = pts2[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def _is_convex(pts2: np.ndarray) -> bool:
    n = len(pts2)
    sign = 0.0
    for i in range(n):
        a, b, c = pts2[i], pts2[(i + 1) % n], pts2[(i + 2) % n]
        cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cr) < 1e-12:
            continue
        if sign == 0.0:
            sign = cr
        elif cr * sign < 0:
            return False
    return True


def triangulate(poly: Polygon3) -> list[tuple[int, int, int]]:
    """Ear-clipping triangulation; returns index triples into the polygon.

    Winding of each triangle matches the polygon, so triangle normals agree
    with the polygon normal. Handles convex and concave (non-self-
    intersecting) planar polygons.
    """
    arr = poly.vertices
    normal = polygon_normal(poly)
    # the (u, v, normal) basis is right-handed, so projecting along the
    # polygon's own Newell normal always yields a CCW loop
    pts = _project(arr, normal)
    n = len(pts)
    idx = list(range(n))
    tris: list[tuple[int, int, int]] = []

    def cross(o, a, b):
        return (pts[a, 0] - pts[o, 0]) * (pts[b, 1] - pts[o, 1]) - (
            pts[a, 1] - pts[o, 1]
        ) * (pts[b, 0] - pts[o, 0])

    def ear_ok(i0, i1, i2, remaining):
        if cross(i0, i1, i2) <= 1e-14:
            return False
        ax, ay = pts[i0]
        bx, by = pts[i1]
        cx, cy = pts[i2]
        for k in remaining:
            if k in (i0, i1, i2):
                continue
            px, py = pts[k]
            d1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
            d2 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
            d3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
            if d1 >= -1e-14 and d2 >= -1e-14 and d3 >= -1e-14:
                return False
        return True

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 4 * n * n:
            raise GeometryError("ear clipping stalled (degenerate polygon)")
        clipped = False
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            if ear_ok(i0, i1, i2, idx):
                tris.append((i0, i1, i2))
                idx.pop(k)
                clipped = True
                break
        if not clipped:
            # collinear leftovers: drop the flattest corner and retry
            flat = min(
                range(m),
                key=lambda k: abs(cross(idx[(k - 1) % m], idx[k], idx[(k + 1) % m])),
            )
            tris.append((idx[(flat - 1) % m], idx[flat], idx[(flat + 1) % m]))
            idx.pop(flat)
    tris.append(tuple(idx))

    # drop zero-area leftovers from the collinear fallback
    out = []
    for (a, b, c) in tris:
        v = np.cross(arr[b] - arr[a], arr[c] - arr[a])
        if np.linalg.norm(v) / 2.0 > 1e-12:
            out.append((a, b, c))
    if not out:
        raise GeometryError("triangulation produced no non-degenerate triangles")
    return out


def polygon_sample_points(poly: Polygon3, n_samples: int) -> np.ndarray:
    """Deterministic interior sample points for surface integrals.

    Sample 0 is the area centroid; further samples sit halfway between the
    centroid and points spaced evenly along the boundary, which stratifies
    them across the face. Concave polygons fall back to triangle centroids
    of the triangulation (always interior).
    """
    if n_samples < 1:
        raise GeometryError("n_samples must be >= 1")
    arr = poly.vertices
    normal = polygon_normal(poly)
    pts2 = _project(arr, normal)
    centroid = polygon_centroid(poly)
    if n_samples == 1:
        return centroid[None, :]
    if not _is_convex(pts2):
        tris = triangulate(poly)
        cents = np.array([(arr[a] + arr[b] + arr[c]) / 3.0 for a, b, c in tris])
        reps = [cents[i % len(cents)] for i in range(n_samples - 1)]
        return np.vstack([centroid[None, :], np.array(reps)])
    # boundary points at even arc length, phase 0 at vertex 0
    seg = np.linalg.norm(np.roll(arr, -1, axis=0) - arr, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    perim = cum[-1]
    out = [centroid]
    for i in range(n_samples - 1):
        s = perim * i / (n_samples - 1)
        k = int(np.searchsorted(cum, s, side="right") - 1)
        k = min(k, len(arr) - 1)
        frac = (s - cum[k]) / seg[k] if seg[k] > 0 else 0.0
        b = arr[k] + frac * (arr[(k + 1) % len(arr)] - arr[k])
        out.append(centroid + 0.5 * (b - centroid))
    return np.array(out)


# ---------------------------------------------------------------------------
# meshes


def mesh_from_polygons(faces: list[tuple[str, Polygon3]]) -> TriangleMesh:
    """Triangulate labelled faces into one mesh, welding identical vertices.

    Vertices are welded by exact coordinate equality, which is what closed
    solids built from shared corner coordinates need to come out watertight.
    """
    vert_index: dict[tuple[float, float, float], int] = {}
    vertices: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    ids: list[str] = []
    for sid, poly in faces:
        local = []
        for v in poly.vertices:
            key = (float(v[0]), float(v[1]), float(v[2]))
            j = vert_index.get(key)
            if j is None:
                j = len(vertices)
                vert_index[key] = j
                vertices.append(key)
            local.append(j)
        for a, b, c in triangulate(poly):
            tris.append((local[a], local[b], local[c]))
            ids.append(sid)
    return TriangleMesh(np.array(vertices), np.array(tris, dtype=np.int32), ids)


def merge_meshes(meshes: list[TriangleMesh]) -> TriangleMesh:
    names: dict[str, int] = {}
    verts = []
    tris = []
    codes = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        remap = np.array([names.setdefault(nm, len(names)) for nm in m.surface_names], dtype=np.int32)
        codes.append(remap[m.surface_codes] if len(m.surface_codes) else m.surface_codes)
        offset += len(m.vertices)
    return TriangleMesh(
        np.vstack(verts) if verts else np.zeros((0, 3)),
        np.vstack(tris) if tris else np.zeros((0, 3), dtype=np.int32),
        surface_codes=np.concatenate(codes) if codes else np.zeros(0, dtype=np.int32),
        surface_names=tuple(names),
    )


def open_edges(mesh: TriangleMesh) -> list[tuple[int, int]]:
    """Undirected edges not shared by exactly two opposite-wound triangles."""
    count: dict[tuple[int, int], int] = {}
    signed: dict[tuple[int, int], int] = {}
    for a, b, c in mesh.triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            u, v = int(u), int(v)
            key = (u, v) if u < v else (v, u)
            count[key] = count.get(key, 0) + 1
            signed[key] = signed.get(key, 0) + (1 if u < v else -1)
    return sorted(k for k, c in count.items() if c != 2 or signed[k] != 0)


def is_watertight(mesh: TriangleMesh) -> bool:
    return not open_edges(mesh)


def mesh_volume(mesh: TriangleMesh) -> float:
    """Enclosed volume of a watertight mesh via signed tetrahedra.

    Raises ``MeshNotWatertightError`` naming the open edges otherwise.
    """
    bad = open_edges(mesh)
    if bad:
        raise MeshNotWatertightError(bad)
    v = mesh.vertices
    t = mesh.triangles
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return float(abs(np.einsum("ij,ij->i", np.cross(a, b), c).sum()) / 6.0)


def write_obj(mesh: TriangleMesh, path) -> None:
    """Wavefront-style export: vertex and face records only."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]!r} {v[1]!r} {v[2]!r}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# BVH


class Bvh:
    """Static median-split BVH over a mesh, for boolean occlusion tests.

    Built once per scene; traversal happens in compiled kernels. Leaves hold
    at most ``BVH_LEAF_SIZE`` triangles. ``depth`` is the deepest leaf.
    """

    __slots__ = (
        "mesh", "node_min", "node_max", "node_left", "node_right",
        "order", "tri_v0", "tri_e1", "tri_e2", "tri_owner", "depth",
    )

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        v = mesh.vertices
        t = mesh.triangles
        nt = t.shape[0]
        if nt == 0:
            raise GeometryError("cannot build a BVH over an empty mesh")
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        self.tri_v0 = np.ascontiguousarray(p0)
        self.tri_e1 = np.ascontiguousarray(p1 - p0)
        self.tri_e2 = np.ascontiguousarray(p2 - p0)
        self.tri_owner = np.ascontiguousarray(mesh.surface_codes)
        lo = np.minimum(np.minimum(p0, p1), p2)
        hi = np.maximum(np.maximum(p0, p1), p2)
        centroids = (p0 + p1 + p2) / 3.0

        order = np.arange(nt, dtype=np.int32)
        n_min, n_max, n_left, n_right = [], [], [], []

        def build(start: int, end: int, depth: int) -> tuple[int, int]:
            node = len(n_min)
            sl = order[start:end]
            n_min.append(lo[sl].min(axis=0))
            n_max.append(hi[sl].max(axis=0))
            n_left.append(0)
            n_right.append(0)
            count = end - start
            if count <= BVH_LEAF_SIZE:
                n_left[node] = -(start + 1)
                n_right[node] = count
                return node, depth
            cen = centroids[sl]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            mid = count // 2
            part = np.argsort(cen[:, axis], kind="stable")
            order[start:end] = sl[part]
            left, dl = build(start, start + mid, depth + 1)
            right, dr = build(start + mid, end, depth + 1)
            n_left[node] = left
            n_right[node] = right
            return node, max(dl, dr)

        _, self.depth = build(0, nt, 1)
        self.node_min = np.ascontiguousarray(np.array(n_min))
        self.node_max = np.ascontiguousarray(np.array(n_max))
        self.node_left = np.array(n_left, dtype=np.int32)
        self.node_right = np.array(n_right, dtype=np.int32)
        self.order = order

    @property
    def n_nodes(self) -> int:
        return len(self.node_left)

    def surface_code(self, surface_id: str | None) -> int:
        if surface_id is None:
            return -1
        return self.mesh.surface_code(surface_id)


def build_bvh(mesh: TriangleMesh) -> Bvh:
    return Bvh(mesh)


@njit(cache=True, nogil=True)
def _tri_hit(v0, e1, e2, ox, oy, oz, dx, dy, dz, t_lo, t_hi):
    """Moller-Trumbore segment test with inclusive (watertight) edge slack."""
    hx = dy * e2[2] - dz * e2[1]
    hy = dz * e2[0] - dx * e2[2]
    hz = dx * e2[1] - dy * e2[0]
    det = e1[0] * hx + e1[1] * hy + e1[2] * hz
    if -_EPS_DET < det < _EPS_DET:
        return False
    inv = 1.0 / det
    sx = ox - v0[0]
    sy = oy - v0[1]
    sz = oz - v0[2]
    u = (sx * hx + sy * hy + sz * hz) * inv
    if u < -_EPS_BARY or u > 1.0 + _EPS_BARY:
        return False
    qx = sy * e1[2] - sz * e1[1]
    qy = sz * e1[0] - sx * e1[2]
    qz = sx * e1[1] - sy * e1[0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -_EPS_BARY or u + v > 1.0 + _EPS_BARY:
        return False
    t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
    return t_lo < t < t_hi


@njit(cache=True, nogil=True)
def _box_hit(bmin, bmax, ox, oy, oz, dx, dy, dz, t_lo, t_hi):
    tn = t_lo
    tf = t_hi
    for a in range(3):
        o = ox if a == 0 else (oy if a == 1 else oz)
        d = dx if a == 0 else (dy if a == 1 else dz)
        if d == 0.0:
            if o < bmin[a] or o > bmax[a]:
                return False
        else:
            inv = 1.0 / d
            t1 = (bmin[a] - o) * inv
            t2 = (bmax[a] - o) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tn:
                tn = t1
            if t2 < tf:
                tf = t2
            if tn > tf:
                return False
    return True


@njit(cache=True, nogil=True)
def _bvh_any_hit(node_min, node_max, node_left, node_right, order,
                 tri_v0, tri_e1, tri_e2, tri_owner,
                 ox, oy, oz, dx, dy, dz, t_lo, t_hi, ignore):
    stack = np.empty(128, dtype=np.int32)
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _box_hit(node_min[node], node_max[node], ox, oy, oz, dx, dy, dz, t_lo, t_hi):
            continue
        left = node_left[node]
        if left < 0:
            start = -left - 1
            for k in range(node_right[node]):
                tri = order[start + k]
                if tri_owner[tri] == ignore:
                    continue
                if _tri_hit(tri_v0[tri], tri_e1[tri], tri_e2[tri],
                            ox, oy, oz, dx, dy, dz, t_lo, t_hi):
                    return True
        else:
            stack[top] = left
            top += 1
            stack[top] = node_right[node]
            top += 1
    return False


@njit(cache=True, nogil=True)
def _bvh_closest_hit(node_min, node_max, node_left, node_right, order,
                     tri_v0, tri_e1, tri_e2, tri_owner,
                     ox, oy, oz, dx, dy, dz, t_lo, t_hi, ignore):
    """Smallest hit parameter in (t_lo, t_hi), or inf. Returns (t, tri)."""
    best = np.inf
    best_tri = -1
    stack = np.empty(128, dtype=np.int32)
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        limit = best if best < t_hi else t_hi
        if not _box_hit(node_min[node], node_max[node], ox, oy, oz, dx, dy, dz, t_lo, limit):
            continue
        left = node_left[node]
        if left < 0:
            start = -left - 1
            for k in range(node_right[node]):
                tri = order[start + k]
                if tri_owner[tri] == ignore:
                    continue
                v0 = tri_v0[tri]
                e1 = tri_e1[tri]
                e2 = tri_e2[tri]
                hx = dy * e2[2] - dz * e2[1]
                hy = dz * e2[0] - dx * e2[2]
                hz = dx * e2[1] - dy * e2[0]
                det = e1[0] * hx + e1[1] * hy + e1[2] * hz
                if -_EPS_DET < det < _EPS_DET:
                    continue
                inv = 1.0 / det
                sx = ox - v0[0]
                sy = oy - v0[1]
                sz = oz - v0[2]
                u = (sx * hx + sy * hy + sz * hz) * inv
                if u < -_EPS_BARY or u > 1.0 + _EPS_BARY:
                    continue
                qx = sy * e1[2] - sz * e1[1]
                qy = sz * e1[0] - sx * e1[2]
                qz = sx * e1[1] - sy * e1[0]
                v = (dx * qx + dy * qy + dz * qz) * inv
                if v < -_EPS_BARY or u + v > 1.0 + _EPS_BARY:
                    continue
                t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
                if t_lo < t < best and t < t_hi:
                    best = t
                    best_tri = tri
        else:
            stack[top] = left
            top += 1
            stack[top] = node_right[node]
            top += 1
    return best, best_tri


@njit(cache=True, nogil=True)
def _brute_any_hit(tri_v0, tri_e1, tri_e2, tri_owner,
                   ox, oy, oz, dx, dy, dz, t_lo, t_hi, ignore):
    for tri in range(tri_v0.shape[0]):
        if tri_owner[tri] == ignore:
            continue
        if _tri_hit(tri_v0[tri], tri_e1[tri], tri_e2[tri],
                    ox, oy, oz, dx, dy, dz, t_lo, t_hi):
            return True
    return False


@njit(cache=True, nogil=True)
def _bvh_any_hit_batch(node_min, node_max, node_left, node_right, order,
                       tri_v0, tri_e1, tri_e2, tri_owner,
                       origins, dirs, t_lo, t_hi, ignore, out):
    for i in range(origins.shape[0]):
        out[i] = _bvh_any_hit(
            node_min, node_max, node_left, node_right, order,
            tri_v0, tri_e1, tri_e2, tri_owner,
            origins[i, 0], origins[i, 1], origins[i, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2], t_lo, t_hi, ignore,
        )


def ray_occluded(bvh: Bvh, ray: Ray, ignore_surface: str | None = None) -> bool:
    """True if any triangle (outside the ignored surface) blocks the ray."""
    code = bvh.surface_code(ignore_surface)
    o, d = ray.origin, ray.direction
    return bool(
        _bvh_any_hit(
            bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right, bvh.order,
            bvh.tri_v0, bvh.tri_e1, bvh.tri_e2, bvh.tri_owner,
            o[0], o[1], o[2], d[0], d[1], d[2], ray.t_min, ray.t_max, code,
        )
    )


def ray_occluded_brute(bvh: Bvh, ray: Ray, ignore_surface: str | None = None) -> bool:
    """Reference all-triangles loop; must agree with ``ray_occluded``."""
    code = bvh.surface_code(ignore_surface)
    o, d = ray.origin, ray.direction
    return bool(
        _brute_any_hit(
            bvh.tri_v0, bvh.tri_e1, bvh.tri_e2, bvh.tri_owner,
            o[0], o[1], o[2], d[0], d[1], d[2], ray.t_min, ray.t_max, code,
        )
    )


def ray_closest_hit(bvh: Bvh, ray: Ray, ignore_surface: str | None = None) -> tuple[float, int]:
    """(t, triangle index) of the nearest hit, or (inf, -1)."""
    code = bvh.surface_code(ignore_surface)
    o, d = ray.origin, ray.direction
    t, tri = _bvh_closest_hit(
        bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right, bvh.order,
        bvh.tri_v0, bvh.tri_e1, bvh.tri_e2, bvh.tri_owner,
        o[0], o[1], o[2], d[0], d[1], d[2], ray.t_min, ray.t_max, code,
    )
    return float(t), int(tri)
