"""The City3D scene document: runtime types and the versioned JSON format.

A City3D file stores a geodetic origin, a terrain height grid, a set of
labeled district polygons, and buildings whose floor/wall/roof faces are
explicit 3D polygons. Dwelling records (size, rooms, rent) ride along on
their building since interiors have no geometry.

Format: JSON with sorted keys and indent 1, floats at shortest round-trip
precision, trailing newline. ``dump(load(path))`` is byte-identical to the
original file. Top-level ``"format": "city3d"`` and ``"version": 1`` are
required.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, GeometryError
from .geometry import (
    Polygon3,
    TriangleMesh,
    merge_meshes,
    mesh_from_polygons,
    mesh_volume,
    polygon_centroid,
)

CITY3D_FORMAT = "city3d"
CITY3D_VERSION = 1

FACE_ROLES = ("floor", "wall", "roof")
BUILDING_FUNCTIONS = ("main building", "outbuilding", "housing", "business", "public", "other")
MUNICIPALITIES = ("A", "B")
NEIGHBORHOODS = ("historic", "residential", "commercial", "industrial", "mixed")

METERS_PER_DEG = 6371000.0 * math.pi / 180.0  # spherical earth, per degree of latitude


def meters_to_latlon(x_m: float, y_m: float, lat0: float, lon0: float) -> tuple[float, float]:
    """Local ENU meters -> geodetic degrees around a small-extent origin."""
    lat = lat0 + y_m / METERS_PER_DEG
    lon = lon0 + x_m / (METERS_PER_DEG * math.cos(math.radians(lat0)))
    return lat, lon


# ---------------------------------------------------------------------------
# terrain


class HeightField:
    """Regular height grid. The continuous surface is the triangulated grid
    (each cell split along its (0,0)-(1,1) diagonal), so ``height_at``
    agrees exactly with the rendered mesh."""

    __slots__ = ("x0", "y0", "spacing", "heights")

    def __init__(self, x0: float, y0: float, spacing: float, heights):
        self.x0 = float(x0)
        self.y0 = float(y0)
        self.spacing = float(spacing)
        self.heights = np.asarray(heights, dtype=np.float64)
        if self.heights.ndim != 2 or min(self.heights.shape) < 2:
            raise FormatError("terrain heights must be a 2D grid, at least 2x2")
        if not np.isfinite(self.heights).all():
            raise FormatError("non-finite terrain height")
        if self.spacing <= 0:
            raise FormatError("terrain spacing must be positive")

    @property
    def ny(self) -> int:
        return self.heights.shape[0]

    @property
    def nx(self) -> int:
        return self.heights.shape[1]

    def extent(self) -> tuple[float, float, float, float]:
        return (
            self.x0,
            self.y0,
            self.x0 + (self.nx - 1) * self.spacing,
            self.y0 + (self.ny - 1) * self.spacing,
        )

    def height_at(self, x: float, y: float) -> float:
        """Piecewise-linear height; queries outside the grid clamp to its edge."""
        fx = (x - self.x0) / self.spacing
        fy = (y - self.y0) / self.spacing
        fx = min(max(fx, 0.0), self.nx - 1 - 1e-12)
        fy = min(max(fy, 0.0), self.ny - 1 - 1e-12)
        i, j = int(fx), int(fy)
        u, v = fx - i, fy - j
        z00 = self.heights[j, i]
        z10 = self.heights[j, i + 1]
        z01 = self.heights[j + 1, i]
        z11 = self.heights[j + 1, i + 1]
        if u >= v:  # lower-right triangle of the cell
            return float(z00 + u * (z10 - z00) + v * (z11 - z10))
        return float(z00 + u * (z11 - z01) + v * (z01 - z00))

    def to_mesh(self) -> TriangleMesh:
        nx, ny, s = self.nx, self.ny, self.spacing
        xs = self.x0 + s * np.arange(nx)
        ys = self.y0 + s * np.arange(ny)
        gx, gy = np.meshgrid(xs, ys)
        verts = np.column_stack([gx.ravel(), gy.ravel(), self.heights.ravel()])
        quads_j, quads_i = np.meshgrid(np.arange(ny - 1), np.arange(nx - 1), indexing="ij")
        v00 = (quads_j * nx + quads_i).ravel()
        v10 = v00 + 1
        v01 = v00 + nx
        v11 = v01 + 1
        tris = np.empty((2 * v00.size, 3), dtype=np.int32)
        tris[0::2, 0], tris[0::2, 1], tris[0::2, 2] = v00, v10, v11
        tris[1::2, 0], tris[1::2, 1], tris[1::2, 2] = v00, v11, v01
        return TriangleMesh(
            verts, tris,
            surface_codes=np.zeros(len(tris), dtype=np.int32),
            surface_names=("terrain",),
        )


# ---------------------------------------------------------------------------
# buildings


@dataclass
class Dwelling:
    id: str
    size_m2: float
    rooms: int
    rent_eur: float | None = None


@dataclass(frozen=True)
class Face:
    """One boundary polygon of a building with its structural role."""

    role: str  # floor | wall | roof
    polygon: Polygon3

    def __post_init__(self):
        if self.role not in FACE_ROLES:
            raise FormatError(f"unknown face role {self.role!r}")


@dataclass
class Building:
    """A building solid given by its boundary faces (outward winding)."""

    id: str
    function: str
    faces: list[Face]
    dwellings: list[Dwelling] = field(default_factory=list)
    _surface_ids: list[str] | None = field(default=None, repr=False, compare=False)
    _mesh: TriangleMesh | None = field(default=None, repr=False, compare=False)
    _volume: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.function not in BUILDING_FUNCTIONS:
            raise FormatError(f"building {self.id}: unknown function {self.function!r}")
        if len(self.faces) < 4:
            raise FormatError(f"building {self.id}: needs at least 4 faces to close")

    def surface_ids(self) -> list[str]:
        """Stable per-face ids: '<building>/<role><ordinal within role>'."""
        if self._surface_ids is None:
            counts = {r: 0 for r in FACE_ROLES}
            ids = []
            for f in self.faces:
                ids.append(f"{self.id}/{f.role}{counts[f.role]}")
                counts[f.role] += 1
            self._surface_ids = ids
        return self._surface_ids

    def surfaces(self) -> list[tuple[str, Face]]:
        return list(zip(self.surface_ids(), self.faces))

    def roof_surfaces(self) -> list[tuple[str, Polygon3]]:
        return [(sid, f.polygon) for sid, f in self.surfaces() if f.role == "roof"]

    def mesh(self) -> TriangleMesh:
        if self._mesh is None:
            self._mesh = mesh_from_polygons(
                [(sid, f.polygon) for sid, f in self.surfaces()]
            )
        return self._mesh

    def volume(self) -> float:
        if self._volume is None:
            self._volume = mesh_volume(self.mesh())
        return self._volume

    def centroid_xy(self) -> tuple[float, float]:
        """Footprint centroid: centroid of the floor face, else of all vertices."""
        for f in self.faces:
            if f.role == "floor":
                c = polygon_centroid(f.polygon)
                return float(c[0]), float(c[1])
        allv = np.concatenate([f.polygon.vertices for f in self.faces])
        return float(allv[:, 0].mean()), float(allv[:, 1].mean())

    def base_z(self) -> float:
        return min(float(f.polygon.vertices[:, 2].min()) for f in self.faces)


# ---------------------------------------------------------------------------
# districts


@dataclass
class District:
    name: str
    polygon: np.ndarray  # (k, 2), closed implicitly
    municipality: str
    neighborhood: str

    def __post_init__(self):
        self.polygon = np.asarray(self.polygon, dtype=np.float64)
        if self.polygon.ndim != 2 or self.polygon.shape[0] < 3 or self.polygon.shape[1] != 2:
            raise FormatError(f"district {self.name}: polygon needs >= 3 planar points")
        if not np.isfinite(self.polygon).all():
            raise FormatError(f"district {self.name}: non-finite polygon vertex")
        if self.municipality not in MUNICIPALITIES:
            raise FormatError(f"district {self.name}: bad municipality {self.municipality!r}")
        if self.neighborhood not in NEIGHBORHOODS:
            raise FormatError(f"district {self.name}: bad neighborhood {self.neighborhood!r}")

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        """Even-odd point-in-polygon; points on an edge count as inside."""
        pts = self.polygon
        n = len(pts)
        inside = False
        for i in range(n):
            x0, y0 = pts[i]
            x1, y1 = pts[(i + 1) % n]
            dx, dy = x1 - x0, y1 - y0
            seg2 = dx * dx + dy * dy
            if seg2 > 0.0:
                t = ((x - x0) * dx + (y - y0) * dy) / seg2
                if 0.0 <= t <= 1.0:
                    px, py = x0 + t * dx, y0 + t * dy
                    if (px - x) ** 2 + (py - y) ** 2 <= tol * tol:
                        return True
            if (y0 > y) != (y1 > y):
                xi = x0 + (y - y0) / (y1 - y0) * dx
                if x < xi:
                    inside = not inside
        return inside


# ---------------------------------------------------------------------------
# the city


@dataclass
class CityModel:
    name: str
    origin_lat: float
    origin_lon: float
    terrain: HeightField
    districts: list[District]
    buildings: list[Building]
    _scene: TriangleMesh | None = field(default=None, repr=False, compare=False)

    def district_of(self, x: float, y: float) -> District | None:
        for d in self.districts:
            if d.contains(x, y):
                return d
        return None

    def latlon_of(self, x: float, y: float) -> tuple[float, float]:
        return meters_to_latlon(x, y, self.origin_lat, self.origin_lon)

    def scene_mesh(self) -> TriangleMesh:
        """Terrain plus every building, welded into one mesh (cached)."""
        if self._scene is None:
            self._scene = merge_meshes(
                [self.terrain.to_mesh()] + [b.mesh() for b in self.buildings]
            )
        return self._scene

    def roof_surfaces(self) -> list[tuple[str, Polygon3, Building]]:
        out = []
        for b in self.buildings:
            for sid, poly in b.roof_surfaces():
                out.append((sid, poly, b))
        return out

    def building_by_id(self, bid: str) -> Building:
        for b in self.buildings:
            if b.id == bid:
                return b
        raise KeyError(bid)


# ---------------------------------------------------------------------------
# JSON (de)serialization


def city_to_dict(city: CityModel) -> dict:
    return {
        "format": CITY3D_FORMAT,
        "version": CITY3D_VERSION,
        "name": city.name,
        "origin": {"lat_deg": city.origin_lat, "lon_deg": city.origin_lon},
        "terrain": {
            "x0_m": city.terrain.x0,
            "y0_m": city.terrain.y0,
            "spacing_m": city.terrain.spacing,
            "nx": city.terrain.nx,
            "ny": city.terrain.ny,
            "heights_m": [float(h) for h in city.terrain.heights.ravel()],
        },
        "districts": [
            {
                "name": d.name,
                "municipality": d.municipality,
                "neighborhood": d.neighborhood,
                "polygon_m": [[float(x), float(y)] for x, y in d.polygon],
            }
            for d in city.districts
        ],
        "buildings": [
            {
                "id": b.id,
                "function": b.function,
                "faces": [
                    {
                        "role": f.role,
                        "vertices_m": [[float(c) for c in v] for v in f.polygon.vertices],
                    }
                    for f in b.faces
                ],
                "dwellings": [
                    {
                        "id": dw.id,
                        "size_m2": dw.size_m2,
                        "rooms": dw.rooms,
                        "rent_eur": dw.rent_eur,
                    }
                    for dw in b.dwellings
                ],
            }
            for b in city.buildings
        ],
    }


def dump_city_json(city: CityModel, path) -> None:
    text = json.dumps(city_to_dict(city), indent=1, sort_keys=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def _need(obj, key: str, ctx: str):
    if not isinstance(obj, dict) or key not in obj:
        raise FormatError(f"{ctx}: missing key {key!r}")
    return obj[key]


def city_from_dict(doc: dict) -> CityModel:
    if not isinstance(doc, dict):
        raise FormatError("city document must be a JSON object")
    if _need(doc, "format", "city") != CITY3D_FORMAT:
        raise FormatError(f"not a {CITY3D_FORMAT} document (format={doc.get('format')!r})")
    if _need(doc, "version", "city") != CITY3D_VERSION:
        raise FormatError(
            f"unsupported city3d version {doc['version']!r} (expected {CITY3D_VERSION})"
        )
    origin = _need(doc, "origin", "city")
    t = _need(doc, "terrain", "city")
    heights = np.asarray(_need(t, "heights_m", "terrain"), dtype=np.float64)
    nx, ny = int(_need(t, "nx", "terrain")), int(_need(t, "ny", "terrain"))
    if heights.size != nx * ny:
        raise FormatError(f"terrain: {heights.size} heights for {nx}x{ny} grid")
    terrain = HeightField(
        float(_need(t, "x0_m", "terrain")),
        float(_need(t, "y0_m", "terrain")),
        float(_need(t, "spacing_m", "terrain")),
        heights.reshape(ny, nx),
    )

    districts = []
    for i, d in enumerate(_need(doc, "districts", "city")):
        ctx = f"districts[{i}]"
        districts.append(
            District(
                name=str(_need(d, "name", ctx)),
                polygon=np.asarray(_need(d, "polygon_m", ctx), dtype=np.float64),
                municipality=str(_need(d, "municipality", ctx)),
                neighborhood=str(_need(d, "neighborhood", ctx)),
            )
        )
    if not districts:
        raise FormatError("city has no districts")

    buildings = []
    seen: set[str] = set()
    for i, b in enumerate(_need(doc, "buildings", "city")):
        ctx = f"buildings[{i}]"
        bid = str(_need(b, "id", ctx))
        if bid in seen:
            raise FormatError(f"{ctx}: duplicate building id {bid!r}")
        seen.add(bid)
        faces = []
        for k, f in enumerate(_need(b, "faces", ctx)):
            fctx = f"{ctx}.faces[{k}]"
            try:
                poly = Polygon3(_need(f, "vertices_m", fctx))
            except (GeometryError, ValueError) as e:
                raise FormatError(f"{fctx}: {e}") from None
            faces.append(Face(role=str(_need(f, "role", fctx)), polygon=poly))
        dwellings = [
            Dwelling(
                id=str(_need(dw, "id", f"{ctx}.dwellings[{k}]")),
                size_m2=float(_need(dw, "size_m2", f"{ctx}.dwellings[{k}]")),
                rooms=int(_need(dw, "rooms", f"{ctx}.dwellings[{k}]")),
                rent_eur=(None if dw.get("rent_eur") is None else float(dw["rent_eur"])),
            )
            for k, dw in enumerate(b.get("dwellings", []))
        ]
        buildings.append(Building(id=bid, function=str(_need(b, "function", ctx)),
                                  faces=faces, dwellings=dwellings))

    return CityModel(
        name=str(doc.get("name", "city")),
        origin_lat=float(_need(origin, "lat_deg", "origin")),
        origin_lon=float(_need(origin, "lon_deg", "origin")),
        terrain=terrain,
        districts=districts,
        buildings=buildings,
    )


def load_city_json(path) -> CityModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON: {e}") from None
    try:
        return city_from_dict(doc)
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None
