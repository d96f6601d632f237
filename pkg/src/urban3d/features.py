"""Feature tables for the two showcases: apartment rents and PV adoption.

Every column carries a (tier, kind) tag — tier in {1D, 2D, 3D, non-spatial},
kind in {entity, relation} — and the ablation harness slices the nested tier
subsets 1D ⊂ 2D ⊂ 3D through `select_tier`. Observations are dwellings for
the rent showcase and roof surfaces for the PV showcase; both join
building-level columns extracted from the city model.

Tables persist as CSV plus a sidecar schema file in a line-based key-value
format::

    urban3d-feature-schema 1
    showcase: pv
    outcome: pv_system
    column: municipality
      tier: 2D
      kind: relation
      dtype: categorical
      unit:
      levels: A|B

The CSV itself holds `id,x_m,y_m,z_m` (observation id and modeling site in
the local metric frame) followed by the feature columns in schema order.
Floats are written in shortest round-trip form, so write -> read -> write
reproduces identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .citygen import PvLabelConfig, RentLabelConfig, label_pv, label_rents
from .citymodel import CityModel
from .errors import ConfigError, FormatError
from .geometry import polygon_area, polygon_centroid, polygon_tilt_azimuth
from .solar import SurfaceIrradiance

TIERS = ("1D", "2D", "3D", "non-spatial")
KINDS = ("entity", "relation")
ROOF_TYPES = ("flat", "A frame", "other")
DENSITY_CLASSES = ("low", "medium", "high")
PV_OUTCOME_LEVELS = ("absent", "present")

DENSITY_RADIUS_M = 250.0
FLAT_TILT_LIMIT_DEG = 1.0    # below this, orientation is meaningless ...
FLAT_AZIMUTH_DEG = 180.0     # ... and reported as due south (rack convention)
OPTIMAL_AZIMUTH_DEG = 180.0  # south
OPTIMAL_TILT_DEG = 30.0

# roof-type classifier thresholds
FLAT_CLASS_TILT_DEG = 5.0
AFRAME_TILT_SPREAD_DEG = 10.0
AFRAME_AZIMUTH_SLACK_DEG = 15.0


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    tier: str
    kind: str
    dtype: str                              # "numeric" | "categorical"
    unit: str = ""
    levels: tuple[str, ...] | None = None
    outcome: bool = False

    def __post_init__(self):
        if self.tier not in TIERS:
            raise FormatError(f"column {self.name}: unknown tier {self.tier!r}")
        if self.kind not in KINDS:
            raise FormatError(f"column {self.name}: unknown kind {self.kind!r}")
        if self.dtype not in ("numeric", "categorical"):
            raise FormatError(f"column {self.name}: unknown dtype {self.dtype!r}")
        if self.dtype == "categorical" and not self.levels:
            raise FormatError(f"column {self.name}: categorical without levels")


class FeatureTable:
    """Observation ids, modeling sites, and tagged feature columns."""

    def __init__(self, showcase: str, ids, coords, columns, values):
        self.showcase = str(showcase)
        self.ids = tuple(str(i) for i in ids)
        self.coords = np.ascontiguousarray(coords, dtype=np.float64)
        self.columns = tuple(columns)
        self.values = {}
        n = len(self.ids)
        if len(set(self.ids)) != n:
            raise FormatError("duplicate observation ids")
        if self.coords.shape != (n, 3) or not np.isfinite(self.coords).all():
            raise FormatError("coords must be a finite (n, 3) array")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise FormatError("duplicate column names")
        outcomes = [c.name for c in self.columns if c.outcome]
        if len(outcomes) > 1:
            raise FormatError(f"more than one outcome column: {outcomes}")
        for spec in self.columns:
            if spec.name not in values:
                raise FormatError(f"missing values for column {spec.name!r}")
            col = values[spec.name]
            if spec.dtype == "numeric":
                arr = np.asarray(col, dtype=np.float64)
                if arr.shape != (n,) or not np.isfinite(arr).all():
                    raise FormatError(f"column {spec.name!r}: non-finite or wrong length")
            else:
                arr = np.array([str(v) for v in col], dtype=object)
                if arr.shape != (n,):
                    raise FormatError(f"column {spec.name!r}: wrong length")
                bad = set(arr.tolist()) - set(spec.levels)
                if bad:
                    raise FormatError(f"column {spec.name!r}: values outside declared "
                                      f"levels: {sorted(bad)}")
            self.values[spec.name] = arr

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def outcome_name(self) -> str | None:
        for c in self.columns:
            if c.outcome:
                return c.name
        return None

    def spec(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise FormatError(f"no column {name!r} in {self.showcase} table")

    def column(self, name: str) -> np.ndarray:
        self.spec(name)
        return self.values[name]

    def outcome_numeric(self) -> np.ndarray:
        """Outcome as float64; categorical binary maps second level to 1."""
        name = self.outcome_name
        if name is None:
            raise FormatError(f"{self.showcase} table has no outcome column")
        spec = self.spec(name)
        if spec.dtype == "numeric":
            return self.values[name].copy()
        if len(spec.levels) != 2:
            raise FormatError(f"outcome {name!r} is not binary")
        return (self.values[name] == spec.levels[1]).astype(np.float64)

    def replace_numeric(self, name: str, arr: np.ndarray, unit: str | None = None
                        ) -> "FeatureTable":
        spec = self.spec(name)
        if spec.dtype != "numeric":
            raise FormatError(f"column {name!r} is not numeric")
        columns = tuple(replace(c, unit=unit) if (c.name == name and unit is not None)
                        else c for c in self.columns)
        values = dict(self.values)
        values[name] = np.asarray(arr, dtype=np.float64)
        return FeatureTable(self.showcase, self.ids, self.coords, columns, values)


# ---------------------------------------------------------------------------
# registries: column tags as printed in the showcase tables

RENT_TIER_SETS = {
    "1D": ("number_of_rooms",),
    "2D": ("number_of_rooms", "apartment_size", "urban_district",
           "latitude", "longitude"),
    "3D": ("number_of_rooms", "apartment_size", "urban_district",
           "latitude", "longitude", "elevation", "building_volume"),
}

PV_TIER_SETS = {
    "1D": ("building_function",),
    "2D": ("building_function", "municipality", "neighborhood",
           "building_density", "latitude", "longitude"),
    "3D": ("building_function", "municipality", "neighborhood",
           "building_density", "latitude", "longitude", "roof_type",
           "roof_orientation", "roof_inclination", "roof_surface",
           "pv_potential"),
}

TIER_SETS = {"rent": RENT_TIER_SETS, "pv": PV_TIER_SETS}


def _rent_columns(district_levels: tuple[str, ...]) -> tuple[ColumnSpec, ...]:
    return (
        ColumnSpec("number_of_rooms", "1D", "entity", "numeric"),
        ColumnSpec("apartment_size", "2D", "entity", "numeric", unit="m2"),
        ColumnSpec("urban_district", "2D", "relation", "categorical",
                   levels=district_levels),
        ColumnSpec("latitude", "3D", "relation", "numeric", unit="deg"),
        ColumnSpec("longitude", "3D", "relation", "numeric", unit="deg"),
        ColumnSpec("elevation", "3D", "relation", "numeric", unit="m"),
        ColumnSpec("building_volume", "3D", "entity", "numeric", unit="m3"),
        ColumnSpec("apartment_rent", "non-spatial", "entity", "numeric",
                   unit="EUR/month", outcome=True),
    )


def _pv_columns(function_levels, municipality_levels, neighborhood_levels
                ) -> tuple[ColumnSpec, ...]:
    return (
        ColumnSpec("building_function", "non-spatial", "entity", "categorical",
                   levels=function_levels),
        ColumnSpec("municipality", "2D", "relation", "categorical",
                   levels=municipality_levels),
        ColumnSpec("neighborhood", "2D", "relation", "categorical",
                   levels=neighborhood_levels),
        ColumnSpec("building_density", "2D", "relation", "categorical",
                   levels=DENSITY_CLASSES),
        ColumnSpec("latitude", "2D", "relation", "numeric", unit="deg"),
        ColumnSpec("longitude", "2D", "relation", "numeric", unit="deg"),
        ColumnSpec("roof_type", "3D", "entity", "categorical", levels=ROOF_TYPES),
        ColumnSpec("roof_orientation", "3D", "entity", "numeric", unit="deg"),
        ColumnSpec("roof_inclination", "3D", "entity", "numeric", unit="deg"),
        ColumnSpec("roof_surface", "3D", "entity", "numeric", unit="m2"),
        ColumnSpec("pv_potential", "3D", "relation", "numeric", unit="h/a"),
        ColumnSpec("pv_system", "1D", "entity", "categorical",
                   levels=PV_OUTCOME_LEVELS, outcome=True),
    )


def _building_columns(district_levels, function_levels) -> tuple[ColumnSpec, ...]:
    return (
        ColumnSpec("building_function", "non-spatial", "entity", "categorical",
                   levels=function_levels),
        ColumnSpec("urban_district", "2D", "relation", "categorical",
                   levels=district_levels),
        ColumnSpec("latitude", "2D", "relation", "numeric", unit="deg"),
        ColumnSpec("longitude", "2D", "relation", "numeric", unit="deg"),
        ColumnSpec("elevation", "3D", "relation", "numeric", unit="m"),
        ColumnSpec("footprint_area", "2D", "entity", "numeric", unit="m2"),
        ColumnSpec("building_volume", "3D", "entity", "numeric", unit="m3"),
    )


# ---------------------------------------------------------------------------
# extraction


def extract_building_features(city: CityModel) -> FeatureTable:
    """One row per building: position, district, elevation, volume, footprint.

    Elevation is the terrain height at the footprint centroid. A centroid
    outside every district is an input error and names the building.
    """
    buildings = sorted(city.buildings, key=lambda b: b.id)
    if not buildings:
        raise FormatError("city has no buildings")
    ids, coords = [], []
    cols: dict[str, list] = {k: [] for k in
                             ("building_function", "urban_district", "latitude",
                              "longitude", "elevation", "footprint_area",
                              "building_volume")}
    for b in buildings:
        cx, cy = b.centroid_xy()
        district = city.district_of(cx, cy)
        if district is None:
            raise FormatError(f"building {b.id}: footprint centroid "
                              f"({cx:.2f}, {cy:.2f}) lies outside every district")
        elev = city.terrain.height_at(cx, cy)
        lat, lon = city.latlon_of(cx, cy)
        ids.append(b.id)
        coords.append((cx, cy, elev))
        cols["building_function"].append(b.function)
        cols["urban_district"].append(district.name)
        cols["latitude"].append(lat)
        cols["longitude"].append(lon)
        cols["elevation"].append(elev)
        cols["footprint_area"].append(
            sum(polygon_area(f.polygon) for f in b.faces if f.role == "floor"))
        cols["building_volume"].append(b.volume())
    district_levels = tuple(sorted(d.name for d in city.districts))
    function_levels = tuple(sorted(set(cols["building_function"])))
    specs = _building_columns(district_levels, function_levels)
    return FeatureTable("building", ids, np.array(coords), specs, cols)


def classify_roof_type(tilts_deg, azimuths_deg) -> str:
    """{flat, A frame, other} from one building's roof surfaces.

    flat: every tilt < 5 deg. A frame: exactly two surfaces tilted >= 5 deg,
    tilts within 10 deg of each other, azimuths opposed within 15 deg.
    """
    t = np.atleast_1d(np.asarray(tilts_deg, dtype=np.float64))
    a = np.atleast_1d(np.asarray(azimuths_deg, dtype=np.float64))
    if t.size == 0 or t.shape != a.shape:
        raise ConfigError("need matching, non-empty tilt and azimuth arrays")
    if np.all(t < FLAT_CLASS_TILT_DEG):
        return "flat"
    sloped = np.flatnonzero(t >= FLAT_CLASS_TILT_DEG)
    if sloped.size == 2:
        t1, t2 = t[sloped]
        d_az = abs(float(a[sloped[0]] - a[sloped[1]])) % 360.0
        d_az = min(d_az, 360.0 - d_az)
        if abs(t1 - t2) <= AFRAME_TILT_SPREAD_DEG and \
                abs(d_az - 180.0) <= AFRAME_AZIMUTH_SLACK_DEG:
            return "A frame"
    return "other"


def density_class(centroids_xy, radius_m: float = DENSITY_RADIUS_M) -> list[str]:
    """{low, medium, high} per building from neighbors within `radius_m`.

    Neighbor counts (the building itself included) scale to per-km2 and are
    split at the empirical terciles of the dataset.
    """
    pts = np.asarray(centroids_xy, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ConfigError("density_class needs >= 3 building centroids (x, y)")
    if radius_m <= 0:
        raise ConfigError("radius_m must be positive")
    tree = cKDTree(pts)
    counts = np.array([len(ix) for ix in
                       tree.query_ball_point(pts, r=radius_m)], dtype=np.float64)
    per_km2 = counts / (math.pi * radius_m ** 2 / 1e6)
    q1, q2 = np.quantile(per_km2, (1.0 / 3.0, 2.0 / 3.0))
    return [("low" if d <= q1 else "medium" if d <= q2 else "high")
            for d in per_km2]


def extract_roof_features(city: CityModel, irradiance) -> FeatureTable:
    """One row per roof surface with joined building-level columns.

    `irradiance` is a list of SurfaceIrradiance (or an id-keyed dict); a roof
    surface without a record is an error.
    """
    if not isinstance(irradiance, dict):
        irradiance = {r.surface_id: r for r in irradiance}
    btable = extract_building_features(city)
    brow = {bid: i for i, bid in enumerate(btable.ids)}
    density = density_class(btable.coords[:, :2])

    roof_by_building: dict[str, list[tuple[str, object]]] = {}
    for sid, poly, building in city.roof_surfaces():
        roof_by_building.setdefault(building.id, []).append((sid, poly))

    ids, coords = [], []
    cols: dict[str, list] = {k: [] for k in
                             ("building_function", "municipality", "neighborhood",
                              "building_density", "latitude", "longitude",
                              "roof_type", "roof_orientation", "roof_inclination",
                              "roof_surface", "pv_potential")}
    municipalities, neighborhoods = set(), set()
    for bid in sorted(roof_by_building):
        surfaces = sorted(roof_by_building[bid], key=lambda sp: sp[0])
        tilts, azims = [], []
        for _sid, poly in surfaces:
            tilt, az = polygon_tilt_azimuth(poly)
            if tilt < FLAT_TILT_LIMIT_DEG:
                az = FLAT_AZIMUTH_DEG
            tilts.append(tilt)
            azims.append(az)
        rtype = classify_roof_type(tilts, azims)
        i = brow[bid]
        cx, cy = btable.coords[i, 0], btable.coords[i, 1]
        district = city.district_of(cx, cy)
        municipalities.add(district.municipality)
        neighborhoods.add(district.neighborhood)
        for (sid, poly), tilt, az in zip(surfaces, tilts, azims):
            rec = irradiance.get(sid)
            if rec is None:
                raise FormatError(f"roof surface {sid} has no irradiance record")
            c = polygon_centroid(poly)
            lat, lon = city.latlon_of(float(c[0]), float(c[1]))
            ids.append(sid)
            coords.append((float(c[0]), float(c[1]), float(c[2])))
            cols["building_function"].append(city.building_by_id(bid).function)
            cols["municipality"].append(district.municipality)
            cols["neighborhood"].append(district.neighborhood)
            cols["building_density"].append(density[i])
            cols["latitude"].append(lat)
            cols["longitude"].append(lon)
            cols["roof_type"].append(rtype)
            cols["roof_orientation"].append(az)
            cols["roof_inclination"].append(tilt)
            cols["roof_surface"].append(polygon_area(poly))
            cols["pv_potential"].append(rec.pv_potential_h_a)

    function_levels = tuple(sorted(set(cols["building_function"])))
    specs = tuple(c for c in _pv_columns(function_levels,
                                         tuple(sorted(municipalities)),
                                         tuple(sorted(neighborhoods)))
                  if not c.outcome)
    return FeatureTable("pv", ids, np.array(coords), specs, cols)


# ---------------------------------------------------------------------------
# labeled showcase tables


def build_rent_table(city: CityModel, cfg: RentLabelConfig = RentLabelConfig()
                     ) -> tuple[FeatureTable, dict]:
    """Dwelling-level rent table; returns (table, labeling truth echo)."""
    btable = extract_building_features(city)
    brow = {bid: i for i, bid in enumerate(btable.ids)}
    ids, coords = [], []
    cols: dict[str, list] = {k: [] for k in
                             ("number_of_rooms", "apartment_size", "urban_district",
                              "latitude", "longitude", "elevation",
                              "building_volume")}
    for b in sorted(city.buildings, key=lambda bb: bb.id):
        if not b.dwellings:
            continue
        i = brow[b.id]
        for dw in b.dwellings:
            ids.append(dw.id)
            coords.append(btable.coords[i])
            cols["number_of_rooms"].append(float(dw.rooms))
            cols["apartment_size"].append(dw.size_m2)
            cols["urban_district"].append(btable.values["urban_district"][i])
            cols["latitude"].append(btable.values["latitude"][i])
            cols["longitude"].append(btable.values["longitude"][i])
            cols["elevation"].append(btable.values["elevation"][i])
            cols["building_volume"].append(btable.values["building_volume"][i])
    if not ids:
        raise FormatError("city has no dwellings to price")
    coords = np.array(coords)
    rents, truth = label_rents(
        {k: np.asarray(v, dtype=object if k == "urban_district" else np.float64)
         for k, v in cols.items()},
        coords[:, :2], cfg)
    cols["apartment_rent"] = rents
    specs = _rent_columns(tuple(sorted(set(cols["urban_district"]))))
    return FeatureTable("rent", ids, coords, specs, cols), truth


def build_pv_table(city: CityModel, irradiance,
                   cfg: PvLabelConfig = PvLabelConfig()) -> tuple[FeatureTable, dict]:
    """Roof-surface PV table; returns (table, labeling truth echo)."""
    roofs = extract_roof_features(city, irradiance)
    labels, truth = label_pv(roofs.values, roofs.coords[:, :2], cfg)
    values = dict(roofs.values)
    values["pv_system"] = [PV_OUTCOME_LEVELS[int(v)] for v in labels]
    function_spec = roofs.spec("building_function")
    municipality_spec = roofs.spec("municipality")
    neighborhood_spec = roofs.spec("neighborhood")
    specs = _pv_columns(function_spec.levels, municipality_spec.levels,
                        neighborhood_spec.levels)
    return FeatureTable("pv", roofs.ids, roofs.coords, specs, values), truth


# ---------------------------------------------------------------------------
# transforms and tier slicing


def monotone_transform(table: FeatureTable) -> FeatureTable:
    """Distance-from-optimum recoding of orientation and inclination.

    orientation -> |azimuth - 180| (degrees off south), inclination ->
    |tilt - 30| (degrees off the optimal panel angle). Linear-family models
    fit these monotone versions; tree models take the raw angles.
    """
    for name in ("roof_orientation", "roof_inclination"):
        table.spec(name)
    t = table.replace_numeric(
        "roof_orientation",
        np.abs(table.column("roof_orientation") - OPTIMAL_AZIMUTH_DEG),
        unit="deg off south")
    return t.replace_numeric(
        "roof_inclination",
        np.abs(table.column("roof_inclination") - OPTIMAL_TILT_DEG),
        unit="deg off optimum")


def select_tier(table: FeatureTable, tier: str, showcase: str | None = None
                ) -> tuple[str, ...]:
    """Predictor names for a tier; subsets are nested 1D ⊂ 2D ⊂ 3D."""
    sc = showcase or table.showcase
    if sc not in TIER_SETS:
        raise ConfigError(f"unknown showcase {sc!r}")
    if showcase is not None and table.showcase != showcase:
        raise ConfigError(f"table is {table.showcase!r}, expected {showcase!r}")
    if tier not in ("1D", "2D", "3D"):
        raise ConfigError(f"unknown tier {tier!r}")
    names = TIER_SETS[sc][tier]
    for name in names:
        table.spec(name)  # missing column -> error
    return names


def design_matrix(table: FeatureTable, columns, style: str = "linear"
                  ) -> tuple[np.ndarray, tuple[str, ...], np.ndarray]:
    """Numeric design matrix (X, names, categorical mask).

    Categoricals one-hot encode against levels present in the data, in
    declared-level order; `style="linear"` drops the first present level as
    the reference, `style="forest"` keeps all indicators.
    """
    if style not in ("linear", "forest"):
        raise ConfigError(f"unknown design style {style!r}")
    mats, names, mask = [], [], []
    for name in columns:
        spec = table.spec(name)
        if spec.outcome:
            raise ConfigError(f"outcome column {name!r} cannot be a predictor")
        col = table.values[name]
        if spec.dtype == "numeric":
            mats.append(col.astype(np.float64))
            names.append(name)
            mask.append(False)
        else:
            present = [lv for lv in spec.levels if np.any(col == lv)]
            start = 1 if style == "linear" else 0
            for lv in present[start:]:
                mats.append((col == lv).astype(np.float64))
                names.append(f"{name}={lv}")
                mask.append(True)
    n = table.n
    X = np.column_stack(mats) if mats else np.empty((n, 0))
    return X, tuple(names), np.array(mask, dtype=bool)


# ---------------------------------------------------------------------------
# persistence

SCHEMA_MAGIC = "urban3d-feature-schema 1"
META_COLUMNS = ("id", "x_m", "y_m", "z_m")


def _schema_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(".schema.txt") if p.suffix == ".csv" \
        else Path(str(p) + ".schema.txt")


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    s = str(value)
    if any(ch in s for ch in ',"\n\r'):
        raise FormatError(f"value {s!r} cannot be written to CSV")
    return s


def write_feature_table(table: FeatureTable, csv_path) -> None:
    lines = [",".join(META_COLUMNS + tuple(c.name for c in table.columns))]
    for i in range(table.n):
        row = [table.ids[i]] + [repr(float(v)) for v in table.coords[i]]
        for spec in table.columns:
            row.append(_cell(table.values[spec.name][i]))
        lines.append(",".join(row))
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    s = [SCHEMA_MAGIC, f"showcase: {table.showcase}",
         f"outcome: {table.outcome_name or ''}"]
    for c in table.columns:
        s.append(f"column: {c.name}")
        s.append(f"  tier: {c.tier}")
        s.append(f"  kind: {c.kind}")
        s.append(f"  dtype: {c.dtype}")
        s.append(f"  unit: {c.unit}")
        if c.levels is not None:
            s.append(f"  levels: {'|'.join(c.levels)}")
    with open(_schema_path(csv_path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(s) + "\n")


def _parse_schema(path) -> tuple[str, str, list[ColumnSpec]]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read schema {path}: {exc}") from exc
    if not lines or lines[0] != SCHEMA_MAGIC:
        raise FormatError(f"{path}: expected first line {SCHEMA_MAGIC!r}")
    showcase = outcome = None
    raw_cols: list[dict] = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("  "):
            if not raw_cols:
                raise FormatError(f"{path}:{ln}: attribute before any column")
            key, _, val = line.strip().partition(":")
            raw_cols[-1][key.strip()] = val.strip()
        else:
            key, _, val = line.partition(":")
            key, val = key.strip(), val.strip()
            if key == "showcase":
                showcase = val
            elif key == "outcome":
                outcome = val
            elif key == "column":
                raw_cols.append({"name": val})
            else:
                raise FormatError(f"{path}:{ln}: unknown key {key!r}")
    if showcase is None:
        raise FormatError(f"{path}: missing showcase line")
    specs = []
    for rc in raw_cols:
        try:
            specs.append(ColumnSpec(
                name=rc["name"], tier=rc["tier"], kind=rc["kind"],
                dtype=rc["dtype"], unit=rc.get("unit", ""),
                levels=tuple(rc["levels"].split("|")) if "levels" in rc else None,
                outcome=rc["name"] == outcome))
        except KeyError as exc:
            raise FormatError(f"{path}: column {rc.get('name')!r} missing {exc}") from exc
    return showcase, outcome or "", specs


def read_feature_table(csv_path) -> FeatureTable:
    showcase, _outcome, specs = _parse_schema(_schema_path(csv_path))
    try:
        lines = Path(csv_path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read {csv_path}: {exc}") from exc
    expected = ",".join(META_COLUMNS + tuple(c.name for c in specs))
    if not lines or lines[0] != expected:
        raise FormatError(f"{csv_path}: header does not match schema")
    ids, coords = [], []
    values: dict[str, list] = {c.name: [] for c in specs}
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(META_COLUMNS) + len(specs):
            raise FormatError(f"{csv_path}:{ln}: expected "
                              f"{len(META_COLUMNS) + len(specs)} fields")
        ids.append(parts[0])
        try:
            coords.append(tuple(float(v) for v in parts[1:4]))
            for spec, cell in zip(specs, parts[4:]):
                values[spec.name].append(
                    float(cell) if spec.dtype == "numeric" else cell)
        except ValueError as exc:
            raise FormatError(f"{csv_path}:{ln}: {exc}") from exc
    return FeatureTable(showcase, ids, np.array(coords, dtype=np.float64),
                        specs, values)
