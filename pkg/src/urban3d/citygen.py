"""Deterministic synthetic city, terrain, weather, and outcome generators.

Everything here is driven by a single integer seed: independent RNG streams
are derived per purpose (terrain, placement, shapes, dwellings, labels,
weather) so that, for example, adding buildings never reshuffles the terrain.
(seed, config) -> byte-identical city documents, weather files, and labels.

Outcome labels are drawn from known ground-truth models (linear for rents,
logistic for PV adoption), both with a spatially correlated Gaussian-process
term, so recovery and ablation tests can compare fitted models against the
exact generating coefficients. The generators return that truth alongside
the data.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .citymodel import (
    BUILDING_FUNCTIONS,
    NEIGHBORHOODS,
    Building,
    CityModel,
    District,
    Dwelling,
    Face,
    HeightField,
)
from .errors import ConfigError
from .geometry import Polygon3
from .weather import WeatherSeries, hours_in_year, make_series

# RNG stream purposes (spawn keys off the master seed)
_S_TERRAIN, _S_PLACE, _S_SHAPE, _S_DWELL, _S_DISTRICT, _S_RENT, _S_PV, _S_WEATHER = range(8)

_FUNCTION_FREQS = (0.22, 0.13, 0.33, 0.25, 0.02, 0.05)   # matches BUILDING_FUNCTIONS order
_NEIGHBORHOOD_FREQS = (0.10, 0.45, 0.20, 0.15, 0.10)     # matches NEIGHBORHOODS order


def _rng(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(purpose,)))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class CityConfig:
    seed: int = 0
    n_buildings: int = 50
    extent_m: float = 500.0
    terrain_amplitude_m: float = 8.0
    terrain_spacing_m: float = 25.0
    roof_mix: tuple[float, float, float] = (0.35, 0.50, 0.15)  # flat, gable, shed
    district_grid: tuple[int, int] = (4, 3)
    origin_lat: float = 52.5
    origin_lon: float = 13.4
    year: int = 2020
    name: str = "city"
    storey_m: float = 3.0
    dwelling_size_log_mean: float = 4.35
    dwelling_size_log_sd: float = 0.30
    with_dwellings: bool = True

    def validate(self) -> "CityConfig":
        if self.n_buildings < 3:
            raise ConfigError(f"n_buildings must be >= 3, got {self.n_buildings}")
        if self.extent_m <= 0:
            raise ConfigError("extent_m must be positive")
        if self.terrain_amplitude_m < 0:
            raise ConfigError("terrain amplitude must be >= 0")
        if self.terrain_spacing_m <= 0:
            raise ConfigError("terrain spacing must be positive")
        if len(self.roof_mix) != 3 or min(self.roof_mix) < 0 or abs(sum(self.roof_mix) - 1.0) > 1e-9:
            raise ConfigError(f"roof_mix must be 3 nonnegative fractions summing to 1, got {self.roof_mix}")
        gx, gy = self.district_grid
        if gx < 1 or gy < 1:
            raise ConfigError("district grid must be at least 1x1")
        if not -66.0 <= self.origin_lat <= 66.0:
            raise ConfigError("origin latitude must be within [-66, 66]")
        if self.storey_m <= 0:
            raise ConfigError("storey height must be positive")
        return self


# ---------------------------------------------------------------------------
# terrain: smooth value noise on a lattice


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _value_noise_octave(rng: np.random.Generator, nx: int, ny: int, cells: int) -> np.ndarray:
    lattice = rng.random((cells + 1, cells + 1))
    fx = np.linspace(0.0, cells, nx)
    fy = np.linspace(0.0, cells, ny)
    ix = np.minimum(fx.astype(np.int64), cells - 1)
    iy = np.minimum(fy.astype(np.int64), cells - 1)
    tx = _smoothstep(fx - ix)
    ty = _smoothstep(fy - iy)
    v00 = lattice[np.ix_(iy, ix)]
    v10 = lattice[np.ix_(iy, ix + 1)]
    v01 = lattice[np.ix_(iy + 1, ix)]
    v11 = lattice[np.ix_(iy + 1, ix + 1)]
    top = v00 * (1 - tx) + v10 * tx
    bot = v01 * (1 - tx) + v11 * tx
    return top * (1 - ty[:, None]) + bot * ty[:, None]


def gen_terrain(cfg: CityConfig) -> HeightField:
    """Smooth fractal-ish heightfield; amplitude 0 gives flat terrain at z=0."""
    cfg.validate()
    rng = _rng(cfg.seed, _S_TERRAIN)
    n = max(2, int(round(cfg.extent_m / cfg.terrain_spacing_m)) + 1)
    raw = np.zeros((n, n))
    total_w = 0.0
    for cells, w in ((4, 1.0), (8, 0.5), (16, 0.25)):
        raw += w * _value_noise_octave(rng, n, n, cells)
        total_w += w
    raw /= total_w
    ptp = raw.max() - raw.min()
    if ptp < 1e-12 or cfg.terrain_amplitude_m == 0.0:
        heights = np.zeros((n, n))
    else:
        heights = cfg.terrain_amplitude_m * (raw - raw.min()) / ptp
    return HeightField(0.0, 0.0, cfg.extent_m / (n - 1), heights)


# ---------------------------------------------------------------------------
# parametric building solids (explicit outward-wound faces)


def _v(c: np.ndarray, i: int, z: float) -> tuple[float, float, float]:
    return (float(c[i, 0]), float(c[i, 1]), float(z))


def flat_roof_faces(corners: np.ndarray, base_z: float, eave_m: float) -> list[Face]:
    c, z0, ze = corners, base_z, base_z + eave_m
    faces = [Face("floor", Polygon3([_v(c, 3, z0), _v(c, 2, z0), _v(c, 1, z0), _v(c, 0, z0)]))]
    faces.append(Face("roof", Polygon3([_v(c, 0, ze), _v(c, 1, ze), _v(c, 2, ze), _v(c, 3, ze)])))
    for k in range(4):
        j = (k + 1) % 4
        faces.append(Face("wall", Polygon3([_v(c, k, z0), _v(c, j, z0), _v(c, j, ze), _v(c, k, ze)])))
    return faces


def gable_roof_faces(corners: np.ndarray, base_z: float, eave_m: float, tilt_deg: float) -> list[Face]:
    """Two sloped roof quads meeting at a ridge over the longer footprint axis,
    with pentagonal gable-end walls."""
    c, z0, ze = corners, base_z, base_z + eave_m
    e01 = float(np.hypot(*(c[1] - c[0])))
    e12 = float(np.hypot(*(c[2] - c[1])))
    if e01 >= e12:
        (l0, l1), (l2, l3) = (0, 1), (2, 3)
        (a0, a1), (b0, b1) = (1, 2), (3, 0)
        span = e12
    else:
        (l0, l1), (l2, l3) = (1, 2), (3, 0)
        (a0, a1), (b0, b1) = (2, 3), (0, 1)
        span = e01
    zr = ze + (span / 2.0) * math.tan(math.radians(tilt_deg))
    m_a = (c[a0] + c[a1]) / 2.0
    m_b = (c[b0] + c[b1]) / 2.0
    va = (float(m_a[0]), float(m_a[1]), zr)
    vb = (float(m_b[0]), float(m_b[1]), zr)

    faces = [Face("floor", Polygon3([_v(c, 3, z0), _v(c, 2, z0), _v(c, 1, z0), _v(c, 0, z0)]))]
    faces.append(Face("roof", Polygon3([_v(c, l0, ze), _v(c, l1, ze), va, vb])))
    faces.append(Face("roof", Polygon3([_v(c, l2, ze), _v(c, l3, ze), vb, va])))
    faces.append(Face("wall", Polygon3([_v(c, l0, z0), _v(c, l1, z0), _v(c, l1, ze), _v(c, l0, ze)])))
    faces.append(Face("wall", Polygon3([_v(c, l2, z0), _v(c, l3, z0), _v(c, l3, ze), _v(c, l2, ze)])))
    faces.append(Face("wall", Polygon3([_v(c, a0, z0), _v(c, a1, z0), _v(c, a1, ze), va, _v(c, a0, ze)])))
    faces.append(Face("wall", Polygon3([_v(c, b0, z0), _v(c, b1, z0), _v(c, b1, ze), vb, _v(c, b0, ze)])))
    return faces


def shed_roof_faces(corners: np.ndarray, base_z: float, eave_m: float, tilt_deg: float) -> list[Face]:
    """Single sloped roof quad: edge (0,1) raised, edge (2,3) at the eaves."""
    c, z0, ze = corners, base_z, base_z + eave_m
    span = float(np.hypot(*(c[2] - c[1])))
    zh = ze + span * math.tan(math.radians(tilt_deg))
    faces = [Face("floor", Polygon3([_v(c, 3, z0), _v(c, 2, z0), _v(c, 1, z0), _v(c, 0, z0)]))]
    faces.append(Face("roof", Polygon3([_v(c, 0, zh), _v(c, 1, zh), _v(c, 2, ze), _v(c, 3, ze)])))
    faces.append(Face("wall", Polygon3([_v(c, 0, z0), _v(c, 1, z0), _v(c, 1, zh), _v(c, 0, zh)])))
    faces.append(Face("wall", Polygon3([_v(c, 2, z0), _v(c, 3, z0), _v(c, 3, ze), _v(c, 2, ze)])))
    faces.append(Face("wall", Polygon3([_v(c, 1, z0), _v(c, 2, z0), _v(c, 2, ze), _v(c, 1, zh)])))
    faces.append(Face("wall", Polygon3([_v(c, 3, z0), _v(c, 0, z0), _v(c, 0, zh), _v(c, 3, ze)])))
    return faces


def _rect_corners(cx: float, cy: float, a: float, b: float, angle: float) -> np.ndarray:
    """CCW rectangle corners: half extents (a, b), rotated by angle."""
    local = np.array([[a, -b], [a, b], [-a, b], [-a, -b]])
    ca, sa = math.cos(angle), math.sin(angle)
    rot = np.array([[ca, -sa], [sa, ca]])
    return local @ rot.T + np.array([cx, cy])


# ---------------------------------------------------------------------------
# city generation


def _gen_districts(cfg: CityConfig) -> list[District]:
    rng = _rng(cfg.seed, _S_DISTRICT)
    gx, gy = cfg.district_grid
    cw, ch = cfg.extent_m / gx, cfg.extent_m / gy
    districts = []
    for j in range(gy):
        for i in range(gx):
            x0, y0 = i * cw, j * ch
            x1, y1 = x0 + cw, y0 + ch
            center_x = (x0 + x1) / 2.0
            districts.append(
                District(
                    name=str(j * gx + i + 1),
                    polygon=np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]),
                    municipality="A" if center_x < cfg.extent_m / 2.0 else "B",
                    neighborhood=str(rng.choice(NEIGHBORHOODS, p=_NEIGHBORHOOD_FREQS)),
                )
            )
    return districts


def gen_city(cfg: CityConfig) -> tuple[CityModel, dict]:
    """Jittered-grid city on generated terrain.

    Footprint half-extents are bounded so the circumscribed circles of
    neighboring cells cannot meet; a bounded redraw loop guards the bound.
    Returns the city plus a truth/echo dict for the ground-truth sidecar.
    """
    cfg.validate()
    terrain = gen_terrain(cfg)
    districts = _gen_districts(cfg)
    rng_p = _rng(cfg.seed, _S_PLACE)
    rng_s = _rng(cfg.seed, _S_SHAPE)
    rng_d = _rng(cfg.seed, _S_DWELL)

    n = cfg.n_buildings
    k = math.ceil(math.sqrt(n))
    cell = cfg.extent_m / k
    chosen = np.sort(rng_p.choice(k * k, size=n, replace=False))
    width = max(4, len(str(n - 1)))

    placed: list[tuple[float, float, float]] = []  # (cx, cy, circumradius)
    buildings: list[Building] = []
    for idx, cell_id in enumerate(chosen):
        gxc = (int(cell_id) % k + 0.5) * cell
        gyc = (int(cell_id) // k + 0.5) * cell
        for _attempt in range(20):
            cx = gxc + rng_p.uniform(-0.15, 0.15) * cell
            cy = gyc + rng_p.uniform(-0.15, 0.15) * cell
            a = rng_p.uniform(0.10, 0.22) * cell
            b = rng_p.uniform(0.08, 0.18) * cell
            r = math.hypot(a, b)
            if all((cx - px) ** 2 + (cy - py) ** 2 > (r + pr) ** 2 for px, py, pr in placed):
                break
        else:
            raise ConfigError(f"could not place building {idx} without overlap")
        placed.append((cx, cy, r))
        angle = rng_p.uniform(0.0, math.pi)
        corners = _rect_corners(cx, cy, a, b, angle)

        function = str(rng_s.choice(BUILDING_FUNCTIONS, p=_FUNCTION_FREQS))
        eave = rng_s.uniform(3.0, 5.0) if function == "outbuilding" else rng_s.uniform(3.0, 20.0)
        kind = str(rng_s.choice(("flat", "gable", "shed"), p=cfg.roof_mix))
        # sink slightly into the terrain so slopes never leave a gap
        base_z = min(terrain.height_at(float(x), float(y)) for x, y in corners) - 0.2
        if kind == "flat":
            faces = flat_roof_faces(corners, base_z, eave)
        elif kind == "gable":
            faces = gable_roof_faces(corners, base_z, eave, rng_s.uniform(20.0, 45.0))
        else:
            faces = shed_roof_faces(corners, base_z, eave, rng_s.uniform(8.0, 25.0))

        bid = f"b{idx:0{width}d}"
        dwellings: list[Dwelling] = []
        if cfg.with_dwellings and function in ("main building", "housing"):
            floors = max(1, int(eave // cfg.storey_m))
            count = sum(int(rng_d.integers(1, 3)) for _ in range(floors))
            for dwi in range(count):
                size = float(rng_d.lognormal(cfg.dwelling_size_log_mean, cfg.dwelling_size_log_sd))
                rooms = int(np.clip(round(size / 28.0 + rng_d.normal(0.0, 0.6)), 1, 7))
                dwellings.append(Dwelling(id=f"{bid}/dw{dwi:02d}", size_m2=size, rooms=rooms))
        buildings.append(Building(id=bid, function=function, faces=faces, dwellings=dwellings))

    city = CityModel(
        name=cfg.name,
        origin_lat=cfg.origin_lat,
        origin_lon=cfg.origin_lon,
        terrain=terrain,
        districts=districts,
        buildings=buildings,
    )
    truth = {
        "config": {**asdict(cfg), "roof_mix": list(cfg.roof_mix),
                   "district_grid": list(cfg.district_grid)},
        "n_dwellings": int(sum(len(b.dwellings) for b in buildings)),
    }
    return city, truth


# ---------------------------------------------------------------------------
# synthetic weather: clear-sky envelope x autocorrelated clearness index


def gen_weather(seed: int, lat_deg: float, year: int, lon_deg: float = 0.0) -> WeatherSeries:
    """Hourly synthetic weather for one calendar year.

    Clear-sky GHI follows a simple sin-elevation envelope; cloudiness is an
    AR(1) clearness index (slow day-to-day component plus faster hourly
    component), clipped to [0.1, 1]. The diffuse fraction rises as the sky
    gets cloudier. Temperature is a seasonal plus diurnal sinusoid.
    """
    if abs(lat_deg) > 66.0:
        raise ConfigError("weather generator supports |latitude| <= 66 only")
    from .solar import sun_positions  # deferred: solar imports weather

    n = hours_in_year(year)
    y0 = np.datetime64(f"{year}-01-01").astype("datetime64[s]").astype(np.int64)
    epochs = y0 + 3600 * np.arange(n)
    elev, _az = sun_positions(epochs, lat_deg, lon_deg)
    sin_e = np.sin(np.radians(np.maximum(elev, 0.0)))
    ghi_clear = np.where(elev > 0.0, 1098.0 * sin_e * np.exp(-0.059 / np.maximum(sin_e, 1e-6)), 0.0)

    rng = _rng(seed, _S_WEATHER)
    ndays = n // 24
    d = np.empty(ndays)
    d[0] = rng.normal()
    for i in range(1, ndays):
        d[i] = 0.7 * d[i - 1] + math.sqrt(1.0 - 0.49) * rng.normal()
    k_day = np.clip(0.62 + 0.22 * d, 0.1, 1.0)
    h = np.empty(n)
    h[0] = rng.normal()
    for i in range(1, n):
        h[i] = 0.85 * h[i - 1] + math.sqrt(1.0 - 0.85 ** 2) * rng.normal()
    clearness = np.clip(np.repeat(k_day, 24) + 0.07 * h, 0.1, 1.0)

    ghi = clearness * ghi_clear
    diffuse_frac = np.clip(1.12 - 1.08 * clearness, 0.12, 1.0)
    dhi = diffuse_frac * ghi
    hours = np.arange(n)
    temp = (
        10.0
        - 9.0 * np.cos(2.0 * math.pi * (hours / 24.0 - 15.0) / 365.0)
        - 4.0 * np.cos(2.0 * math.pi * ((hours % 24) - 14.0) / 24.0)
    )
    return make_series(year, 3600, ghi, dhi, temp)


# ---------------------------------------------------------------------------
# spatial Gaussian-process draws for label noise


def gp_field(
    points_xy: np.ndarray,
    sigma: float,
    range_m: float,
    rng: np.random.Generator,
    dense_max: int = 2000,
) -> np.ndarray:
    """Draw a zero-mean GP with covariance sigma^2 * exp(-d / range_m).

    Small point sets get an exact dense draw; larger ones a low-rank draw
    projected through a knot grid (same structure the spatial models fit).
    """
    pts = np.asarray(points_xy, dtype=np.float64)
    n = len(pts)
    if sigma <= 0.0 or n == 0:
        return np.zeros(n)
    s2 = sigma * sigma
    if n <= dense_max:
        cov = s2 * np.exp(-cdist(pts, pts) / range_m)
        cov[np.diag_indices_from(cov)] += 1e-8 * s2
        return np.linalg.cholesky(cov) @ rng.standard_normal(n)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    side = float(max(hi - lo))
    m_side = int(np.clip(math.ceil(side / (range_m / 1.5)), 8, 24))
    gx = np.linspace(lo[0], hi[0], m_side)
    gy = np.linspace(lo[1], hi[1], m_side)
    mx, my = np.meshgrid(gx, gy)
    knots = np.column_stack([mx.ravel(), my.ravel()])
    c_mm = s2 * np.exp(-cdist(knots, knots) / range_m)
    c_mm[np.diag_indices_from(c_mm)] += 1e-8 * s2
    chol = np.linalg.cholesky(c_mm)
    w = chol @ rng.standard_normal(len(knots))
    c_nm = s2 * np.exp(-cdist(pts, knots) / range_m)
    return c_nm @ np.linalg.solve(c_mm, w)


def _zscore(v: np.ndarray) -> np.ndarray:
    sd = float(v.std())
    return (v - v.mean()) / max(sd, 1e-9)


# ---------------------------------------------------------------------------
# rent labels (linear truth + district effects + GP residual)


@dataclass(frozen=True)
class RentLabelConfig:
    seed: int = 0
    intercept: float = 900.0
    coef_rooms: float = 110.0       # on z-scored number of rooms
    coef_size: float = 95.0         # on z-scored apartment size
    coef_volume: float = 120.0      # on z-scored building volume
    coef_elevation: float = 80.0    # on z-scored elevation
    district_sd: float = 80.0
    gp_sigma: float = 70.0
    gp_range_m: float = 150.0
    noise_sd: float = 100.0
    rent_floor: float = 150.0

    def validate(self) -> "RentLabelConfig":
        for name in ("district_sd", "gp_sigma", "gp_range_m", "noise_sd"):
            if getattr(self, name) < 0 or (name == "gp_range_m" and self.gp_range_m <= 0):
                raise ConfigError(f"{name} must be positive")
        return self


def label_rents(table: dict[str, np.ndarray], coords_xy: np.ndarray,
                cfg: RentLabelConfig) -> tuple[np.ndarray, dict]:
    """Monthly rents per dwelling row.

    `table` needs number_of_rooms, apartment_size, building_volume,
    elevation (numeric) and urban_district (strings); `coords_xy` are the
    dwelling sites in meters. Returns (rents, truth echo).
    """
    cfg.validate()
    for col in ("number_of_rooms", "apartment_size", "building_volume", "elevation", "urban_district"):
        if col not in table:
            raise ConfigError(f"rent labeling needs column {col!r}")
    rng = _rng(cfg.seed, _S_RENT)
    mean = (
        cfg.intercept
        + cfg.coef_rooms * _zscore(np.asarray(table["number_of_rooms"], dtype=np.float64))
        + cfg.coef_size * _zscore(np.asarray(table["apartment_size"], dtype=np.float64))
        + cfg.coef_volume * _zscore(np.asarray(table["building_volume"], dtype=np.float64))
        + cfg.coef_elevation * _zscore(np.asarray(table["elevation"], dtype=np.float64))
    )
    districts = np.asarray(table["urban_district"])
    levels = sorted(set(districts.tolist()))
    effects = {lv: cfg.district_sd * float(rng.normal()) for lv in levels}
    mean = mean + np.array([effects[d] for d in districts])
    gp = gp_field(coords_xy, cfg.gp_sigma, cfg.gp_range_m, rng)
    rents = mean + gp + cfg.noise_sd * rng.standard_normal(len(mean))
    rents = np.maximum(rents, cfg.rent_floor)
    truth = {
        "model": "rent",
        "config": asdict(cfg),
        "district_effects": {k: float(v) for k, v in effects.items()},
        "realized_mean": float(rents.mean()),
        "realized_sd": float(rents.std()),
    }
    return rents, truth


# ---------------------------------------------------------------------------
# PV adoption labels (logistic truth, rate-calibrated intercept, GP residual)


@dataclass(frozen=True)
class PvLabelConfig:
    seed: int = 0
    base_rate: float = 0.02
    coef_pv_potential: float = 1.3      # on z-scored pv_potential
    coef_orientation: float = -0.7      # on z-scored |azimuth - 180|
    coef_inclination: float = -0.45     # on z-scored |tilt - 30|
    coef_surface: float = 0.35          # on z-scored roof surface area
    roof_type_effects: dict = field(default_factory=lambda: {
        "flat": -0.3, "A frame": 0.3, "other": 0.0})
    function_effects: dict = field(default_factory=lambda: {
        "main building": 0.5, "outbuilding": -1.2, "housing": 0.6,
        "business": 0.1, "public": 0.2, "other": -0.5})
    municipality_effects: dict = field(default_factory=lambda: {"A": 0.2, "B": -0.2})
    neighborhood_effects: dict = field(default_factory=lambda: {
        "historic": -0.6, "residential": 0.4, "commercial": 0.0,
        "industrial": -0.4, "mixed": 0.1})
    density_effects: dict = field(default_factory=lambda: {
        "low": 0.4, "medium": 0.0, "high": -0.5})
    gp_sigma: float = 1.0
    gp_range_m: float = 180.0

    def validate(self) -> "PvLabelConfig":
        if not 0.0 < self.base_rate < 1.0:
            raise ConfigError(f"base_rate must be in (0, 1), got {self.base_rate}")
        if self.gp_sigma < 0 or self.gp_range_m <= 0:
            raise ConfigError("GP noise parameters must be positive")
        return self


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def label_pv(table: dict[str, np.ndarray], coords_xy: np.ndarray,
             cfg: PvLabelConfig) -> tuple[np.ndarray, dict]:
    """Bernoulli PV-adoption labels per roof-surface row.

    The logistic intercept is calibrated by bisection so the expected
    positive rate equals cfg.base_rate. Returns (0/1 labels, truth echo
    including the calibrated intercept and realized rate).
    """
    cfg.validate()
    needed = ("pv_potential", "roof_orientation", "roof_inclination", "roof_surface",
              "roof_type", "building_function", "municipality", "neighborhood",
              "building_density")
    for col in needed:
        if col not in table:
            raise ConfigError(f"PV labeling needs column {col!r}")
    rng = _rng(cfg.seed, _S_PV)

    eta = (
        cfg.coef_pv_potential * _zscore(np.asarray(table["pv_potential"], dtype=np.float64))
        + cfg.coef_orientation * _zscore(np.abs(np.asarray(table["roof_orientation"], dtype=np.float64) - 180.0))
        + cfg.coef_inclination * _zscore(np.abs(np.asarray(table["roof_inclination"], dtype=np.float64) - 30.0))
        + cfg.coef_surface * _zscore(np.asarray(table["roof_surface"], dtype=np.float64))
    )
    for col, effects in (
        ("roof_type", cfg.roof_type_effects),
        ("building_function", cfg.function_effects),
        ("municipality", cfg.municipality_effects),
        ("neighborhood", cfg.neighborhood_effects),
        ("building_density", cfg.density_effects),
    ):
        values = np.asarray(table[col])
        unknown = set(values.tolist()) - set(effects)
        if unknown:
            raise ConfigError(f"{col}: no effect configured for levels {sorted(unknown)}")
        eta += np.array([effects[v] for v in values])
    eta += gp_field(coords_xy, cfg.gp_sigma, cfg.gp_range_m, rng)

    lo, hi = -30.0, 30.0
    if not _sigmoid(eta + lo).mean() <= cfg.base_rate <= _sigmoid(eta + hi).mean():
        raise ConfigError(f"base rate {cfg.base_rate} unreachable by intercept calibration")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _sigmoid(eta + mid).mean() < cfg.base_rate:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    intercept = 0.5 * (lo + hi)
    p = _sigmoid(eta + intercept)
    labels = (rng.random(len(p)) < p).astype(np.int64)
    truth = {
        "model": "pv",
        "config": {**asdict(cfg)},
        "calibrated_intercept": float(intercept),
        "expected_rate": float(p.mean()),
        "realized_rate": float(labels.mean()),
    }
    return labels, truth
