"""Sun position, plane-of-array irradiance, ray-traced shading, PV yield.

The chain per surface and timestep is: sun position (day-angle Fourier
series, no refraction), isotropic-sky transposition of (GHI, DHI) onto the
tilted plane, a beam-shading test against the full scene BVH from a handful
of stratified sample points, and a temperature-dependent PV output per
kW-peak. Annual aggregation yields plane-of-array kWh/m^2a, full-load hours,
and the shaded fraction of daylight sample-instants.

Sun position follows the classic Fourier-series almanac fit (declination and
equation of time as low-order series in the day angle), good to about half a
degree, which is plenty at the city scale. Azimuth convention: 0 = north,
90 = east, 180 = south. No atmospheric refraction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
from numba import njit

from .errors import ConfigError, FormatError
from .geometry import (
    Bvh,
    Polygon3,
    _bvh_any_hit,
    _bvh_closest_hit,
    polygon_normal,
    polygon_sample_points,
    polygon_tilt_azimuth,
)
from .weather import WeatherSeries, format_timestamp

SOLAR_CONSTANT = 1367.0      # W/m^2, DNI clamp ceiling
MIN_SIN_ELEVATION = 0.01     # DNI denominator floor
SHADING_OFFSET = 1e-3        # m, ray origin offset along the surface normal
GHI_NIGHT_SLACK = 5.0        # W/m^2 tolerated after sunset (twilight)


@dataclass(frozen=True)
class SunPosition:
    elevation_deg: float
    azimuth_deg: float

    @property
    def up(self) -> bool:
        return self.elevation_deg > 0.0

    def unit_vector(self) -> np.ndarray:
        e = math.radians(self.elevation_deg)
        a = math.radians(self.azimuth_deg)
        return np.array([math.cos(e) * math.sin(a), math.cos(e) * math.cos(a), math.sin(e)])


def _day_angle_terms(epochs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(declination rad, equation of time min, minutes past UTC midnight)."""
    dt64 = epochs.astype("datetime64[s]")
    days = dt64.astype("datetime64[D]")
    doy = (days - days.astype("datetime64[Y]")).astype(np.int64) + 1
    minutes = (dt64 - days).astype("timedelta64[s]").astype(np.float64) / 60.0
    g = 2.0 * np.pi / 365.0 * (doy - 1 + (minutes / 60.0 - 12.0) / 24.0)
    decl = (
        0.006918
        - 0.399912 * np.cos(g)
        + 0.070257 * np.sin(g)
        - 0.006758 * np.cos(2 * g)
        + 0.000907 * np.sin(2 * g)
        - 0.002697 * np.cos(3 * g)
        + 0.00148 * np.sin(3 * g)
    )
    eqtime = 229.18 * (
        0.000075
        + 0.001868 * np.cos(g)
        - 0.032077 * np.sin(g)
        - 0.014615 * np.cos(2 * g)
        - 0.040849 * np.sin(2 * g)
    )
    return decl, eqtime, minutes


def sun_positions(epochs, lat_deg: float, lon_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (elevation_deg, azimuth_deg) for epoch-second timestamps."""
    epochs = np.asarray(epochs, dtype=np.int64)
    decl, eqtime, minutes = _day_angle_terms(epochs)
    tst = minutes + eqtime + 4.0 * lon_deg          # true solar time, minutes
    ha = np.radians(tst / 4.0 - 180.0)              # hour angle, 0 at solar noon
    lat = math.radians(lat_deg)
    sin_e = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(ha)
    sin_e = np.clip(sin_e, -1.0, 1.0)
    elev = np.degrees(np.arcsin(sin_e))
    cos_e = np.sqrt(np.maximum(0.0, 1.0 - sin_e**2))
    east = -np.cos(decl) * np.sin(ha)
    north = np.where(
        cos_e > 1e-12,
        (np.sin(decl) - sin_e * math.sin(lat)) / max(math.cos(lat), 1e-12),
        0.0,
    )
    az = np.degrees(np.arctan2(east, north)) % 360.0
    return elev, az


def sun_position(when: datetime, lat_deg: float, lon_deg: float) -> SunPosition:
    """Sun position at an aware datetime (converted to UTC)."""
    if when.tzinfo is None:
        raise ConfigError("sun_position needs an aware datetime")
    epoch = np.array([int(when.astimezone(timezone.utc).timestamp())], dtype=np.int64)
    elev, az = sun_positions(epoch, lat_deg, lon_deg)
    return SunPosition(float(elev[0]), float(az[0]))


def solar_noon_utc(year: int, month: int, day: int, lon_deg: float) -> datetime:
    """UTC instant of local solar noon (hour angle 0) on the given date."""
    base = datetime(year, month, day, 12, 0, tzinfo=timezone.utc)
    minutes = 720.0
    for _ in range(2):  # eqtime drifts < 0.5 min/day; two passes are exact enough
        probe = np.array([int(base.timestamp()) + int((minutes - 720.0) * 60)], dtype=np.int64)
        _, eqtime, _ = _day_angle_terms(probe)
        minutes = 720.0 - 4.0 * lon_deg - float(eqtime[0])
    day_start = datetime(year, month, day, tzinfo=timezone.utc)
    return datetime.fromtimestamp(int(day_start.timestamp()) + round(minutes * 60), tz=timezone.utc)


def incidence_cos(sun: SunPosition | tuple, tilt_deg: float, azimuth_deg: float):
    """cos(angle of incidence) on a tilted plane; negative means behind."""
    if isinstance(sun, SunPosition):
        elev, az = sun.elevation_deg, sun.azimuth_deg
    else:
        elev, az = sun
    e = np.radians(elev)
    b = math.radians(tilt_deg)
    return np.cos(b) * np.sin(e) + np.sin(b) * np.cos(e) * np.cos(np.radians(az) - math.radians(azimuth_deg))


def transpose_poa(ghi, dhi, sun_elevation_deg, cos_incidence, tilt_deg, albedo=0.2):
    """Isotropic-sky transposition; returns (beam, diffuse, reflected) W/m^2.

    DNI is back-computed as (GHI - DHI) / max(sin e, 0.01) and clamped to
    [0, 1367]. For a horizontal unshaded plane the parts sum back to GHI
    (closure), as long as neither clamp engages.
    """
    ghi = np.asarray(ghi, dtype=np.float64)
    dhi = np.asarray(dhi, dtype=np.float64)
    elev = np.asarray(sun_elevation_deg, dtype=np.float64)
    cos_i = np.asarray(cos_incidence, dtype=np.float64)
    sin_e = np.sin(np.radians(elev))
    dni = (ghi - dhi) / np.maximum(sin_e, MIN_SIN_ELEVATION)
    dni = np.clip(dni, 0.0, SOLAR_CONSTANT)
    beam = np.where(elev > 0.0, dni * np.maximum(cos_i, 0.0), 0.0)
    cos_b = math.cos(math.radians(tilt_deg))
    diffuse = dhi * (1.0 + cos_b) / 2.0
    reflected = ghi * albedo * (1.0 - cos_b) / 2.0
    return beam, diffuse, reflected


def is_beam_shaded(
    bvh: Bvh,
    point,
    normal,
    sun: SunPosition,
    ignore_surface: str | None = None,
) -> bool:
    """True if the direct beam toward `sun` is blocked at `point`.

    The ray starts 1 mm along the surface normal so the surface does not
    shade itself. Sun at or below the horizon counts as shaded.
    """
    if not sun.up:
        return True
    p = np.asarray(point, dtype=np.float64) + SHADING_OFFSET * np.asarray(normal, dtype=np.float64)
    d = sun.unit_vector()
    code = bvh.surface_code(ignore_surface)
    return bool(
        _bvh_any_hit(
            bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right, bvh.order,
            bvh.tri_v0, bvh.tri_e1, bvh.tri_e2, bvh.tri_owner,
            p[0], p[1], p[2], d[0], d[1], d[2], 0.0, np.inf, code,
        )
    )


# ---------------------------------------------------------------------------
# annual aggregation


@dataclass(frozen=True)
class IrradianceConfig:
    """Knobs for the annual simulation.

    system_efficiency is a flat performance ratio folded into the PV output
    (wiring/inverter/soiling losses are otherwise out of scope); temperature
    losses use the NOCT cell-temperature model with coefficient
    temp_coeff_gamma per Kelvin above 25 C.
    """

    albedo: float = 0.2
    samples_per_surface: int = 4
    temp_coeff_gamma: float = -0.004
    noct_c: float = 45.0
    step_hours: float = 1.0
    system_efficiency: float = 0.70
    threads: int = 1

    def validate(self) -> "IrradianceConfig":
        if not 0.0 <= self.albedo <= 1.0:
            raise ConfigError(f"albedo must be in [0, 1], got {self.albedo}")
        if self.samples_per_surface < 1:
            raise ConfigError("samples_per_surface must be >= 1")
        if self.step_hours <= 0:
            raise ConfigError("step_hours must be positive")
        if not 0.0 < self.system_efficiency <= 1.0:
            raise ConfigError("system_efficiency must be in (0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.noct_c <= 20.0:
            raise ConfigError("noct_c must exceed the 20 C NOCT ambient reference")
        return self


@dataclass(frozen=True)
class SurfaceIrradiance:
    surface_id: str
    poa_kwh_m2a: float        # annual plane-of-array insolation
    pv_potential_h_a: float   # annual full-load hours per kW-peak
    shaded_fraction: float    # beam-shaded share of daylight sample-instants


@njit(cache=True, nogil=True)
def _shade_counts(node_min, node_max, node_left, node_right, order,
                  tri_v0, tri_e1, tri_e2, tri_owner,
                  origins, dirs, ignore, out):
    for t in range(dirs.shape[0]):
        c = 0
        for i in range(origins.shape[0]):
            if _bvh_any_hit(node_min, node_max, node_left, node_right, order,
                            tri_v0, tri_e1, tri_e2, tri_owner,
                            origins[i, 0], origins[i, 1], origins[i, 2],
                            dirs[t, 0], dirs[t, 1], dirs[t, 2],
                            0.0, np.inf, ignore):
                c += 1
        out[t] = c
    return 0


def _pv_power(poa, temp_c, cfg: IrradianceConfig):
    """Instantaneous output per kW-peak (dimensionless full-load fraction)."""
    t_cell = temp_c + poa * (cfg.noct_c - 20.0) / 800.0
    return (poa / 1000.0) * cfg.system_efficiency * (1.0 + cfg.temp_coeff_gamma * (t_cell - 25.0))


def _resolve_stride(series: WeatherSeries, cfg: IrradianceConfig) -> tuple[int, float]:
    record_hours = series.step_seconds / 3600.0
    stride_f = cfg.step_hours / record_hours
    stride = int(round(stride_f))
    if stride < 1 or abs(stride_f - stride) > 1e-9:
        raise ConfigError(
            f"step_hours={cfg.step_hours} is not a multiple of the weather step ({record_hours} h)"
        )
    if len(series) % stride != 0:
        raise ConfigError(f"stride {stride} does not divide {len(series)} weather records")
    return stride, stride * record_hours


def validate_weather_against_sun(series: WeatherSeries, lat_deg: float, lon_deg: float) -> None:
    """GHI must be (almost) zero whenever the sun is below the horizon."""
    elev, _ = sun_positions(series.epochs, lat_deg, lon_deg)
    bad = np.flatnonzero((elev <= 0.0) & (series.ghi > GHI_NIGHT_SLACK))
    if bad.size:
        i = int(bad[0])
        raise FormatError(
            f"weather record {i + 1} ({format_timestamp(series.epochs[i])}): "
            f"ghi={series.ghi[i]:.1f} W/m^2 while sun elevation {elev[i]:.2f} deg <= 0"
        )


def _surface_year(
    bvh: Bvh,
    surface_id: str,
    poly: Polygon3,
    series_slice,
    sun_elev,
    sun_az,
    day_idx,
    sun_dirs,
    dt_hours: float,
    cfg: IrradianceConfig,
) -> SurfaceIrradiance:
    ghi, dhi, temp = series_slice
    tilt, az = polygon_tilt_azimuth(poly)
    normal = polygon_normal(poly)
    pts = polygon_sample_points(poly, cfg.samples_per_surface)
    origins = np.ascontiguousarray(pts + SHADING_OFFSET * normal)

    shaded_counts = np.zeros(len(day_idx), dtype=np.int32)
    if len(day_idx):
        code = bvh.surface_code(surface_id)
        _shade_counts(
            bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right, bvh.order,
            bvh.tri_v0, bvh.tri_e1, bvh.tri_e2, bvh.tri_owner,
            origins, sun_dirs, code, shaded_counts,
        )
    cos_i = incidence_cos((sun_elev, sun_az), tilt, az)
    beam, diffuse, reflected = transpose_poa(ghi, dhi, sun_elev, cos_i, tilt, cfg.albedo)
    sky = diffuse + reflected
    poa_unshaded = beam + sky

    frac = np.zeros(len(ghi))
    if len(day_idx):
        frac[day_idx] = shaded_counts / cfg.samples_per_surface
    poa_mean = frac * sky + (1.0 - frac) * poa_unshaded
    p_mean = frac * _pv_power(sky, temp, cfg) + (1.0 - frac) * _pv_power(poa_unshaded, temp, cfg)

    n_day = len(day_idx)
    shaded_fraction = (
        float(shaded_counts.sum()) / (n_day * cfg.samples_per_surface) if n_day else 0.0
    )
    return SurfaceIrradiance(
        surface_id=surface_id,
        poa_kwh_m2a=float(poa_mean.sum() * dt_hours / 1000.0),
        pv_potential_h_a=float(p_mean.sum() * dt_hours),
        shaded_fraction=shaded_fraction,
    )


def annual_surface_irradiance(
    bvh: Bvh,
    surfaces: list[tuple[str, Polygon3]],
    series: WeatherSeries,
    lat_deg: float,
    lon_deg: float,
    cfg: IrradianceConfig = IrradianceConfig(),
) -> list[SurfaceIrradiance]:
    """Annual POA / PV / shading summary for each (surface_id, polygon).

    Deterministic given inputs; the thread count only partitions surfaces
    and never changes any result bit.
    """
    cfg = cfg.validate()
    stride, dt_hours = _resolve_stride(series, cfg)
    sel = np.arange(0, len(series), stride)
    epochs = series.epochs[sel]
    ghi, dhi, temp = series.ghi[sel], series.dhi[sel], series.temp[sel]
    sun_elev, sun_az = sun_positions(epochs, lat_deg, lon_deg)
    day_idx = np.flatnonzero(sun_elev > 0.0)
    er = np.radians(sun_elev[day_idx])
    ar = np.radians(sun_az[day_idx])
    sun_dirs = np.ascontiguousarray(
        np.column_stack([np.cos(er) * np.sin(ar), np.cos(er) * np.cos(ar), np.sin(er)])
    )

    def work(chunk):
        return [
            _surface_year(
                bvh, sid, poly, (ghi, dhi, temp), sun_elev, sun_az,
                day_idx, sun_dirs, dt_hours, cfg,
            )
            for sid, poly in chunk
        ]

    if cfg.threads == 1 or len(surfaces) < 2:
        return work(surfaces)
    nt = min(cfg.threads, len(surfaces))
    chunks = [surfaces[i::nt] for i in range(nt)]
    with ThreadPoolExecutor(max_workers=nt) as pool:
        results = list(pool.map(work, chunks))
    # reassemble in original surface order
    out: list[SurfaceIrradiance | None] = [None] * len(surfaces)
    for i, chunk_res in enumerate(results):
        for j, res in enumerate(chunk_res):
            out[i + j * nt] = res
    return out  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# shadow maps

VOID, LIT, SHADED = 0, 1, 2


@dataclass(frozen=True)
class ShadowMap:
    x0: float
    y0: float
    resolution_m: float
    classes: np.ndarray      # (ny, nx) uint8, row 0 = southernmost
    timestamp: str
    sun: SunPosition


@njit(cache=True, nogil=True)
def _shadow_grid(node_min, node_max, node_left, node_right, order,
                 tri_v0, tri_e1, tri_e2, tri_owner,
                 x0, y0, res, nx, ny, z_top,
                 sun_up, sx, sy, sz, out):
    for iy in range(ny):
        y = y0 + (iy + 0.5) * res
        for ix in range(nx):
            x = x0 + (ix + 0.5) * res
            t, tri = _bvh_closest_hit(
                node_min, node_max, node_left, node_right, order,
                tri_v0, tri_e1, tri_e2, tri_owner,
                x, y, z_top, 0.0, 0.0, -1.0, 0.0, np.inf, -1,
            )
            if tri < 0:
                out[iy, ix] = VOID
                continue
            if not sun_up:
                out[iy, ix] = SHADED
                continue
            z = z_top - t + SHADING_OFFSET
            if _bvh_any_hit(node_min, node_max, node_left, node_right, order,
                            tri_v0, tri_e1, tri_e2, tri_owner,
                            x, y, z, sx, sy, sz, 0.0, np.inf, -1):
                out[iy, ix] = SHADED
            else:
                out[iy, ix] = LIT
    return 0


def shadow_map(
    bvh: Bvh,
    when: datetime,
    lat_deg: float,
    lon_deg: float,
    resolution_m: float = 1.0,
    bounds: tuple[float, float, float, float] | None = None,
) -> ShadowMap:
    """Classify a ground/roof raster at `when` into shaded / lit / void.

    Each cell takes the height of the first surface under its center
    (roof or terrain) and runs the same beam-shading test the irradiance
    simulation uses. Cells with nothing under them are void.
    """
    if resolution_m <= 0:
        raise ConfigError("resolution must be positive")
    sun = sun_position(when, lat_deg, lon_deg)
    lo, hi = bvh.mesh.bounds()
    if bounds is not None:
        bx0, by0, bx1, by1 = bounds
    else:
        bx0, by0, bx1, by1 = lo[0], lo[1], hi[0], hi[1]
    nx = max(1, int(math.ceil((bx1 - bx0) / resolution_m)))
    ny = max(1, int(math.ceil((by1 - by0) / resolution_m)))
    if nx * ny > 4_000_000:
        raise ConfigError(f"shadow grid {nx}x{ny} too large; coarsen the resolution")
    out = np.zeros((ny, nx), dtype=np.uint8)
    d = sun.unit_vector()
    _shadow_grid(
        bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right, bvh.order,
        bvh.tri_v0, bvh.tri_e1, bvh.tri_e2, bvh.tri_owner,
        bx0, by0, resolution_m, nx, ny, float(hi[2] + 10.0),
        sun.up, d[0], d[1], d[2], out,
    )
    ts = when.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return ShadowMap(float(bx0), float(by0), float(resolution_m), out, ts, sun)


_PGM_GREY = {VOID: 0, LIT: 255, SHADED: 96}


def write_shadow_pgm(sm: ShadowMap, path) -> None:
    """Binary PGM (P5): lit 255, shaded 96, void 0; north row on top."""
    ny, nx = sm.classes.shape
    lut = np.zeros(256, dtype=np.uint8)
    for k, v in _PGM_GREY.items():
        lut[k] = v
    img = lut[sm.classes[::-1]]  # flip so row 0 is the north edge
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


_SVG_FILL = {LIT: "#ffd54a", SHADED: "#4a5568"}


def write_shadow_svg(sm: ShadowMap, path) -> None:
    """Cell-rectangle SVG with a legend and the timestamp. Void is background."""
    ny, nx = sm.classes.shape
    cell = 4  # px per cell
    legend_h = 28
    W, H = nx * cell, ny * cell + legend_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{ny * cell}" fill="#1a202c"/>',
    ]
    for iy in range(ny):
        row = sm.classes[iy]
        py = (ny - 1 - iy) * cell  # north on top
        ix = 0
        while ix < nx:
            cls = row[ix]
            if cls == VOID:
                ix += 1
                continue
            run = ix
            while run < nx and row[run] == cls:
                run += 1
            parts.append(
                f'<rect x="{ix * cell}" y="{py}" width="{(run - ix) * cell}" '
                f'height="{cell}" fill="{_SVG_FILL[int(cls)]}"/>'
            )
            ix = run
    ly = ny * cell + 6
    parts.append(f'<rect x="4" y="{ly}" width="14" height="14" fill="{_SVG_FILL[LIT]}"/>')
    parts.append(f'<text x="22" y="{ly + 12}" font-size="12" fill="#222">lit</text>')
    parts.append(f'<rect x="60" y="{ly}" width="14" height="14" fill="{_SVG_FILL[SHADED]}"/>')
    parts.append(f'<text x="78" y="{ly + 12}" font-size="12" fill="#222">shaded</text>')
    parts.append(
        f'<text x="{W - 4}" y="{ly + 12}" font-size="12" fill="#222" '
        f'text-anchor="end">{sm.timestamp}</text>'
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# irradiance table I/O

IRRADIANCE_CSV_HEADER = "surface_id,poa_kwh_m2a,pv_potential_h_a,shaded_fraction"


def dump_irradiance_csv(records: list[SurfaceIrradiance], path) -> None:
    lines = [IRRADIANCE_CSV_HEADER]
    for r in records:
        lines.append(f"{r.surface_id},{float(r.poa_kwh_m2a)!r},"
                     f"{float(r.pv_potential_h_a)!r},{float(r.shaded_fraction)!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_irradiance_csv(path) -> list[SurfaceIrradiance]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != IRRADIANCE_CSV_HEADER:
        raise FormatError(f"{path}: expected header {IRRADIANCE_CSV_HEADER!r}")
    out = []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"{path}:{ln}: expected 4 fields, got {len(parts)}")
        try:
            out.append(SurfaceIrradiance(parts[0], float(parts[1]), float(parts[2]),
                                         float(parts[3])))
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: {exc}") from exc
    return out
