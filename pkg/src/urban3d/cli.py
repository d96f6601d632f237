"""Command-line pipeline: city generation, irradiance, shadow maps,
feature extraction, and the tier ablation report.

Every command writes a run manifest next to its outputs: the command name,
the effective configuration, the seeds in play, SHA-256 digests of all
inputs and outputs, artifact format versions, and the wall-clock time.
Reruns with identical flags and inputs reproduce every artifact byte for
byte (the manifest differs only in its wall_clock_s field).

Exit codes are a stable contract: 0 success, 2 input or configuration
error, 3 I/O error, 4 model-fitting failure.

A single optional ``--config FILE`` (JSON object keyed by long flag names,
underscores for dashes) can supply any flag; explicitly passed flags win.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from .citygen import (CityConfig, PvLabelConfig, RentLabelConfig, gen_city,
                      gen_weather)
from .citymodel import CITY3D_FORMAT, CITY3D_VERSION, dump_city_json, load_city_json
from .errors import ConfigError, FormatError, GeometryError, ModelError
from .evaluation import SplitConfig, run_ablation
from .features import (_schema_path, build_pv_table, build_rent_table,
                       read_feature_table, write_feature_table)
from .geometry import build_bvh
from .models import ForestConfig
from .models.sem import SemConfig
from .solar import (IrradianceConfig, annual_surface_irradiance,
                    dump_irradiance_csv, load_irradiance_csv, shadow_map,
                    sun_position, write_shadow_pgm, write_shadow_svg)
from .weather import dump_weather_csv, load_weather_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MODEL = 4

MANIFEST_FORMAT = "urban3d-run-manifest"
MANIFEST_VERSION = 1

_ARTIFACT_VERSIONS = {
    "city": (CITY3D_FORMAT, CITY3D_VERSION),
    "truth": ("urban3d-city-truth", 1),
    "weather": ("urban3d-weather-csv", 1),
    "irradiance": ("urban3d-irradiance-csv", 1),
    "features": ("urban3d-feature-csv", 1),
    "schema": ("urban3d-feature-schema", 1),
    "report_csv": ("urban3d-ablation-csv", 1),
    "report_md": ("urban3d-ablation-md", 1),
    "shadow_pgm": ("pgm-p5", 1),
    "shadow_svg": ("svg", 1),
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path: Path, command: str, config: dict, seeds: dict,
                    inputs: dict, artifacts: dict, wall_clock_s: float) -> None:
    doc = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": {k: {"path": str(p), "sha256": _sha256(Path(p))}
                   for k, p in inputs.items()},
        "artifacts": {k: {"path": str(p), "sha256": _sha256(Path(p)),
                          "format": _ARTIFACT_VERSIONS[k][0],
                          "version": _ARTIFACT_VERSIONS[k][1]}
                      for k, p in artifacts.items()},
        "wall_clock_s": round(wall_clock_s, 3),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _parse_time(text: str) -> datetime:
    try:
        when = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ConfigError(f"cannot parse --time {text!r}: {exc}") from exc
    if when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    return when


def _json_dump(doc, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# flag / config-file resolution


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


class _Resolver:
    """Flag values beat config-file values beat defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file = _load_config_file(getattr(args, "config", None))
        self.effective: dict = {}

    def get(self, key: str, default):
        val = getattr(self.args, key, None)
        if val is None:
            val = self.file.get(key, default)
        if default is not None and val is not None:
            val = type(default)(val)
        self.effective[key] = val
        return val


# ---------------------------------------------------------------------------
# commands


def cmd_gen_city(args) -> int:
    t0 = time.perf_counter()
    r = _Resolver(args)
    cfg = CityConfig(
        seed=r.get("seed", 0),
        n_buildings=r.get("buildings", 50),
        extent_m=r.get("extent", 500.0),
        name=r.get("name", "city"),
    )
    out_dir = Path(r.get("out_dir", "."))
    city, truth = gen_city(cfg)
    weather = gen_weather(seed=cfg.seed, lat_deg=cfg.origin_lat,
                          year=cfg.year, lon_deg=cfg.origin_lon)
    out_dir.mkdir(parents=True, exist_ok=True)
    city_path = out_dir / "city.json"
    weather_path = out_dir / "weather.csv"
    truth_path = out_dir / "city.truth.json"
    dump_city_json(city, city_path)
    dump_weather_csv(weather, weather_path)
    _json_dump(truth, truth_path)
    _write_manifest(
        out_dir / "manifest.json", "gen-city", r.effective,
        seeds={"city": cfg.seed, "weather": cfg.seed}, inputs={},
        artifacts={"city": city_path, "weather": weather_path, "truth": truth_path},
        wall_clock_s=time.perf_counter() - t0)
    print(f"wrote {city_path} ({len(city.buildings)} buildings), "
          f"{weather_path}, {truth_path}")
    return EXIT_OK


def cmd_irradiance(args) -> int:
    t0 = time.perf_counter()
    r = _Resolver(args)
    city_path = Path(r.get("city", None) or _missing("--city"))
    weather_path = Path(r.get("weather", None) or _missing("--weather"))
    out = Path(r.get("out", "irradiance.csv"))
    cfg = IrradianceConfig(
        albedo=r.get("albedo", 0.2),
        samples_per_surface=r.get("samples", 4),
        step_hours=r.get("step_hours", 1.0),
        threads=r.get("threads", 1),
    )
    city = load_city_json(city_path)
    series = load_weather_csv(weather_path)
    bvh = build_bvh(city.scene_mesh())
    surfaces = [(sid, poly) for sid, poly, _b in city.roof_surfaces()]
    records = annual_surface_irradiance(bvh, surfaces, series,
                                        city.origin_lat, city.origin_lon, cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_irradiance_csv(records, out)
    _write_manifest(
        Path(str(out) + ".manifest.json"), "irradiance", r.effective, seeds={},
        inputs={"city": city_path, "weather": weather_path},
        artifacts={"irradiance": out}, wall_clock_s=time.perf_counter() - t0)
    print(f"wrote {out} ({len(records)} surfaces)")
    return EXIT_OK


def cmd_shadow_map(args) -> int:
    t0 = time.perf_counter()
    r = _Resolver(args)
    city_path = Path(r.get("city", None) or _missing("--city"))
    when = _parse_time(r.get("time", None) or _missing("--time"))
    res = r.get("res", 2.0)
    out = Path(r.get("out", "shadow"))
    base = out.with_suffix("") if out.suffix in (".pgm", ".svg") else out

    city = load_city_json(city_path)
    sun = sun_position(when, city.origin_lat, city.origin_lon)
    if not sun.up:
        raise ConfigError(
            f"sun is below the horizon at {when.isoformat()} "
            f"(elevation {sun.elevation_deg:.1f} deg); pick a daytime instant")
    sm = shadow_map(build_bvh(city.scene_mesh()), when,
                    city.origin_lat, city.origin_lon, resolution_m=res)
    base.parent.mkdir(parents=True, exist_ok=True)
    pgm_path = Path(str(base) + ".pgm")
    svg_path = Path(str(base) + ".svg")
    write_shadow_pgm(sm, pgm_path)
    write_shadow_svg(sm, svg_path)
    _write_manifest(
        Path(str(base) + ".manifest.json"), "shadow-map", r.effective, seeds={},
        inputs={"city": city_path},
        artifacts={"shadow_pgm": pgm_path, "shadow_svg": svg_path},
        wall_clock_s=time.perf_counter() - t0)
    ny, nx = sm.classes.shape
    print(f"wrote {pgm_path}, {svg_path} ({nx}x{ny} cells, "
          f"sun elevation {sm.sun.elevation_deg:.1f} deg)")
    return EXIT_OK


def cmd_features(args) -> int:
    t0 = time.perf_counter()
    r = _Resolver(args)
    city_path = Path(r.get("city", None) or _missing("--city"))
    showcase = r.get("showcase", None) or _missing("--showcase")
    out = Path(r.get("out", f"{showcase}_features.csv"))
    label_seed = r.get("label_seed", 0)
    irr_path = r.get("irradiance", None)

    city = load_city_json(city_path)
    inputs = {"city": city_path}
    if showcase == "rent":
        table, _truth = build_rent_table(city, RentLabelConfig(seed=label_seed))
    elif showcase == "pv":
        if irr_path is None:
            raise ConfigError("the pv showcase needs --irradiance "
                              "(run the irradiance command first)")
        records = load_irradiance_csv(irr_path)
        table, _truth = build_pv_table(city, records, PvLabelConfig(seed=label_seed))
        inputs["irradiance"] = Path(irr_path)
    else:
        raise ConfigError(f"unknown showcase {showcase!r} (rent or pv)")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_feature_table(table, out)
    schema_path = _schema_path(out)
    _write_manifest(
        Path(str(out) + ".manifest.json"), "features", r.effective,
        seeds={"labels": label_seed}, inputs=inputs,
        artifacts={"features": out, "schema": schema_path},
        wall_clock_s=time.perf_counter() - t0)
    print(f"wrote {out} ({len(table.ids)} rows, "
          f"{len(table.columns)} columns), {schema_path}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    t0 = time.perf_counter()
    r = _Resolver(args)
    feat_path = Path(r.get("features", None) or _missing("--features"))
    out = Path(r.get("out", "ablation"))
    base = out.with_suffix("") if out.suffix in (".csv", ".md") else out
    seed = r.get("seed", 0)
    models_flag = r.get("models", None)
    showcase_flag = r.get("showcase", None)

    table = read_feature_table(feat_path)
    if showcase_flag is not None and showcase_flag != table.showcase:
        raise ConfigError(f"--showcase {showcase_flag} does not match the "
                          f"feature file ({table.showcase})")
    models = tuple(m.strip() for m in models_flag.split(",")) if models_flag else None
    threads = r.get("threads", 0)
    if threads:
        import numba
        numba.set_num_threads(threads)
    report = run_ablation(
        table, models,
        SplitConfig(test_fraction=r.get("test_fraction", 0.2), seed=seed),
        forest=ForestConfig(n_trees=r.get("trees", 500), seed=seed),
        sem=SemConfig(seed=seed, restarts=r.get("sem_restarts", 3)))
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = Path(str(base) + ".csv")
    md_path = Path(str(base) + ".md")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_csv())
    with open(md_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_markdown())
    _write_manifest(
        Path(str(base) + ".manifest.json"), "ablate", r.effective,
        seeds={"split": seed, "forest": seed, "sem": seed},
        inputs={"features": feat_path},
        artifacts={"report_csv": csv_path, "report_md": md_path},
        wall_clock_s=time.perf_counter() - t0)
    print(f"wrote {csv_path}, {md_path} "
          f"({report.metric}, best 3D model: {report.best_model('3D')})")
    return EXIT_OK


def _missing(flag: str):
    raise ConfigError(f"{flag} is required (flag or config file)")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="urban3d",
        description="3D city analytics pipeline: generate a synthetic city, "
                    "simulate rooftop irradiance, extract feature tables, and "
                    "run the tier ablation.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON file supplying any flag; flags win")
        p.set_defaults(func=fn)
        return p

    p = add("gen-city", cmd_gen_city, "generate a synthetic city with weather")
    p.add_argument("--seed", type=int)
    p.add_argument("--buildings", type=int)
    p.add_argument("--extent", type=float, help="side length of the square site, m")
    p.add_argument("--name")
    p.add_argument("--out-dir", dest="out_dir")

    p = add("irradiance", cmd_irradiance, "annual irradiance per roof surface")
    p.add_argument("--city")
    p.add_argument("--weather")
    p.add_argument("--out")
    p.add_argument("--samples", type=int, help="sample points per surface")
    p.add_argument("--albedo", type=float)
    p.add_argument("--step-hours", dest="step_hours", type=float,
                   help="weather subsampling step")
    p.add_argument("--threads", type=int)

    p = add("shadow-map", cmd_shadow_map, "render a shadow raster (PGM + SVG)")
    p.add_argument("--city")
    p.add_argument("--time", help="RFC-3339 instant, e.g. 2020-06-21T09:00:00Z")
    p.add_argument("--res", type=float, help="cell size, m")
    p.add_argument("--out", help="output basename (.pgm and .svg appended)")

    p = add("features", cmd_features, "extract a showcase feature table")
    p.add_argument("--city")
    p.add_argument("--showcase", choices=("rent", "pv"))
    p.add_argument("--irradiance", help="irradiance CSV (required for pv)")
    p.add_argument("--label-seed", dest="label_seed", type=int)
    p.add_argument("--out")

    p = add("ablate", cmd_ablate, "tier-by-model ablation report")
    p.add_argument("--features")
    p.add_argument("--showcase", choices=("rent", "pv"))
    p.add_argument("--models", help="comma-separated model names")
    p.add_argument("--seed", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--trees", type=int, help="random-forest size")
    p.add_argument("--sem-restarts", dest="sem_restarts", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output basename (.csv and .md appended)")

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
