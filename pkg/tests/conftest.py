"""Shared builders for the test suite: small closed solids and scenes."""

from __future__ import annotations

import numpy as np
import pytest

from urban3d.geometry import Polygon3, TriangleMesh, mesh_from_polygons, merge_meshes


def box_faces(cx, cy, w, d, h, z0=0.0, name="box"):
    """Axis-aligned closed box as labelled faces, outward winding."""
    x0, x1 = cx - w / 2.0, cx + w / 2.0
    y0, y1 = cy - d / 2.0, cy + d / 2.0
    z1 = z0 + h
    return [
        (f"{name}/floor", Polygon3([(x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)])),
        (f"{name}/roof", Polygon3([(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)])),
        (f"{name}/wall_s", Polygon3([(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)])),
        (f"{name}/wall_n", Polygon3([(x1, y1, z0), (x0, y1, z0), (x0, y1, z1), (x1, y1, z1)])),
        (f"{name}/wall_w", Polygon3([(x0, y1, z0), (x0, y0, z0), (x0, y0, z1), (x0, y1, z1)])),
        (f"{name}/wall_e", Polygon3([(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)])),
    ]


def box_mesh(cx, cy, w, d, h, z0=0.0, name="box") -> TriangleMesh:
    return mesh_from_polygons(box_faces(cx, cy, w, d, h, z0, name))


def gable_faces(cx, cy, w, d, h_eave, tilt_deg, z0=0.0, name="g"):
    """Closed gabled solid, ridge along y (roof faces east/west).

    Returns (faces, roof_ids): roof_ids are the two sloped faces.
    """
    x0, x1 = cx - w / 2.0, cx + w / 2.0
    y0, y1 = cy - d / 2.0, cy + d / 2.0
    z1 = z0 + h_eave
    zr = z1 + (w / 2.0) * np.tan(np.radians(tilt_deg))
    faces = [
        (f"{name}/floor", Polygon3([(x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)])),
        (f"{name}/roof_w", Polygon3([(x0, y0, z1), (cx, y0, zr), (cx, y1, zr), (x0, y1, z1)])),
        (f"{name}/roof_e", Polygon3([(cx, y0, zr), (x1, y0, z1), (x1, y1, z1), (cx, y1, zr)])),
        (f"{name}/wall_s", Polygon3([(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (cx, y0, zr), (x0, y0, z1)])),
        (f"{name}/wall_n", Polygon3([(x1, y1, z0), (x0, y1, z0), (x0, y1, z1), (cx, y1, zr), (x1, y1, z1)])),
        (f"{name}/wall_w", Polygon3([(x0, y1, z0), (x0, y0, z0), (x0, y0, z1), (x0, y1, z1)])),
        (f"{name}/wall_e", Polygon3([(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)])),
    ]
    return faces, (f"{name}/roof_w", f"{name}/roof_e")


def random_box_scene(rng: np.random.Generator, n_boxes: int, extent=100.0) -> TriangleMesh:
    meshes = []
    for i in range(n_boxes):
        meshes.append(
            box_mesh(
                rng.uniform(-extent / 2, extent / 2),
                rng.uniform(-extent / 2, extent / 2),
                rng.uniform(2, 9),
                rng.uniform(2, 9),
                rng.uniform(3, 18),
                name=f"b{i}",
            )
        )
    return merge_meshes(meshes)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


# ---------------------------------------------------------------------------
# shared synthetic city (session-scoped: generation + irradiance are the
# slowest fixtures and every downstream module can reuse them)


@pytest.fixture(scope="session")
def city_bundle():
    from urban3d.citygen import CityConfig, gen_city, gen_weather

    cfg = CityConfig(seed=11, n_buildings=220, extent_m=1100.0)
    city, truth = gen_city(cfg)
    weather = gen_weather(seed=11, lat_deg=cfg.origin_lat, year=cfg.year,
                          lon_deg=cfg.origin_lon)
    return cfg, city, truth, weather


@pytest.fixture(scope="session")
def city_irradiance(city_bundle):
    from urban3d.geometry import build_bvh
    from urban3d.solar import IrradianceConfig, annual_surface_irradiance

    cfg, city, _truth, weather = city_bundle
    bvh = build_bvh(city.scene_mesh())
    surfaces = [(sid, poly) for sid, poly, _b in city.roof_surfaces()]
    records = annual_surface_irradiance(
        bvh, surfaces, weather, cfg.origin_lat, cfg.origin_lon,
        IrradianceConfig(step_hours=6.0, threads=4))
    return bvh, surfaces, records
