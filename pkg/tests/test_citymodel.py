"""City document model: validation, derived quantities, JSON round-trips."""

import json

import numpy as np
import pytest

from urban3d.citymodel import (
    Building,
    CityModel,
    District,
    Dwelling,
    Face,
    HeightField,
    city_from_dict,
    city_to_dict,
    dump_city_json,
    load_city_json,
    meters_to_latlon,
)
from urban3d.errors import FormatError, MeshNotWatertightError
from urban3d.geometry import Polygon3, is_watertight, mesh_volume

from conftest import box_faces


def _box_building(bid="b0", function="housing", h=6.0):
    faces = [Face("floor" if "/floor" in sid else
                  "roof" if "/roof" in sid else "wall", poly)
             for sid, poly in box_faces(0.0, 0.0, 10.0, 8.0, h, name=bid)]
    return Building(id=bid, function=function, faces=faces)


def _grid_terrain(spacing=50.0, n=5, z=0.0):
    return HeightField(0.0, 0.0, spacing, np.full((n, n), z))


def _district(extent=200.0):
    return District("1", [[-extent, -extent], [extent, -extent],
                          [extent, extent], [-extent, extent]], "A", "residential")


def _city(buildings=None):
    return CityModel(
        name="t", origin_lat=52.5, origin_lon=13.4,
        terrain=_grid_terrain(), districts=[_district()],
        buildings=buildings if buildings is not None else [_box_building()])


# ---------------------------------------------------------------------------
# model objects


def test_face_rejects_unknown_role():
    with pytest.raises(FormatError):
        Face("ceiling", Polygon3([(0, 0, 0), (1, 0, 0), (1, 1, 0)]))


def test_building_rejects_unknown_function():
    with pytest.raises(FormatError):
        _box_building(function="casino")


def test_building_volume_matches_box():
    b = _box_building(h=6.0)
    assert b.volume() == pytest.approx(10.0 * 8.0 * 6.0, rel=1e-12)
    assert is_watertight(b.mesh())


def test_surface_ids_are_stable_and_role_grouped():
    b = _box_building()
    ids = b.surface_ids()
    assert ids[0] == "b0/floor0"
    assert ids.count("b0/roof0") == 1
    assert sum(1 for s in ids if "/wall" in s) == 4


def test_centroid_uses_floor_face():
    b = _box_building()
    assert b.centroid_xy() == pytest.approx((0.0, 0.0), abs=1e-12)


def test_district_point_membership():
    d = _district(extent=100.0)
    assert d.contains(0.0, 0.0)
    assert d.contains(100.0, 0.0)      # boundary counts as inside
    assert not d.contains(101.0, 0.0)


def test_district_rejects_bad_labels():
    with pytest.raises(FormatError):
        District("1", [[0, 0], [1, 0], [1, 1]], "Z", "residential")
    with pytest.raises(FormatError):
        District("1", [[0, 0], [1, 0], [1, 1]], "A", "castle")


def test_height_field_bilinear_interpolation():
    hf = HeightField(0.0, 0.0, 10.0, [[0.0, 10.0], [0.0, 10.0]])
    assert hf.height_at(0.0, 0.0) == pytest.approx(0.0)
    assert hf.height_at(10.0, 0.0) == pytest.approx(10.0)
    assert hf.height_at(5.0, 5.0) == pytest.approx(5.0)
    assert hf.height_at(2.5, 0.0) == pytest.approx(2.5)


def test_height_field_clamps_outside_queries():
    hf = HeightField(0.0, 0.0, 10.0, [[1.0, 2.0], [3.0, 4.0]])
    assert hf.height_at(-100.0, -100.0) == pytest.approx(1.0)
    assert hf.height_at(100.0, 100.0) == pytest.approx(4.0)


def test_terrain_mesh_is_consistent():
    hf = _grid_terrain(spacing=25.0, n=4, z=2.0)
    mesh = hf.to_mesh()
    assert len(mesh.triangles) == 2 * 3 * 3
    assert np.all(mesh.vertices[:, 2] == 2.0)


def test_meters_to_latlon_local_scale():
    # one degree of latitude on the spherical earth; longitude shrinks by cos(lat)
    m_per_deg = 6_371_000.0 * np.pi / 180.0
    lat0, lon0 = 52.5, 13.4
    lat, _lon = meters_to_latlon(0.0, m_per_deg, lat0, lon0)
    assert lat == pytest.approx(lat0 + 1.0, abs=1e-9)
    _lat, lon = meters_to_latlon(m_per_deg * np.cos(np.radians(lat0)), 0.0, lat0, lon0)
    assert lon == pytest.approx(lon0 + 1.0, abs=1e-9)


def test_city_district_lookup():
    city = _city()
    assert city.district_of(0.0, 0.0).name == "1"
    assert city.district_of(5000.0, 0.0) is None


def test_scene_mesh_merges_terrain_and_buildings():
    city = _city()
    scene = city.scene_mesh()
    b_mesh = city.buildings[0].mesh()
    t_mesh = city.terrain.to_mesh()
    assert len(scene.triangles) == len(b_mesh.triangles) + len(t_mesh.triangles)


# ---------------------------------------------------------------------------
# JSON document round-trips


def test_city_json_round_trip_bytes(tmp_path, city_bundle):
    _cfg, city, _truth, _weather = city_bundle
    p1 = tmp_path / "c1.json"
    p2 = tmp_path / "c2.json"
    dump_city_json(city, p1)
    dump_city_json(load_city_json(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_city_round_trip_preserves_content(tmp_path):
    city = _city([_box_building("b0"), _box_building("b1", function="business")])
    city.buildings[0].dwellings.append(Dwelling("b0/dw0", 72.5, 3))
    p = tmp_path / "c.json"
    dump_city_json(city, p)
    back = load_city_json(p)
    assert [b.id for b in back.buildings] == ["b0", "b1"]
    assert back.buildings[0].dwellings[0].rooms == 3
    assert back.buildings[0].dwellings[0].size_m2 == 72.5
    assert back.buildings[1].function == "business"
    assert back.districts[0].municipality == "A"
    assert back.origin_lat == 52.5
    assert back.terrain.spacing == 50.0
    assert back.buildings[0].volume() == pytest.approx(city.buildings[0].volume())


def test_city_dict_version_check():
    city = _city()
    doc = city_to_dict(city)
    assert doc["format"] == "city3d"
    doc["version"] = 99
    with pytest.raises(FormatError):
        city_from_dict(doc)


def test_city_dict_missing_key_names_context():
    doc = city_to_dict(_city())
    del doc["buildings"][0]["function"]
    with pytest.raises(FormatError, match="function"):
        city_from_dict(doc)


def test_open_building_loads_but_has_no_volume(tmp_path):
    # polygons validate on load; watertightness is enforced where volume is used
    doc = city_to_dict(_city())
    del doc["buildings"][0]["faces"][0]        # drop the floor: mesh now open
    p = tmp_path / "open.json"
    p.write_text(json.dumps(doc))
    back = load_city_json(p)
    with pytest.raises(MeshNotWatertightError):
        back.buildings[0].volume()


def test_load_rejects_degenerate_polygon(tmp_path):
    doc = city_to_dict(_city())
    doc["buildings"][0]["faces"][0]["vertices_m"] = [[0, 0, 0], [1, 0, 0]]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="faces"):
        load_city_json(p)
