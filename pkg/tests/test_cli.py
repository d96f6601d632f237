"""End-to-end command-line workflows on a small generated city."""

import hashlib
import json

import pytest

from urban3d.cli import main
from urban3d.features import read_feature_table


def _sha256(path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One generated city plus its irradiance table, shared by the tests."""
    ws = tmp_path_factory.mktemp("cli")
    rc = main(["gen-city", "--seed", "5", "--buildings", "40",
               "--extent", "400", "--out-dir", str(ws)])
    assert rc == 0
    rc = main(["irradiance", "--city", str(ws / "city.json"),
               "--weather", str(ws / "weather.csv"),
               "--step-hours", "6", "--threads", "2",
               "--out", str(ws / "irradiance.csv")])
    assert rc == 0
    return ws


# ---------------------------------------------------------------------------
# gen-city


def test_gen_city_artifacts_and_manifest(workspace):
    for name in ("city.json", "weather.csv", "city.truth.json", "manifest.json"):
        assert (workspace / name).exists()
    doc = json.loads((workspace / "manifest.json").read_text(encoding="utf-8"))
    assert doc["format"] == "urban3d-run-manifest"
    assert doc["version"] == 1
    assert doc["command"] == "gen-city"
    assert doc["seeds"] == {"city": 5, "weather": 5}
    assert doc["config"]["buildings"] == 40
    art = doc["artifacts"]
    assert set(art) == {"city", "weather", "truth"}
    assert art["city"]["sha256"] == _sha256(workspace / "city.json")
    assert art["city"]["format"] == "city3d"
    assert isinstance(doc["wall_clock_s"], float)


def test_gen_city_is_deterministic(workspace, tmp_path):
    rc = main(["gen-city", "--seed", "5", "--buildings", "40",
               "--extent", "400", "--out-dir", str(tmp_path)])
    assert rc == 0
    for name in ("city.json", "weather.csv", "city.truth.json"):
        assert (tmp_path / name).read_bytes() == (workspace / name).read_bytes()


def test_gen_city_config_file_merging(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"buildings": 12, "seed": 9, "extent": "300"}),
                   encoding="utf-8")
    out = tmp_path / "city"
    rc = main(["gen-city", "--config", str(cfg), "--seed", "3",
               "--out-dir", str(out)])
    assert rc == 0
    doc = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert doc["config"]["seed"] == 3            # flag beats config file
    assert doc["config"]["buildings"] == 12      # config file beats default
    assert doc["config"]["extent"] == 300.0      # coerced to the flag's type
    city = json.loads((out / "city.json").read_text(encoding="utf-8"))
    assert len(city["buildings"]) == 12


def test_bad_config_file_exits_2(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("[1, 2]", encoding="utf-8")
    assert main(["gen-city", "--config", str(cfg),
                 "--out-dir", str(tmp_path)]) == 2


# ---------------------------------------------------------------------------
# irradiance


def test_irradiance_manifest_tracks_inputs(workspace):
    doc = json.loads((workspace / "irradiance.csv.manifest.json")
                     .read_text(encoding="utf-8"))
    assert doc["command"] == "irradiance"
    assert doc["inputs"]["city"]["sha256"] == _sha256(workspace / "city.json")
    assert doc["inputs"]["weather"]["sha256"] == _sha256(workspace / "weather.csv")
    assert doc["artifacts"]["irradiance"]["format"] == "urban3d-irradiance-csv"
    header = (workspace / "irradiance.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "surface_id,poa_kwh_m2a,pv_potential_h_a,shaded_fraction"


def test_irradiance_thread_count_does_not_change_bytes(workspace, tmp_path):
    rc = main(["irradiance", "--city", str(workspace / "city.json"),
               "--weather", str(workspace / "weather.csv"),
               "--step-hours", "6", "--threads", "1",
               "--out", str(tmp_path / "irr1.csv")])
    assert rc == 0
    assert (tmp_path / "irr1.csv").read_bytes() == \
        (workspace / "irradiance.csv").read_bytes()


def test_irradiance_missing_city_exits_3(workspace, tmp_path):
    rc = main(["irradiance", "--city", str(tmp_path / "nope.json"),
               "--weather", str(workspace / "weather.csv"),
               "--out", str(tmp_path / "x.csv")])
    assert rc == 3


def test_irradiance_missing_flag_exits_2(tmp_path):
    assert main(["irradiance", "--out", str(tmp_path / "x.csv")]) == 2


# ---------------------------------------------------------------------------
# shadow-map


def test_shadow_map_outputs(workspace, tmp_path):
    base = tmp_path / "noon"
    rc = main(["shadow-map", "--city", str(workspace / "city.json"),
               "--time", "2020-06-21T12:00:00Z", "--res", "4",
               "--out", str(base)])
    assert rc == 0
    pgm = (tmp_path / "noon.pgm").read_bytes()
    assert pgm.startswith(b"P5\n")
    assert (tmp_path / "noon.svg").read_text(encoding="utf-8").startswith("<svg")
    doc = json.loads((tmp_path / "noon.manifest.json").read_text(encoding="utf-8"))
    assert set(doc["artifacts"]) == {"shadow_pgm", "shadow_svg"}


def test_shadow_map_at_night_exits_2(workspace, tmp_path):
    rc = main(["shadow-map", "--city", str(workspace / "city.json"),
               "--time", "2020-06-21T00:30:00Z",
               "--out", str(tmp_path / "night")])
    assert rc == 2


def test_shadow_map_bad_time_exits_2(workspace, tmp_path):
    rc = main(["shadow-map", "--city", str(workspace / "city.json"),
               "--time", "yesterday", "--out", str(tmp_path / "x")])
    assert rc == 2


# ---------------------------------------------------------------------------
# features


def test_rent_features_csv(workspace, tmp_path):
    out = tmp_path / "rent.csv"
    rc = main(["features", "--city", str(workspace / "city.json"),
               "--showcase", "rent", "--label-seed", "2", "--out", str(out)])
    assert rc == 0
    table = read_feature_table(out)
    assert table.showcase == "rent"
    assert len(table.columns) == 8
    assert table.n > 0
    doc = json.loads((tmp_path / "rent.csv.manifest.json")
                     .read_text(encoding="utf-8"))
    assert doc["seeds"] == {"labels": 2}
    assert set(doc["artifacts"]) == {"features", "schema"}


def test_pv_features_csv(workspace, tmp_path):
    out = tmp_path / "pv.csv"
    rc = main(["features", "--city", str(workspace / "city.json"),
               "--showcase", "pv", "--irradiance", str(workspace / "irradiance.csv"),
               "--label-seed", "2", "--out", str(out)])
    assert rc == 0
    table = read_feature_table(out)
    assert table.showcase == "pv"
    assert len(table.columns) == 12
    assert table.outcome_name == "pv_system"


def test_pv_features_without_irradiance_exits_2(workspace, tmp_path):
    rc = main(["features", "--city", str(workspace / "city.json"),
               "--showcase", "pv", "--out", str(tmp_path / "pv.csv")])
    assert rc == 2


# ---------------------------------------------------------------------------
# ablate


@pytest.fixture(scope="module")
def rent_features_csv(workspace, tmp_path_factory):
    out = tmp_path_factory.mktemp("feat") / "rent.csv"
    assert main(["features", "--city", str(workspace / "city.json"),
                 "--showcase", "rent", "--label-seed", "2",
                 "--out", str(out)]) == 0
    return out


def test_ablate_outputs_and_determinism(rent_features_csv, tmp_path):
    args = ["ablate", "--features", str(rent_features_csv),
            "--models", "OLS,RF", "--trees", "30",
            "--test-fraction", "0.25", "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.md").read_bytes() == (tmp_path / "b.md").read_bytes()
    csv_lines = (tmp_path / "a.csv").read_text(encoding="utf-8").splitlines()
    assert csv_lines[1] == "tier,OLS,RF"
    assert csv_lines[0].startswith("# showcase=rent metric=RMSE seed=1")
    assert len(csv_lines) == 7
    doc = json.loads((tmp_path / "a.manifest.json").read_text(encoding="utf-8"))
    assert doc["command"] == "ablate"
    assert doc["config"]["test_fraction"] == 0.25
    assert set(doc["artifacts"]) == {"report_csv", "report_md"}


def test_ablate_showcase_mismatch_exits_2(rent_features_csv, tmp_path):
    rc = main(["ablate", "--features", str(rent_features_csv),
               "--showcase", "pv", "--out", str(tmp_path / "x")])
    assert rc == 2


def test_ablate_model_failure_exits_4(rent_features_csv, tmp_path):
    rc = main(["ablate", "--features", str(rent_features_csv),
               "--models", "RF", "--trees", "0", "--out", str(tmp_path / "x")])
    assert rc == 4


def test_ablate_svm_exits_2(rent_features_csv, tmp_path):
    rc = main(["ablate", "--features", str(rent_features_csv),
               "--models", "SVM", "--out", str(tmp_path / "x")])
    assert rc == 2
