import csv
import io
import json
import math
from pathlib import Path

import pytest

from stinespring.cli import ConfigError, execute, load_config, main
from stinespring.detectors import dispersive_error

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "demos" / "configs").glob("*.json"))


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_sample_configs_validate_and_run(path, tmp_path, capsys):
    assert main(["validate", "--config", str(path)]) == 0
    out = tmp_path / "out.txt"
    assert main(["run", "--config", str(path), "--output", str(out)]) == 0
    assert out.read_text()
    manifest = json.loads((tmp_path / "out.txt.manifest.json").read_text())
    assert manifest["config"] == json.loads(path.read_text())
    assert set(manifest) == {"config", "seed", "version", "wall_time_s"}


class TestRun:
    def test_measure_output(self, tmp_path, capsys):
        cfg = write(tmp_path, {"scenario": "measure", "params": {"observable": "Z", "state": [0.6, 0.8]}})
        assert main(["run", "--config", cfg]) == 0
        r = rows(capsys.readouterr().out)
        assert [float(x["eigenvalue"]) for x in r] == [1.0, -1.0]
        assert float(r[0]["probability"]) == pytest.approx(0.36)
        assert float(r[1]["probability"]) == pytest.approx(0.64)

    def test_seed_gives_identical_bytes(self, tmp_path):
        cfg = {
            "scenario": "protocol",
            "params": {
                "protocol": {
                    "registers": [{"label": "q", "dim": 2}],
                    "instructions": [{"type": "measure", "observable": "X", "targets": ["q"], "ss_label": "M"}],
                },
                "state": [1, 0],
                "shots": 300,
            },
        }
        path = write(tmp_path, cfg)
        outs = []
        for i in range(2):
            o = tmp_path / f"o{i}.csv"
            assert main(["run", "--config", path, "--output", str(o), "--seed", "42"]) == 0
            outs.append(o.read_bytes())
        assert outs[0] == outs[1]
        o = tmp_path / "other.csv"
        main(["run", "--config", path, "--output", str(o), "--seed", "43"])
        assert o.read_bytes() != outs[0]

    def test_floats_round_trip(self):
        text = execute({"scenario": "dispersive", "params": {"c_g": 1, "c_e": 0, "alpha": 1.0, "theta": math.pi / 6}})
        value = float(rows(text)[0]["value"])
        assert value == dispersive_error(1.0, math.pi / 6)

    def test_sterngerlach_profile(self):
        cfg = {"scenario": "sterngerlach", "params": {"c_up": 0.6, "c_down": 0.8, "b": 4.0, "delta": 1.0, "profile": True}}
        r = rows(execute(cfg))
        z = [float(x["z"]) for x in r]
        dz = z[1] - z[0]
        assert sum(float(x["density_up"]) for x in r) * dz == pytest.approx(0.36, abs=1e-9)
        assert sum(float(x["density_down"]) for x in r) * dz == pytest.approx(0.64, abs=1e-9)

    def test_json_format(self):
        cfg = {"scenario": "bell", "params": {}, "output": {"format": "json"}}
        recs = json.loads(execute(cfg))
        assert sum(r["probability"] for r in recs) == pytest.approx(1.0)
        assert recs[0]["A"] == 0


class TestErrors:
    def test_unknown_key_is_rejected_without_output(self, tmp_path, capsys):
        cfg = write(tmp_path, {"scenario": "measure", "params": {"observable": "Z", "state": [1, 0], "extra": 1}})
        out = tmp_path / "out.csv"
        assert main(["run", "--config", cfg, "--output", str(out)]) == 1
        assert "extra" in capsys.readouterr().err
        assert not out.exists()

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "none.json")]) == 1

    def test_malformed_protocol(self, tmp_path):
        cfg = write(tmp_path, {"scenario": "protocol", "params": {"protocol": {"registers": []}, "state": [1]}})
        assert main(["validate", "--config", cfg]) == 1

    def test_dimension_mismatch(self, tmp_path):
        cfg = write(tmp_path, {"scenario": "measure", "params": {"observable": "CNOT", "state": [1, 0]}})
        assert main(["run", "--config", cfg]) == 1

    def test_guard_trip_exits_two_without_output(self, tmp_path):
        params = {"c_up": 1, "c_down": 0, "grid": {"z_min": -1, "z_max": 1, "points": 64}}
        cfg = write(tmp_path, {"scenario": "sterngerlach", "params": params})
        out = tmp_path / "out.csv"
        assert main(["run", "--config", cfg, "--output", str(out)]) == 2
        assert not out.exists()
        assert list(tmp_path.glob(".tmp-*")) == []

    def test_bad_seed(self, tmp_path):
        cfg = write(tmp_path, {"scenario": "bell", "params": {}})
        assert main(["run", "--config", cfg, "--seed", "-1"]) == 1

    def test_load_config_reports_path(self, tmp_path):
        cfg = write(tmp_path, {"scenario": "fluorescence", "params": {"c_g": 1, "c_e": 0, "p": 2, "n": 1}})
        with pytest.raises(ConfigError, match="params|p"):
            load_config(cfg)
