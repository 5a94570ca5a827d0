import csv
import json

import numpy as np
import pytest

from v2vnet.cli import Engine, emit_csv, main, parse_config, parse_quantity, run_scenario
from v2vnet.model import ConfigurationError
from v2vnet.model import MultilaneSpec, SingleLaneSpec


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc), encoding="utf-8")
    return str(p)


class TestQuantities:
    @pytest.mark.parametrize("raw,kind,expected", [
        ("20/km", "intensity", 0.02),
        ("0.02/m", "intensity", 0.02),
        ("1.5km", "length", 1500.0),
        ("150 m", "length", 150.0),
        (150, "length", 150.0),
        ("1e3", "plain", 1000.0),
    ])
    def test_units(self, raw, kind, expected):
        assert parse_quantity(raw, kind) == pytest.approx(expected)

    @pytest.mark.parametrize("raw,kind", [("20/km", "length"), ("1km", "intensity"), ("3m", "plain"),
                                          ("abc", "plain"), (True, "plain"), (None, "plain")])
    def test_rejected(self, raw, kind):
        with pytest.raises(ValueError):
            parse_quantity(raw, kind)


class TestParseConfig:
    def test_minimal(self):
        cfg = parse_config("{}")
        assert cfg.spec == SingleLaneSpec(0.02, 1.0, 150.0, 1000.0)
        assert cfg.engines is Engine.BOTH
        assert cfg.seed == 0
        assert cfg.sweep is None

    def test_units_normalized(self):
        cfg = parse_config({"highway": {"lambda_v": "15/km", "d": "0.1km"},
                            "sweep": {"parameter": "lambda_v", "grid": ["5/km", "10/km"]}})
        assert cfg.spec.lambda_v == pytest.approx(0.015)
        assert cfg.spec.d == pytest.approx(100.0)
        assert cfg.sweep.grid == pytest.approx((0.005, 0.01))

    def test_multilane(self):
        cfg = parse_config({"highway": {"eta": 2, "lambda_v2v": ["5/km", "6/km"], "lambda_b": [0, "1/km"],
                                        "d": 150, "rsu_spacing": "1km"}})
        assert isinstance(cfg.spec, MultilaneSpec)
        assert cfg.spec.lambda_b == pytest.approx((0.0, 0.001))

    def test_range_too_long_names_the_range_condition(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config({"highway": {"d": 600}})
        assert any("half-spacing range condition" in e for e in exc.value.errors)

    def test_negative_intensity(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config({"highway": {"lambda_v": "-5/km"}})
        assert any("lambda_v" in e for e in exc.value.errors)

    def test_collects_all_errors(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config({"bogus": 1, "highway": {"colour": "red"}, "engines": "fast", "seed": -1,
                          "replications": 1, "ci_target": 2})
        errs = exc.value.errors
        assert len(errs) == 6
        assert any("bogus" in e for e in errs)
        assert any("colour" in e for e in errs)

    @pytest.mark.parametrize("sweep", [
        {"parameter": "lambda_v", "grid": []},
        {"parameter": "lambda_v", "grid": [0.02, 0.01]},
        {"parameter": "speed", "grid": [1]},
        {"grid": [1]},
    ])
    def test_bad_sweeps(self, sweep):
        with pytest.raises(ConfigurationError):
            parse_config({"sweep": sweep})

    def test_sweep_point_violating_model(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config({"sweep": {"parameter": "d", "grid": [100, 400, 600]}})
        assert any("d=600" in e for e in exc.value.errors)

    def test_window_must_hold_whole_cells(self):
        with pytest.raises(ConfigurationError):
            parse_config({"window": "10.5km"})
        assert parse_config({"window": "20km"}).window == 20_000.0

    def test_preset_defaults_and_options(self):
        cfg = parse_config({"preset": "tradeoff"})
        assert cfg.sweep.parameter == "lambda_v"
        assert cfg.options["d"] == 40.0
        with pytest.raises(ConfigurationError):
            parse_config({"preset": "tradeoff", "options": {"colour": 1}})
        with pytest.raises(ConfigurationError):
            parse_config({"preset": "nope"})

    def test_malformed_json(self):
        with pytest.raises(ConfigurationError):
            parse_config("{not json")


class TestCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = [{"name": "ü, \"quoted\"", "x": float(v), "k": i} for i, v in enumerate(rng.random(20) * 1e-7)]
        rows.append({"name": "Straße ☃", "x": 1 / 3, "k": 99})
        path = emit_csv(rows, tmp_path / "r.csv")
        raw = path.read_bytes()
        assert raw.endswith(b"\r\n")
        with open(path, newline="", encoding="utf-8") as fh:
            back = list(csv.DictReader(fh))
        assert [r["name"] for r in back] == [r["name"] for r in rows]
        for a, b in zip(rows, back):
            assert float(b["x"]) == a["x"]
            assert int(b["k"]) == a["k"]

    def test_header_only(self, tmp_path):
        path = emit_csv([], tmp_path / "e.csv", columns=["a", "b"])
        assert path.read_bytes() == b"a,b\r\n"
        with pytest.raises(ValueError):
            emit_csv([], tmp_path / "f.csv")

    def test_inhomogeneous(self, tmp_path):
        with pytest.raises(ValueError):
            emit_csv([{"a": 1}, {"b": 2}], tmp_path / "g.csv")

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            emit_csv([{"a": 1}], tmp_path / "missing" / "x.csv")


class TestScenarios:
    def test_tradeoff_preset(self, tmp_path):
        res = run_scenario(parse_config({"preset": "tradeoff", "options": {"phases": 256}}), tmp_path)
        curves = [o for o in res.manifest["outputs"] if o["curve"].startswith("lambda_")]
        assert len(curves) == 4
        mixing = next(o for o in res.manifest["outputs"] if o["curve"] == "mixing")
        with open(tmp_path / mixing["file"], newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["n_a"] for r in rows} == {"1"}
        assert {r["n_b"] for r in rows} == {str(int(1000 / 40 + 1))}
        with open(tmp_path / curves[0]["file"], newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 10
        for r in rows:
            assert abs(float(r["coverage"]) - float(r["sim_coverage"])) <= 1 / 256

    def test_manifest_columns(self, tmp_path):
        res = run_scenario(parse_config({"preset": "rsu-law", "options": {"phases": 2000}}), tmp_path)
        out = res.manifest["outputs"][0]
        for col in ("span", "m", "tabulated", "grid_derived", "phase_oracle"):
            assert out["columns"][col]["operation"]
            assert out["columns"][col]["figure"]
        assert res.manifest["summary"]["max_abs_error_grid_derived"] < 0.01
        assert res.manifest["errors"] == []

    def test_generic_sweep_records_failures(self, tmp_path):
        # the mean-rate formula needs traffic, so lambda = 0 fails for that column only
        cfg = parse_config({"engines": "analytic", "sweep": {"parameter": "lambda_v", "grid": [0, "10/km"]}})
        res = run_scenario(cfg, tmp_path)
        assert len(res.manifest["errors"]) == 1
        assert res.manifest["errors"][0]["point"] == 0
        with open(res.files[0], newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["analytic_mean_rate"] == "nan"
        assert float(rows[0]["analytic_v2v"]) == pytest.approx(0.3)
        assert float(rows[1]["analytic_mean_rate"]) > 0

    def test_compare_agrees(self, tmp_path):
        # replicate until the coverage CI is tight, then the engines must agree to 2%
        cfg = parse_config({"engines": "both", "replications": 4, "window": "100km", "seed": 3, "ci_target": 0.005,
                            "sweep": {"parameter": "lambda_v", "grid": ["10/km", "20/km"]}})
        res = run_scenario(cfg, tmp_path)
        with open(res.files[0], newline="") as fh:
            for r in csv.DictReader(fh):
                assert abs(float(r["relative_difference_v2v"])) < 0.02


class TestMain:
    def test_validate(self, tmp_path, capsys):
        assert main(["validate", "--config", write_config(tmp_path, {"scenario": "x"})]) == 0
        assert "ok: x" in capsys.readouterr().out

    def test_validation_error_exit_code(self, tmp_path, capsys):
        assert main(["validate", "--config", write_config(tmp_path, {"highway": {"d": 900}})]) == 2
        assert "half-spacing range condition" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 2

    def test_usage_error(self):
        assert main(["frobnicate"]) == 2

    def test_runtime_error_exit_code(self, tmp_path, capsys):
        # a multilane highway is valid config but the tradeoff preset needs a single lane
        doc = {"highway": {"eta": 2, "lambda_v2v": [0.01, 0.01], "lambda_b": [0, 0]}}
        code = main(["preset", "tradeoff", "--config", write_config(tmp_path, doc), "--out", str(tmp_path / "o")])
        assert code in (1, 2)

    def test_analytic_command(self, tmp_path):
        cfg = write_config(tmp_path, {"sweep": {"parameter": "gamma", "grid": [0.5, 1.0]}})
        out = tmp_path / "run"
        assert main(["analytic", "--config", cfg, "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["engines"] == "analytic"

    def test_preset_reproducible_bytes(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            assert main(["preset", "dispersion", "--reps", "2", "--seed", "9", "--out", str(out)]) == 0
            outs.append(sorted((p.name, p.read_bytes()) for p in out.iterdir()))
        assert outs[0] == outs[1]

    def test_preset_conflict(self, tmp_path):
        cfg = write_config(tmp_path, {"preset": "rate-cdf"})
        assert main(["preset", "tradeoff", "--config", cfg]) == 2
