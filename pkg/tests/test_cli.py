import json
import math

import numpy as np
import pytest

from safechain import GainConditionWarning, run_closed_loop
from safechain.cli import (
    _encounter_times,
    build_report,
    main,
    parse_config,
    read_trace_csv,
    render_svg,
    write_csv,
)
from safechain.scenarios import build_vehicle_scenario


@pytest.fixture(scope="module")
def short_trace():
    return run_closed_loop(build_vehicle_scenario("dorcbf", {"duration": 1.0}))


class TestParseConfig:
    def test_defaults_filled(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"scenario": "vehicle_dorcbf"}))
        with pytest.warns(GainConditionWarning):
            cfg = parse_config(path)
        assert cfg.dt == 1e-3
        assert cfg.barrier.rho == (5.0, 0.5)
        assert cfg.observers[0].lambda0 == 20.0

    def test_negative_dt_rejected(self, tmp_path):
        from safechain import ConfigError

        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"scenario": "vehicle_dorcbf", "dt": -1}))
        with pytest.raises((ConfigError, ValueError)):
            parse_config(path)

    def test_study_gain_warning_carries_bound(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"scenario": "vehicle_dorcbf",
                                    "barrier": {"rho": [5, 0.5]}}))
        with pytest.warns(GainConditionWarning, match="5.294"):
            parse_config(path)

    def test_malformed_json(self, tmp_path):
        from safechain import ConfigError

        path = tmp_path / "cfg.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_unknown_scenario(self, tmp_path):
        from safechain import ConfigError

        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"scenario": "venus_lander"}))
        with pytest.raises(ConfigError):
            parse_config(path)


class TestCsv:
    def test_row_count_and_columns(self, tmp_path, short_trace):
        path = tmp_path / "trace.csv"
        write_csv(short_trace, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1 + 1001
        header = lines[0].split(",")
        assert header == list(short_trace.columns)
        assert header[:8] == ["t", "x", "y", "v", "theta", "xd", "yd", "dist"]

    def test_first_row_distance(self, tmp_path, short_trace):
        path = tmp_path / "trace.csv"
        write_csv(short_trace, path)
        first = path.read_text().splitlines()[1].split(",")
        dist = float(first[short_trace.columns.index("dist")])
        assert dist == pytest.approx(math.sqrt(18.0), rel=1e-12)

    def test_filter_active_is_integer_text(self, tmp_path, short_trace):
        path = tmp_path / "trace.csv"
        write_csv(short_trace, path)
        col = short_trace.columns.index("filter_active")
        for line in path.read_text().splitlines()[1:]:
            assert line.split(",")[col] in ("0", "1")

    def test_round_trip_full_precision(self, tmp_path, short_trace):
        path = tmp_path / "trace.csv"
        write_csv(short_trace, path)
        columns, data = read_trace_csv(path)
        assert columns == short_trace.columns
        assert np.array_equal(data, short_trace.data)


class TestReport:
    def test_pure_function_of_trace(self, short_trace):
        assert build_report(short_trace) == build_report(short_trace)

    def test_violation_flag_consistency(self, short_trace):
        rep = build_report(short_trace)
        assert (rep.first_violation_time is not None) == (rep.min_h1 < 0.0)

    def test_encounter_detection_synthetic(self):
        t = np.linspace(0.0, 10.0, 1001)
        dist = 2.0 + np.cos(t)  # minima at pi and 3 pi, value 1.0 < 1.5
        times = _encounter_times(t, dist, 1.0)
        assert len(times) == 2
        assert times[0] == pytest.approx(math.pi, abs=0.02)
        assert times[1] == pytest.approx(3 * math.pi, abs=0.02)

    def test_encounter_chatter_merged(self):
        t = np.linspace(0.0, 1.0, 1001)
        dist = 1.2 + 1e-4 * np.sin(400 * t)  # micro-wiggles, one plateau
        times = _encounter_times(t, dist, 1.0)
        assert len(times) == 1


class TestSvg:
    @pytest.mark.parametrize("kind", ["trajectory", "states", "barrier"])
    def test_renders_well_formed(self, tmp_path, short_trace, kind):
        path = tmp_path / f"{kind}.svg"
        render_svg(short_trace, kind, path)
        text = path.read_text()
        assert text.startswith("<svg")
        assert text.rstrip().endswith("</svg>")
        assert "polyline" in text

    def test_empty_trace_rejected(self, tmp_path, short_trace):
        from dataclasses import replace

        empty = replace(short_trace, data=short_trace.data[:0])
        with pytest.raises(ValueError):
            render_svg(empty, "states", tmp_path / "x.svg")

    def test_unknown_kind_rejected(self, tmp_path, short_trace):
        with pytest.raises(ValueError):
            render_svg(short_trace, "holoview", tmp_path / "x.svg")


class TestMain:
    def test_run_writes_artifacts(self, tmp_path):
        with pytest.warns(GainConditionWarning):  # study parameters warn by design
            code = main(["run", "--scenario", "vehicle_dorcbf", "--duration", "0.5",
                         "--out", str(tmp_path), "--svg", "--quiet"])
        assert code == 0
        assert (tmp_path / "vehicle_dorcbf.csv").exists()
        assert (tmp_path / "vehicle_dorcbf_report.json").exists()
        assert (tmp_path / "vehicle_dorcbf_trajectory.svg").exists()
        report = json.loads((tmp_path / "vehicle_dorcbf_report.json").read_text())
        assert report["scenario"] == "vehicle_dorcbf"

    def test_run_with_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scenario": "vehicle_bcbf", "duration": 0.5}))
        code = main(["run", "--config", str(cfg), "--out", str(tmp_path), "--quiet"])
        assert code == 0
        assert (tmp_path / "vehicle_bcbf.csv").exists()

    def test_unknown_scenario_exits_2(self, tmp_path, capsys):
        code = main(["run", "--scenario", "nonexistent", "--out", str(tmp_path)])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_missing_scenario_exits_2(self, tmp_path):
        assert main(["run", "--out", str(tmp_path)]) == 2

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SAFECHAIN_OUT_DIR", str(tmp_path / "envout"))
        code = main(["run", "--scenario", "worked_example_n3",
                     "--duration", "0.2", "--quiet"])
        assert code == 0
        assert (tmp_path / "envout" / "worked_example_n3.csv").exists()

    def test_compare_writes_both(self, tmp_path, capsys):
        code = main(["compare", "--duration", "0.5", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "vehicle_dorcbf.csv").exists()
        assert (tmp_path / "vehicle_bcbf.csv").exists()
        out = capsys.readouterr().out
        assert "min h1" in out
