"""Tests for panel containers, CSV round trips, and synthetic generation."""

import math

import numpy as np
import pytest

from sdemix.data import (
    PanelData,
    UnitData,
    format_summary_table,
    load_panel_csv,
    load_trace_csv,
    provenance_comments,
    summarize_trace,
    synth_generate,
    write_panel_csv,
    write_summary_csv,
    write_trace_csv,
)


def small_panel():
    u1 = UnitData(np.array([0.0, 1.0, 2.0]), np.array([0.1, -0.2, 0.3]))
    u2 = UnitData(np.array([0.5, 1.5]), np.array([1.0, 1.0 / 3.0]))
    return PanelData((u1, u2), ("a", "b"))


class TestContainers:
    def test_unit_needs_two_observations(self):
        with pytest.raises(ValueError, match="at least 2"):
            UnitData(np.array([0.0]), np.array([1.0]))

    def test_unit_times_strictly_increasing(self):
        with pytest.raises(ValueError, match="increasing"):
            UnitData(np.array([0.0, 0.0]), np.array([1.0, 2.0]))

    def test_unit_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            UnitData(np.array([0.0, 1.0]), np.array([1.0, np.nan]))

    def test_panel_ids_unique(self):
        u = UnitData(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        with pytest.raises(ValueError, match="unique"):
            PanelData((u, u), ("a", "a"))

    def test_counts(self):
        panel = small_panel()
        assert panel.n_units == 2
        assert panel.n_total == 5
        assert panel.total_intervals == 3


class TestPanelCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        panel = small_panel()
        path = tmp_path / "panel.csv"
        write_panel_csv(path, panel, comments=["made for the round-trip test"])
        back = load_panel_csv(path)
        assert back.unit_ids == panel.unit_ids
        for u1, u2 in zip(back.units, panel.units):
            np.testing.assert_array_equal(u1.times, u2.times)
            np.testing.assert_array_equal(u1.values, u2.values)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("time,unit,value\n1,0.0,0.1\n")
        with pytest.raises(ValueError, match="header"):
            load_panel_csv(path)

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("unit,time,value\n1,0.0,0.1\n1,1.0\n")
        with pytest.raises(ValueError, match=":3:"):
            load_panel_csv(path)

    def test_unparseable_number_reports_line(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("unit,time,value\n1,0.0,0.1\n1,one,0.2\n")
        with pytest.raises(ValueError, match=":3:"):
            load_panel_csv(path)

    def test_non_increasing_time_reports_line(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("unit,time,value\n1,0.0,0.1\n1,1.0,0.2\n1,1.0,0.3\n")
        with pytest.raises(ValueError, match=":4:.*increase"):
            load_panel_csv(path)

    def test_unit_must_stay_grouped(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(
            "unit,time,value\n1,0.0,0.1\n1,1.0,0.2\n2,0.0,0.3\n2,1.0,0.1\n1,2.0,0.4\n")
        with pytest.raises(ValueError, match="grouped"):
            load_panel_csv(path)

    def test_single_observation_unit_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("unit,time,value\n1,0.0,0.1\n2,0.0,0.3\n2,1.0,0.1\n")
        with pytest.raises(ValueError, match="fewer than 2"):
            load_panel_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_panel_csv(path)


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "trace.csv"
        rows = np.array([[1.0, 2.5], [0.5, math.pi], [0.25, 1e-7]])
        write_trace_csv(path, ["beta", "gamma"], rows, comments=["run 1"])
        names, iters, back = load_trace_csv(path)
        assert names == ["beta", "gamma"]
        np.testing.assert_array_equal(iters, [1, 2, 3])
        np.testing.assert_array_equal(back, rows)

    def test_summarize_constant_trace(self, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace_csv(path, ["beta"], np.full((50, 1), 2.5))
        [(name, mean, q025, q975)] = summarize_trace(path, burn_in=10)
        assert name == "beta" and mean == 2.5 and q025 == 2.5 and q975 == 2.5

    def test_summarize_uniform_quantiles(self, tmp_path):
        rng = np.random.default_rng(1)
        path = tmp_path / "trace.csv"
        write_trace_csv(path, ["u"], rng.uniform(size=(900, 1)))
        [(_, mean, q025, q975)] = summarize_trace(path, burn_in=0)
        assert abs(mean - 0.5) < 0.05
        assert abs(q025 - 0.025) < 0.02
        assert abs(q975 - 0.975) < 0.02

    def test_summarize_needs_rows_after_burnin(self, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace_csv(path, ["beta"], np.ones((5, 1)))
        with pytest.raises(ValueError, match="burn-in"):
            summarize_trace(path, burn_in=5)

    def test_summary_csv_and_table(self, tmp_path):
        summary = [("beta", 1.0, 0.9, 1.1), ("gamma", 2.0, 1.5, 2.5)]
        path = tmp_path / "summary.csv"
        write_summary_csv(path, summary)
        text = path.read_text()
        assert text.startswith("param,mean,q025,q975\nbeta,")
        table = format_summary_table(summary)
        assert "param" in table and "gamma" in table


class TestSynthGenerate:
    def test_shapes_and_times(self):
        panel = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0},
                               n_units=5, n_obs=8, dt=0.5, seed=3)
        assert panel.n_units == 5
        for unit in panel.units:
            assert unit.n_obs == 8
            np.testing.assert_allclose(unit.times, 0.5 * np.arange(1, 9))

    def test_deterministic(self):
        kw = dict(n_units=3, n_obs=5, dt=1.0, seed=11)
        p1 = synth_generate("ou_speed", {"beta": 1.0, "gamma": 2.0}, **kw)
        p2 = synth_generate("ou_speed", {"beta": 1.0, "gamma": 2.0}, **kw)
        for u1, u2 in zip(p1.units, p2.units):
            np.testing.assert_array_equal(u1.values, u2.values)

    def test_ou_level_params(self):
        panel = synth_generate(
            "ou_level", {"alpha": 20.0, "beta": 0.015, "xi": 0.25, "sigma": 0.05},
            n_units=4, n_obs=6, dt=0.01, seed=5)
        pooled = np.concatenate([u.values for u in panel.units])
        # stationary mean xi / alpha = 0.0125, tight noise
        assert abs(pooled.mean() - 0.0125) < 0.01

    def test_missing_parameter(self):
        with pytest.raises(ValueError, match="missing"):
            synth_generate("ou_speed", {"beta": 1.0}, 2, 3, 1.0, 0)

    def test_dash_alias(self):
        panel = synth_generate("t-diffusion", {"beta": 0.1, "gamma": 1.0},
                               n_units=2, n_obs=3, dt=1.0, seed=0)
        assert panel.n_units == 2

    def test_provenance_deterministic(self):
        c1 = provenance_comments("simulate", seed=7, beta=1.0, model="ou_speed")
        c2 = provenance_comments("simulate", model="ou_speed", beta=1.0, seed=7)
        assert c1 == c2
