"""Tests for the augmented log-likelihood and sufficient statistics."""

import dataclasses
import math

import numpy as np
import pytest

from sdemix.bridge import BridgePath, simulate_bridge_approx, ystar_from_values
from sdemix.data import PanelData, UnitData
from sdemix.likelihood import (
    BridgeReductions,
    PanelStatics,
    ell_interp,
    expfam_loglik_unit,
    loglik_unit,
    model_functionals,
    path_integral,
    suff_stats,
)
from sdemix.model import Effects, ExpFamBasis, get_model
from support import zero_drift_model

OU = get_model("ou_speed")
TD = get_model("t_diffusion")
OL = get_model("ou_level")
ZD = zero_drift_model()


def bridges_for(model, alpha, beta, effects, unit, n_steps, seed):
    rng = np.random.default_rng(seed)
    out = []
    for j in range(unit.n_intervals):
        dtj = unit.times[j + 1] - unit.times[j]
        out.append(simulate_bridge_approx(
            model, alpha, beta, effects, unit.times[j], unit.values[j],
            unit.times[j + 1], unit.values[j + 1], dtj / n_steps, rng))
    return out


def random_instance(rng, model_name):
    """A crossable single-unit instance: observations one diffusion-step apart."""
    if model_name == "ou_speed":
        model, alpha = OU, ()
        beta = rng.uniform(0.5, 1.5)
        a = rng.uniform(0.3, 2.0)
    elif model_name == "t_diffusion":
        model, alpha = TD, ()
        beta = rng.uniform(0.08, 0.3)
        a = rng.uniform(0.3, 1.5)
    else:
        model, alpha = OL, (rng.uniform(0.5, 2.5),)
        beta = rng.uniform(0.3, 1.2)
        a = rng.uniform(-0.5, 1.0)
    effects = Effects(a)
    dt = 0.5
    x = [float(model.invariant_sampler(alpha, beta, max(a, 0.2)
                                       if model is not OL else a, (), rng))]
    for _ in range(2):
        sig = float(model.sigma(beta, (), x[-1]))
        x.append(x[-1] + sig * math.sqrt(dt) * rng.uniform(-1.2, 1.2))
    unit = UnitData(np.array([0.0, dt, 2 * dt]), np.array(x))
    return model, alpha, beta, effects, unit


class TestPathIntegral:
    def test_constant_one(self):
        assert path_integral(np.ones(77), 1.0 / 76) == pytest.approx(1.0, abs=1e-14)

    def test_linear_exact(self):
        grid = np.linspace(0.0, 1.0, 101)
        assert path_integral(grid, 0.01) == pytest.approx(0.5, abs=1e-14)

    def test_quadratic(self):
        grid = np.linspace(0.0, 1.0, 101)
        assert path_integral(grid ** 2, 0.01) == pytest.approx(1.0 / 3.0, abs=1e-4)

    def test_needs_grid(self):
        with pytest.raises(ValueError, match="at least 2"):
            path_integral(np.array([1.0]), 0.1)


class TestEllInterp:
    def test_endpoints(self):
        assert ell_interp(3.0, -7.0, 1.0, 4.0, 1.0) == 3.0
        assert ell_interp(3.0, -7.0, 1.0, 4.0, 4.0) == -7.0

    def test_midpoint(self):
        assert ell_interp(0.0, 4.0, 0.0, 1.0, 0.5) == pytest.approx(2.0)

    def test_matches_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            h1, h2 = rng.normal(size=2)
            t1 = rng.uniform(0, 1)
            t2 = t1 + rng.uniform(0.1, 2)
            t = rng.uniform(t1, t2)
            expect = ((t2 - t) * h1 + (t - t1) * h2) / (t2 - t1)
            assert ell_interp(h1, h2, t1, t2, t) == pytest.approx(expect, rel=1e-12)

    def test_outside_interval_raises(self):
        with pytest.raises(ValueError, match="outside"):
            ell_interp(0.0, 1.0, 0.0, 1.0, 1.5)

    def test_vectorized(self):
        t = np.linspace(0.0, 1.0, 11)
        out = ell_interp(0.0, 10.0, 0.0, 1.0, t)
        np.testing.assert_allclose(out, 10.0 * t, atol=1e-14)


class TestLoglikUnit:
    def test_zero_drift_reduction(self):
        # d = 0, sigma = 1: H = 0, phi = 0, log sigma = 0, h = identity
        unit = UnitData(np.array([0.0, 1.0, 2.5]), np.array([0.0, 0.7, 0.2]))
        bridges = bridges_for(ZD, (), 1.0, Effects(0.0), unit, 20, seed=1)
        expect = -(0.7 ** 2 / 2.0 + (0.2 - 0.7) ** 2 / (2.0 * 1.5))
        assert loglik_unit(ZD, (), 1.0, Effects(0.0), unit, bridges) == pytest.approx(
            expect, abs=1e-12)

    def test_ou_speed_assembled_from_reduced_quantities(self):
        # independent assembly: a t_i - a^2 B_i / 2 - eta G1_i - (n-1) log beta
        beta, a = 0.9, 1.3
        eta = beta ** -2
        rng = np.random.default_rng(3)
        values = np.cumsum(rng.normal(0, 0.8, size=4))
        unit = UnitData(np.array([0.0, 1.0, 2.0, 3.0]), values)
        bridges = bridges_for(OU, (), beta, Effects(a), unit, 30, seed=4)

        h1 = lambda j: values[j]  # base transform u(x) = x
        P_Y2 = P_Yl = L2 = 0.0
        for j, bp in enumerate(bridges):
            ell = h1(j) + (h1(j + 1) - h1(j)) * np.arange(31) / 30
            P_Y2 += np.trapezoid(bp.ystar ** 2, dx=bp.delta)
            P_Yl += np.trapezoid(bp.ystar * ell, dx=bp.delta)
            L2 += np.trapezoid(ell ** 2, dx=bp.delta)
        t_i = -eta * (values[-1] ** 2 - values[0] ** 2) / 2.0 + 3.0 / 2.0
        B_i = P_Y2 + 2.0 * P_Yl / beta + eta * L2
        G1_i = float(np.sum(np.diff(values) ** 2 / 2.0))
        expect = a * t_i - 0.5 * a ** 2 * B_i - eta * G1_i - 3.0 * math.log(beta)
        got = loglik_unit(OU, (), beta, Effects(a), unit, bridges)
        assert got == pytest.approx(expect, abs=1e-10)

    @pytest.mark.parametrize("model_name", ["ou_speed", "t_diffusion", "ou_level"])
    def test_expfam_assembly_identity(self, model_name):
        rng = np.random.default_rng(hash(model_name) % 2 ** 32)
        for k in range(12):
            model, alpha, beta, effects, unit = random_instance(rng, model_name)
            bridges = bridges_for(model, alpha, beta, effects, unit, 8,
                                  seed=1000 + k)
            panel = PanelData((unit,), ("u",))
            stats = suff_stats(model, alpha, beta, [effects], panel, [bridges])
            general = loglik_unit(model, alpha, beta, effects, unit, bridges)
            assembled = expfam_loglik_unit(stats, 0, alpha, effects.a)
            assert abs(general - assembled) < 1e-8

    def test_wrong_bridge_count(self):
        unit = UnitData(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.5, 0.1]))
        bridges = bridges_for(ZD, (), 1.0, Effects(0.0), unit, 10, seed=2)
        with pytest.raises(ValueError, match="bridges"):
            loglik_unit(ZD, (), 1.0, Effects(0.0), unit, bridges[:1])

    def test_mismatched_endpoints(self):
        unit = UnitData(np.array([0.0, 1.0]), np.array([0.0, 0.5]))
        other = UnitData(np.array([0.0, 1.0]), np.array([0.0, 0.4]))
        bridges = bridges_for(ZD, (), 1.0, Effects(0.0), other, 10, seed=2)
        with pytest.raises(ValueError, match="do not match"):
            loglik_unit(ZD, (), 1.0, Effects(0.0), unit, bridges)

    def test_grid_refinement_converges(self):
        # smooth synthetic path sampled at three resolutions: the
        # phi-integral error must shrink as the grid refines
        beta, a = 1.0, 1.0
        x1, x2 = 0.2, 0.9
        unit = UnitData(np.array([0.0, 1.0]), np.array([x1, x2]))

        def smooth_bridge(n):
            s = np.arange(n + 1) / n
            values = x1 + (x2 - x1) * s + 0.5 * np.sin(math.pi * s)
            values[0], values[-1] = x1, x2
            return BridgePath(t1=0.0, t2=1.0, x1=x1, x2=x2, delta=1.0 / n,
                              values=values, mu_idx=1,
                              ystar=ystar_from_values(OU, beta, (), values))

        lls = [loglik_unit(OU, (), beta, Effects(a), unit, [smooth_bridge(n)])
               for n in (20, 40, 320)]
        err_coarse = abs(lls[0] - lls[2])
        err_fine = abs(lls[1] - lls[2])
        assert err_fine < 0.6 * err_coarse


class TestSuffStats:
    def _stats(self, model, alpha, beta, effects, unit, n_steps=16, seed=5):
        bridges = bridges_for(model, alpha, beta, effects, unit, n_steps, seed)
        panel = PanelData((unit,), ("u",))
        return (suff_stats(model, alpha, beta, [effects], panel, [bridges]),
                bridges)

    def test_ou_speed_t_closed_form(self):
        beta = 0.8
        unit = UnitData(np.array([0.0, 1.0, 2.0]), np.array([0.3, 0.9, -0.2]))
        stats, _ = self._stats(OU, (), beta, Effects(1.0), unit)
        expect = -(unit.values[-1] ** 2 - unit.values[0] ** 2) / (2 * beta ** 2) \
            + (unit.times[-1] - unit.times[0]) / 2.0
        assert stats.t[0, 0] == pytest.approx(expect, abs=1e-12)

    def test_ou_speed_B_is_centered_square_integral(self):
        beta = 1.1
        unit = UnitData(np.array([0.0, 1.0, 2.0]), np.array([0.3, 0.9, -0.2]))
        stats, bridges = self._stats(OU, (), beta, Effects(0.7), unit)
        expect = 0.0
        for j, bp in enumerate(bridges):
            n = bp.n_grid
            ell = unit.values[j] + (unit.values[j + 1] - unit.values[j]) \
                * np.arange(n + 1) / n
            expect += np.trapezoid((bp.ystar + ell / beta) ** 2, dx=bp.delta)
        assert stats.B[0, 0, 0] == pytest.approx(expect, rel=1e-10)

    def test_ou_level_B_is_span_over_beta_sq(self):
        beta = 0.6
        unit = UnitData(np.array([0.0, 0.5, 1.25]), np.array([0.2, 0.5, 0.4]))
        stats, _ = self._stats(OL, (1.5,), beta, Effects(0.3), unit)
        assert stats.B[0, 0, 0] == pytest.approx(1.25 / beta ** 2, rel=1e-12)

    def test_ou_level_D_matches_direct_assembly(self):
        beta = 0.7
        unit = UnitData(np.array([0.0, 1.0, 2.0]), np.array([0.1, 0.6, 0.3]))
        stats, bridges = self._stats(OL, (2.0,), beta, Effects(0.4), unit)
        expect = 0.0
        for j, bp in enumerate(bridges):
            n = bp.n_grid
            ell = unit.values[j] + (unit.values[j + 1] - unit.values[j]) \
                * np.arange(n + 1) / n
            expect += np.trapezoid((bp.ystar + ell / beta) ** 2, dx=bp.delta)
        assert stats.D[0, 0] == pytest.approx(expect, abs=1e-10)

    def test_no_random_drift_effect(self):
        # move the OU drift to the fixed-effect channel: g is absent
        basis = ExpFamBasis(
            f_funcs=(lambda x: -x,),
            f_dx_funcs=(lambda x: -np.ones_like(x),),
            c=lambda x: np.ones_like(x),
            c_dx=lambda x: np.zeros_like(x),
            c_dxx=lambda x: np.zeros_like(x),
            int_f_over_c2=(lambda x: -0.5 * x ** 2,),
        )
        model = dataclasses.replace(
            OU, expfam=basis,
            drift=lambda alpha, a, x: -np.atleast_1d(alpha)[0] * x,
            drift_dx=lambda alpha, a, x: -np.atleast_1d(alpha)[0] * np.ones_like(x),
            invariant_sampler=None, mean_reversion=None,
            H_cf=None, mu_cf=None, phi_cf=None)
        beta = 0.8
        unit = UnitData(np.array([0.0, 1.0, 2.0]), np.array([0.3, 0.9, -0.2]))
        bridges = bridges_for(model, (1.0,), beta, Effects(np.zeros(0)), unit,
                              16, seed=5)
        panel = PanelData((unit,), ("u",))
        stats = suff_stats(model, (1.0,), beta, [Effects(np.zeros(0))], panel,
                           [bridges])
        assert stats.t.shape == (1, 0) and stats.B.shape == (1, 0, 0)
        expect = -(unit.values[-1] ** 2 - unit.values[0] ** 2) / (2 * beta ** 2) \
            + (unit.times[-1] - unit.times[0]) / 2.0
        assert stats.v[0] == pytest.approx(expect, abs=1e-12)

    @pytest.mark.parametrize("model_name", ["ou_speed", "ou_level"])
    def test_B_and_D_positive_semidefinite(self, model_name):
        rng = np.random.default_rng(6)
        for k in range(8):
            model, alpha, beta, effects, unit = random_instance(rng, model_name)
            stats, _ = self._stats(model, alpha, beta, effects, unit,
                                   n_steps=12, seed=2000 + k)
            for M in (stats.B[0], stats.D_units[0]):
                if M.size:
                    assert np.linalg.eigvalsh(M).min() >= -1e-10

    def test_requires_basis(self):
        unit = UnitData(np.array([0.0, 1.0]), np.array([0.0, 0.5]))
        bridges = bridges_for(ZD, (), 1.0, Effects(0.0), unit, 8, seed=1)
        with pytest.raises(ValueError, match="exponential-family"):
            suff_stats(ZD, (), 1.0, [Effects(0.0)], PanelData((unit,), ("u",)),
                       [bridges])

    def test_alpha_length_checked(self):
        unit = UnitData(np.array([0.0, 1.0]), np.array([0.0, 0.2]))
        bridges = bridges_for(OU, (), 1.0, Effects(1.0), unit, 8, seed=1)
        with pytest.raises(ValueError, match="alpha"):
            suff_stats(OU, (1.0,), 1.0, [Effects(1.0)], PanelData((unit,), ("u",)),
                       [bridges])


class TestModelFunctionals:
    def _panel_and_bridges(self, model, alpha, beta, a_list, seed=7, n_steps=10):
        rng = np.random.default_rng(seed)
        units, all_bridges, effects = [], [], []
        for a in a_list:
            x = [float(model.invariant_sampler(alpha, beta, a, (), rng))]
            for _ in range(2):
                sig = float(model.sigma(beta, (), x[-1]))
                x.append(x[-1] + sig * 0.7 * rng.uniform(-1, 1))
            unit = UnitData(np.array([0.0, 1.0, 2.0]), np.array(x))
            units.append(unit)
            effects.append(Effects(a))
            all_bridges.append(bridges_for(model, alpha, beta, Effects(a), unit,
                                           n_steps, seed=rng.integers(2 ** 31)))
        panel = PanelData(tuple(units), tuple(str(i) for i in range(len(units))))
        return panel, effects, all_bridges

    def test_ou_speed_g1_direct(self):
        panel, effects, bridges = self._panel_and_bridges(OU, (), 1.0, [0.8, 1.4])
        out = model_functionals("ou_speed", (), effects, panel, bridges, 1.0)
        expect = sum(float(np.sum(np.diff(u.values) ** 2 / (2 * np.diff(u.times))))
                     for u in panel.units)
        assert out["G1"] == pytest.approx(expect, rel=1e-12)
        a = np.array([0.8, 1.4])
        dx2 = np.array([u.values[-1] ** 2 - u.values[0] ** 2 for u in panel.units])
        assert out["G2"] == pytest.approx(0.5 * float(a @ dx2), rel=1e-12)

    def test_t_diffusion_g2_direct(self):
        panel, effects, bridges = self._panel_and_bridges(TD, (), 0.15, [0.9, 1.1])
        out = model_functionals("t_diffusion", (), effects, panel, bridges, 0.15)
        a = np.array([0.9, 1.1])
        lr = np.array([math.log1p(u.values[-1] ** 2) - math.log1p(u.values[0] ** 2)
                       for u in panel.units])
        assert out["G2"] == pytest.approx(0.5 * float(a @ lr), rel=1e-12)
        assert callable(out["F"]) and math.isfinite(out["F"](0.15))

    def test_all_zero_data(self):
        unit = UnitData(np.array([0.0, 1.0, 2.0]), np.zeros(3))
        bridges = bridges_for(TD, (), 0.1, Effects(1.0), unit, 10, seed=3)
        out = model_functionals("t_diffusion", (), [Effects(1.0)],
                                PanelData((unit,), ("u",)), [bridges], 0.1)
        assert out["G1"] == 0.0 and out["G2"] == 0.0

    def test_unknown_model(self):
        unit = UnitData(np.array([0.0, 1.0]), np.array([0.0, 0.1]))
        bridges = bridges_for(OU, (), 1.0, Effects(1.0), unit, 8, seed=1)
        with pytest.raises(ValueError, match="unknown model"):
            model_functionals("brownian", (), [Effects(1.0)],
                              PanelData((unit,), ("u",)), [bridges], 1.0)

    def test_ou_level_quantities_feed_conditionals(self):
        panel, effects, bridges = self._panel_and_bridges(OL, (1.5,), 0.5,
                                                          [0.4, 0.7])
        out = model_functionals("ou_level", (1.5,), effects, panel, bridges, 0.5)
        for key in ("G1", "G2", "E1", "E2", "E3", "v", "D"):
            assert math.isfinite(out[key])
        assert out["D"] > 0


class TestStaticsAndReductions:
    def test_reductions_match_bridge_objects(self):
        beta, a = 1.0, 1.0
        unit = UnitData(np.array([0.0, 1.0, 2.0]), np.array([0.1, 0.7, 0.4]))
        bridges = bridges_for(OU, (), beta, Effects(a), unit, 12, seed=9)
        statics = PanelStatics.build(OU, PanelData((unit,), ("u",)), 12)
        red = BridgeReductions.from_bridges(statics, [bridges])
        expect = sum(np.trapezoid(bp.ystar ** 2, dx=bp.delta) for bp in bridges)
        assert red.P_Y2[0] == pytest.approx(expect, rel=1e-12)

    def test_shape_mismatch_rejected(self):
        unit = UnitData(np.array([0.0, 1.0]), np.array([0.0, 0.3]))
        statics = PanelStatics.build(OU, PanelData((unit,), ("u",)), 12)
        with pytest.raises(ValueError, match="does not match"):
            BridgeReductions.build(statics, np.zeros((1, 5)))
