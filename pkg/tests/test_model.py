"""Tests for the model layer: Lamperti machinery and built-in models."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdemix.model import (
    MODEL_IDS,
    Effects,
    ExpFamBasis,
    H_term,
    drift_mu,
    get_model,
    lamperti,
    lamperti_inv,
    phi,
)
from support import atan_model, narrow_model, zero_drift_model

OU = get_model("ou_speed")
TD = get_model("t_diffusion")
OL = get_model("ou_level")
ZD = zero_drift_model()
ATAN = atan_model()


def strip_closed_forms(model):
    """Force the generic quadrature/inversion code paths."""
    return dataclasses.replace(model, lamperti_cf=None, lamperti_inv_cf=None,
                               H_cf=None, mu_cf=None, phi_cf=None)


class TestLamperti:
    def test_ou_closed_form(self):
        assert lamperti(OU, 2.0, (), 3.0) == 1.5

    @pytest.mark.parametrize("model,beta", [(OU, 2.0), (TD, 0.1), (OL, 0.5)])
    def test_reference_point_maps_to_zero(self, model, beta):
        assert lamperti(model, beta, (), model.x_star) == 0.0

    def test_t_diffusion_value(self):
        val = lamperti(TD, 0.1, (), 1.0)
        assert math.isclose(val, math.asinh(1.0) / 0.1, rel_tol=1e-14)
        assert abs(val - 8.81374) < 1e-5

    def test_generic_quadrature_matches_closed_form(self):
        stripped = strip_closed_forms(TD)
        grid = np.linspace(-2.0, 2.0, 9)
        for x in grid:
            assert abs(lamperti(stripped, 0.4, (), float(x))
                       - lamperti(TD, 0.4, (), float(x))) < 1e-8

    def test_atan_model_quadrature(self):
        grid = np.linspace(-3.0, 3.0, 13)
        h = lamperti(ATAN, (), (), grid)
        np.testing.assert_allclose(h, np.arctan(grid), atol=1e-9)

    @pytest.mark.parametrize("model,beta", [(OU, 1.0), (TD, 0.3), (ATAN, ())])
    def test_strictly_increasing(self, model, beta):
        grid = np.linspace(-3.0, 3.0, 41)
        h = np.asarray(lamperti(model, beta, (), grid), dtype=float)
        assert np.all(np.diff(h) > 0)

    def test_outside_state_interval_raises(self):
        model = narrow_model(-1.0, 1.0)
        with pytest.raises(ValueError, match="state interval"):
            lamperti(model, (), (), 1.5)

    def test_vectorized_shape(self):
        x = np.array([[0.0, 1.0], [2.0, 3.0]])
        out = np.asarray(lamperti(OU, 2.0, (), x))
        assert out.shape == x.shape
        assert out[1, 1] == 1.5


class TestLampertiInv:
    def test_ou_linear_inverse(self):
        assert lamperti_inv(OU, 2.0, (), 1.5) == 3.0

    def test_t_diffusion_value(self):
        assert abs(lamperti_inv(TD, 0.1, (), 8.81374) - 1.0) < 1e-6

    def test_atan_round_trip(self):
        stripped = strip_closed_forms(ATAN)
        for x in np.linspace(-3.0, 3.0, 13):
            y = lamperti(stripped, (), (), float(x))
            x_back = lamperti_inv(stripped, (), (), y)
            assert abs(lamperti(stripped, (), (), x_back) - y) <= 1e-9 * max(1.0, abs(y))
            assert abs(x_back - x) < 1e-6

    def test_generic_inversion_matches_closed_form(self):
        stripped = strip_closed_forms(TD)
        for y in (-4.0, -0.7, 0.3, 6.0):
            assert abs(lamperti_inv(stripped, 0.4, (), y)
                       - lamperti_inv(TD, 0.4, (), y)) < 1e-8

    def test_outside_image_raises(self):
        # image of h for the atan model is (-pi/2, pi/2)
        with pytest.raises(RuntimeError):
            lamperti_inv(ATAN, (), (), 2.0)


class TestDriftMu:
    def test_zero_drift_unit_sigma(self):
        for y in (-1.0, 0.0, 2.5):
            assert drift_mu(ZD, (), 1.0, (), (), y) == 0.0

    def test_t_diffusion_closed_form(self):
        a, beta = 0.7, 0.3
        for y in (-2.0, 0.1, 1.5):
            expected = -(a / beta + beta / 2.0) * math.tanh(beta * y)
            assert math.isclose(float(drift_mu(TD, (), beta, a, (), y)), expected,
                                rel_tol=1e-12)

    def test_generic_route_matches_t_diffusion_formula(self):
        stripped = strip_closed_forms(TD)
        a, beta = 0.7, 0.3
        for y in (-2.0, 0.1, 1.5):
            expected = -(a / beta + beta / 2.0) * math.tanh(beta * y)
            assert abs(float(drift_mu(stripped, (), beta, a, (), y)) - expected) < 1e-9

    def test_atan_model_direct_formula(self):
        # h^inv(y) = tan(y); mu(y) = d/sigma - sigma'/2 at that point
        for y in (-1.2, -0.3, 0.0, 0.8):
            x = math.tan(y)
            expected = -x / (1.0 + x ** 2) - x
            assert abs(float(drift_mu(ATAN, (), (), (), (), y)) - expected) < 1e-9


class TestPhi:
    def test_ou_speed_formula(self):
        a = 0.7
        for y in (-2.0, 0.0, 1.3):
            assert math.isclose(float(phi(OU, (), 1.0, a, (), y)), -a + a ** 2 * y ** 2,
                                rel_tol=1e-12, abs_tol=1e-12)

    def test_zero_drift_unit_sigma(self):
        for y in (-1.0, 0.4):
            assert phi(ZD, (), 1.0, (), (), y) == 0.0

    def test_t_diffusion_display(self):
        a, beta = 0.9, 0.25
        for y in (-1.5, 0.2, 2.0):
            u = beta * y
            expected = ((a / beta + beta / 2.0) ** 2 * math.tanh(u) ** 2
                        - (a + beta ** 2 / 2.0) / math.cosh(u) ** 2)
            assert math.isclose(float(phi(TD, (), beta, a, (), y)), expected, rel_tol=1e-12)

    def test_generic_expansion_matches_t_diffusion_display(self):
        stripped = strip_closed_forms(TD)
        a, beta = 0.9, 0.25
        for y in (-1.5, 0.2, 2.0):
            u = beta * y
            expected = ((a / beta + beta / 2.0) ** 2 * math.tanh(u) ** 2
                        - (a + beta ** 2 / 2.0) / math.cosh(u) ** 2)
            assert abs(float(phi(stripped, (), beta, a, (), y)) - expected) < 1e-9

    @pytest.mark.parametrize("model,args", [
        (OU, ((), 1.0, 0.7, ())),
        (TD, ((), 0.3, 0.9, ())),
        (OL, ((2.0,), 0.5, 0.4, ())),
        (ATAN, ((), (), (), ())),
    ])
    def test_agrees_with_finite_difference(self, model, args):
        alpha, beta, a, b = args
        y0, step = 0.35, 1e-3
        mu = lambda y: float(drift_mu(model, alpha, beta, a, b, y))
        fd = (mu(y0 + step) - mu(y0 - step)) / (2.0 * step) + mu(y0) ** 2
        val = float(phi(model, alpha, beta, a, b, y0))
        assert abs(val - fd) < 1e-5 * max(1.0, abs(val))

    def test_finite_difference_convergence_rate(self):
        # central-difference error of mu' should shrink like step^2
        y0 = 0.35
        mu = lambda y: float(drift_mu(ATAN, (), (), (), (), y))
        target = float(phi(ATAN, (), (), (), (), y0))
        errs = []
        for step in (4e-2, 2e-2, 1e-2):
            fd = (mu(y0 + step) - mu(y0 - step)) / (2.0 * step) + mu(y0) ** 2
            errs.append(abs(fd - target))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.25)


class TestHTerm:
    @pytest.mark.parametrize("model,args,x", [
        (OU, ((), 2.0, 0.7, ()), 1.3),
        (TD, ((), 0.3, 0.9, ()), -0.4),
        (OL, ((2.0,), 0.5, 0.4, ()), 0.6),
    ])
    def test_equal_endpoints_zero(self, model, args, x):
        alpha, beta, a, b = args
        assert H_term(model, alpha, beta, a, b, x, x) == 0.0

    def test_ou_symbolic_form(self):
        a, beta = 0.7, 2.0
        for x, y in ((0.0, 1.0), (-1.5, 2.5), (3.0, -1.0)):
            expected = -a * (y ** 2 - x ** 2) / (2.0 * beta ** 2)
            assert math.isclose(float(H_term(OU, (), beta, a, (), x, y)), expected,
                                rel_tol=1e-12, abs_tol=1e-15)
            stripped = strip_closed_forms(OU)
            assert abs(float(H_term(stripped, (), beta, a, (), x, y)) - expected) < 1e-9

    def test_t_diffusion_s_difference(self):
        a, beta = 0.9, 0.25
        s = lambda x: -a / (2.0 * beta ** 2) * math.log1p(x ** 2)
        for x, y in ((0.0, 1.0), (-1.5, 0.5)):
            expected = s(y) - s(x) - 0.25 * (math.log1p(y ** 2) - math.log1p(x ** 2))
            assert math.isclose(float(H_term(TD, (), beta, a, (), x, y)), expected,
                                rel_tol=1e-12)
            stripped = strip_closed_forms(TD)
            assert abs(float(H_term(stripped, (), beta, a, (), x, y)) - expected) < 1e-9

    def test_antisymmetry_when_sigma_matches(self):
        # sigma of the t-diffusion is even, so (x, -x) kills the log term
        a, beta, x = 0.9, 0.25, 1.2
        total = float(H_term(TD, (), beta, a, (), x, -x)) + float(H_term(TD, (), beta, a, (), -x, x))
        assert abs(total) < 1e-12


class TestExpFamBasis:
    @pytest.mark.parametrize("model,p1,p2", [(OU, 0, 1), (TD, 0, 1), (OL, 1, 1)])
    def test_basis_shape(self, model, p1, p2):
        assert model.expfam.p1 == p1
        assert model.expfam.p2 == p2

    @pytest.mark.parametrize("model,alpha,beta,a", [
        (OU, (), 1.0, 0.8),
        (TD, (), 0.1, 1.1),
        (OL, (2.0,), 0.5, 0.3),
    ])
    def test_consistency_check_passes(self, model, alpha, beta, a):
        model.check_consistency(alpha, beta, a, (), np.linspace(-2.0, 2.0, 21))

    @pytest.mark.parametrize("model,alpha,beta,a", [
        (OU, (), 1.0, 0.8),
        (TD, (), 0.1, 1.1),
        (OL, (2.0,), 0.5, 0.3),
    ])
    def test_drift_mu_via_basis_matches_generic(self, model, alpha, beta, a):
        for y in (-1.0, 0.2, 1.7):
            x = float(lamperti_inv(model, beta, (), y))
            sig = float(model.sigma(beta, (), x))
            mu_basis = (float(model.expfam.drift(alpha, a, np.asarray(x))) / sig
                        - 0.5 * float(model.sigma_dx(beta, (), x)))
            assert abs(mu_basis - float(drift_mu(model, alpha, beta, a, (), y))) < 1e-10

    def test_mismatched_derivative_lengths_raise(self):
        with pytest.raises(ValueError, match="equal length"):
            ExpFamBasis(g_funcs=(lambda x: -x,), g_dx_funcs=())


class TestEffects:
    def test_scalar_coercion(self):
        eff = Effects(1.5)
        assert eff.a.shape == (1,)
        assert eff.b.shape == (0,)

    def test_vector_passthrough(self):
        eff = Effects(np.array([1.0, 2.0]), 0.5)
        assert eff.a.shape == (2,)
        assert eff.b.shape == (1,)


class TestGetModel:
    def test_registry_ids(self):
        assert MODEL_IDS == ("ou_level", "ou_speed", "t_diffusion")
        for mid in MODEL_IDS:
            assert get_model(mid).name == mid

    def test_dash_alias(self):
        assert get_model("ou-speed").name == "ou_speed"
        assert get_model("t-diffusion").name == "t_diffusion"

    def test_unknown_id(self):
        with pytest.raises(ValueError, match="ou_level, ou_speed, t_diffusion"):
            get_model("heston")


@settings(max_examples=60, deadline=None)
@given(x1=st.floats(-4.0, 4.0), x2=st.floats(-4.0, 4.0))
def test_lamperti_monotone_property(x1, x2):
    lo, hi = sorted((x1, x2))
    if hi - lo < 1e-9:
        return
    assert lamperti(TD, 0.3, (), lo) < lamperti(TD, 0.3, (), hi)


@settings(max_examples=40, deadline=None)
@given(y=st.floats(-1.2, 1.2))
def test_round_trip_property(y):
    x = lamperti_inv(ATAN, (), (), y)
    assert abs(lamperti(ATAN, (), (), x) - y) <= 1e-9 * max(1.0, abs(y))
