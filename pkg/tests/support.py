"""Shared model builders for the test suite."""

import numpy as np

from sdemix.model import ModelSpec


def _zeros(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _ones(x):
    return np.ones_like(np.asarray(x, dtype=float))


def zero_drift_model():
    """Unit diffusion with zero drift; h is the identity.

    There is no invariant law, so the registered sampler is the standard
    normal startup used by the Brownian-bridge oracle tests.
    """
    return ModelSpec(
        name="zero_drift_unit",
        drift=lambda alpha, a, x: _zeros(x),
        drift_dx=lambda alpha, a, x: _zeros(x),
        sigma=lambda beta, b, x: _ones(x),
        sigma_dx=lambda beta, b, x: _zeros(x),
        sigma_dxx=lambda beta, b, x: _zeros(x),
        lamperti_cf=lambda beta, b, x: np.asarray(x, dtype=float),
        lamperti_inv_cf=lambda beta, b, y: np.asarray(y, dtype=float),
        invariant_sampler=lambda alpha, beta, a, b, rng, size=None: rng.standard_normal(size),
    )


def atan_model():
    """sigma = 1 + x^2, drift = -x, no closed forms registered.

    Exercises the quadrature/bisection paths: h(x) = atan(x) with image
    (-pi/2, pi/2).
    """
    return ModelSpec(
        name="atan_test",
        drift=lambda alpha, a, x: -np.asarray(x, dtype=float),
        drift_dx=lambda alpha, a, x: -_ones(x),
        sigma=lambda beta, b, x: 1.0 + np.asarray(x, dtype=float) ** 2,
        sigma_dx=lambda beta, b, x: 2.0 * np.asarray(x, dtype=float),
        sigma_dxx=lambda beta, b, x: 2.0 * _ones(x),
    )


def narrow_model(lo, hi):
    """Unit diffusion with zero drift on a bounded state interval."""
    return ModelSpec(
        name="narrow_test",
        drift=lambda alpha, a, x: _zeros(x),
        drift_dx=lambda alpha, a, x: _zeros(x),
        sigma=lambda beta, b, x: _ones(x),
        sigma_dx=lambda beta, b, x: _zeros(x),
        sigma_dxx=lambda beta, b, x: _zeros(x),
        state_lo=lo,
        state_hi=hi,
        x_star=0.5 * (lo + hi),
    )
