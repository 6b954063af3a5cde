"""Mixed-effects SDE model definitions and Lamperti-transform machinery.

A model describes N diffusions

    dX^i_t = d(alpha, a^i, X^i_t) dt + sigma(beta, b^i, X^i_t) dW^i_t,

where (alpha, beta) are fixed effects shared by all units and (a^i, b^i)
are per-unit random effects. The continuous-path likelihood only exists
after the Lamperti change of variables

    h(x) = int_{x*}^{x} du / sigma(u),

which turns X into a unit-diffusion process Y = h(X) with drift

    mu(y) = d(h^inv(y)) / sigma(h^inv(y)) - sigma'(h^inv(y)) / 2.

The functional phi = mu' + mu^2 and the endpoint term

    H(x, y) = int_x^y d(u)/sigma(u)^2 du - (log sigma(y) - log sigma(x)) / 2

are the analytic ingredients of the augmented log-likelihood.

Models whose drift is linear in the parameters, d = alpha.f(x) + a.g(x),
carry an :class:`ExpFamBasis` which unlocks closed-form Gibbs conditionals
and sufficient statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ExpFamBasis",
    "Effects",
    "ModelSpec",
    "lamperti",
    "lamperti_inv",
    "drift_mu",
    "phi",
    "H_term",
    "get_model",
    "MODEL_IDS",
]


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpFamBasis:
    """Linear-drift basis d(alpha, a, x) = alpha.f(x) + a.g(x).

    Parameters
    ----------
    f_funcs, g_funcs : sequences of callables
        Component functions f_k, g_k, each vectorized in x. Either may be
        empty (p1 = 0 or p2 = 0).
    f_dx_funcs, g_dx_funcs : sequences of callables
        Their x-derivatives, same lengths.
    c : callable, optional
        Scalar diffusion factor with sigma = beta * c(x) (``scalar_is_beta``
        True) or sigma = b * c(x) (False). None means sigma is handled only
        through the generic ModelSpec callables.
    c_dx, c_dxx : callables, optional
        Derivatives of c.
    scalar_is_beta : bool
        Which of beta / b multiplies c in the diffusion coefficient.
    int_f_over_c2, int_g_over_c2 : sequences of callables, optional
        Antiderivatives F_k with F_k' = f_k / c^2 (and likewise for g),
        used for closed-form endpoint integrals. When absent the
        integrals fall back to adaptive quadrature.
    """

    f_funcs: tuple = ()
    g_funcs: tuple = ()
    f_dx_funcs: tuple = ()
    g_dx_funcs: tuple = ()
    c: Callable | None = None
    c_dx: Callable | None = None
    c_dxx: Callable | None = None
    scalar_is_beta: bool = True
    int_f_over_c2: tuple = ()
    int_g_over_c2: tuple = ()

    def __post_init__(self):
        if len(self.f_funcs) != len(self.f_dx_funcs):
            raise ValueError("f_funcs and f_dx_funcs must have equal length")
        if len(self.g_funcs) != len(self.g_dx_funcs):
            raise ValueError("g_funcs and g_dx_funcs must have equal length")

    @property
    def p1(self) -> int:
        return len(self.f_funcs)

    @property
    def p2(self) -> int:
        return len(self.g_funcs)

    def _stack(self, funcs, x):
        x = np.asarray(x, dtype=float)
        if not funcs:
            return np.zeros((0,) + x.shape)
        return np.stack([np.broadcast_to(fn(x), x.shape) for fn in funcs])

    def f(self, x):
        """Stacked basis values, shape (p1,) + shape(x)."""
        return self._stack(self.f_funcs, x)

    def g(self, x):
        """Stacked basis values, shape (p2,) + shape(x)."""
        return self._stack(self.g_funcs, x)

    def f_dx(self, x):
        return self._stack(self.f_dx_funcs, x)

    def g_dx(self, x):
        return self._stack(self.g_dx_funcs, x)

    def drift(self, alpha, a, x):
        """alpha.f(x) + a.g(x) evaluated through the basis."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        a = np.atleast_1d(np.asarray(a, dtype=float))
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        if self.p1:
            out = out + np.tensordot(alpha, self.f(x), axes=1)
        if self.p2:
            out = out + np.tensordot(a, self.g(x), axes=1)
        return out


@dataclass(frozen=True)
class Effects:
    """Random effects of a single unit: drift effects a, diffusion effects b."""

    a: np.ndarray
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=float)))
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))


@dataclass(frozen=True)
class ModelSpec:
    """Full model description.

    drift/sigma and their derivatives must be vectorized in x. Optional
    closed forms (lamperti_cf, lamperti_inv_cf, H_cf, mu_cf, phi_cf) are
    used whenever present; the built-in models register all of them.
    """

    name: str
    drift: Callable
    drift_dx: Callable
    sigma: Callable
    sigma_dx: Callable
    sigma_dxx: Callable
    state_lo: float = -math.inf
    state_hi: float = math.inf
    x_star: float = 0.0
    expfam: ExpFamBasis | None = None
    lamperti_cf: Callable | None = None
    lamperti_inv_cf: Callable | None = None
    H_cf: Callable | None = None
    mu_cf: Callable | None = None
    phi_cf: Callable | None = None
    invariant_sampler: Callable | None = None
    mean_reversion: Callable | None = None

    def in_state_interval(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x > self.state_lo) and np.all(x < self.state_hi))

    def check_consistency(self, alpha, beta, a, b, grid) -> None:
        """Spot-check model invariants on a grid; raises AssertionError.

        Verifies sigma positivity, derivative consistency (finite
        differences), and, when an ExpFamBasis is present, that the basis
        reproduces the drift to 1e-10.
        """
        grid = np.asarray(grid, dtype=float)
        sig = self.sigma(beta, b, grid)
        assert np.all(sig > 0), "sigma must be positive on the state interval"
        eps = 1e-6 * max(1.0, float(np.max(np.abs(grid))))
        d_num = (self.drift(alpha, a, grid + eps) - self.drift(alpha, a, grid - eps)) / (2 * eps)
        assert np.allclose(self.drift_dx(alpha, a, grid), d_num, rtol=1e-4, atol=1e-6)
        s_num = (self.sigma(beta, b, grid + eps) - self.sigma(beta, b, grid - eps)) / (2 * eps)
        assert np.allclose(self.sigma_dx(beta, b, grid), s_num, rtol=1e-4, atol=1e-6)
        if self.expfam is not None:
            rebuilt = self.expfam.drift(alpha, a, grid)
            assert np.max(np.abs(rebuilt - self.drift(alpha, a, grid))) < 1e-10


# ---------------------------------------------------------------------------
# adaptive Simpson quadrature (shared by lamperti / H_term fallbacks)
# ---------------------------------------------------------------------------


def _adaptive_simpson(fn: Callable[[float], float], a: float, b: float,
                      tol: float = 1e-10, max_depth: int = 50) -> float:
    """Adaptive Simpson rule with absolute tolerance."""
    if a == b:
        return 0.0

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, eps, depth):
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl = fn(xl)
        fr = fn(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        if depth >= max_depth:
            raise RuntimeError(
                f"adaptive Simpson failed to converge on [{x0}, {x2}] at depth {depth}"
            )
        if abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (recurse(x0, xm, f0, fl, f1, left, eps / 2.0, depth + 1)
                + recurse(xm, x2, f1, fr, f2, right, eps / 2.0, depth + 1))

    fa, fm, fb = fn(a), fn(0.5 * (a + b)), fn(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _check_in_state(model: ModelSpec, x) -> None:
    if not model.in_state_interval(x):
        raise ValueError(
            f"value {x!r} outside state interval ({model.state_lo}, {model.state_hi}) "
            f"of model {model.name!r}"
        )


def lamperti(model: ModelSpec, beta, b, x):
    """Lamperti transform h(x) = int_{x*}^{x} du / sigma(beta, b, u).

    Uses the model's closed form when registered, otherwise adaptive
    Simpson quadrature with absolute tolerance 1e-10. Vectorized in x.
    """
    _check_in_state(model, x)
    if model.lamperti_cf is not None:
        return model.lamperti_cf(beta, b, x)
    scalar = np.isscalar(x) or np.asarray(x).ndim == 0

    def one(xv: float) -> float:
        return _adaptive_simpson(lambda u: 1.0 / float(model.sigma(beta, b, u)),
                                 model.x_star, float(xv))

    if scalar:
        return one(float(x))
    return np.array([one(v) for v in np.asarray(x, dtype=float).ravel()]).reshape(np.shape(x))


def lamperti_inv(model: ModelSpec, beta, b, y):
    """Inverse of the Lamperti transform.

    Closed form when registered; otherwise bracketed bisection with a
    Newton polish (h is strictly increasing since sigma > 0).
    """
    if model.lamperti_inv_cf is not None:
        return model.lamperti_inv_cf(beta, b, y)
    scalar = np.isscalar(y) or np.asarray(y).ndim == 0

    def one(yv: float) -> float:
        # expand a bracket [lo, hi] around x_star with h(lo) <= y <= h(hi)
        if yv == 0.0:
            return model.x_star
        step = max(1.0, abs(model.x_star)) * 0.5
        lo = hi = model.x_star
        h_of = lambda xv: lamperti(model, beta, b, xv)
        h_prev = 0.0
        for _ in range(200):
            if yv > 0:
                hi = hi + step
                if math.isfinite(model.state_hi):
                    hi = min(hi, model.state_hi - 1e-12 * max(1.0, abs(model.state_hi)))
                h_cur = h_of(hi)
                if h_cur >= yv:
                    break
            else:
                lo = lo - step
                if math.isfinite(model.state_lo):
                    lo = max(lo, model.state_lo + 1e-12 * max(1.0, abs(model.state_lo)))
                h_cur = h_of(lo)
                if h_cur <= yv:
                    break
            if abs(h_cur - h_prev) <= 1e-14 * max(1.0, abs(h_cur)):
                raise RuntimeError(
                    f"y={yv} lies outside the image of the Lamperti transform for "
                    f"model {model.name!r} (h plateaus near {h_cur:.6g})"
                )
            h_prev = h_cur
            step *= 2.0
        else:
            raise RuntimeError(
                f"lamperti_inv bracket expansion failed for y={yv} in model {model.name!r}"
            )
        if yv > 0:
            lo = model.x_star
        else:
            hi = model.x_star
        # bisect to a rough root, then Newton (h' = 1/sigma)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if h_of(mid) < yv:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-6 * max(1.0, abs(mid)):
                break
        xv = 0.5 * (lo + hi)
        for _ in range(60):
            resid = h_of(xv) - yv
            if abs(resid) < 1e-13 * max(1.0, abs(yv)):
                return xv
            xv_new = xv - resid * float(model.sigma(beta, b, xv))
            if not (lo - 1e-9 <= xv_new <= hi + 1e-9):
                xv_new = 0.5 * (lo + hi)
            if h_of(xv_new) < yv:
                lo = xv_new
            else:
                hi = xv_new
            xv = xv_new
        resid = h_of(xv) - yv
        if abs(resid) > 1e-9 * max(1.0, abs(yv)):
            raise RuntimeError(
                f"lamperti_inv failed to converge for y={yv} in model {model.name!r}: "
                f"residual {resid:.3e} at x={xv}"
            )
        return xv

    if scalar:
        return one(float(y))
    return np.array([one(v) for v in np.asarray(y, dtype=float).ravel()]).reshape(np.shape(y))


def drift_mu(model: ModelSpec, alpha, beta, a, b, y):
    """Transformed drift mu(y) of the Lamperti-transformed process."""
    if model.mu_cf is not None:
        return model.mu_cf(alpha, beta, a, b, y)
    x = lamperti_inv(model, beta, b, y)
    sig = model.sigma(beta, b, x)
    return model.drift(alpha, a, x) / sig - 0.5 * model.sigma_dx(beta, b, x)


def phi(model: ModelSpec, alpha, beta, a, b, y):
    """phi(y) = mu'(y) + mu(y)^2, evaluated analytically.

    Expanding the chain rule with x = h^inv(y) gives

        phi = d' - 2 d sigma'/sigma + d^2/sigma^2
              - sigma sigma''/2 + sigma'^2/4,

    all right-hand-side functions evaluated at x.
    """
    if model.phi_cf is not None:
        return model.phi_cf(alpha, beta, a, b, y)
    x = lamperti_inv(model, beta, b, y)
    d = model.drift(alpha, a, x)
    dp = model.drift_dx(alpha, a, x)
    sig = model.sigma(beta, b, x)
    sp = model.sigma_dx(beta, b, x)
    spp = model.sigma_dxx(beta, b, x)
    return dp - 2.0 * d * sp / sig + (d / sig) ** 2 - 0.5 * sig * spp + 0.25 * sp ** 2


def H_term(model: ModelSpec, alpha, beta, a, b, x, y):
    """Endpoint term H(x, y) of the augmented log-likelihood."""
    _check_in_state(model, x)
    _check_in_state(model, y)
    if model.H_cf is not None:
        return model.H_cf(alpha, beta, a, b, x, y)
    integral = _adaptive_simpson(
        lambda u: float(model.drift(alpha, a, u)) / float(model.sigma(beta, b, u)) ** 2,
        float(x), float(y))
    return integral - 0.5 * (math.log(float(model.sigma(beta, b, y)))
                             - math.log(float(model.sigma(beta, b, x))))


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------


def _make_ou_speed() -> ModelSpec:
    """dX = -a X dt + beta dW with a ~ Exp(gamma), a > 0."""

    def invariant(alpha, beta, a, b, rng, size=None):
        a0 = float(np.atleast_1d(a)[0])
        if a0 <= 0:
            raise ValueError(f"OU speed effect must be positive for ergodicity, got a={a0}")
        return rng.normal(0.0, float(beta) / math.sqrt(2.0 * a0), size)

    basis = ExpFamBasis(
        g_funcs=(lambda x: -x,),
        g_dx_funcs=(lambda x: -np.ones_like(x),),
        c=lambda x: np.ones_like(x),
        c_dx=lambda x: np.zeros_like(x),
        c_dxx=lambda x: np.zeros_like(x),
        scalar_is_beta=True,
        int_g_over_c2=(lambda x: -0.5 * x ** 2,),
    )
    return ModelSpec(
        name="ou_speed",
        drift=lambda alpha, a, x: -np.atleast_1d(a)[0] * x,
        drift_dx=lambda alpha, a, x: -np.atleast_1d(a)[0] * np.ones_like(x),
        sigma=lambda beta, b, x: float(beta) * np.ones_like(np.asarray(x, dtype=float)),
        sigma_dx=lambda beta, b, x: np.zeros_like(np.asarray(x, dtype=float)),
        sigma_dxx=lambda beta, b, x: np.zeros_like(np.asarray(x, dtype=float)),
        expfam=basis,
        lamperti_cf=lambda beta, b, x: np.asarray(x, dtype=float) / float(beta),
        lamperti_inv_cf=lambda beta, b, y: float(beta) * np.asarray(y, dtype=float),
        H_cf=lambda alpha, beta, a, b, x, y:
            -np.atleast_1d(a)[0] * (y ** 2 - x ** 2) / (2.0 * float(beta) ** 2),
        mu_cf=lambda alpha, beta, a, b, y: -np.atleast_1d(a)[0] * np.asarray(y, dtype=float),
        phi_cf=lambda alpha, beta, a, b, y:
            -np.atleast_1d(a)[0] + np.atleast_1d(a)[0] ** 2 * np.asarray(y, dtype=float) ** 2,
        invariant_sampler=invariant,
        mean_reversion=lambda alpha, a: float(np.atleast_1d(a)[0]),
    )


def _make_t_diffusion() -> ModelSpec:
    """dX = -a X dt + beta sqrt(1 + X^2) dW with a ~ Exp(gamma).

    The invariant law is a scaled t-distribution: X = T_nu / sqrt(nu)
    with nu = 2 a / beta^2 + 1.
    """

    def invariant(alpha, beta, a, b, rng, size=None):
        a0 = float(np.atleast_1d(a)[0])
        if a0 <= 0:
            raise ValueError(f"t-diffusion effect must be positive for ergodicity, got a={a0}")
        nu = 2.0 * a0 / float(beta) ** 2 + 1.0
        return rng.standard_t(nu, size) / math.sqrt(nu)

    def s_fn(a0, beta, x):
        return -a0 / (2.0 * float(beta) ** 2) * np.log1p(np.asarray(x, dtype=float) ** 2)

    def H_cf(alpha, beta, a, b, x, y):
        a0 = np.atleast_1d(a)[0]
        log_ratio = np.log1p(y ** 2) - np.log1p(x ** 2)
        return (s_fn(a0, beta, y) - s_fn(a0, beta, x)) - 0.25 * log_ratio

    def phi_cf(alpha, beta, a, b, y):
        a0 = np.atleast_1d(a)[0]
        beta = float(beta)
        u = beta * np.asarray(y, dtype=float)
        t2 = np.tanh(u) ** 2
        return (a0 / beta + beta / 2.0) ** 2 * t2 - (a0 + beta ** 2 / 2.0) * (1.0 - t2)

    basis = ExpFamBasis(
        g_funcs=(lambda x: -x,),
        g_dx_funcs=(lambda x: -np.ones_like(x),),
        c=lambda x: np.sqrt(1.0 + x ** 2),
        c_dx=lambda x: x / np.sqrt(1.0 + x ** 2),
        c_dxx=lambda x: (1.0 + x ** 2) ** -1.5,
        scalar_is_beta=True,
        int_g_over_c2=(lambda x: -0.5 * np.log1p(x ** 2),),
    )
    return ModelSpec(
        name="t_diffusion",
        drift=lambda alpha, a, x: -np.atleast_1d(a)[0] * x,
        drift_dx=lambda alpha, a, x: -np.atleast_1d(a)[0] * np.ones_like(x),
        sigma=lambda beta, b, x: float(beta) * np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2),
        sigma_dx=lambda beta, b, x:
            float(beta) * np.asarray(x, dtype=float) / np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2),
        sigma_dxx=lambda beta, b, x: float(beta) * (1.0 + np.asarray(x, dtype=float) ** 2) ** -1.5,
        expfam=basis,
        lamperti_cf=lambda beta, b, x: np.arcsinh(np.asarray(x, dtype=float)) / float(beta),
        lamperti_inv_cf=lambda beta, b, y: np.sinh(float(beta) * np.asarray(y, dtype=float)),
        H_cf=H_cf,
        mu_cf=lambda alpha, beta, a, b, y:
            -(np.atleast_1d(a)[0] / float(beta) + float(beta) / 2.0)
            * np.tanh(float(beta) * np.asarray(y, dtype=float)),
        phi_cf=phi_cf,
        invariant_sampler=invariant,
        mean_reversion=lambda alpha, a: float(np.atleast_1d(a)[0]),
    )


def _make_ou_level() -> ModelSpec:
    """dX = (a - alpha X) dt + beta dW with a ~ N(xi, sigma^2)."""

    def invariant(alpha, beta, a, b, rng, size=None):
        al = float(np.atleast_1d(alpha)[0])
        a0 = float(np.atleast_1d(a)[0])
        if al <= 0:
            raise ValueError(f"mean-reversion rate must be positive for ergodicity, got alpha={al}")
        return rng.normal(a0 / al, float(beta) / math.sqrt(2.0 * al), size)

    def mu_cf(alpha, beta, a, b, y):
        return (np.atleast_1d(a)[0] / float(beta)
                - np.atleast_1d(alpha)[0] * np.asarray(y, dtype=float))

    basis = ExpFamBasis(
        f_funcs=(lambda x: -x,),
        f_dx_funcs=(lambda x: -np.ones_like(x),),
        g_funcs=(lambda x: np.ones_like(x),),
        g_dx_funcs=(lambda x: np.zeros_like(x),),
        c=lambda x: np.ones_like(x),
        c_dx=lambda x: np.zeros_like(x),
        c_dxx=lambda x: np.zeros_like(x),
        scalar_is_beta=True,
        int_f_over_c2=(lambda x: -0.5 * x ** 2,),
        int_g_over_c2=(lambda x: np.asarray(x, dtype=float),),
    )
    return ModelSpec(
        name="ou_level",
        drift=lambda alpha, a, x:
            np.atleast_1d(a)[0] - np.atleast_1d(alpha)[0] * np.asarray(x, dtype=float),
        drift_dx=lambda alpha, a, x: -np.atleast_1d(alpha)[0] * np.ones_like(x),
        sigma=lambda beta, b, x: float(beta) * np.ones_like(np.asarray(x, dtype=float)),
        sigma_dx=lambda beta, b, x: np.zeros_like(np.asarray(x, dtype=float)),
        sigma_dxx=lambda beta, b, x: np.zeros_like(np.asarray(x, dtype=float)),
        expfam=basis,
        lamperti_cf=lambda beta, b, x: np.asarray(x, dtype=float) / float(beta),
        lamperti_inv_cf=lambda beta, b, y: float(beta) * np.asarray(y, dtype=float),
        H_cf=lambda alpha, beta, a, b, x, y:
            (np.atleast_1d(a)[0] * (y - x)
             - np.atleast_1d(alpha)[0] * (y ** 2 - x ** 2) / 2.0) / float(beta) ** 2,
        mu_cf=mu_cf,
        phi_cf=lambda alpha, beta, a, b, y:
            -np.atleast_1d(alpha)[0] + mu_cf(alpha, beta, a, b, y) ** 2,
        invariant_sampler=invariant,
        mean_reversion=lambda alpha, a: float(np.atleast_1d(alpha)[0]),
    )


_REGISTRY: dict[str, Callable[[], ModelSpec]] = {
    "ou_speed": _make_ou_speed,
    "t_diffusion": _make_t_diffusion,
    "ou_level": _make_ou_level,
}

MODEL_IDS = tuple(sorted(_REGISTRY))


def get_model(model_id: str) -> ModelSpec:
    """Return a built-in model by id ('ou_speed', 't_diffusion', 'ou_level').

    Dashes are accepted in place of underscores so CLI spellings work.
    """
    key = model_id.replace("-", "_")
    try:
        return _REGISTRY[key]()
    except KeyError:
        raise ValueError(
            f"unknown model id {model_id!r}; available: {', '.join(MODEL_IDS)}"
        ) from None
