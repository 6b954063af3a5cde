"""Conditional-distribution samplers for the Gibbs and EM algorithms.

Houses the positive truncated normal, the normal-Wishart posterior for
Gaussian random effects, three sampling strategies for the weighted
gamma density

    p(eta) proportional to eta^(shape-1) exp(-eta * rate) exp(F(eta^-1/2)),

the gamma posterior for exponential effect rates, and the shape equation
log(kappa) - psi(kappa) = c of the gamma maximum-likelihood update.
Everything is pure given an RNG handle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "PriorSpec",
    "WeightedGammaResult",
    "sample_truncnorm_pos",
    "sample_nw_posterior",
    "sample_weighted_gamma_mh",
    "sample_weighted_gamma_rejection",
    "sample_weighted_gamma_approx",
    "sample_gamma_posterior",
    "digamma",
    "trigamma",
    "solve_gamma_shape",
]


@dataclass(frozen=True)
class PriorSpec:
    """Prior hyperparameters; only the pieces a given model needs are set.

    beta_shape/beta_rate are the Gamma(kappa, delta) prior on eta =
    beta^-2. effect_shape/effect_rate give the Gamma(nu, lambda) prior on
    a scalar exponential-effects rate. alpha_mean/alpha_cov the Gaussian
    prior on fixed effects, nw_* the normal-Wishart prior on Gaussian
    effect hyperparameters, exp_rates the four exponential prior rates of
    the level-effect model (on alpha, eta, xi, gamma in that order).
    """

    beta_shape: float = 1.0
    beta_rate: float = 1.0
    effect_shape: float | None = None
    effect_rate: float | None = None
    alpha_mean: np.ndarray | None = None
    alpha_cov: np.ndarray | None = None
    nw_mean: np.ndarray | None = None
    nw_kappa: float | None = None
    nw_scale: np.ndarray | None = None
    nw_dof: float | None = None
    exp_rates: tuple | None = None

    def __post_init__(self):
        if self.beta_shape <= 0 or self.beta_rate <= 0:
            raise ValueError("beta prior needs positive shape and rate")
        for name in ("effect_shape", "effect_rate", "nw_kappa"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValueError(f"{name} must be positive, got {val}")
        for name in ("alpha_mean", "nw_mean"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.atleast_1d(np.asarray(val, float)))
        if self.alpha_cov is not None:
            # semidefinite allowed: a zero covariance is a point-mass prior
            mat = np.atleast_2d(np.asarray(self.alpha_cov, dtype=float))
            if not np.allclose(mat, mat.T):
                raise ValueError("alpha_cov must be symmetric")
            if np.linalg.eigvalsh(mat).min() < -1e-12:
                raise ValueError("alpha_cov must be positive semidefinite")
            object.__setattr__(self, "alpha_cov", mat)
        if self.nw_scale is not None:
            mat = np.atleast_2d(np.asarray(self.nw_scale, dtype=float))
            np.linalg.cholesky(mat)  # raises if not positive definite
            object.__setattr__(self, "nw_scale", mat)
        if self.nw_dof is not None and self.nw_scale is not None:
            if self.nw_dof <= self.nw_scale.shape[0] - 1:
                raise ValueError(
                    f"normal-Wishart dof {self.nw_dof} must exceed p - 1")
        if self.exp_rates is not None:
            rates = tuple(float(r) for r in self.exp_rates)
            if len(rates) != 4 or any(r <= 0 for r in rates):
                raise ValueError("exp_rates must be 4 positive rates")
            object.__setattr__(self, "exp_rates", rates)


# ---------------------------------------------------------------------------
# small dense SPD helpers (p <= 4 throughout)
# ---------------------------------------------------------------------------


def _solve_lower(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    p = L.shape[0]
    B = np.atleast_2d(B.T).T.astype(float)
    X = np.zeros_like(B)
    for i in range(p):
        X[i] = (B[i] - L[i, :i] @ X[:i]) / L[i, i]
    return X


def _solve_upper(U: np.ndarray, B: np.ndarray) -> np.ndarray:
    p = U.shape[0]
    B = np.atleast_2d(B.T).T.astype(float)
    X = np.zeros_like(B)
    for i in range(p - 1, -1, -1):
        X[i] = (B[i] - U[i, i + 1:] @ X[i + 1:]) / U[i, i]
    return X


def spd_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for symmetric positive definite A via Cholesky."""
    L = np.linalg.cholesky(A)
    out = _solve_upper(L.T, _solve_lower(L, B))
    return out.reshape(np.shape(B)) if np.ndim(B) == 1 else out


def spd_inv(A: np.ndarray) -> np.ndarray:
    return spd_solve(A, np.eye(A.shape[0]))


# ---------------------------------------------------------------------------
# truncated normal
# ---------------------------------------------------------------------------


def sample_truncnorm_pos(mean: float, variance: float,
                         rng: np.random.Generator) -> float:
    """Draw from Normal(mean, variance) conditioned on (0, inf).

    Plain rejection when the truncation point is left of the mean;
    exponential-proposal rejection (Robert's method) in the far tail,
    which stays efficient however negative the mean is.
    """
    if variance <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    sd = math.sqrt(variance)
    c = -mean / sd
    if c <= 0.0:
        while True:
            z = rng.standard_normal()
            if z > c:
                return mean + sd * z
    lam = 0.5 * (c + math.sqrt(c * c + 4.0))
    while True:
        z = c - math.log(rng.uniform()) / lam
        if math.log(rng.uniform()) < -0.5 * (z - lam) ** 2:
            return mean + sd * z


# ---------------------------------------------------------------------------
# normal-Wishart posterior
# ---------------------------------------------------------------------------


def _wishart_bartlett(dof: float, scale: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    """Wishart(dof, scale) draw via the Bartlett decomposition."""
    p = scale.shape[0]
    if dof <= p - 1:
        raise ValueError(f"Wishart dof {dof} must exceed p - 1 = {p - 1}")
    L = np.linalg.cholesky(scale)
    A = np.zeros((p, p))
    for i in range(p):
        A[i, i] = math.sqrt(rng.chisquare(dof - i))
        for j in range(i):
            A[i, j] = rng.standard_normal()
    LA = L @ A
    return LA @ LA.T


def sample_nw_posterior(prior, a_draws, rng: np.random.Generator,
                        allow_empty: bool = False):
    """Posterior normal-Wishart draw (xi, Gamma) given effect vectors.

    prior is (xi0, lam, V, nu). The update uses the scatter matrix
    N * (sample covariance) and the usual mean-shrinkage term; Gamma is
    drawn first from the Wishart, then xi | Gamma from
    N(xi_post, (lam_post Gamma)^-1).
    """
    xi0, lam, V, nu = prior
    xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    p = len(xi0)
    a = np.asarray(a_draws, dtype=float).reshape(-1, p)
    N = a.shape[0]
    if N == 0:
        if not allow_empty:
            raise ValueError("need at least one effect draw")
        xi_post, lam_post, V_post, nu_post = xi0, lam, V, nu
    else:
        abar = a.mean(axis=0)
        centered = a - abar
        scatter = centered.T @ centered
        dev = abar - xi0
        V_post_inv = spd_inv(V) + scatter + np.outer(dev, dev) * lam * N / (lam + N)
        V_post = spd_inv(V_post_inv)
        xi_post = (lam * xi0 + N * abar) / (lam + N)
        lam_post = lam + N
        nu_post = nu + N
    gamma_mat = _wishart_bartlett(nu_post, V_post, rng)
    cov = spd_inv(gamma_mat) / lam_post
    xi = xi_post + np.linalg.cholesky(cov) @ rng.standard_normal(p)
    return xi, gamma_mat


# ---------------------------------------------------------------------------
# weighted gamma strategies
# ---------------------------------------------------------------------------


class WeightedGammaResult(NamedTuple):
    value: float
    accepted: bool
    proposal_rate: float


def sample_weighted_gamma_mh(shape: float, rate_full: float, rate_base: float,
                             F: Callable[[float], float], current: float,
                             rng: np.random.Generator) -> WeightedGammaResult:
    """One Metropolis-Hastings step on the weighted gamma density.

    The target is eta^(shape-1) exp(-eta rate_full) exp(F(eta^-1/2)).
    When rate_full is positive the proposal is Gamma(shape, rate_full)
    and only the weight enters the acceptance ratio; otherwise the
    proposal is Gamma(shape, rate_base) and the rate deficit is moved
    into the acceptance exponent.
    """
    if shape <= 0:
        raise ValueError(f"shape must be positive, got {shape}")
    if current <= 0:
        raise ValueError(f"current value must be positive, got {current}")
    if rate_full > 0:
        rate = rate_full
    elif rate_base > 0:
        rate = rate_base
    else:
        raise ValueError(
            f"both candidate rates are nonpositive (full {rate_full}, base "
            f"{rate_base}); the data and prior are inconsistent")
    prop = rng.gamma(shape, 1.0 / rate)
    log_acc = F(prop ** -0.5) - F(current ** -0.5)
    if rate_full <= 0:
        log_acc += (current - prop) * (rate_full - rate_base)
    accepted = math.log(rng.uniform()) < log_acc
    return WeightedGammaResult(prop if accepted else current, accepted, rate)


def sample_weighted_gamma_rejection(shape: float, rate: float,
                                    F: Callable[[float], float], M_bound: float,
                                    truncation, rng: np.random.Generator,
                                    max_trials: int = 100_000) -> float:
    """Exact draw from the weighted gamma restricted to [lo, hi].

    Proposes truncated Gamma(shape, rate) draws and accepts with
    probability exp(F(beta)) / M_bound, which must dominate the weight on
    the truncation interval; an observed exceedance raises ValueError.
    """
    lo, hi = (float(truncation[0]), float(truncation[1]))
    if not 0 <= lo <= hi:
        raise ValueError(f"truncation interval [{lo}, {hi}] must be ordered and >= 0")
    if shape <= 0 or rate <= 0 or M_bound <= 0:
        raise ValueError("shape, rate and M_bound must be positive")
    if lo == hi:
        return lo
    log_M = math.log(M_bound)
    for _ in range(max_trials):
        eta = rng.gamma(shape, 1.0 / rate)
        if not lo <= eta <= hi:
            continue
        log_w = F(eta ** -0.5)
        if log_w > log_M + 1e-9:
            raise ValueError(
                f"exp(F) = exp({log_w:.6g}) exceeds the stated bound "
                f"M = {M_bound:.6g} at eta = {eta:.6g}")
        if math.log(rng.uniform()) < log_w - log_M:
            return float(eta)
    raise RuntimeError(
        f"no acceptance in {max_trials} trials; the truncation interval or "
        "bound M is badly matched to the density")


def sample_weighted_gamma_approx(shape: float, rate: float,
                                 F: Callable[[float], float], K: int,
                                 rng: np.random.Generator,
                                 M: float | None = None) -> float:
    """Approximate direct draw: importance resampling among K gamma draws.

    Z_1..Z_K are drawn from Gamma(shape, rate / M) and one is returned as
    eta = Z_I / M with probability proportional to exp(F(eta_i^-1/2)).
    The default M puts the proposal rate at 50. A nonpositive rate must
    be repaired by the caller (fold the deficit into F against a positive
    base rate).
    """
    if shape <= 0:
        raise ValueError(f"shape must be positive, got {shape}")
    if rate <= 0:
        raise ValueError(
            f"rate must be positive, got {rate}; fold nonpositive rate terms "
            "into the weight against a positive base rate")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if M is None:
        M = rate / 50.0
    if M <= 0:
        raise ValueError(f"M must be positive, got {M}")
    Z = rng.gamma(shape, M / rate, size=K)
    eta = Z / M
    log_w = np.array([F(e ** -0.5) for e in eta], dtype=float)
    finite = np.isfinite(log_w)
    if not finite.any():
        raise ValueError(
            "all importance weights underflowed (exp(F) = 0 everywhere); "
            "rescale M or check F")
    w = np.zeros(K)
    w[finite] = np.exp(log_w[finite] - log_w[finite].max())
    idx = rng.choice(K, p=w / w.sum())
    return float(eta[idx])


def sample_gamma_posterior(nu: float, lam: float, effect_sum: float, N: int,
                           rng: np.random.Generator) -> float:
    """Gamma(nu + N, lam + effect_sum) draw for an exponential-effects rate."""
    if nu <= 0 or lam <= 0:
        raise ValueError("prior shape and rate must be positive")
    if effect_sum < 0:
        raise ValueError(f"effect sum must be nonnegative, got {effect_sum}")
    return float(rng.gamma(nu + N, 1.0 / (lam + effect_sum)))


# ---------------------------------------------------------------------------
# digamma, trigamma, and the gamma shape equation
# ---------------------------------------------------------------------------

_PSI_COEFS = (   # -B_2n / (2n): psi(x) ~ ln x - 1/(2x) + sum c_n x^(-2n)
    -1.0 / 12.0, 1.0 / 120.0, -1.0 / 252.0, 1.0 / 240.0,
    -1.0 / 132.0, 691.0 / 32760.0, -1.0 / 12.0,
)

_PSI1_COEFS = (  # B_2n: psi'(x) ~ 1/x + 1/(2x^2) + sum b_n x^(-2n-1)
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
    5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0,
)


def digamma(x: float) -> float:
    """Self-contained digamma, asymptotic series after a shift to x >= 6."""
    if x <= 0:
        raise ValueError(f"digamma needs x > 0, got {x}")
    out = 0.0
    while x < 6.0:
        out -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for c in _PSI_COEFS:
        series += c * power
        power *= inv2
    return out + math.log(x) - 0.5 / x + series


def trigamma(x: float) -> float:
    """Self-contained trigamma via the same shift-then-series scheme."""
    if x <= 0:
        raise ValueError(f"trigamma needs x > 0, got {x}")
    out = 0.0
    while x < 6.0:
        out += 1.0 / (x * x)
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2 / x
    for c in _PSI1_COEFS:
        series += c * power
        power *= inv2
    return out + 1.0 / x + 0.5 * inv2 + series


def solve_gamma_shape(c: float) -> float:
    """Solve log(kappa) - psi(kappa) = c for the gamma shape kappa.

    The left side decreases strictly from +inf to 0, so the root is
    unique for c > 0. Newton iterations from the standard rational
    initializer, safeguarded by bisection on a bracketing interval.
    """
    if c <= 0:
        raise ValueError(f"need c > 0 (Jensen gap of a non-degenerate sample), got {c}")

    def residual(kappa: float) -> float:
        return math.log(kappa) - digamma(kappa) - c

    kappa = (3.0 - c + math.sqrt((c - 3.0) ** 2 + 24.0 * c)) / (12.0 * c)
    lo = hi = kappa
    while residual(lo) < 0:
        lo /= 4.0
    while residual(hi) > 0:
        hi *= 4.0
    for _ in range(200):
        res = residual(kappa)
        if abs(res) < 1e-10:
            return kappa
        if res > 0:
            lo = kappa
        else:
            hi = kappa
        step = res / (1.0 / kappa - trigamma(kappa))
        kappa -= step
        if not lo < kappa < hi:
            kappa = 0.5 * (lo + hi)
    raise RuntimeError(f"shape equation did not converge for c = {c}")
