"""Euler-scheme simulation and the simple diffusion-bridge sampler.

A (t1, x1, t2, x2)-bridge proposal is built from two independent Euler
paths with the model dynamics on the same grid of N steps: a forward path
Y started at x1 and a second path W started at x2. Reading W backward
(index i -> W_{N-i}) gives a path that ends at x2. The pair is redrawn
until the difference

    D_i = Y_i - W_{N-i},   i = 0..N,

changes sign, detected with weak inequalities on the grid. With mu the
first index at which the sign flip completes, the bridge is

    B_i = Y_i            for i < mu,
    B_i = W_{N-i}        for i >= mu,

so B is pinned at both endpoints by construction. The proposal law is a
slightly biased bridge; exactness is restored by a pseudo-marginal
Metropolis-Hastings step whose acceptance ratio is driven by geometric
crossing counts S (the number of stationary-start paths simulated until
one intersects the proposed bridge): a proposal (B', S') replaces the
current (B, S) with probability min{1, S'/S}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, Effects, lamperti

__all__ = [
    "Path",
    "BridgePath",
    "GeomVar",
    "euler_simulate",
    "simulate_bridge_approx",
    "draw_geom_var",
    "mh_bridge_step",
    "stationary_draw",
    "MAX_BRIDGE_ATTEMPTS",
    "MAX_GEOM_DRAWS",
    "MAX_STEP_REDRAWS",
]

MAX_BRIDGE_ATTEMPTS = 10_000
MAX_GEOM_DRAWS = 100_000
MAX_STEP_REDRAWS = 100


@dataclass(frozen=True)
class Path:
    """Euler skeleton on a uniform grid: values[i] at time t0 + i*delta."""

    t0: float
    delta: float
    values: np.ndarray

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")


@dataclass(frozen=True)
class BridgePath:
    """Discretized bridge pinned at (t1, x1) and (t2, x2).

    values holds the bridge B on the grid t1 + i*delta; ystar is the
    re-centered Lamperti-transformed path Y* = h(B) - ell with ell the
    linear interpolant of (h(x1), h(x2)). Endpoint invariants are exact:
    values[0] = x1, values[-1] = x2, ystar[0] = ystar[-1] = 0.
    """

    t1: float
    t2: float
    x1: float
    x2: float
    delta: float
    values: np.ndarray
    mu_idx: int
    ystar: np.ndarray

    def __post_init__(self):
        n_grid = len(self.values) - 1
        if self.values[0] != self.x1 or self.values[-1] != self.x2:
            raise ValueError("bridge endpoints do not match (x1, x2) exactly")
        if self.ystar[0] != 0.0 or self.ystar[-1] != 0.0:
            raise ValueError("re-centered path must vanish exactly at the endpoints")
        if not (1 <= self.mu_idx <= n_grid):
            raise ValueError(f"crossing index {self.mu_idx} outside 1..{n_grid}")
        if len(self.ystar) != n_grid + 1:
            raise ValueError("ystar grid length mismatch")

    @property
    def n_grid(self) -> int:
        return len(self.values) - 1


@dataclass(frozen=True)
class GeomVar:
    """Geometric crossing count: 1-based number of stationary-start paths
    simulated until one intersected the proposed bridge."""

    s: int

    def __post_init__(self):
        if self.s < 1:
            raise ValueError(f"geometric variable must be >= 1, got {self.s}")


# ---------------------------------------------------------------------------
# vectorized cores (no model objects, plain callables over column batches)
# ---------------------------------------------------------------------------


def _euler_paths(drift_fn, sigma_fn, cols, x0, delta, normals):
    """Euler paths for a batch of columns. normals has shape (m, n_steps).

    drift_fn(cols, x) and sigma_fn(cols, x) evaluate per-column dynamics.
    Returns (m, n_steps + 1).
    """
    m, n_steps = normals.shape
    out = np.empty((m, n_steps + 1))
    x = np.array(x0, dtype=float, copy=True)
    out[:, 0] = x
    sqdt = np.sqrt(delta)
    for j in range(n_steps):
        x = x + drift_fn(cols, x) * delta + sigma_fn(cols, x) * sqdt * normals[:, j]
        out[:, j + 1] = x
    return out


def _find_mu(D):
    """First crossing index per row of D (m, n_steps+1); ties count.

    Returns (found bool (m,), mu int (m,)). For rows starting positive,
    mu is the first i >= 1 with D_i <= 0; negative starts symmetric;
    an exact zero start completes a crossing at index 1.
    """
    D0 = D[:, 0]
    rest = D[:, 1:]
    pos = D0 > 0.0
    zer = D0 == 0.0
    hit = np.where(pos[:, None], rest <= 0.0, rest >= 0.0)
    found = hit.any(axis=1)
    mu = hit.argmax(axis=1) + 1
    mu = np.where(zer, 1, mu)
    found = found | zer
    return found, mu.astype(np.int64)


def _draw_normals(gens, active_idx, shape_per_col):
    """(m,) + shape_per_col normals, one independent stream per column."""
    if isinstance(gens, np.random.Generator):
        return gens.standard_normal((len(active_idx),) + shape_per_col)
    return np.stack([gens[k].standard_normal(shape_per_col) for k in active_idx])


def _chunk_size(round_idx: int) -> int:
    """Candidates drawn per pending column in a given round.

    One at a time for the first eight rounds (most intervals succeed
    immediately), then doubling to a cap so hard intervals amortize the
    per-round stepping overhead. Per-column draws are consumed in
    candidate order, so results are identical to one-at-a-time rounds.
    """
    if round_idx < 8:
        return 1
    return min(256, 2 ** (round_idx - 7))


def _bridge_crossing_batch(drift_fn, sigma_fn, x1, x2, delta, n_steps, gens,
                           max_attempts=MAX_BRIDGE_ATTEMPTS):
    """Crossing construction for a batch of intervals.

    gens is either a list of per-column Generators (stream isolation for
    reproducibility under any execution order) or a single Generator
    shared by the whole batch. Returns (values (K, n+1), mu (K,),
    attempts (K,)).
    """
    K = len(x1)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (K,))
    out_vals = np.empty((K, n_steps + 1))
    out_mu = np.zeros(K, dtype=np.int64)
    attempts = np.zeros(K, dtype=np.int64)
    active = np.arange(K)
    colgrid = np.arange(n_steps + 1)
    base = 0
    round_idx = 0

    while active.size:
        R = min(_chunk_size(round_idx), max_attempts - base)
        if R <= 0:
            raise RuntimeError(
                f"no forward/reversed crossing after {max_attempts} attempts for "
                f"{active.size} interval(s) (first failing batch index "
                f"{int(active[0])}); consider a smaller bridge step or check "
                "the interval specification"
            )
        round_idx += 1
        m = active.size
        Z = _draw_normals(gens, active, (R, 2, n_steps)).reshape(m * R, 2, n_steps)
        cols = np.repeat(active, R)
        Y = _euler_paths(drift_fn, sigma_fn, cols, np.repeat(x1[active], R),
                         np.repeat(delta[active], R), Z[:, 0, :])
        W = _euler_paths(drift_fn, sigma_fn, cols, np.repeat(x2[active], R),
                         np.repeat(delta[active], R), Z[:, 1, :])
        Wrev = W[:, ::-1]
        D = Y - Wrev
        found, mu = _find_mu(D)
        found &= np.isfinite(D).all(axis=1)
        fm = found.reshape(m, R)
        done = fm.any(axis=1)
        if done.any():
            first_r = fm.argmax(axis=1)[done]
            rows = np.nonzero(done)[0] * R + first_r
            sel_cols = active[done]
            sel = colgrid[None, :] < mu[rows][:, None]
            out_vals[sel_cols] = np.where(sel, Y[rows], Wrev[rows])
            out_mu[sel_cols] = mu[rows]
            attempts[sel_cols] = base + first_r + 1
            active = active[~done]
        base += R

    return out_vals, out_mu, attempts


def _geom_var_batch(drift_fn, sigma_fn, start_fn, bridge_values, delta, n_steps, gens,
                    max_draws=MAX_GEOM_DRAWS):
    """Geometric crossing counts for a batch of bridges.

    start_fn(col, gen) returns a stationary start value, consuming only
    that column's stream. Intersection uses weak inequalities on
    consecutive grid points. Returns s (K,) of 1-based counts.
    """
    K = bridge_values.shape[0]
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (K,))
    s = np.zeros(K, dtype=np.int64)
    active = np.arange(K)
    shared = isinstance(gens, np.random.Generator)
    base = 0
    round_idx = 0

    while active.size:
        R = min(_chunk_size(round_idx), max_draws - base)
        if R <= 0:
            raise RuntimeError(
                f"no stationary path intersected the bridge within {max_draws} "
                f"draws ({active.size} interval(s) pending); the intersection "
                "probability is numerically negligible for the current parameters"
            )
        round_idx += 1
        m = active.size
        starts = np.empty((m, R))
        Z = np.empty((m, R, n_steps))
        if shared:
            for r in range(R):
                starts[:, r] = [start_fn(k, gens) for k in active]
                Z[:, r] = gens.standard_normal((m, n_steps))
        else:
            for i, k in enumerate(active):
                g = gens[k]
                for r in range(R):
                    starts[i, r] = start_fn(k, g)
                    Z[i, r] = g.standard_normal(n_steps)
        cols = np.repeat(active, R)
        paths = _euler_paths(drift_fn, sigma_fn, cols, starts.reshape(-1),
                             np.repeat(delta[active], R), Z.reshape(m * R, n_steps))
        G = paths - bridge_values[cols]
        hit = (G[:, :-1] * G[:, 1:] <= 0.0).any(axis=1)
        hit &= np.isfinite(G).all(axis=1)
        hm = hit.reshape(m, R)
        done = hm.any(axis=1)
        if done.any():
            s[active[done]] = base + hm.argmax(axis=1)[done] + 1
            active = active[~done]
        base += R

    return s


# ---------------------------------------------------------------------------
# model-facing helpers
# ---------------------------------------------------------------------------


def _model_col_fns(model: ModelSpec, alpha, beta, effects: Effects):
    a, b = effects.a, effects.b

    def drift_fn(cols, x):
        return np.asarray(model.drift(alpha, a, x), dtype=float)

    def sigma_fn(cols, x):
        return np.asarray(model.sigma(beta, b, x), dtype=float)

    return drift_fn, sigma_fn


def _resolve_steps(t1: float, t2: float, delta: float) -> tuple[int, float]:
    span = t2 - t1
    if span <= 0:
        raise ValueError(f"need t2 > t1, got [{t1}, {t2}]")
    if delta <= 0 or delta > span + 1e-12 * span:
        raise ValueError(f"delta={delta} must lie in (0, t2 - t1 = {span}]")
    n_steps = max(1, int(round(span / delta)))
    if abs(n_steps * delta - span) > 1e-6 * span:
        raise ValueError(f"delta={delta} does not divide the interval length {span}")
    return n_steps, span / n_steps


def ystar_from_values(model: ModelSpec, beta, b, values: np.ndarray) -> np.ndarray:
    """Re-centered Lamperti path of a bridge grid; endpoints exactly zero."""
    h = np.asarray(lamperti(model, beta, b, values), dtype=float)
    n = len(values) - 1
    ell = h[0] + (h[-1] - h[0]) * (np.arange(n + 1) / n)
    ystar = h - ell
    ystar[0] = 0.0
    ystar[-1] = 0.0
    return ystar


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def euler_simulate(model: ModelSpec, alpha, beta, effects: Effects, x0: float,
                   t0: float, t1: float, delta: float, rng: np.random.Generator) -> Path:
    """Simulate one Euler path X on [t0, t1] with step delta.

    X_{k+1} = X_k + d(X_k) delta + sigma(X_k) sqrt(delta) Z_k with iid
    standard normal Z_k from rng. Steps leaving the open state interval
    are redrawn up to MAX_STEP_REDRAWS times, then a RuntimeError is
    raised.
    """
    if not model.in_state_interval(x0):
        raise ValueError(f"x0={x0} outside state interval of model {model.name!r}")
    n_steps, dt = _resolve_steps(t0, t1, delta)
    a, b = effects.a, effects.b
    lo, hi = model.state_lo, model.state_hi
    bounded = math.isfinite(lo) or math.isfinite(hi)
    sq = math.sqrt(dt)
    values = np.empty(n_steps + 1)
    x = float(x0)
    values[0] = x
    for k in range(n_steps):
        d = float(model.drift(alpha, a, x))
        s = float(model.sigma(beta, b, x))
        z = rng.standard_normal()
        x_new = x + d * dt + s * sq * z
        if bounded:
            tries = 0
            while not (lo < x_new < hi):
                tries += 1
                if tries > MAX_STEP_REDRAWS:
                    raise RuntimeError(
                        f"Euler step left the state interval ({lo}, {hi}) and "
                        f"{MAX_STEP_REDRAWS} redraws did not recover (t ~ {t0 + k * dt:.6g})"
                    )
                x_new = x + d * dt + s * sq * rng.standard_normal()
        x = x_new
        values[k + 1] = x
    return Path(t0=t0, delta=dt, values=values)


def simulate_bridge_approx(model: ModelSpec, alpha, beta, effects: Effects,
                           t1: float, x1: float, t2: float, x2: float,
                           delta: float, rng: np.random.Generator,
                           max_attempts: int = MAX_BRIDGE_ATTEMPTS) -> BridgePath:
    """Draw one approximate bridge by the forward/time-reversed crossing
    construction, retrying independent path pairs until they cross."""
    for xv, nm in ((x1, "x1"), (x2, "x2")):
        if not model.in_state_interval(xv):
            raise ValueError(f"{nm}={xv} outside state interval of model {model.name!r}")
    n_steps, dt = _resolve_steps(t1, t2, delta)
    drift_fn, sigma_fn = _model_col_fns(model, alpha, beta, effects)
    values, mu, _ = _bridge_crossing_batch(
        drift_fn, sigma_fn, np.array([x1]), np.array([x2]), np.array([dt]),
        n_steps, [rng], max_attempts=max_attempts)
    ystar = ystar_from_values(model, beta, effects.b, values[0])
    return BridgePath(t1=t1, t2=t2, x1=float(x1), x2=float(x2), delta=dt,
                      values=values[0], mu_idx=int(mu[0]), ystar=ystar)


def draw_geom_var(model: ModelSpec, alpha, beta, effects: Effects,
                  bridge: BridgePath, rng: np.random.Generator,
                  max_draws: int = MAX_GEOM_DRAWS) -> GeomVar:
    """Count stationary-start Euler paths until one intersects the bridge."""
    drift_fn, sigma_fn = _model_col_fns(model, alpha, beta, effects)

    def start_fn(col, gen):
        return stationary_draw(model, alpha, beta, effects, gen)

    s = _geom_var_batch(drift_fn, sigma_fn, start_fn,
                        bridge.values[None, :], np.array([bridge.delta]),
                        bridge.n_grid, [rng], max_draws=max_draws)
    return GeomVar(s=int(s[0]))


def mh_bridge_step(prev: tuple[BridgePath, GeomVar],
                   proposal: tuple[BridgePath, GeomVar],
                   rng: np.random.Generator) -> tuple[BridgePath, GeomVar, bool]:
    """Pseudo-marginal acceptance: keep proposal with prob min{1, s'/s}."""
    bridge_prev, s_prev = prev
    bridge_prop, s_prop = proposal
    ratio = s_prop.s / s_prev.s
    accept = bool(rng.uniform() < ratio)
    if accept:
        return bridge_prop, s_prop, True
    return bridge_prev, s_prev, False


def stationary_draw(model: ModelSpec, alpha, beta, effects: Effects,
                    rng: np.random.Generator) -> float:
    """One draw from the invariant law nu.

    Uses the model's registered exact sampler when present (all built-in
    models have one); otherwise runs a long Euler trajectory of length
    T_stat = 50 / (mean-reversion rate) from x_star and returns its final
    value, which lies beyond the discarded warm-up half.
    """
    if model.invariant_sampler is not None:
        return float(model.invariant_sampler(alpha, beta, effects.a, effects.b, rng))
    if model.mean_reversion is not None:
        mr = float(model.mean_reversion(alpha, effects.a))
    else:
        mr = -float(model.drift_dx(alpha, effects.a, model.x_star))
    if not (mr > 0):
        raise ValueError(
            f"model {model.name!r} is not mean-reverting at the given parameters "
            f"(rate {mr}); cannot draw from an invariant law"
        )
    t_stat = 50.0 / mr
    n = 4000
    path = euler_simulate(model, alpha, beta, effects, model.x_star,
                          0.0, t_stat, t_stat / n, rng)
    return float(path.values[-1])
