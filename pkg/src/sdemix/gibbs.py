"""Gibbs samplers for mixed-effects SDE panels.

A chain alternates over three kinds of sites: the population parameters
(fixed effects alpha, diffusion scalar beta, effect hyperparameters),
the per-unit random effects, and the latent bridge paths connecting
consecutive observations. Bridges enter every conditional through the
re-centered transformed path Y*, which is held fixed while parameters
move, so a parameter update never requires re-simulating paths.

Four samplers share this skeleton:

- three built-in closed-form sweeps (speed-effect OU, bounded-drift
  t-diffusion, level-effect OU), each drawing the diffusion parameter
  eta = beta^-2 from its weighted gamma conditional;
- a sweep for any model with an ExpFamBasis, using the Gaussian
  conditionals of the sufficient statistics;
- a generic random-walk Metropolis-within-Gibbs sweep for models
  without tractable conditionals.

Randomness is split into one parameter stream, one stream per unit and
one stream per observation interval, so results are reproducible under
any execution order of the per-unit work.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .bridge import (
    BridgePath,
    GeomVar,
    _bridge_crossing_batch,
    _geom_var_batch,
    draw_geom_var,
    simulate_bridge_approx,
    stationary_draw,
    ystar_from_values,
)
from .config import RunConfig, resolve_threads
from .data import PanelData
from .likelihood import (
    BridgeReductions,
    PanelStatics,
    SuffStats,
    loglik_unit,
    suff_stats,
)
from .model import Effects, ModelSpec, get_model, lamperti
from .samplers import (
    PriorSpec,
    sample_gamma_posterior,
    sample_nw_posterior,
    sample_truncnorm_pos,
    sample_weighted_gamma_approx,
    sample_weighted_gamma_mh,
    sample_weighted_gamma_rejection,
    spd_inv,
)

__all__ = [
    "ChainState",
    "DrawTrace",
    "RngBundle",
    "GibbsLayout",
    "GibbsSampler",
    "alpha_conditional",
    "effects_conditional",
    "gibbs_init",
    "gibbs_sweep_expfam",
    "gibbs_sweep_general",
    "neuronal_sweep",
    "resolve_route",
    "run_chain",
]

_INIT_RETRIES = 20
_ACCEPT_TARGET = 0.3
_ADAPT_GAIN = 0.25
_WARN_WINDOW = 50


# ---------------------------------------------------------------------------
# chain state and trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainState:
    """Current value of every Gibbs site.

    gamma1/gamma2 hold the effect hyperparameters: the exponential rate
    (gamma1 only) for rate-distributed effects, (xi, precision) scalars
    for the level-effect model, or (xi vector, precision matrix) under a
    normal-Wishart prior. geoms is populated in exact-bridge mode only
    and carries one crossing count per interval.
    """

    alpha: np.ndarray
    beta: float
    gamma1: object
    gamma2: object
    effects: tuple
    bridges: tuple
    geoms: tuple | None = None
    iter: int = 0


@dataclass(frozen=True)
class DrawTrace:
    """Chain output: one parameter row per sweep.

    params has shape (iterations, len(param_names)); effects, present
    only when the run saved them, has one column per unit effect
    coordinate. diagnostics collects counters accumulated over the run
    (bridge crossing attempts, acceptance counts).
    """

    model_id: str
    sampler: str
    param_names: tuple
    params: np.ndarray
    effect_names: tuple | None
    effects: np.ndarray | None
    burn_in: int
    diagnostics: dict

    def __post_init__(self):
        if self.params.ndim != 2 or self.params.shape[1] != len(self.param_names):
            raise ValueError("params must be (iterations, n_params)")
        if self.effects is not None and len(self.effects) != len(self.params):
            raise ValueError("effects rows must match params rows")

    @property
    def iterations(self) -> int:
        return len(self.params)

    def summary(self, burn_in: int | None = None) -> dict:
        """Per-parameter posterior mean, sd and central 95% interval,
        computed on the rows after burn-in (full trace is stored)."""
        drop = self.burn_in if burn_in is None else int(burn_in)
        if not 0 <= drop < self.iterations:
            raise ValueError(
                f"burn_in {drop} must lie in [0, iterations={self.iterations})")
        kept = self.params[drop:]
        out = {}
        for j, name in enumerate(self.param_names):
            col = kept[:, j]
            out[name] = {
                "mean": float(col.mean()),
                "sd": float(col.std(ddof=1)) if len(col) > 1 else 0.0,
                "q025": float(np.quantile(col, 0.025)),
                "q975": float(np.quantile(col, 0.975)),
            }
        return out


# ---------------------------------------------------------------------------
# RNG layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RngBundle:
    """Streams of one chain: a parameter stream, one stream per unit
    (random-effect draws) and one per observation interval, unit-major
    (bridge proposals, crossing counts, acceptance uniforms)."""

    param: np.random.Generator
    units: tuple
    bridges: tuple

    @classmethod
    def from_seed(cls, seed, n_units: int, n_intervals: int) -> "RngBundle":
        ss = seed if isinstance(seed, np.random.SeedSequence) else \
            np.random.SeedSequence(seed)
        children = ss.spawn(1 + n_units + n_intervals)
        gens = [np.random.Generator(np.random.PCG64(c)) for c in children]
        return cls(param=gens[0],
                   units=tuple(gens[1:1 + n_units]),
                   bridges=tuple(gens[1 + n_units:]))

    @classmethod
    def coerce(cls, rng, panel: PanelData) -> "RngBundle":
        if isinstance(rng, cls):
            return rng
        if rng is None or isinstance(rng, (int, np.integer, np.random.SeedSequence)):
            return cls.from_seed(rng if rng is not None else np.random.SeedSequence(),
                                 panel.n_units, panel.total_intervals)
        raise TypeError(
            "rng must be an int seed, a SeedSequence or an RngBundle; a bare "
            "Generator cannot be split into per-unit streams reproducibly")


# ---------------------------------------------------------------------------
# panel layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GibbsLayout:
    """Flattened interval geometry of a panel on a fixed bridge grid."""

    model: ModelSpec
    panel: PanelData
    statics: PanelStatics
    x1: np.ndarray
    x2: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    unit_slices: tuple

    @classmethod
    def build(cls, model: ModelSpec, panel: PanelData, n_steps: int) -> "GibbsLayout":
        statics = PanelStatics.build(model, panel, n_steps)
        x1, x2, t1, t2, slices = [], [], [], [], []
        k = 0
        for unit in panel.units:
            lo = k
            for j in range(unit.n_intervals):
                x1.append(unit.values[j])
                x2.append(unit.values[j + 1])
                t1.append(unit.times[j])
                t2.append(unit.times[j + 1])
                k += 1
            slices.append((lo, k))
        return cls(model=model, panel=panel, statics=statics,
                   x1=np.array(x1), x2=np.array(x2),
                   t1=np.array(t1), t2=np.array(t2),
                   unit_slices=tuple(slices))

    @property
    def n_intervals(self) -> int:
        return len(self.x1)

    @property
    def n_steps(self) -> int:
        return self.statics.n_steps

    def nest(self, flat):
        return tuple(tuple(flat[lo:hi]) for lo, hi in self.unit_slices)


def _bump(diag, key, val=1):
    if diag is not None:
        diag[key] = diag.get(key, 0) + val


def _a_matrix(effects_list) -> np.ndarray:
    return np.array([np.atleast_1d(e.a) for e in effects_list], dtype=float)


def _a_vector(effects_list) -> np.ndarray:
    return np.array([float(np.atleast_1d(e.a)[0]) for e in effects_list])


def _panel_col_fns(model: ModelSpec, alpha, beta, a_mat, unit_index):
    """Per-column drift/sigma callables for the batched bridge cores.

    Columns are observation intervals; each takes the drift effects of
    its unit. Requires an ExpFamBasis and no diffusion effects."""
    basis = model.expfam
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    a_mat = np.asarray(a_mat, dtype=float)
    empty_b = np.zeros(0)

    def drift_fn(cols, x):
        x = np.asarray(x, dtype=float)
        d = np.zeros_like(x)
        if basis.p1:
            d += np.tensordot(alpha, basis.f(x), axes=1)
        if basis.p2:
            d += np.einsum("mk,km->m", a_mat[unit_index[cols]], basis.g(x))
        return d

    def sigma_fn(cols, x):
        return np.asarray(model.sigma(beta, empty_b, x), dtype=float)

    return drift_fn, sigma_fn


def _can_batch(model: ModelSpec, effects_list) -> bool:
    return model.expfam is not None and all(len(e.b) == 0 for e in effects_list)


def _ystar_matrix(layout: GibbsLayout, beta, effects_list, values) -> np.ndarray:
    """Re-centered transformed paths, one row per interval.

    Under the base-transform factorization sigma = beta c(x) this is
    (u(values) - ell) / beta with the parameter-free interpolant ell;
    otherwise each row goes through the full Lamperti transform."""
    model, st = layout.model, layout.statics
    basis = model.expfam
    if basis is not None and basis.c is not None and basis.scalar_is_beta \
            and all(len(e.b) == 0 for e in effects_list):
        u_flat = np.asarray(lamperti(model, 1.0, np.zeros(0), values.ravel()),
                            dtype=float)
        ystar = (u_flat.reshape(values.shape) - st.ell_mat) / float(beta)
    else:
        ystar = np.array([
            ystar_from_values(model, beta, effects_list[st.unit_index[k]].b,
                              values[k])
            for k in range(values.shape[0])])
    ystar[:, 0] = 0.0
    ystar[:, -1] = 0.0
    return ystar


def _refresh_bridges(layout: GibbsLayout, alpha, beta, effects_list, rng: RngBundle,
                     exact: bool, prev: ChainState | None = None, diag=None):
    """Redraw every interval's bridge at the current parameters.

    Approximate mode replaces all bridges by fresh proposals. Exact mode
    draws a crossing count S' for each proposal and accepts it against
    the stored bridge with probability min(1, S'/S); a kept bridge
    retains its Y* row, which is the actual latent state.

    Returns (per-unit bridge tuples, per-unit geom tuples or None,
    ystar matrix).
    """
    model, st = layout.model, layout.statics
    K, n = layout.n_intervals, layout.n_steps
    batch = _can_batch(model, effects_list)

    if batch:
        a_mat = _a_matrix(effects_list)
        drift_fn, sigma_fn = _panel_col_fns(model, alpha, beta, a_mat, st.unit_index)
        values, mu, attempts = _bridge_crossing_batch(
            drift_fn, sigma_fn, layout.x1, layout.x2, st.delta_flat, n,
            list(rng.bridges))
        ystar = _ystar_matrix(layout, beta, effects_list, values)
    else:
        paths = []
        for k in range(K):
            eff = effects_list[st.unit_index[k]]
            paths.append(simulate_bridge_approx(
                model, alpha, beta, eff, float(layout.t1[k]), float(layout.x1[k]),
                float(layout.t2[k]), float(layout.x2[k]), float(st.delta_flat[k]),
                rng.bridges[k]))
        values = np.array([bp.values for bp in paths])
        mu = np.array([bp.mu_idx for bp in paths], dtype=np.int64)
        attempts = np.ones(K, dtype=np.int64)
        ystar = np.array([bp.ystar for bp in paths])
        ystar[:, 0] = 0.0
        ystar[:, -1] = 0.0
    _bump(diag, "bridge_attempts", int(attempts.sum()))

    geom_new = None
    if exact:
        if batch:
            def start_fn(col, gen):
                return stationary_draw(model, alpha, beta,
                                       effects_list[st.unit_index[col]], gen)

            geom_new = _geom_var_batch(drift_fn, sigma_fn, start_fn, values,
                                       st.delta_flat, n, list(rng.bridges))
        else:
            geom_new = np.array([
                draw_geom_var(model, alpha, beta, effects_list[st.unit_index[k]],
                              paths[k], rng.bridges[k]).s
                for k in range(K)], dtype=np.int64)

    geoms_flat = geom_new
    if exact and prev is not None:
        s_old = np.array([g.s for unit in prev.geoms for g in unit], dtype=np.int64)
        u = np.array([rng.bridges[k].uniform() for k in range(K)])
        accept = u < geom_new / s_old
        _bump(diag, "bridge_mh_proposals", K)
        _bump(diag, "bridge_mh_accepts", int(accept.sum()))
        old_values = np.array([bp.values for unit in prev.bridges for bp in unit])
        old_ystar = np.array([bp.ystar for unit in prev.bridges for bp in unit])
        old_mu = np.array([bp.mu_idx for unit in prev.bridges for bp in unit])
        keep = ~accept
        values[keep] = old_values[keep]
        ystar[keep] = old_ystar[keep]
        mu[keep] = old_mu[keep]
        geoms_flat = np.where(accept, geom_new, s_old)

    bridges_flat = [
        BridgePath(t1=float(layout.t1[k]), t2=float(layout.t2[k]),
                   x1=float(layout.x1[k]), x2=float(layout.x2[k]),
                   delta=float(st.delta_flat[k]), values=values[k],
                   mu_idx=int(mu[k]), ystar=ystar[k])
        for k in range(K)]
    bridges_nested = layout.nest(bridges_flat)
    geoms_nested = None
    if exact:
        geoms_nested = layout.nest([GeomVar(int(s)) for s in geoms_flat])
    return bridges_nested, geoms_nested, ystar


# ---------------------------------------------------------------------------
# route resolution
# ---------------------------------------------------------------------------


def resolve_route(model: ModelSpec, priors: PriorSpec, config: RunConfig) -> str:
    """Pick the sweep implementation for a model/prior combination.

    'auto' prefers the closed-form built-in sweeps, then the
    exponential-family sweep, then the general random-walk sampler.
    """
    if config.sampler == "general":
        return "general"
    if config.sampler == "expfam":
        if model.expfam is None:
            raise ValueError(
                f"model {model.name!r} has no exponential-family basis; "
                "use sampler='general'")
        _check_expfam_priors(model, priors)
        return "expfam"
    if model.name in ("ou_speed", "t_diffusion"):
        if priors.effect_shape is None or priors.effect_rate is None:
            raise ValueError(
                f"the built-in {model.name} sampler needs effect_shape and "
                "effect_rate (the Gamma prior on the effect rate)")
        return model.name
    if model.name == "ou_level":
        if priors.exp_rates is None:
            raise ValueError(
                "the level-effect sampler needs exp_rates, the four "
                "exponential prior rates on (alpha, eta, xi, gamma)")
        return "ou_level"
    if model.expfam is not None:
        try:
            _check_expfam_priors(model, priors)
        except ValueError:
            return "general"
        return "expfam"
    return "general"


def _check_expfam_priors(model: ModelSpec, priors: PriorSpec) -> None:
    basis = model.expfam
    if priors.beta_shape is None or priors.beta_rate is None:
        raise ValueError("the exponential-family sweep needs beta_shape and "
                         "beta_rate (the Gamma prior on eta)")
    if basis.p1 and (priors.alpha_mean is None or priors.alpha_cov is None):
        raise ValueError("fixed effects need alpha_mean and alpha_cov")
    if basis.p1 and priors.alpha_mean is not None \
            and len(priors.alpha_mean) != basis.p1:
        raise ValueError(
            f"alpha prior dimension {len(priors.alpha_mean)} does not match "
            f"the basis (p1={basis.p1})")
    if basis.p2:
        has_nw = priors.nw_mean is not None
        has_exp = priors.effect_shape is not None and priors.effect_rate is not None
        if not has_nw and not has_exp:
            raise ValueError(
                "random effects need a normal-Wishart prior (nw_*) or, for "
                "scalar positive effects, effect_shape/effect_rate")
        if has_nw and len(np.atleast_1d(priors.nw_mean)) != basis.p2:
            raise ValueError("nw_mean dimension does not match the basis")
        if not has_nw and basis.p2 != 1:
            raise ValueError("effect_shape/effect_rate apply to scalar effects only")


# ---------------------------------------------------------------------------
# weighted-gamma dispatch
# ---------------------------------------------------------------------------


def _draw_eta(shape, rate_full, rate_base, F_full, F_base, eta_cur,
              config: RunConfig, rng, diag=None, default="mh") -> float:
    """One draw of eta = beta^-2 from density proportional to
    eta^(shape-1) exp(-eta rate_full) exp(F_full(eta^-1/2)).

    rate_base/F_base give the same density with the sign-indefinite
    terms moved from the rate into the weight; they take over whenever
    rate_full is nonpositive. default is the model's native strategy
    (approximate direct sampling for the OU variants, an MH step for
    the t-diffusion), overridden by config.eta_strategy.
    """
    strategy = config.eta_strategy or default
    if strategy == "mh":
        res = sample_weighted_gamma_mh(shape, rate_full, rate_base, F_full,
                                       eta_cur, rng)
        _bump(diag, "eta_proposals")
        _bump(diag, "eta_accepts", int(res.accepted))
        return res.value
    if rate_full > 0:
        rate, F = rate_full, F_full
    else:
        rate, F = rate_base, F_base
    if strategy == "approx":
        return sample_weighted_gamma_approx(shape, rate, F, config.approx_K, rng)
    lo, hi = config.rejection_bounds
    return sample_weighted_gamma_rejection(shape, rate, F, config.rejection_M,
                                           (lo, hi), rng)


def _slope_shift(F, eta: float, shape: float, rate_full: float,
                 rate_base: float) -> tuple:
    """Secant slope of the weight F near the current eta, returned as a
    shift into the gamma rates. The target density is unchanged when the
    caller adds shift / b^2 back to F, but proposals built from the rate
    recentre onto the conditional mode, which matters whenever F carries
    real information about eta. The secant window is the +-2 sd width of
    the Gamma(shape, rate) proposal, clipped away from zero so panels
    with very few observations stay finite."""
    de = 2.0 * eta / math.sqrt(shape)
    lo = max(eta - de, 0.25 * eta)
    hi = eta + de
    shift = -(F(hi ** -0.5) - F(lo ** -0.5)) / (hi - lo)
    if rate_full + shift <= 0 or rate_base + shift <= 0:
        shift = 0.0
    return shift, rate_full + shift, rate_base + shift


# ---------------------------------------------------------------------------
# built-in sweeps
# ---------------------------------------------------------------------------


def _sweep_ou_speed(state: ChainState, model: ModelSpec, data: PanelData,
                    priors: PriorSpec, config: RunConfig, rng: RngBundle,
                    *, layout: GibbsLayout, diag=None) -> ChainState:
    """Speed-effect OU sweep: bridges, effects, eta, effect rate."""
    st = layout.statics
    N = st.n_units
    beta = state.beta
    eta = beta ** -2

    bridges, geoms, ystar = _refresh_bridges(
        layout, state.alpha, beta, state.effects, rng, config.exact_bridges,
        prev=state if config.exact_bridges else None, diag=diag)
    red = BridgeReductions.build(st, ystar)

    B_units = red.P_Y2 + 2.0 / beta * red.P_Yl + eta * st.L2
    t_units = eta * (-0.5 * st.dx2) + 0.5 * st.T_span
    a_new = np.array([
        sample_truncnorm_pos((t_units[i] - state.gamma1) / B_units[i],
                             1.0 / B_units[i], rng.units[i])
        for i in range(N)])
    effects = tuple(Effects(a=np.array([a_new[i]])) for i in range(N))

    G2 = 0.5 * float(a_new @ st.dx2)
    E1 = 0.5 * float(a_new ** 2 @ st.L2)
    E2 = -float(a_new ** 2 @ red.P_Yl)
    shape = 0.5 * (st.n_dot - N) + priors.beta_shape
    rate_full = priors.beta_rate + st.G1 + G2 + E1
    rate_base = priors.beta_rate + st.G1 + E1
    eta_new = _draw_eta(shape, rate_full, rate_base,
                        lambda b: E2 / b,
                        lambda b: E2 / b - G2 / b ** 2,
                        eta, config, rng.param, diag, default="approx")

    gamma1 = sample_gamma_posterior(priors.effect_shape, priors.effect_rate,
                                    float(a_new.sum()), N, rng.param)
    return replace(state, beta=eta_new ** -0.5, gamma1=gamma1, effects=effects,
                   bridges=bridges, geoms=geoms, iter=state.iter + 1)


def _sweep_t_diffusion(state: ChainState, model: ModelSpec, data: PanelData,
                       priors: PriorSpec, config: RunConfig, rng: RngBundle,
                       *, layout: GibbsLayout, diag=None) -> ChainState:
    """t-diffusion sweep; the eta weight needs the tanh path integrals,
    cached per candidate beta within the sweep."""
    st = layout.statics
    N = st.n_units
    beta = state.beta
    eta = beta ** -2

    bridges, geoms, ystar = _refresh_bridges(
        layout, state.alpha, beta, state.effects, rng, config.exact_bridges,
        prev=state if config.exact_bridges else None, diag=diag)
    red = BridgeReductions.build(st, ystar)

    tanh_cache: dict = {}

    def tanh_T(beta_val: float) -> np.ndarray:
        key = float(beta_val)
        if key not in tanh_cache:
            tanh_cache[key] = red.tanh_T(st, key)
        return tanh_cache[key]

    T_units = tanh_T(beta)
    B_units = eta * T_units
    t_units = eta * (-0.5 * st.logratio) + 0.5 * st.T_span - T_units
    a_new = np.array([
        sample_truncnorm_pos((t_units[i] - state.gamma1) / B_units[i],
                             1.0 / B_units[i], rng.units[i])
        for i in range(N)])
    effects = tuple(Effects(a=np.array([a_new[i]])) for i in range(N))

    G2 = 0.5 * float(a_new @ st.logratio)
    shape = 0.5 * (st.n_dot - N) + priors.beta_shape
    rate_full = priors.beta_rate + st.G1 + G2
    rate_base = priors.beta_rate + st.G1

    def F_raw(b: float) -> float:
        T = tanh_T(b)
        return -0.5 * float(np.sum(
            (a_new ** 2 / b ** 2 + 0.75 * b ** 2 + 2.0 * a_new) * T
            - (a_new + b ** 2 / 2.0) * st.T_span))

    # The weight carries most of the information about eta for this
    # model (the quadratic drift term a^2 eta int tanh^2 lives in F, not
    # in the gamma rate), so a proposal built from the rate alone sits
    # many proposal widths away from the conditional mode and the chain
    # freezes. Move the local slope of the weight into the rate; the
    # target is unchanged and the residual weight is nearly flat.
    shift, rate_full, rate_base = _slope_shift(F_raw, eta, shape,
                                               rate_full, rate_base)

    def F_full(b: float) -> float:
        return F_raw(b) + shift / b ** 2

    def F_base(b: float) -> float:
        return F_full(b) - G2 / b ** 2

    eta_new = _draw_eta(shape, rate_full, rate_base, F_full, F_base,
                        eta, config, rng.param, diag, default="mh")

    gamma1 = sample_gamma_posterior(priors.effect_shape, priors.effect_rate,
                                    float(a_new.sum()), N, rng.param)
    return replace(state, beta=eta_new ** -0.5, gamma1=gamma1, effects=effects,
                   bridges=bridges, geoms=geoms, iter=state.iter + 1)


def neuronal_sweep(state: ChainState, data: PanelData, priors: PriorSpec,
                   config: RunConfig, rng: RngBundle, *,
                   layout: GibbsLayout | None = None, diag=None) -> ChainState:
    """Level-effect OU sweep under exponential priors on (alpha, eta,
    xi, gamma): bridges, effects, alpha, eta, xi, gamma in that order.

    The quadratic drift terms E1 are folded into the weighted-gamma
    rate; the 1/beta cross terms E2 stay in the weight exp(E2 sqrt(eta)).
    When the full rate turns nonpositive the sign-indefinite G2 + E3
    move into the weight as well.
    """
    if priors.exp_rates is None:
        raise ValueError("neuronal_sweep needs the four exponential prior rates")
    model = get_model("ou_level")
    rng = RngBundle.coerce(rng, data)
    if layout is None:
        layout = GibbsLayout.build(model, data, config.bridge_steps)
    lam1, lam2, lam3, lam4 = (float(r) for r in priors.exp_rates)
    st = layout.statics
    N = st.n_units
    beta = state.beta
    eta = beta ** -2
    alpha = float(np.atleast_1d(state.alpha)[0])
    xi, gam = float(state.gamma1), float(state.gamma2)

    bridges, geoms, ystar = _refresh_bridges(
        layout, state.alpha, beta, state.effects, rng, config.exact_bridges,
        prev=state if config.exact_bridges else None, diag=diag)
    red = BridgeReductions.build(st, ystar)

    B_units = eta * st.T_span + gam
    t_units = eta * st.dx + alpha * (red.P_Y / beta + eta * st.L1) + gam * xi
    a_new = np.array([
        rng.units[i].normal(t_units[i] / B_units[i], B_units[i] ** -0.5)
        for i in range(N)])
    effects = tuple(Effects(a=np.array([a_new[i]])) for i in range(N))

    v = (eta * 0.5 * float(-st.dx2.sum()) + 0.5 * float(st.T_span.sum())
         + float(a_new @ red.P_Y) / beta + eta * float(a_new @ st.L1))
    D = float(red.P_Y2.sum()) + 2.0 / beta * float(red.P_Yl.sum()) \
        + eta * float(st.L2.sum())
    alpha_new = sample_truncnorm_pos((v - lam1) / D, 1.0 / D, rng.param)

    G2 = float(np.sum(0.5 * alpha_new * st.dx2 - a_new * st.dx))
    E1 = 0.5 * float(a_new ** 2 @ st.T_span) \
        + 0.5 * alpha_new ** 2 * float(st.L2.sum())
    E2 = alpha_new * float(a_new @ red.P_Y) - alpha_new ** 2 * float(red.P_Yl.sum())
    E3 = -alpha_new * float(a_new @ st.L1)
    shape = 0.5 * (st.n_dot - N) + 1.0
    rate_full = lam2 + st.G1 + G2 + E1 + E3
    rate_base = lam2 + st.G1 + E1
    eta_new = _draw_eta(shape, rate_full, rate_base,
                        lambda b: E2 / b,
                        lambda b: E2 / b - (G2 + E3) / b ** 2,
                        eta, config, rng.param, diag, default="approx")

    a_bar = float(a_new.mean())
    xi_new = rng.param.normal(a_bar - lam3 / (gam * N), (gam * N) ** -0.5)
    gam_new = rng.param.gamma(0.5 * N + 1.0,
                              1.0 / (lam4 + 0.5 * float(np.sum((a_new - xi_new) ** 2))))

    return replace(state, alpha=np.array([alpha_new]), beta=eta_new ** -0.5,
                   gamma1=xi_new, gamma2=gam_new, effects=effects,
                   bridges=bridges, geoms=geoms, iter=state.iter + 1)


# ---------------------------------------------------------------------------
# exponential-family sweep
# ---------------------------------------------------------------------------


def alpha_conditional(stats: SuffStats, priors: PriorSpec):
    """Mean and covariance of the fixed-effect Gaussian conditional.

    stats must have been computed at the current effects, whose cross
    terms are already inside stats.v.
    """
    try:
        prior_prec = spd_inv(priors.alpha_cov)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            "alpha prior covariance is singular; the exponential-family "
            "sweep needs a proper Gaussian prior on the fixed effects") from exc
    prec = stats.D + prior_prec
    cov = spd_inv(prec)
    mean = cov @ (stats.v + prior_prec @ priors.alpha_mean)
    return mean, cov


def effects_conditional(stats: SuffStats, i: int, xi, gamma_mat):
    """Mean and covariance of unit i's Gaussian effects conditional at
    the alpha/beta the statistics were computed with."""
    gamma_mat = np.atleast_2d(np.asarray(gamma_mat, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    prec = stats.B[i] + gamma_mat
    cov = spd_inv(prec)
    mean = cov @ (stats.t[i] + gamma_mat @ xi)
    return mean, cov


def _draw_mvn(mean, cov, rng) -> np.ndarray:
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            "conditional covariance is not positive definite; the sweep "
            "cannot draw from it") from exc
    return mean + L @ rng.standard_normal(len(mean))


def _expfam_F_factory(model, data, alpha, effects_list, bridges, G_rate, n_dot, N):
    """Weight function of the generic eta conditional, defined through
    the exact path likelihood: F(b) = sum_i log L_i(b) + (n. - N) log b
    + G_rate / b^2, which strips the gamma-kernel part carried by the
    rate. Additive constants are irrelevant to every strategy that
    consumes it."""

    def F_full(b: float) -> float:
        ll = sum(loglik_unit(model, alpha, b, effects_list[i], data.units[i],
                             bridges[i])
                 for i in range(N))
        return ll + (n_dot - N) * math.log(b) + G_rate / b ** 2

    return F_full


def gibbs_sweep_expfam(state: ChainState, model: ModelSpec, data: PanelData,
                       priors: PriorSpec, config: RunConfig, rng: RngBundle,
                       *, layout: GibbsLayout | None = None,
                       diag=None) -> ChainState:
    """One sweep of the exponential-family sampler.

    Order: fixed effects, diffusion parameter, effect hyperparameters,
    random effects, bridges last. The random-effect statistics are
    recomputed after the beta move, since their cross kernels depend on
    it; the stored Y* rows stay fixed throughout.
    """
    basis = model.expfam
    if basis is None:
        raise ValueError(f"model {model.name!r} has no exponential-family basis")
    if any(len(e.b) != 0 for e in state.effects):
        raise ValueError(
            "diffusion random effects have no closed-form conditional here; "
            "use gibbs_sweep_general")
    rng = RngBundle.coerce(rng, data)
    if layout is None:
        layout = GibbsLayout.build(model, data, config.bridge_steps)
    st = layout.statics
    N = st.n_units
    p1, p2 = basis.p1, basis.p2
    beta = state.beta
    eta = beta ** -2
    exp_effects = priors.nw_mean is None

    stats = suff_stats(model, state.alpha, beta, state.effects, data,
                       state.bridges)

    # 1: fixed effects
    alpha_new = state.alpha
    if p1:
        mean, cov = alpha_conditional(stats, priors)
        alpha_new = _draw_mvn(mean, cov, rng.param)

    # 2: diffusion parameter, weighted gamma on eta = beta^-2
    a_mat = _a_matrix(state.effects)
    can_wg = basis.c is not None and basis.scalar_is_beta
    if can_wg:
        G2 = -float(np.einsum("k,ik->", alpha_new, stats.extra["ef_c2"])
                    + np.einsum("ik,ik->", a_mat, stats.extra["eg_c2"])) \
            if p1 else -float(np.einsum("ik,ik->", a_mat, stats.extra["eg_c2"]))
        shape = 0.5 * (st.n_dot - N) + priors.beta_shape
        rate_full = priors.beta_rate + st.G1 + G2
        rate_base = priors.beta_rate + st.G1
        F_raw = _expfam_F_factory(model, data, alpha_new, state.effects,
                                  state.bridges, rate_full - priors.beta_rate,
                                  st.n_dot, N)
        shift, rate_full, rate_base = _slope_shift(F_raw, eta, shape,
                                                   rate_full, rate_base)

        def F_full(b: float) -> float:
            return F_raw(b) + shift / b ** 2

        def F_base(b: float) -> float:
            return F_full(b) - G2 / b ** 2

        eta_new = _draw_eta(shape, rate_full, rate_base, F_full, F_base,
                            eta, config, rng.param, diag,
                            default="approx" if model.name in
                            ("ou_speed", "ou_level") else "mh")
        beta_new = eta_new ** -0.5
    else:
        beta_new = _beta_log_rw(model, data, state, alpha_new, priors, rng.param,
                                diag)

    # 3/4: effect hyperparameters
    if exp_effects:
        a_vec = a_mat[:, 0]
        gamma1_new = sample_gamma_posterior(priors.effect_shape,
                                            priors.effect_rate,
                                            float(a_vec.sum()), N, rng.param)
        gamma2_new = None
    else:
        nw_prior = (priors.nw_mean, priors.nw_kappa, priors.nw_scale, priors.nw_dof)
        xi_new, gamma_new = sample_nw_posterior(nw_prior, a_mat, rng.param)
        gamma1_new, gamma2_new = xi_new, gamma_new

    # 5: random effects at the updated alpha/beta
    stats2 = suff_stats(model, alpha_new, beta_new, state.effects, data,
                        state.bridges)
    effects_new = []
    for i in range(N):
        if exp_effects:
            B_i = float(stats2.B[i][0, 0])
            t_i = float(stats2.t[i][0])
            a_i = np.array([sample_truncnorm_pos((t_i - gamma1_new) / B_i,
                                                 1.0 / B_i, rng.units[i])])
        else:
            mean, cov = effects_conditional(stats2, i, gamma1_new, gamma2_new)
            a_i = _draw_mvn(mean, cov, rng.units[i])
        effects_new.append(Effects(a=a_i))
    effects_new = tuple(effects_new)

    # 7: bridges last
    bridges, geoms, _ = _refresh_bridges(
        layout, alpha_new, beta_new, effects_new, rng, config.exact_bridges,
        prev=state if config.exact_bridges else None, diag=diag)

    return replace(state, alpha=np.atleast_1d(np.asarray(alpha_new, dtype=float)),
                   beta=beta_new, gamma1=gamma1_new, gamma2=gamma2_new,
                   effects=effects_new, bridges=bridges, geoms=geoms,
                   iter=state.iter + 1)


def _beta_log_rw(model, data, state, alpha, priors: PriorSpec, rng,
                 diag=None, scale: float = 0.25) -> float:
    """Fallback diffusion-parameter move for bases without the
    sigma = beta c(x) factorization: a log-scale random walk targeting
    the Gamma(kappa, delta) prior on eta times the path likelihood."""
    N = data.n_units

    def log_target(b: float) -> float:
        lp = -(2.0 * priors.beta_shape + 1.0) * math.log(b) \
            - priors.beta_rate / b ** 2
        ll = sum(loglik_unit(model, alpha, b, state.effects[i], data.units[i],
                             state.bridges[i]) for i in range(N))
        return lp + ll

    cur = state.beta
    prop = cur * math.exp(scale * rng.standard_normal())
    log_acc = log_target(prop) - log_target(cur) + math.log(prop / cur)
    accept = math.log(rng.uniform()) < log_acc
    _bump(diag, "beta_rw_proposals")
    _bump(diag, "beta_rw_accepts", int(accept))
    return prop if accept else cur


# ---------------------------------------------------------------------------
# general random-walk sweep
# ---------------------------------------------------------------------------


class _GeneralTarget:
    """Log-densities and initial draws of the parameter sites for the
    general sampler. Supports a Gaussian or exponential prior on alpha,
    the Gamma(kappa, delta) prior on eta (expressed in beta), and
    scalar random effects that are either exponential with a
    Gamma-distributed rate or Gaussian with (xi, precision)
    hyperparameters."""

    def __init__(self, model: ModelSpec, priors: PriorSpec):
        self.priors = priors
        basis = model.expfam
        if priors.exp_rates is not None:
            self.alpha_dim = 1
            self.alpha_prior = "exp"
        elif priors.alpha_mean is not None:
            self.alpha_dim = len(priors.alpha_mean)
            self.alpha_prior = "gauss"
            self.alpha_prec = spd_inv(priors.alpha_cov)
        else:
            self.alpha_dim = basis.p1 if basis is not None else 0
            self.alpha_prior = None
            if self.alpha_dim:
                raise ValueError(
                    "the general sampler needs a prior on the fixed effects "
                    "(alpha_mean/alpha_cov or exp_rates)")
        if priors.exp_rates is not None:
            self.effect_family = "gauss"
            self.gamma_names = ("xi", "gamma")
        elif priors.nw_mean is not None:
            if len(np.atleast_1d(priors.nw_mean)) != 1:
                raise ValueError(
                    "the general sampler handles scalar random effects only; "
                    "use the exponential-family sampler for vector effects")
            self.effect_family = "gauss"
            self.gamma_names = ("xi", "gamma")
        elif priors.effect_shape is not None and priors.effect_rate is not None:
            self.effect_family = "exp"
            self.gamma_names = ("gamma",)
        else:
            self.effect_family = None
            self.gamma_names = ()
        if basis is not None and self.effect_family is not None \
                and basis.p2 not in (0, 1):
            raise ValueError(
                "the general sampler handles scalar random effects only")

    # -- theta ---------------------------------------------------------

    def log_prior_theta(self, alpha: np.ndarray, beta: float) -> float:
        pr = self.priors
        if beta <= 0:
            return -math.inf
        out = -(2.0 * pr.beta_shape + 1.0) * math.log(beta) \
            - pr.beta_rate / beta ** 2
        if self.alpha_prior == "exp":
            lam1 = float(pr.exp_rates[0])
            if alpha[0] <= 0:
                return -math.inf
            out += -lam1 * float(alpha[0])
        elif self.alpha_prior == "gauss":
            dev = alpha - pr.alpha_mean
            out += -0.5 * float(dev @ self.alpha_prec @ dev)
        return out

    def init_theta(self, rng) -> tuple:
        pr = self.priors
        eta = rng.gamma(pr.beta_shape, 1.0 / pr.beta_rate)
        beta = float(eta) ** -0.5
        if self.alpha_prior == "exp":
            alpha = np.array([rng.exponential(1.0 / float(pr.exp_rates[0]))])
        elif self.alpha_prior == "gauss":
            vals, vecs = np.linalg.eigh(pr.alpha_cov)
            root = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
            alpha = pr.alpha_mean + root @ rng.standard_normal(self.alpha_dim)
        else:
            alpha = np.zeros(0)
        return alpha, beta

    # -- gamma ---------------------------------------------------------

    def log_prior_gamma(self, g: np.ndarray) -> float:
        pr = self.priors
        if self.effect_family == "exp":
            rate = float(g[0])
            if rate <= 0:
                return -math.inf
            return (pr.effect_shape - 1.0) * math.log(rate) \
                - pr.effect_rate * rate
        if self.effect_family == "gauss":
            xi, prec = float(g[0]), float(g[1])
            if prec <= 0:
                return -math.inf
            if pr.exp_rates is not None:
                lam3, lam4 = float(pr.exp_rates[2]), float(pr.exp_rates[3])
                if xi <= 0:
                    return -math.inf
                return -lam3 * xi - lam4 * prec
            xi0 = float(np.atleast_1d(pr.nw_mean)[0])
            lam = float(pr.nw_kappa)
            V = float(np.atleast_2d(pr.nw_scale)[0, 0])
            nu = float(pr.nw_dof)
            return ((0.5 * nu - 1.0) * math.log(prec) - prec / (2.0 * V)
                    + 0.5 * math.log(prec) - 0.5 * lam * prec * (xi - xi0) ** 2)
        return 0.0

    def init_gamma(self, rng) -> np.ndarray:
        pr = self.priors
        if self.effect_family == "exp":
            return np.array([rng.gamma(pr.effect_shape, 1.0 / pr.effect_rate)])
        if self.effect_family == "gauss":
            if pr.exp_rates is not None:
                lam3, lam4 = float(pr.exp_rates[2]), float(pr.exp_rates[3])
                return np.array([rng.exponential(1.0 / lam3),
                                 rng.exponential(1.0 / lam4)])
            nw_prior = (pr.nw_mean, pr.nw_kappa, pr.nw_scale, pr.nw_dof)
            xi, gam = sample_nw_posterior(nw_prior, np.zeros((0, 1)), rng,
                                          allow_empty=True)
            return np.array([float(xi[0]), float(gam[0, 0])])
        return np.zeros(0)

    # -- effects -------------------------------------------------------

    def log_effects(self, g: np.ndarray, a: float) -> float:
        if self.effect_family == "exp":
            rate = float(g[0])
            if a <= 0:
                return -math.inf
            return math.log(rate) - rate * a
        if self.effect_family == "gauss":
            xi, prec = float(g[0]), float(g[1])
            return 0.5 * math.log(prec) - 0.5 * prec * (a - xi) ** 2
        return 0.0

    def init_effect(self, g: np.ndarray, rng) -> float:
        if self.effect_family == "exp":
            return float(rng.exponential(1.0 / float(g[0])))
        if self.effect_family == "gauss":
            return float(rng.normal(float(g[0]), float(g[1]) ** -0.5))
        raise ValueError("this model/prior combination has no random effects")


@dataclass
class GeneralTuning:
    """Adaptive random-walk scales of the general sampler. Scales move
    toward a 0.3 acceptance rate during burn-in and freeze afterwards;
    a site that accepts nothing over a 50-sweep window after burn-in
    triggers a warning."""

    target: _GeneralTarget
    theta_scales: np.ndarray
    gamma_scales: np.ndarray
    effect_scales: np.ndarray
    window_accepts: dict = field(default_factory=dict)
    window_start: int = 0
    warned: set = field(default_factory=set)

    @classmethod
    def build(cls, target: _GeneralTarget, state: ChainState) -> "GeneralTuning":
        theta0 = np.append(np.atleast_1d(state.alpha), state.beta)
        gam0 = _pack_gamma(target, state)
        a0 = _a_vector(state.effects) if target.effect_family else np.zeros(0)
        scale = lambda v: 0.25 * (np.abs(v) + 0.25)
        return cls(target=target, theta_scales=scale(theta0),
                   gamma_scales=scale(gam0), effect_scales=scale(a0))

    def adapt(self, scales: np.ndarray, idx: int, accepted: bool,
              adapting: bool) -> None:
        if adapting:
            scales[idx] *= math.exp(
                _ADAPT_GAIN * ((1.0 if accepted else 0.0) - _ACCEPT_TARGET))
            scales[idx] = min(max(scales[idx], 1e-8), 1e8)

    def record(self, site: str, accepted: bool, sweep_iter: int,
               burn_in: int) -> None:
        if sweep_iter < burn_in:
            return
        self.window_accepts[site] = self.window_accepts.get(site, 0) + int(accepted)
        if sweep_iter - self.window_start >= _WARN_WINDOW:
            for name, count in self.window_accepts.items():
                if count == 0 and name not in self.warned:
                    warnings.warn(
                        f"general sampler: site {name!r} accepted no proposals "
                        f"over the last {_WARN_WINDOW} sweeps; the chain may be "
                        "stuck (check proposal scales and the model support)")
                    self.warned.add(name)
            self.window_accepts = {}
            self.window_start = sweep_iter


def _pack_gamma(target: _GeneralTarget, state: ChainState) -> np.ndarray:
    if target.effect_family == "exp":
        return np.array([float(state.gamma1)])
    if target.effect_family == "gauss":
        return np.array([float(state.gamma1), float(state.gamma2)])
    return np.zeros(0)


def _unpack_gamma(target: _GeneralTarget, g: np.ndarray) -> tuple:
    if target.effect_family == "exp":
        return float(g[0]), None
    if target.effect_family == "gauss":
        return float(g[0]), float(g[1])
    return None, None


def gibbs_sweep_general(state: ChainState, model: ModelSpec, data: PanelData,
                        priors: PriorSpec, config: RunConfig, rng: RngBundle,
                        *, layout: GibbsLayout | None = None,
                        tuning: GeneralTuning | None = None,
                        diag=None) -> ChainState:
    """One sweep of the general sampler: per-coordinate random-walk
    Metropolis on theta = (alpha, beta), then on the effect
    hyperparameters, then on each unit's scalar effect, then a bridge
    refresh. Proposals are symmetric in the original scale, so each
    acceptance ratio is the plain ratio of target densities.
    """
    rng = RngBundle.coerce(rng, data)
    if layout is None:
        layout = GibbsLayout.build(model, data, config.bridge_steps)
    target = tuning.target if tuning is not None else _GeneralTarget(model, priors)
    if tuning is None:
        tuning = GeneralTuning.build(target, state)
    N = data.n_units
    adapting = state.iter < config.burn_in

    alpha = np.atleast_1d(np.asarray(state.alpha, dtype=float)).copy()
    beta = float(state.beta)
    effects = list(state.effects)
    ll_units = np.array([
        loglik_unit(model, alpha, beta, effects[i], data.units[i],
                    state.bridges[i]) for i in range(N)])

    # theta site, one coordinate at a time
    theta = np.append(alpha, beta)
    lp_cur = target.log_prior_theta(theta[:-1], theta[-1])
    for c in range(len(theta)):
        z = rng.param.standard_normal()
        u = rng.param.uniform()
        prop = theta.copy()
        prop[c] += tuning.theta_scales[c] * z
        lp_prop = target.log_prior_theta(prop[:-1], prop[-1])
        accepted = False
        if math.isfinite(lp_prop):
            ll_prop = np.array([
                loglik_unit(model, prop[:-1], prop[-1], effects[i],
                            data.units[i], state.bridges[i]) for i in range(N)])
            log_acc = lp_prop + ll_prop.sum() - (lp_cur + ll_units.sum())
            if math.log(u) < log_acc:
                theta, lp_cur, ll_units = prop, lp_prop, ll_prop
                accepted = True
        tuning.adapt(tuning.theta_scales, c, accepted, adapting)
        tuning.record(f"theta_{c}", accepted, state.iter, config.burn_in)
        _bump(diag, "general_theta_proposals")
        _bump(diag, "general_theta_accepts", int(accepted))
    alpha, beta = theta[:-1], float(theta[-1])

    # effect-hyperparameter site
    gam = _pack_gamma(target, state)
    if len(gam):
        a_vec = _a_vector(effects)
        lpg_cur = target.log_prior_gamma(gam) + sum(
            target.log_effects(gam, a) for a in a_vec)
        for c in range(len(gam)):
            z = rng.param.standard_normal()
            u = rng.param.uniform()
            prop = gam.copy()
            prop[c] += tuning.gamma_scales[c] * z
            lpg_prop = target.log_prior_gamma(prop)
            accepted = False
            if math.isfinite(lpg_prop):
                lpg_prop += sum(target.log_effects(prop, a) for a in a_vec)
                if math.log(u) < lpg_prop - lpg_cur:
                    gam, lpg_cur = prop, lpg_prop
                    accepted = True
            tuning.adapt(tuning.gamma_scales, c, accepted, adapting)
            tuning.record(f"gamma_{c}", accepted, state.iter, config.burn_in)
            _bump(diag, "general_gamma_proposals")
            _bump(diag, "general_gamma_accepts", int(accepted))

    # per-unit effect site
    if target.effect_family is not None:
        any_accept = False
        for i in range(N):
            a_cur = float(np.atleast_1d(effects[i].a)[0])
            z = rng.units[i].standard_normal()
            u = rng.units[i].uniform()
            a_prop = a_cur + tuning.effect_scales[i] * z
            le_prop = target.log_effects(gam, a_prop)
            accepted = False
            if math.isfinite(le_prop):
                eff_prop = Effects(a=np.array([a_prop]))
                ll_prop = loglik_unit(model, alpha, beta, eff_prop,
                                      data.units[i], state.bridges[i])
                log_acc = (ll_prop + le_prop) \
                    - (ll_units[i] + target.log_effects(gam, a_cur))
                if math.log(u) < log_acc:
                    effects[i] = eff_prop
                    ll_units[i] = ll_prop
                    accepted = True
            tuning.adapt(tuning.effect_scales, i, accepted, adapting)
            any_accept = any_accept or accepted
            _bump(diag, "general_effect_proposals")
            _bump(diag, "general_effect_accepts", int(accepted))
        tuning.record("effects", any_accept, state.iter, config.burn_in)

    effects = tuple(effects)
    bridges, geoms, _ = _refresh_bridges(
        layout, alpha, beta, effects, rng, config.exact_bridges,
        prev=state if config.exact_bridges else None, diag=diag)
    gamma1, gamma2 = _unpack_gamma(target, gam) if len(gam) else \
        (state.gamma1, state.gamma2)

    return replace(state, alpha=alpha, beta=beta, gamma1=gamma1, gamma2=gamma2,
                   effects=effects, bridges=bridges, geoms=geoms,
                   iter=state.iter + 1)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def gibbs_init(model: ModelSpec, data: PanelData, priors: PriorSpec,
               config: RunConfig, rng, *, layout: GibbsLayout | None = None,
               route: str | None = None, diag=None) -> ChainState:
    """Draw the starting state: beta from the driftless coarse-increment
    moment estimate, the remaining parameters from their priors, effects
    from the effect distribution, then all bridges conditional on them.

    config.init can override any drawn value (keys alpha, beta, gamma1,
    gamma2, effects_a) before the bridges are simulated. A draw whose
    bridges cannot be constructed (non-ergodic parameters in exact
    mode, no crossing) is retried from fresh prior draws up to 20
    times.
    """
    if isinstance(model, str):
        model = get_model(model)
    rng = RngBundle.coerce(rng, data)
    if route is None:
        route = resolve_route(model, priors, config)
    if layout is None:
        layout = GibbsLayout.build(model, data, config.bridge_steps)
    N = data.n_units

    last_err = None
    for _ in range(_INIT_RETRIES):
        alpha, beta, gamma1, gamma2, effects = _init_draw(
            model, priors, route, rng, N, layout.statics)
        alpha, beta, gamma1, gamma2, effects = _apply_init_overrides(
            config.init, alpha, beta, gamma1, gamma2, effects, N)
        try:
            bridges, geoms, _ = _refresh_bridges(
                layout, alpha, beta, effects, rng, config.exact_bridges,
                prev=None, diag=diag)
        except (RuntimeError, ValueError) as exc:
            last_err = exc
            continue
        return ChainState(alpha=alpha, beta=beta, gamma1=gamma1, gamma2=gamma2,
                          effects=effects, bridges=bridges, geoms=geoms, iter=0)
    raise ValueError(
        f"could not construct initial bridges after {_INIT_RETRIES} prior "
        f"draws; the priors keep producing parameters the bridge sampler "
        f"cannot handle (last error: {last_err})")


def _moment_eta(st: PanelStatics, shape0: float, rate0: float) -> float:
    """Deterministic starting point for eta: the posterior-mean of the
    driftless coarse-increment model. Prior draws of eta can start the
    chain so far out that the weighted-gamma MH step never accepts; this
    estimate starts it inside the data-supported region."""
    return (0.5 * (st.n_dot - st.n_units) + shape0) / (rate0 + st.G1)


def _init_draw(model: ModelSpec, priors: PriorSpec, route: str,
               rng: RngBundle, N: int, st: PanelStatics):
    param = rng.param
    if route in ("ou_speed", "t_diffusion"):
        eta = _moment_eta(st, priors.beta_shape, priors.beta_rate)
        gamma1 = param.gamma(priors.effect_shape, 1.0 / priors.effect_rate)
        effects = tuple(Effects(a=np.array([rng.units[i].exponential(1.0 / gamma1)]))
                        for i in range(N))
        return np.zeros(0), float(eta) ** -0.5, float(gamma1), None, effects
    if route == "ou_level":
        lam1, lam2, lam3, lam4 = (float(r) for r in priors.exp_rates)
        alpha = np.array([param.exponential(1.0 / lam1)])
        eta = _moment_eta(st, 1.0, lam2)
        xi = param.exponential(1.0 / lam3)
        gam = param.exponential(1.0 / lam4)
        effects = tuple(Effects(a=np.array([rng.units[i].normal(xi, gam ** -0.5)]))
                        for i in range(N))
        return alpha, float(eta) ** -0.5, float(xi), float(gam), effects
    if route == "expfam":
        basis = model.expfam
        alpha = np.zeros(0)
        if basis.p1:
            vals, vecs = np.linalg.eigh(priors.alpha_cov)
            root = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
            alpha = priors.alpha_mean + root @ param.standard_normal(basis.p1)
        eta = _moment_eta(st, priors.beta_shape, priors.beta_rate)
        beta = float(eta) ** -0.5
        if priors.nw_mean is not None:
            nw_prior = (priors.nw_mean, priors.nw_kappa, priors.nw_scale,
                        priors.nw_dof)
            xi, gamma_mat = sample_nw_posterior(nw_prior,
                                                np.zeros((0, basis.p2)),
                                                param, allow_empty=True)
            L = np.linalg.cholesky(spd_inv(gamma_mat))
            effects = tuple(
                Effects(a=xi + L @ rng.units[i].standard_normal(basis.p2))
                for i in range(N))
            return alpha, beta, xi, gamma_mat, effects
        gamma1 = param.gamma(priors.effect_shape, 1.0 / priors.effect_rate)
        effects = tuple(Effects(a=np.array([rng.units[i].exponential(1.0 / gamma1)]))
                        for i in range(N))
        return alpha, beta, float(gamma1), None, effects
    # general route
    target = _GeneralTarget(model, priors)
    alpha, beta = target.init_theta(param)
    g = target.init_gamma(param)
    if target.effect_family is not None:
        effects = tuple(Effects(a=np.array([target.init_effect(g, rng.units[i])]))
                        for i in range(N))
    else:
        effects = tuple(Effects(a=np.zeros(0)) for _ in range(N))
    gamma1, gamma2 = _unpack_gamma(target, g) if len(g) else (None, None)
    return alpha, beta, gamma1, gamma2, effects


def _apply_init_overrides(init: dict | None, alpha, beta, gamma1, gamma2,
                          effects, N: int):
    if not init:
        return alpha, beta, gamma1, gamma2, effects
    known = {"alpha", "beta", "gamma1", "gamma2", "effects_a"}
    unknown = set(init) - known
    if unknown:
        raise ValueError(f"unknown init override(s) {sorted(unknown)}; "
                         f"valid keys are {sorted(known)}")
    if "alpha" in init:
        alpha = np.atleast_1d(np.asarray(init["alpha"], dtype=float))
    if "beta" in init:
        beta = float(init["beta"])
        if beta <= 0:
            raise ValueError("init beta must be positive")
    if "gamma1" in init:
        g = init["gamma1"]
        gamma1 = g if np.ndim(g) else float(g)
    if "gamma2" in init:
        g = init["gamma2"]
        gamma2 = g if np.ndim(g) else float(g)
    if "effects_a" in init:
        arr = np.asarray(init["effects_a"], dtype=float)
        if arr.ndim == 0:
            arr = np.full(N, float(arr))
        if len(arr) != N:
            raise ValueError(f"effects_a needs one row per unit ({N})")
        effects = tuple(Effects(a=np.atleast_1d(arr[i])) for i in range(N))
    return alpha, beta, gamma1, gamma2, effects


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------


_SWEEPS = {
    "ou_speed": _sweep_ou_speed,
    "t_diffusion": _sweep_t_diffusion,
}


def _trace_schema(route: str, model: ModelSpec, priors: PriorSpec):
    if route in ("ou_speed", "t_diffusion"):
        return ("beta", "gamma"), lambda s: (s.beta, s.gamma1)
    if route == "ou_level" or (route == "general" and priors.exp_rates is not None
                               and model.name == "ou_level"):
        return ("alpha", "beta", "xi", "sigma"), lambda s: (
            float(np.atleast_1d(s.alpha)[0]), s.beta, s.gamma1,
            float(s.gamma2) ** -0.5)
    p1 = len(priors.alpha_mean) if priors.alpha_mean is not None else (
        model.expfam.p1 if model.expfam is not None else 0)
    names = [f"alpha_{k + 1}" for k in range(p1)] + ["beta"]
    if priors.nw_mean is not None:
        p2 = len(np.atleast_1d(priors.nw_mean))
        names += [f"xi_{k + 1}" for k in range(p2)]
        pairs = [(r, c) for r in range(p2) for c in range(r, p2)]
        names += [f"gamma_{r + 1}{c + 1}" for r, c in pairs]

        def row(s, pairs=tuple(pairs), p1=p1):
            gam = np.atleast_2d(np.asarray(s.gamma2, dtype=float))
            return (tuple(np.atleast_1d(s.alpha)[:p1]) + (s.beta,)
                    + tuple(np.atleast_1d(s.gamma1))
                    + tuple(gam[r, c] for r, c in pairs))

        return tuple(names), row
    if priors.exp_rates is not None:
        names += ["xi", "gamma"]
        return tuple(names), lambda s: (
            tuple(np.atleast_1d(s.alpha)) + (s.beta, s.gamma1, float(s.gamma2)))
    if priors.effect_shape is not None:
        names += ["gamma"]
        return tuple(names), lambda s: (
            tuple(np.atleast_1d(s.alpha)) + (s.beta, float(s.gamma1)))
    return tuple(names), lambda s: tuple(np.atleast_1d(s.alpha)) + (s.beta,)


def run_chain(model, data: PanelData, priors: PriorSpec,
              config: RunConfig | None = None, rng=None) -> DrawTrace:
    """Initialize and run one Gibbs chain, returning the full trace.

    model is a ModelSpec or a registered model id. rng is an int seed,
    a SeedSequence or an RngBundle; identical seeds give bit-identical
    traces regardless of the thread setting. Burn-in is not applied
    here; DrawTrace.summary drops it.
    """
    if isinstance(model, str):
        model = get_model(model)
    if config is None:
        config = RunConfig()
    if config.iterations < 1:
        raise ValueError("run_chain needs iterations >= 1")
    threads = resolve_threads(config.threads)
    rng = RngBundle.coerce(rng, data)
    route = resolve_route(model, priors, config)
    layout = GibbsLayout.build(model, data, config.bridge_steps)
    diag: dict = {"threads": threads}

    state = gibbs_init(model, data, priors, config, rng, layout=layout,
                       route=route, diag=diag)
    tuning = None
    if route == "general":
        tuning = GeneralTuning.build(_GeneralTarget(model, priors), state)

    names, row_fn = _trace_schema(route, model, priors)
    params = np.empty((config.iterations, len(names)))
    effect_names = None
    effect_rows = None
    if config.save_effects:
        p2 = len(np.atleast_1d(state.effects[0].a))
        if p2 == 1:
            effect_names = tuple(f"a_{i + 1}" for i in range(data.n_units))
        else:
            effect_names = tuple(f"a_{i + 1}_{k + 1}"
                                 for i in range(data.n_units) for k in range(p2))
        effect_rows = np.empty((config.iterations, len(effect_names)))

    for it in range(config.iterations):
        if route in _SWEEPS:
            state = _SWEEPS[route](state, model, data, priors, config, rng,
                                   layout=layout, diag=diag)
        elif route == "ou_level":
            state = neuronal_sweep(state, data, priors, config, rng,
                                   layout=layout, diag=diag)
        elif route == "expfam":
            state = gibbs_sweep_expfam(state, model, data, priors, config, rng,
                                       layout=layout, diag=diag)
        else:
            state = gibbs_sweep_general(state, model, data, priors, config, rng,
                                        layout=layout, tuning=tuning, diag=diag)
        params[it] = row_fn(state)
        if effect_rows is not None:
            effect_rows[it] = _a_matrix(state.effects).ravel()

    if diag.get("eta_proposals"):
        diag["eta_accept_rate"] = diag.get("eta_accepts", 0) / diag["eta_proposals"]
    return DrawTrace(model_id=model.name, sampler=route, param_names=names,
                     params=params, effect_names=effect_names,
                     effects=effect_rows, burn_in=config.burn_in,
                     diagnostics=diag)


# ---------------------------------------------------------------------------
# estimator front end
# ---------------------------------------------------------------------------


class GibbsSampler:
    """Estimator-style front end over run_chain.

    Construct with configuration, call fit(panel), then read trace_,
    summary_ and posterior_means_. get_params/set_params follow the
    usual estimator conventions so the class composes with generic
    tooling.
    """

    _PARAM_NAMES = ("model", "priors", "iterations", "burn_in", "bridge_steps",
                    "exact_bridges", "eta_strategy", "approx_K", "sampler",
                    "save_effects", "seed")

    def __init__(self, model="ou_speed", priors=None, iterations=1000,
                 burn_in=100, bridge_steps=50, exact_bridges=False,
                 eta_strategy=None, approx_K=1000, sampler="auto",
                 save_effects=False, seed=None):
        self.model = model
        self.priors = priors
        self.iterations = iterations
        self.burn_in = burn_in
        self.bridge_steps = bridge_steps
        self.exact_bridges = exact_bridges
        self.eta_strategy = eta_strategy
        self.approx_K = approx_K
        self.sampler = sampler
        self.save_effects = save_effects
        self.seed = seed

    def get_params(self, deep=True) -> dict:
        return {name: getattr(self, name) for name in self._PARAM_NAMES}

    def set_params(self, **params) -> "GibbsSampler":
        for name, value in params.items():
            if name not in self._PARAM_NAMES:
                raise ValueError(f"unknown parameter {name!r} for GibbsSampler")
            setattr(self, name, value)
        return self

    def fit(self, data: PanelData) -> "GibbsSampler":
        if self.priors is None:
            raise ValueError("GibbsSampler needs priors (a PriorSpec) to fit")
        config = RunConfig(iterations=self.iterations, burn_in=self.burn_in,
                           bridge_steps=self.bridge_steps,
                           exact_bridges=self.exact_bridges,
                           eta_strategy=self.eta_strategy,
                           approx_K=self.approx_K, sampler=self.sampler,
                           save_effects=self.save_effects)
        self.trace_ = run_chain(self.model, data, self.priors, config,
                                rng=self.seed)
        self.summary_ = self.trace_.summary()
        self.posterior_means_ = {name: stats["mean"]
                                 for name, stats in self.summary_.items()}
        return self

    def summary(self) -> dict:
        if not hasattr(self, "trace_"):
            raise ValueError("GibbsSampler is not fitted; call fit first")
        return self.summary_
