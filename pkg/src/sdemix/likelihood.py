"""Augmented-data log-likelihood and exponential-family sufficient statistics.

With h the Lamperti transform of the model at the current diffusion
parameters and, for each consecutive observation pair (x_{j-1}, x_j), a
bridge with centered Lamperti path Y* on its grid, the log-likelihood
contribution of one unit is

    log L_i = H(x_1, x_n)
              - sum_j [ (h(x_j) - h(x_{j-1}))^2 / (2 dt_j)
                        + log sigma(x_j)
                        + 1/2 int phi(Y*_s + ell(s)) ds ],

where ell interpolates linearly between h(x_{j-1}) and h(x_j), H is the
drift potential and phi the curvature term of the model. All ds-integrals
use the trapezoidal rule on the bridge grid.

For models with linear drift d = alpha.f(x) + a.g(x) the same quantity is
a quadratic form in (alpha, a); suff_stats computes its coefficients
(per-unit vectors t_i, v_i, matrices B_i, D_i, C_i and the scalar rest
q_i) so that

    log L_i = alpha.v_i + a.t_i + alpha C_i a
              - 1/2 alpha D_i alpha - 1/2 a B_i a + q_i.

The identity of the two routes on random instances is the central
consistency check of the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import PanelData, UnitData
from .model import (
    Effects,
    ModelSpec,
    H_term,
    _adaptive_simpson,
    get_model,
    lamperti,
    lamperti_inv,
    phi,
)

__all__ = [
    "SuffStats",
    "PanelStatics",
    "BridgeReductions",
    "path_integral",
    "ell_interp",
    "loglik_unit",
    "suff_stats",
    "expfam_loglik_unit",
    "model_functionals",
]


def path_integral(fvals, delta: float) -> float:
    """Trapezoidal rule for int f ds on a uniform grid with step delta."""
    fvals = np.asarray(fvals, dtype=float)
    if fvals.ndim != 1 or len(fvals) < 2:
        raise ValueError("need a 1-d grid of at least 2 values")
    return float(delta * (0.5 * fvals[0] + fvals[1:-1].sum() + 0.5 * fvals[-1]))


def _row_trapz(fmat: np.ndarray, delta) -> np.ndarray:
    """Trapezoid along axis 1; delta may be scalar or per-row vector."""
    core = 0.5 * fmat[:, 0] + fmat[:, 1:-1].sum(axis=1) + 0.5 * fmat[:, -1]
    return np.asarray(delta) * core


def ell_interp(h1: float, h2: float, t1: float, t2: float, t):
    """Linear interpolation ((t2-t) h1 + (t-t1) h2) / (t2-t1) on [t1, t2]."""
    if not t2 > t1:
        raise ValueError(f"need t2 > t1, got [{t1}, {t2}]")
    t = np.asarray(t, dtype=float)
    if np.any(t < t1) or np.any(t > t2):
        raise ValueError(f"t={t!r} outside [{t1}, {t2}]")
    out = ((t2 - t) * h1 + (t - t1) * h2) / (t2 - t1)
    return out if out.ndim else float(out)


def _check_bridges(unit: UnitData, bridges) -> None:
    if len(bridges) != unit.n_intervals:
        raise ValueError(
            f"need {unit.n_intervals} bridges for {unit.n_obs} observations, "
            f"got {len(bridges)}")
    for j, bp in enumerate(bridges):
        if bp.x1 != unit.values[j] or bp.x2 != unit.values[j + 1]:
            raise ValueError(
                f"bridge {j} endpoints ({bp.x1}, {bp.x2}) do not match "
                f"observations ({unit.values[j]}, {unit.values[j + 1]})")
        if (abs(bp.t1 - unit.times[j]) > 1e-9 * max(1.0, abs(bp.t1))
                or abs(bp.t2 - unit.times[j + 1]) > 1e-9 * max(1.0, abs(bp.t2))):
            raise ValueError(
                f"bridge {j} spans [{bp.t1}, {bp.t2}], observations are at "
                f"[{unit.times[j]}, {unit.times[j + 1]}]")


def _grid_weights(n_cols: int, delta) -> np.ndarray:
    w = np.full(n_cols, float(delta))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def loglik_unit(model: ModelSpec, alpha, beta, effects: Effects, unit: UnitData,
                bridges) -> float:
    """Augmented log-likelihood of one unit on its bridge grids."""
    _check_bridges(unit, bridges)
    a, b = effects.a, effects.b
    h_obs = np.asarray(lamperti(model, beta, b, unit.values), dtype=float)
    sig_obs = np.asarray(model.sigma(beta, b, unit.values), dtype=float)
    total = float(H_term(model, alpha, beta, a, b,
                         float(unit.values[0]), float(unit.values[-1])))
    for j, bp in enumerate(bridges):
        dtj = unit.times[j + 1] - unit.times[j]
        dh = h_obs[j + 1] - h_obs[j]
        n = bp.n_grid
        ell = h_obs[j] + (h_obs[j + 1] - h_obs[j]) * (np.arange(n + 1) / n)
        phi_vals = np.asarray(phi(model, alpha, beta, a, b, bp.ystar + ell),
                              dtype=float)
        total -= (dh * dh / (2.0 * dtj) + math.log(sig_obs[j + 1])
                  + 0.5 * path_integral(phi_vals, bp.delta))
    return total


# ---------------------------------------------------------------------------
# exponential-family sufficient statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuffStats:
    """Per-unit and pooled coefficients of the quadratic log-likelihood.

    t[i], B[i] drive the random-effect conditional of unit i; the pooled
    v, D drive the fixed-effect conditional. v_units, D_units, C_units and
    q_units complete the per-unit assembly identity. G1 collects the
    beta-free quadratic variation term sum (Delta u)^2 / (2 dt) of the
    base transform u (defined when the diffusion factors as beta * c(x)),
    and G2 the drift endpoint term of the eta = beta^-2 conditional.
    """

    t: np.ndarray          # (N, p2)
    B: np.ndarray          # (N, p2, p2)
    v_units: np.ndarray    # (N, p1)
    D_units: np.ndarray    # (N, p1, p1)
    C_units: np.ndarray    # (N, p1, p2)
    q_units: np.ndarray    # (N,)
    v: np.ndarray          # (p1,)
    D: np.ndarray          # (p1, p1)
    G1: float
    G2: float
    extra: dict


def _endpoint_integrals(model: ModelSpec, basis, beta, b, x_lo: float,
                        x_hi: float) -> tuple[np.ndarray, np.ndarray]:
    """(int_{x_lo}^{x_hi} f_k / sigma^2, same for g) as stacked vectors."""
    def via_antideriv(antis):
        return np.array([fn(x_hi) - fn(x_lo) for fn in antis]) / float(beta) ** 2

    def via_quadrature(funcs):
        out = []
        for fn in funcs:
            out.append(_adaptive_simpson(
                lambda xv: float(fn(np.asarray(xv, dtype=float))
                                 / model.sigma(beta, b, xv) ** 2),
                x_lo, x_hi))
        return np.array(out)

    if basis.int_f_over_c2 and basis.scalar_is_beta:
        ef = via_antideriv(basis.int_f_over_c2)
    else:
        ef = via_quadrature(basis.f_funcs)
    if basis.int_g_over_c2 and basis.scalar_is_beta:
        eg = via_antideriv(basis.int_g_over_c2)
    else:
        eg = via_quadrature(basis.g_funcs)
    return ef, eg


def suff_stats(model: ModelSpec, alpha, beta, effects_list, panel: PanelData,
               bridges_list) -> SuffStats:
    """Exponential-family statistics of the whole panel.

    effects_list and bridges_list are per-unit (bridges_list[i] holding
    the n_i - 1 bridges of unit i). alpha and each unit's effects enter
    the cross kernels, so the result is specific to the provided values.
    """
    basis = model.expfam
    if basis is None:
        raise ValueError(f"model {model.name!r} has no exponential-family basis")
    alpha_arr = np.atleast_1d(np.asarray(alpha, dtype=float))
    if len(alpha_arr) != basis.p1:
        raise ValueError(f"alpha has length {len(alpha_arr)}, basis expects {basis.p1}")
    N = panel.n_units
    p1, p2 = basis.p1, basis.p2

    t_all = np.zeros((N, p2))
    B_all = np.zeros((N, p2, p2))
    v_all = np.zeros((N, p1))
    D_all = np.zeros((N, p1, p1))
    C_all = np.zeros((N, p1, p2))
    q_all = np.zeros(N)
    ef_all = np.zeros((N, p1))
    eg_all = np.zeros((N, p2))
    G2 = 0.0
    n_dot = 0

    for i, (unit, effects, bridges) in enumerate(
            zip(panel.units, effects_list, bridges_list)):
        _check_bridges(unit, bridges)
        a, b = effects.a, effects.b
        if len(a) != p2:
            raise ValueError(f"unit {i}: effects a has length {len(a)}, "
                             f"basis expects {p2}")
        n_dot += unit.n_obs
        x1, xn = float(unit.values[0]), float(unit.values[-1])
        ef, eg = _endpoint_integrals(model, basis, beta, b, x1, xn)
        ef_all[i], eg_all[i] = ef, eg
        G2 -= float(beta) ** 2 * (alpha_arr @ ef + a @ eg)

        h_obs = np.asarray(lamperti(model, beta, b, unit.values), dtype=float)
        sig_obs = np.asarray(model.sigma(beta, b, unit.values), dtype=float)
        W_i = 0.0
        t_time = np.zeros(p2)
        v_time = np.zeros(p1)
        q_int = 0.0
        for j, bp in enumerate(bridges):
            dtj = unit.times[j + 1] - unit.times[j]
            dh = h_obs[j + 1] - h_obs[j]
            W_i += dh * dh / (2.0 * dtj) + math.log(sig_obs[j + 1])
            n = bp.n_grid
            ell = h_obs[j] + (h_obs[j + 1] - h_obs[j]) * (np.arange(n + 1) / n)
            X = np.asarray(lamperti_inv(model, beta, b, bp.ystar + ell), dtype=float)
            w = _grid_weights(n + 1, bp.delta)

            sig = np.asarray(model.sigma(beta, b, X), dtype=float)
            sig_dx = np.asarray(model.sigma_dx(beta, b, X), dtype=float)
            sig_dxx = np.asarray(model.sigma_dxx(beta, b, X), dtype=float)
            ratio = sig_dx / sig
            q_int += float(w @ (0.25 * sig_dx ** 2 - 0.5 * sig * sig_dxx))

            fv, gv = basis.f(X), basis.g(X)
            ftil, gtil = fv / sig, gv / sig
            if p1:
                fbar = basis.f_dx(X) - 2.0 * fv * ratio
            if p2:
                gbar = basis.g_dx(X) - 2.0 * gv * ratio
            drift_f = np.tensordot(alpha_arr, ftil, axes=1) if p1 else 0.0
            drift_g = np.tensordot(a, gtil, axes=1) if p2 else 0.0
            if p2:
                k1 = 0.5 * gbar + drift_f * gtil
                t_time += k1 @ w
                B_all[i] += (gtil * w) @ gtil.T
            if p1:
                k2 = 0.5 * fbar + drift_g * ftil
                v_time += k2 @ w
                D_all[i] += (ftil * w) @ ftil.T
            if p1 and p2:
                C_all[i] += (ftil * w) @ gtil.T

        t_all[i] = eg - t_time
        v_all[i] = ef - v_time
        q_all[i] = (-0.5 * (math.log(sig_obs[-1]) - math.log(sig_obs[0]))
                    - W_i - 0.5 * q_int)

    G1 = math.nan
    if basis.c is not None and basis.scalar_is_beta:
        G1 = 0.0
        for unit in panel.units:
            u_obs = np.asarray(lamperti(model, 1.0, np.zeros(0), unit.values),
                               dtype=float)
            G1 += float(np.sum(np.diff(u_obs) ** 2 / (2.0 * np.diff(unit.times))))

    scale = float(beta) ** 2
    return SuffStats(
        t=t_all, B=B_all, v_units=v_all, D_units=D_all, C_units=C_all,
        q_units=q_all, v=v_all.sum(axis=0), D=D_all.sum(axis=0),
        G1=G1, G2=G2,
        extra={"n_dot": n_dot, "n_units": N,
               # per-unit int f/c^2 and int g/c^2 between the unit's first
               # and last observation; free of beta when sigma = beta * c(x)
               "ef_c2": scale * ef_all, "eg_c2": scale * eg_all},
    )


def expfam_loglik_unit(stats: SuffStats, i: int, alpha, a) -> float:
    """Assemble log L_i from the quadratic coefficients of suff_stats."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return float(
        alpha @ stats.v_units[i] + a @ stats.t[i]
        + alpha @ stats.C_units[i] @ a
        - 0.5 * alpha @ stats.D_units[i] @ alpha
        - 0.5 * a @ stats.B[i] @ a
        + stats.q_units[i])


# ---------------------------------------------------------------------------
# per-model reduced functionals for the built-in samplers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PanelStatics:
    """Data-only quantities shared by every sweep on a fixed bridge grid.

    ell_mat holds, per observation interval (flattened unit-major), the
    linear interpolant of the base transform u(x) = int dx / c(x) on the
    bridge grid; it is parameter-free for the built-in models. L1 and L2
    are its per-unit first and second trapezoidal moments.
    """

    model_id: str
    n_steps: int
    n_units: int
    n_dot: int
    unit_index: np.ndarray    # (total_intervals,) int
    dt_flat: np.ndarray       # (total_intervals,)
    delta_flat: np.ndarray    # (total_intervals,)
    ell_mat: np.ndarray       # (total_intervals, n_steps + 1)
    T_span: np.ndarray        # (N,)
    G1_units: np.ndarray      # (N,)
    G1: float
    dx: np.ndarray            # (N,) x_n - x_1
    dx2: np.ndarray           # (N,) x_n^2 - x_1^2
    logratio: np.ndarray      # (N,) log((1+x_n^2)/(1+x_1^2))
    L1: np.ndarray            # (N,)
    L2: np.ndarray            # (N,)

    @classmethod
    def build(cls, model: ModelSpec, panel: PanelData, n_steps: int) -> "PanelStatics":
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        N = panel.n_units
        frac = np.arange(n_steps + 1) / n_steps
        rows, unit_index, dt_flat = [], [], []
        G1_units = np.zeros(N)
        T_span = np.zeros(N)
        dx = np.zeros(N)
        dx2 = np.zeros(N)
        logratio = np.zeros(N)
        for i, unit in enumerate(panel.units):
            u_obs = np.asarray(lamperti(model, 1.0, np.zeros(0), unit.values),
                               dtype=float)
            dts = np.diff(unit.times)
            G1_units[i] = float(np.sum(np.diff(u_obs) ** 2 / (2.0 * dts)))
            T_span[i] = unit.times[-1] - unit.times[0]
            dx[i] = unit.values[-1] - unit.values[0]
            dx2[i] = unit.values[-1] ** 2 - unit.values[0] ** 2
            logratio[i] = float(np.log1p(unit.values[-1] ** 2)
                                - np.log1p(unit.values[0] ** 2))
            for j in range(unit.n_intervals):
                rows.append(u_obs[j] + (u_obs[j + 1] - u_obs[j]) * frac)
                unit_index.append(i)
                dt_flat.append(dts[j])
        ell_mat = np.array(rows)
        unit_index = np.array(unit_index, dtype=int)
        dt_flat = np.array(dt_flat)
        delta_flat = dt_flat / n_steps
        L1 = np.bincount(unit_index, weights=_row_trapz(ell_mat, delta_flat),
                         minlength=N)
        L2 = np.bincount(unit_index, weights=_row_trapz(ell_mat ** 2, delta_flat),
                         minlength=N)
        return cls(
            model_id=model.name, n_steps=n_steps, n_units=N,
            n_dot=panel.n_total, unit_index=unit_index, dt_flat=dt_flat,
            delta_flat=delta_flat, ell_mat=ell_mat, T_span=T_span,
            G1_units=G1_units, G1=float(G1_units.sum()), dx=dx, dx2=dx2,
            logratio=logratio, L1=L1, L2=L2,
        )

    def unit_sum(self, per_interval: np.ndarray) -> np.ndarray:
        return np.bincount(self.unit_index, weights=per_interval,
                           minlength=self.n_units)


@dataclass(frozen=True)
class BridgeReductions:
    """Bridge-dependent trapezoidal moments, per unit.

    P_Y2 = sum_j int Y*^2 ds, P_Yl = sum_j int Y* ell ds, P_Y = sum_j
    int Y* ds, with ell the base-transform interpolant of PanelStatics.
    ystar_mat is kept for integrands that need the full grid (the tanh
    terms of the t-diffusion model).
    """

    ystar_mat: np.ndarray
    P_Y2: np.ndarray
    P_Yl: np.ndarray
    P_Y: np.ndarray

    @classmethod
    def build(cls, statics: PanelStatics, ystar_mat: np.ndarray) -> "BridgeReductions":
        if ystar_mat.shape != statics.ell_mat.shape:
            raise ValueError(
                f"ystar grid {ystar_mat.shape} does not match the panel layout "
                f"{statics.ell_mat.shape}")
        d = statics.delta_flat
        return cls(
            ystar_mat=ystar_mat,
            P_Y2=statics.unit_sum(_row_trapz(ystar_mat ** 2, d)),
            P_Yl=statics.unit_sum(_row_trapz(ystar_mat * statics.ell_mat, d)),
            P_Y=statics.unit_sum(_row_trapz(ystar_mat, d)),
        )

    @classmethod
    def from_bridges(cls, statics: PanelStatics, bridges_list) -> "BridgeReductions":
        rows = [bp.ystar for bridges in bridges_list for bp in bridges]
        return cls.build(statics, np.array(rows))

    def tanh_T(self, statics: PanelStatics, beta: float) -> np.ndarray:
        """Per-unit sum_j int tanh^2(beta Y* + ell) ds."""
        rows = np.tanh(float(beta) * self.ystar_mat + statics.ell_mat) ** 2
        return statics.unit_sum(_row_trapz(rows, statics.delta_flat))


def model_functionals(model_id: str, alpha, effects_list, panel: PanelData,
                      bridges_list, beta: float) -> dict:
    """Reduced scalar functionals of the built-in model samplers.

    Returns G1, G2, E1, E2 for all built-ins, plus E3, v, D for ou_level
    and the weight evaluator F (a function of beta) for t_diffusion.
    """
    model = get_model(model_id)
    a_vec = np.array([np.atleast_1d(e.a)[0] for e in effects_list])
    if len(a_vec) != panel.n_units:
        raise ValueError("one Effects per unit required")
    n_steps = len(bridges_list[0][0].values) - 1
    statics = PanelStatics.build(model, panel, n_steps)
    red = BridgeReductions.from_bridges(statics, bridges_list)
    beta = float(beta)
    eta = beta ** -2

    if model.name == "ou_speed":
        return {
            "G1": statics.G1,
            "G2": 0.5 * float(a_vec @ statics.dx2),
            "E1": 0.5 * float(a_vec ** 2 @ statics.L2),
            "E2": -float(a_vec ** 2 @ red.P_Yl),
            "n_dot": statics.n_dot,
        }
    if model.name == "t_diffusion":
        T_span = statics.T_span

        def F(beta_val: float) -> float:
            T_units = red.tanh_T(statics, beta_val)
            return -0.5 * float(np.sum(
                (a_vec ** 2 / beta_val ** 2 + 0.75 * beta_val ** 2 + 2.0 * a_vec)
                * T_units
                - (a_vec + beta_val ** 2 / 2.0) * T_span))

        return {
            "G1": statics.G1,
            "G2": 0.5 * float(a_vec @ statics.logratio),
            "F": F,
            "n_dot": statics.n_dot,
        }
    if model.name == "ou_level":
        al = float(np.atleast_1d(np.asarray(alpha, dtype=float))[0])
        L2_tot = float(statics.L2.sum())
        P_Y2_tot = float(red.P_Y2.sum())
        P_Yl_tot = float(red.P_Yl.sum())
        return {
            "G1": statics.G1,
            "G2": float(np.sum(0.5 * al * statics.dx2 - a_vec * statics.dx)),
            "E1": 0.5 * float(a_vec ** 2 @ statics.T_span) + 0.5 * al ** 2 * L2_tot,
            "E2": al * float(a_vec @ red.P_Y) - al ** 2 * P_Yl_tot,
            "E3": -al * float(a_vec @ statics.L1),
            "v": (eta * 0.5 * float(-statics.dx2.sum())
                  + 0.5 * float(statics.T_span.sum())
                  + float(a_vec @ red.P_Y) / beta
                  + eta * float(a_vec @ statics.L1)),
            "D": P_Y2_tot + 2.0 * P_Yl_tot / beta + eta * L2_tot,
            "n_dot": statics.n_dot,
        }
    raise ValueError(f"model_functionals supports the built-in models, "
                     f"not {model_id!r}")
