"""Pin the exact grid-check constructions for test_gibbs.py."""
import numpy as np

from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import (GibbsLayout, RngBundle, _refresh_bridges,
                          _sweep_ou_speed, _sweep_t_diffusion, gibbs_init)
from sdemix.likelihood import BridgeReductions
from sdemix.model import get_model
from sdemix.samplers import PriorSpec


def norm(lg, grid):
    lg = lg - lg.max()
    w = np.exp(lg)
    return w / np.trapezoid(w, grid)


def moments(d, grid):
    m = np.trapezoid(grid * d, grid)
    sd = np.sqrt(np.trapezoid((grid - m) ** 2 * d, grid))
    return m, sd


# --- ou_speed, steps=120, 2 sweeps ------------------------------------------
for steps, sweeps, rng_seed in ((120, 2, 3), (120, 3, 3), (150, 2, 11)):
    model = get_model("ou_speed")
    panel = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0}, 3, 4, 1.0,
                           seed=5)
    priors = PriorSpec(beta_shape=1.0, beta_rate=0.5,
                       effect_shape=1.0, effect_rate=2.0)
    cfg = RunConfig(iterations=5, burn_in=0, bridge_steps=steps)
    rng = RngBundle.coerce(rng_seed, panel)
    layout = GibbsLayout.build(model, panel, steps)
    state = gibbs_init(model, panel, priors, cfg, rng, layout=layout,
                       route="ou_speed")
    for _ in range(sweeps):
        state = _sweep_ou_speed(state, model, panel, priors, cfg, rng,
                                layout=layout)
    beta_c = state.beta
    a_c = np.array([e.a[0] for e in state.effects])
    bridges, _, ystar = _refresh_bridges(layout, state.alpha, beta_c,
                                         state.effects, rng, False)
    st = layout.statics
    red = BridgeReductions.build(st, ystar)
    X = st.ell_mat + beta_c * ystar
    delta = st.delta_flat

    def euler(beta, a_vec):
        a_row = a_vec[st.unit_index]
        Xb = st.ell_mat + beta * ystar
        incr = Xb[:, 1:] - Xb[:, :-1] + a_row[:, None] * Xb[:, :-1] * delta[:, None]
        out = float(np.sum(-np.log(beta) - 0.5 * incr ** 2 / (beta ** 2 * delta[:, None])))
        out += X.shape[0] * (X.shape[1] - 2) * np.log(beta)
        return out

    G2 = 0.5 * float(a_c @ st.dx2)
    E1 = 0.5 * float(a_c ** 2 @ st.L2)
    E2 = -float(a_c ** 2 @ red.P_Yl)
    shape = 0.5 * (st.n_dot - st.n_units) + priors.beta_shape
    rate_full = priors.beta_rate + st.G1 + G2 + E1
    eta_c = beta_c ** -2
    etas = np.linspace(0.35, 3.0, 241) * eta_c
    lg_i = (shape - 1.0) * np.log(etas) - etas * rate_full + E2 * np.sqrt(etas)
    lg_b = np.array([euler(e ** -0.5, a_c)
                     + (priors.beta_shape - 1.0) * np.log(e)
                     - priors.beta_rate * e for e in etas])
    d_i, d_b = norm(lg_i, etas), norm(lg_b, etas)
    m_i, sd_i = moments(d_i, etas)
    m_b, _ = moments(d_b, etas)
    sup = np.max(np.abs(d_i - d_b)) / d_b.max()
    print(f"ou_speed steps={steps} sweeps={sweeps} rng={rng_seed}: beta={beta_c:.3f} "
          f"a={a_c.round(2)}")
    print(f"  eta: sup-rel {sup:.4f}  mean gap/sd {(abs(m_i-m_b)/sd_i):.4f}")

    B = red.P_Y2 + 2.0 / beta_c * red.P_Yl + eta_c * st.L2
    t_units = eta_c * (-0.5 * st.dx2) + 0.5 * st.T_span
    mu0, prec0 = (t_units[0] - state.gamma1) / B[0], B[0]
    a_grid = np.linspace(1e-3, 4.0, 241)
    lg_ia = -0.5 * prec0 * (a_grid - mu0) ** 2
    lg_ba = np.array([euler(beta_c, np.array([a, a_c[1], a_c[2]]))
                      - state.gamma1 * a for a in a_grid])
    da_i, da_b = norm(lg_ia, a_grid), norm(lg_ba, a_grid)
    ma_i, sda_i = moments(da_i, a_grid)
    ma_b, _ = moments(da_b, a_grid)
    supa = np.max(np.abs(da_i - da_b)) / da_b.max()
    print(f"  a:   sup-rel {supa:.4f}  mean gap/sd {(abs(ma_i-ma_b)/sda_i):.4f}")

# --- t_diffusion, refine=8 + WZ ---------------------------------------------
for steps, sweeps, rng_seed in ((40, 3, 3), (40, 5, 3), (60, 3, 7)):
    model = get_model("t_diffusion")
    panel = synth_generate("t_diffusion", {"beta": 0.3, "gamma": 1.0}, 3, 4, 0.5,
                           seed=7)
    priors = PriorSpec(beta_shape=1.0, beta_rate=5.0,
                       effect_shape=1.0, effect_rate=0.75)
    cfg = RunConfig(iterations=5, burn_in=0, bridge_steps=steps)
    rng = RngBundle.coerce(rng_seed, panel)
    layout = GibbsLayout.build(model, panel, steps)
    state = gibbs_init(model, panel, priors, cfg, rng, layout=layout,
                       route="t_diffusion")
    for _ in range(sweeps):
        state = _sweep_t_diffusion(state, model, panel, priors, cfg, rng,
                                   layout=layout)
    beta_c = state.beta
    a_c = np.array([float(e.a[0]) for e in state.effects])
    gam_c = state.gamma1
    bridges, _, ystar = _refresh_bridges(layout, state.alpha, beta_c,
                                         state.effects, rng, False)
    st = layout.statics
    red = BridgeReductions.build(st, ystar)
    delta = st.delta_flat
    k = 8

    def euler_t(beta, a_vec):
        u = st.ell_mat + beta * ystar
        m = u.shape[1]
        s_new = np.arange((m - 1) * k + 1, dtype=float) / k
        u = np.array([np.interp(s_new, np.arange(m, dtype=float), row)
                      for row in u])
        X = np.sinh(u)
        a_row = a_vec[st.unit_index]
        tot = 0.0
        for r in range(X.shape[0]):
            x = X[r]
            d = delta[r] / k
            mean = x[:-1] - a_row[r] * x[:-1] * d
            var = beta ** 2 * (1.0 + x[:-1] ** 2) * d
            tot += float(np.sum(-0.5 * np.log(2 * np.pi * var)
                                - (x[1:] - mean) ** 2 / (2 * var)))
            tot += float(np.sum(np.log(beta * np.sqrt(1.0 + x[1:-1] ** 2))))
        return tot

    G2 = 0.5 * float(a_c @ st.logratio)
    shape = 0.5 * (st.n_dot - st.n_units) + priors.beta_shape
    rate_full = priors.beta_rate + st.G1 + G2

    def F_full(b):
        T = red.tanh_T(st, b)
        return -0.5 * float(np.sum(
            (a_c ** 2 / b ** 2 + 0.75 * b ** 2 + 2.0 * a_c) * T
            - (a_c + b ** 2 / 2.0) * st.T_span))

    def wz(b):
        T = red.tanh_T(st, b)
        return -0.5 * float(np.sum((a_c + b ** 2 / 2.0) * (st.T_span - T)))

    eta_c = beta_c ** -2
    etas = np.linspace(0.4, 3.2, 121) * eta_c
    lg_i = np.array([(shape - 1.0) * np.log(e) - rate_full * e
                     + F_full(e ** -0.5) + wz(e ** -0.5) for e in etas])
    lg_b = np.array([euler_t(e ** -0.5, a_c) - priors.beta_rate * e
                     for e in etas])
    d_i, d_b = norm(lg_i, etas), norm(lg_b, etas)
    m_i, sd_i = moments(d_i, etas)
    m_b, _ = moments(d_b, etas)
    sup = np.max(np.abs(d_i - d_b)) / d_b.max()
    print(f"t_diff steps={steps} sweeps={sweeps} rng={rng_seed}: beta={beta_c:.3f} "
          f"a={a_c.round(2)}")
    print(f"  eta: sup-rel {sup:.4f}  mean gap/sd {(abs(m_i-m_b)/sd_i):.4f}")

    T_units = red.tanh_T(st, beta_c)
    B0 = eta_c * T_units[0]
    t0 = eta_c * (-0.5 * st.logratio[0]) + 0.5 * st.T_span[0] - T_units[0]
    a_grid = np.linspace(1e-3, 6.0, 161)
    wz_lin = -0.5 * (st.T_span[0] - T_units[0])
    lg_ia = -0.5 * B0 * a_grid ** 2 + (t0 - gam_c + wz_lin) * a_grid
    lg_ba = np.array([euler_t(beta_c, np.array([a, a_c[1], a_c[2]]))
                      - gam_c * a for a in a_grid])
    da_i, da_b = norm(lg_ia, a_grid), norm(lg_ba, a_grid)
    ma_i, sda_i = moments(da_i, a_grid)
    ma_b, _ = moments(da_b, a_grid)
    supa = np.max(np.abs(da_i - da_b)) / da_b.max()
    print(f"  a:   sup-rel {supa:.4f}  mean gap/sd {(abs(ma_i-ma_b)/sda_i):.4f}")
