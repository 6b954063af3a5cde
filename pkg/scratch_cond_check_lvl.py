"""Grid check of the ou_level alpha and eta conditionals vs Euler joint."""
import numpy as np

from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import (GibbsLayout, RngBundle, gibbs_init, neuronal_sweep,
                          _refresh_bridges)
from sdemix.likelihood import BridgeReductions
from sdemix.model import get_model
from sdemix.samplers import PriorSpec

model = get_model("ou_level")
panel = synth_generate("ou_level",
                       {"alpha": 2.0, "beta": 0.4, "xi": 1.0, "sigma": 0.25},
                       n_units=3, n_obs=5, dt=0.4, seed=9)
priors = PriorSpec(exp_rates=(5.0, 0.02, 400.0, 0.35))
config = RunConfig(iterations=1, burn_in=0, bridge_steps=40)
rng = RngBundle.coerce(4, panel)

layout = GibbsLayout.build(model, panel, config.bridge_steps)
state = gibbs_init(model, panel, priors, config, rng, layout=layout,
                   route="ou_level")
for _ in range(5):
    state = neuronal_sweep(state, panel, priors, config, rng, layout=layout)

beta = state.beta
eta_c = beta ** -2
alpha_c = float(np.atleast_1d(state.alpha)[0])
a_cur = np.array([float(e.a[0]) for e in state.effects])
xi_c, gam_c = float(state.gamma1), float(state.gamma2)
st = layout.statics
lam1, lam2, lam3, lam4 = priors.exp_rates

bridges, geoms, ystar = _refresh_bridges(layout, state.alpha, beta,
                                         state.effects, rng, False)
red = BridgeReductions.build(st, ystar)

X_all = st.ell_mat + beta * ystar
flat = [bp for unit in bridges for bp in unit]
for r, bp in enumerate(flat):
    assert np.allclose(X_all[r], bp.values, atol=1e-10), r
print("reconstruction ok; state:",
      f"alpha={alpha_c:.3f} beta={beta:.3f} a={a_cur.round(3)}")

delta = st.delta_flat


def euler_joint(beta_v, alpha_v, a_vec):
    X = st.ell_mat + beta_v * ystar
    a_row = a_vec[st.unit_index]
    tot = 0.0
    for r in range(X.shape[0]):
        x = X[r]
        d = delta[r]
        mean = x[:-1] + (a_row[r] - alpha_v * x[:-1]) * d
        var = beta_v ** 2 * d
        tot += float(np.sum(-0.5 * np.log(2 * np.pi * var)
                            - (x[1:] - mean) ** 2 / (2 * var)))
        tot += (len(x) - 2) * np.log(beta_v)
    return tot


# --- alpha conditional ------------------------------------------------------
v = (eta_c * 0.5 * float(-st.dx2.sum()) + 0.5 * float(st.T_span.sum())
     + float(a_cur @ red.P_Y) / beta + eta_c * float(a_cur @ st.L1))
D = float(red.P_Y2.sum()) + 2.0 / beta * float(red.P_Yl.sum()) \
    + eta_c * float(st.L2.sum())

al_grid = np.linspace(1e-3, 8.0, 400)
log_impl = -0.5 * D * al_grid ** 2 + (v - lam1) * al_grid
log_bf = np.array([euler_joint(beta, al, a_cur) - lam1 * al for al in al_grid])


def norm(lg, grid):
    lg = lg - lg.max()
    w = np.exp(lg)
    return w / np.trapezoid(w, grid)


d_i, d_b = norm(log_impl, al_grid), norm(log_bf, al_grid)
m_i = np.trapezoid(al_grid * d_i, al_grid)
m_b = np.trapezoid(al_grid * d_b, al_grid)
sd_i = np.sqrt(np.trapezoid((al_grid - m_i) ** 2 * d_i, al_grid))
print(f"alpha cond: sup {np.max(np.abs(d_i - d_b)):.4g} scale {d_b.max():.4g} "
      f"rel {np.max(np.abs(d_i - d_b)) / d_b.max():.4f}  "
      f"mean impl={m_i:.4f} bf={m_b:.4f} sd={sd_i:.4f}")

# --- eta conditional --------------------------------------------------------
G2 = float(np.sum(0.5 * alpha_c * st.dx2 - a_cur * st.dx))
E1 = 0.5 * float(a_cur ** 2 @ st.T_span) + 0.5 * alpha_c ** 2 * float(st.L2.sum())
E2 = alpha_c * float(a_cur @ red.P_Y) - alpha_c ** 2 * float(red.P_Yl.sum())
E3 = -alpha_c * float(a_cur @ st.L1)
shape = 0.5 * (st.n_dot - st.n_units) + 1.0
rate_full = lam2 + st.G1 + G2 + E1 + E3

etas = np.linspace(0.3, 3.0, 151) * eta_c
lg_impl = (shape - 1.0) * np.log(etas) - rate_full * etas + E2 * np.sqrt(etas)
lg_bf = np.array([euler_joint(e ** -0.5, alpha_c, a_cur) - lam2 * e
                  for e in etas])
d_i, d_b = norm(lg_impl, etas), norm(lg_bf, etas)
m_i = np.trapezoid(etas * d_i, etas)
m_b = np.trapezoid(etas * d_b, etas)
sd_i = np.sqrt(np.trapezoid((etas - m_i) ** 2 * d_i, etas))
print(f"eta cond:   sup {np.max(np.abs(d_i - d_b)):.4g} scale {d_b.max():.4g} "
      f"rel {np.max(np.abs(d_i - d_b)) / d_b.max():.4f}  "
      f"mean impl={m_i:.4f} bf={m_b:.4f} sd={sd_i:.4f}")
