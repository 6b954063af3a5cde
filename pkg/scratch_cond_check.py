"""Brute-force grid check of the ou_speed eta and a conditionals.

Builds a tiny panel, runs init plus a few sweeps, then compares the
implemented conditional densities against a direct evaluation of the
Euler joint density of (observations, frozen Y*) on a parameter grid.
"""
import numpy as np

from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import GibbsLayout, RngBundle, _sweep_ou_speed, gibbs_init
from sdemix.likelihood import BridgeReductions
from sdemix.model import get_model
from sdemix.samplers import PriorSpec

model = get_model("ou_speed")
panel = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0}, 3, 4, 1.0, seed=5)
priors = PriorSpec(beta_shape=1.0, beta_rate=0.5, effect_shape=1.0, effect_rate=2.0)
cfg = RunConfig(iterations=5, burn_in=0, bridge_steps=50)
rng = RngBundle.coerce(3, panel)
layout = GibbsLayout.build(model, panel, cfg.bridge_steps)
state = gibbs_init(model, panel, priors, cfg, rng, layout=layout, route="ou_speed")
for _ in range(3):
    state = _sweep_ou_speed(state, model, panel, priors, cfg, rng, layout=layout)

from sdemix.gibbs import _refresh_bridges

beta_cur = state.beta
a_cur = np.array([e.a[0] for e in state.effects])
print("state: beta=", beta_cur, "a=", a_cur)

# Refresh bridges at the current beta, exactly as the sweep entry does,
# so (values, ystar) are consistent at beta_cur.
bridges, _, _ = _refresh_bridges(layout, state.alpha, beta_cur, state.effects,
                                 rng, False)

# Frozen latents: per-interval ystar rows and the x-space interpolants.
ys_rows = []
ell_rows = []
deltas = []
for unit in bridges:
    for bp in unit:
        n = bp.n_grid
        ell = bp.x1 + (bp.x2 - bp.x1) * np.arange(n + 1) / n
        ys_rows.append(bp.ystar)
        ell_rows.append(ell)
        deltas.append(bp.delta)
        assert np.allclose(ell + beta_cur * bp.ystar, bp.values, atol=1e-10), (
            np.max(np.abs(ell + beta_cur * bp.ystar - bp.values)))
YS = np.array(ys_rows)
ELL = np.array(ell_rows)
DELTA = np.array(deltas)
unit_of = np.concatenate([[i] * len(unit) for i, unit in enumerate(bridges)])


def euler_joint(beta, a_vec):
    """Sum over intervals of the Euler path log density of X(beta) plus
    the log Jacobian of X = ell + beta * Y* at fixed Y*."""
    X = ELL + beta * YS
    out = 0.0
    for r in range(X.shape[0]):
        x = X[r]
        d = DELTA[r]
        a = a_vec[unit_of[r]]
        incr = x[1:] - x[:-1] + a * x[:-1] * d
        out += np.sum(-np.log(beta) - 0.5 * incr ** 2 / (beta ** 2 * d))
        out += (len(x) - 2) * np.log(beta)
    return out


# --- eta conditional ---
st = layout.statics
red = BridgeReductions.build(st, np.array([bp.ystar for u in bridges for bp in u]))
G2 = 0.5 * float(a_cur @ st.dx2)
E1 = 0.5 * float(a_cur ** 2 @ st.L2)
E2 = -float(a_cur ** 2 @ red.P_Yl)
shape = 0.5 * (st.n_dot - st.n_units) + priors.beta_shape
rate_full = priors.beta_rate + st.G1 + G2 + E1

etas = np.linspace(0.3, 4.0, 300)
log_mine = (shape - 1.0) * np.log(etas) - etas * rate_full + E2 * np.sqrt(etas)
log_brute = np.array([
    euler_joint(e ** -0.5, a_cur)
    + (priors.beta_shape - 1.0) * np.log(e) - priors.beta_rate * e
    for e in etas])

for name, lg in (("mine", log_mine), ("brute", log_brute)):
    w = np.exp(lg - lg.max())
    w /= np.trapezoid(w, etas)
    if name == "mine":
        w_mine = w
    else:
        w_brute = w
sup = np.max(np.abs(w_mine - w_brute)) / np.max(w_brute)
print(f"eta conditional sup-norm rel diff: {sup:.4e}")
print("  mine  mode:", etas[np.argmax(w_mine)], " brute mode:", etas[np.argmax(w_brute)])

# --- a conditional for unit 0 ---
red_B = red.P_Y2 + 2.0 / beta_cur * red.P_Yl + (beta_cur ** -2) * st.L2
t_units = (beta_cur ** -2) * (-0.5 * st.dx2) + 0.5 * st.T_span
mu0 = (t_units[0] - state.gamma1) / red_B[0]
prec0 = red_B[0]

a_grid = np.linspace(1e-3, 4.0, 400)
log_mine_a = -0.5 * prec0 * (a_grid - mu0) ** 2
log_brute_a = np.array([
    euler_joint(beta_cur, np.array([a, a_cur[1], a_cur[2]])) - state.gamma1 * a
    for a in a_grid])
wa_mine = np.exp(log_mine_a - log_mine_a.max())
wa_mine /= np.trapezoid(wa_mine, a_grid)
wa_brute = np.exp(log_brute_a - log_brute_a.max())
wa_brute /= np.trapezoid(wa_brute, a_grid)
sup_a = np.max(np.abs(wa_mine - wa_brute)) / np.max(wa_brute)
print(f"a conditional sup-norm rel diff: {sup_a:.4e}")
print("  mine  mode:", a_grid[np.argmax(wa_mine)], " brute mode:", a_grid[np.argmax(wa_brute)])
