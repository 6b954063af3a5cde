import numpy as np

from sdemix.bridge import _bridge_crossing_batch, stationary_draw
from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import (GibbsLayout, RngBundle, _a_matrix, _panel_col_fns,
                          _sweep_ou_speed, gibbs_init)
from sdemix.model import get_model
from sdemix.samplers import PriorSpec

model = get_model("ou_speed")
panel = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0}, 12, 40, 1.0, seed=7)
priors = PriorSpec(beta_shape=1.0, beta_rate=0.5, effect_shape=1.0, effect_rate=2.0)
cfg = RunConfig(iterations=10, burn_in=2, bridge_steps=20, exact_bridges=True)
rng = RngBundle.coerce(11, panel)
layout = GibbsLayout.build(model, panel, cfg.bridge_steps)
st = layout.statics

state = gibbs_init(model, panel, priors, cfg, rng, layout=layout, route="ou_speed")
state = _sweep_ou_speed(state, model, panel, priors, cfg, rng, layout=layout)

a = _a_matrix(state.effects)[:, 0]
print("after sweep1: beta", round(state.beta, 4), "a range", a.min(), a.max())

a_mat = _a_matrix(state.effects)
drift_fn, sigma_fn = _panel_col_fns(model, state.alpha, state.beta, a_mat,
                                    st.unit_index)
values, mu, attempts = _bridge_crossing_batch(
    drift_fn, sigma_fn, layout.x1, layout.x2, st.delta_flat, layout.n_steps,
    list(rng.bridges))
print("crossing ok; values abs max:", np.abs(values).max())
bad = np.abs(values).max(axis=1) > 10
print("rows with |values|>10:", bad.sum())

# empirical hit probability per column with a throwaway generator
g = np.random.default_rng(0)
pend = []
for k in range(layout.n_intervals):
    hitn = 0
    for t in range(300):
        x0 = stationary_draw(model, state.alpha, state.beta,
                             state.effects[st.unit_index[k]], g)
        x = np.array([x0])
        path = [x0]
        for j in range(layout.n_steps):
            x = x + drift_fn(np.array([k]), x) * st.delta_flat[k] \
                + sigma_fn(np.array([k]), x) * np.sqrt(st.delta_flat[k]) \
                * g.standard_normal(1)
            path.append(float(x[0]))
        G = np.array(path) - values[k]
        if ((G[:-1] * G[1:]) <= 0).any():
            hitn += 1
    if hitn == 0:
        pend.append(k)
print("columns with 0 hits in 300:", len(pend), pend[:8])
for k in pend[:4]:
    i = st.unit_index[k]
    print(f"col {k}: unit {i} a={a[i]:.4f} x1={layout.x1[k]:.3f} x2={layout.x2[k]:.3f}",
          f"bridge [{values[k].min():.3f},{values[k].max():.3f}]",
          f"stat sd={state.beta/np.sqrt(2*a[i]):.3f}")
