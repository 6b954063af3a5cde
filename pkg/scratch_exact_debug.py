import numpy as np

from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import (GibbsLayout, RngBundle, _refresh_bridges, gibbs_init,
                          _panel_col_fns, _a_matrix)
from sdemix.bridge import _geom_var_batch, stationary_draw
from sdemix.model import get_model
from sdemix.samplers import PriorSpec

model = get_model("ou_speed")
panel = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0}, 12, 40, 1.0, seed=7)
priors = PriorSpec(beta_shape=1.0, beta_rate=0.5, effect_shape=1.0, effect_rate=2.0)
cfg = RunConfig(iterations=10, burn_in=2, bridge_steps=20, exact_bridges=True)
rng = RngBundle.coerce(11, panel)
layout = GibbsLayout.build(model, panel, cfg.bridge_steps)

state = gibbs_init(model, panel, priors, cfg, rng, layout=layout, route="ou_speed")
a = _a_matrix(state.effects)[:, 0]
print("init ok: beta", state.beta, "gamma1", state.gamma1)
print("a range", a.min(), a.max())
print("geoms drawn:", max(g.s for unit in state.geoms for g in unit))

# now replicate the first sweep's refresh but catch the failure and inspect
st = layout.statics
a_mat = _a_matrix(state.effects)
drift_fn, sigma_fn = _panel_col_fns(model, state.alpha, state.beta, a_mat,
                                    st.unit_index)
from sdemix.bridge import _bridge_crossing_batch
values, mu, attempts = _bridge_crossing_batch(
    drift_fn, sigma_fn, layout.x1, layout.x2, st.delta_flat, layout.n_steps,
    list(rng.bridges))
print("crossing ok, attempts max", attempts.max())


def start_fn(col, gen):
    return stationary_draw(model, state.alpha, state.beta,
                           state.effects[st.unit_index[col]], gen)


try:
    s = _geom_var_batch(drift_fn, sigma_fn, start_fn, values, st.delta_flat,
                        layout.n_steps, list(rng.bridges), max_draws=2000)
    print("geom ok", s.max())
except RuntimeError as e:
    print("geom FAILED:", e)
    # find which columns are stuck: emulate with per-column loop
    stuck = []
    for k in range(layout.n_intervals):
        g = np.random.default_rng(123 + k)
        ok = False
        for t in range(200):
            x0 = start_fn(k, g)
            Z = g.standard_normal(layout.n_steps)
            x = x0
            path = [x0]
            for j in range(layout.n_steps):
                x = x + drift_fn(np.array([k]), np.array([x]))[0] * st.delta_flat[k] \
                    + sigma_fn(np.array([k]), np.array([x]))[0] * np.sqrt(st.delta_flat[k]) * Z[j]
                path.append(x)
            G = np.array(path) - values[k]
            if ((G[:-1] * G[1:]) <= 0).any():
                ok = True
                break
        if not ok:
            stuck.append(k)
    print("stuck columns:", stuck[:10], "count", len(stuck))
    for k in stuck[:3]:
        i = st.unit_index[k]
        print(f"col {k}: unit {i} a={a[i]:.4f} x1={layout.x1[k]:.3f} "
              f"x2={layout.x2[k]:.3f} bridge range [{values[k].min():.3f}, "
              f"{values[k].max():.3f}] stat sd={state.beta/np.sqrt(2*a[i]):.3f}")
