import numpy as np

from sdemix.bridge import _draw_normals, _euler_paths, _find_mu
from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import (GibbsLayout, RngBundle, _a_matrix, _panel_col_fns,
                          gibbs_init)
from sdemix.model import get_model
from sdemix.samplers import PriorSpec

model = get_model("ou_speed")
panel = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0}, 100, 100, 1.0,
                       seed=42)
priors = PriorSpec(beta_shape=1.0, beta_rate=0.5, effect_shape=1.0,
                   effect_rate=2.0)
cfg = RunConfig(iterations=10, burn_in=2, bridge_steps=50)
rng = RngBundle.coerce(11, panel)
layout = GibbsLayout.build(model, panel, 50)
st = layout.statics
state = gibbs_init(model, panel, priors, cfg, rng, layout=layout,
                   route="ou_speed")
a = _a_matrix(state.effects)[:, 0]

drift_fn, sigma_fn = _panel_col_fns(model, state.alpha, state.beta,
                                    _a_matrix(state.effects), st.unit_index)

K, n = layout.n_intervals, layout.n_steps
x1, x2, delta = layout.x1, layout.x2, st.delta_flat
active = np.arange(K)
gens = list(rng.bridges)
for attempt in range(2000):
    Z = _draw_normals(gens, active, (2, n))
    Y = _euler_paths(drift_fn, sigma_fn, active, x1[active], delta[active],
                     Z[:, 0, :])
    W = _euler_paths(drift_fn, sigma_fn, active, x2[active], delta[active],
                     Z[:, 1, :])
    D = Y - W[:, ::-1]
    found, mu = _find_mu(D)
    found &= np.isfinite(D).all(axis=1)
    active = active[~found]
    if active.size == 0:
        break
print("pending after 2000:", active)
for k in active[:6]:
    i = st.unit_index[k]
    print(f"col {k}: unit {i} a={a[i]:.3f} x1={x1[k]:.4f} x2={x2[k]:.4f} "
          f"stat sd={state.beta / np.sqrt(2 * a[i]):.4f} "
          f"collapse steps={1 / (a[i] * delta[k]):.1f}")
