import numpy as np

from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import (GibbsLayout, RngBundle, _a_matrix, _sweep_ou_speed,
                          gibbs_init)
from sdemix.model import get_model
from sdemix.samplers import PriorSpec

model = get_model("ou_speed")
panel = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0}, 12, 40, 1.0, seed=7)
priors = PriorSpec(beta_shape=1.0, beta_rate=0.5, effect_shape=1.0, effect_rate=2.0)
cfg = RunConfig(iterations=10, burn_in=2, bridge_steps=20, exact_bridges=True)
rng = RngBundle.coerce(11, panel)
layout = GibbsLayout.build(model, panel, cfg.bridge_steps)
delta = layout.statics.delta_flat[0]

state = gibbs_init(model, panel, priors, cfg, rng, layout=layout, route="ou_speed")
for it in range(10):
    a = _a_matrix(state.effects)[:, 0]
    print(f"iter {state.iter}: beta={state.beta:.4f} g={state.gamma1:.4f} "
          f"a_max={a.max():.2f} a*delta_max={a.max()*delta:.3f}")
    try:
        state = _sweep_ou_speed(state, model, panel, priors, cfg, rng,
                                layout=layout)
    except RuntimeError as e:
        print("FAILED at iter", state.iter, ":", str(e)[:100])
        break
