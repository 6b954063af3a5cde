import time

import numpy as np

from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import run_chain
from sdemix.samplers import PriorSpec

t0 = time.time()

# 1. ou_speed built-in route
panel = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0}, 12, 40, 1.0, seed=7)
priors = PriorSpec(beta_shape=1.0, beta_rate=0.5, effect_shape=1.0, effect_rate=2.0)
cfg = RunConfig(iterations=30, burn_in=5, bridge_steps=20)
tr = run_chain("ou_speed", panel, priors, cfg, rng=11)
print("ou_speed:", tr.sampler, tr.param_names, tr.params.shape,
      tr.params[-5:].mean(axis=0), f"{time.time()-t0:.1f}s")

# 2. same, exact bridges
t1 = time.time()
cfg_e = RunConfig(iterations=10, burn_in=2, bridge_steps=20, exact_bridges=True)
tre = run_chain("ou_speed", panel, priors, cfg_e, rng=11)
print("ou_speed exact:", tre.params[-3:].mean(axis=0),
      {k: v for k, v in tre.diagnostics.items() if "bridge" in k},
      f"{time.time()-t1:.1f}s")

# 3. t_diffusion built-in route
t1 = time.time()
panel_t = synth_generate("t_diffusion", {"beta": 0.1, "gamma": 1.0}, 12, 40, 1.0, seed=9)
priors_t = PriorSpec(beta_shape=1.0, beta_rate=5.0, effect_shape=1.0, effect_rate=0.75)
tr_t = run_chain("t_diffusion", panel_t, priors_t, cfg, rng=13)
print("t_diffusion:", tr_t.sampler, tr_t.params[-5:].mean(axis=0),
      "eta_acc", tr_t.diagnostics.get("eta_accept_rate"), f"{time.time()-t1:.1f}s")

# 4. ou_level neuronal route
t1 = time.time()
panel_l = synth_generate("ou_level", {"alpha": 20.0, "beta": 0.015, "xi": 0.25,
                                      "sigma": 0.05}, 10, 60, 0.01, seed=21)
priors_l = PriorSpec(exp_rates=(5.0, 0.02, 400.0, 0.35))
tr_l = run_chain("ou_level", panel_l, priors_l, cfg, rng=17)
print("ou_level:", tr_l.sampler, tr_l.param_names, tr_l.params[-5:].mean(axis=0),
      f"{time.time()-t1:.1f}s")

# 5. expfam route on ou_speed with exponential effects
t1 = time.time()
cfg_x = RunConfig(iterations=20, burn_in=5, bridge_steps=20, sampler="expfam")
tr_x = run_chain("ou_speed", panel, priors, cfg_x, rng=11)
print("expfam:", tr_x.sampler, tr_x.param_names, tr_x.params[-5:].mean(axis=0),
      f"{time.time()-t1:.1f}s")

# 6. general route on ou_speed
t1 = time.time()
cfg_g = RunConfig(iterations=25, burn_in=10, bridge_steps=20, sampler="general")
tr_g = run_chain("ou_speed", panel, priors, cfg_g, rng=11)
print("general:", tr_g.sampler, tr_g.param_names, tr_g.params[-5:].mean(axis=0),
      "theta_acc", tr_g.diagnostics["general_theta_accepts"] /
      tr_g.diagnostics["general_theta_proposals"], f"{time.time()-t1:.1f}s")

# 7. determinism
tr2 = run_chain("ou_speed", panel, priors, cfg, rng=11)
print("deterministic:", np.array_equal(tr.params, tr2.params))

# 8. save_effects
cfg_s = RunConfig(iterations=5, burn_in=1, bridge_steps=10, save_effects=True)
tr_s = run_chain("ou_speed", panel, priors, cfg_s, rng=3)
print("effects:", tr_s.effects.shape, tr_s.effect_names[:3])
print("total", f"{time.time()-t0:.1f}s")
