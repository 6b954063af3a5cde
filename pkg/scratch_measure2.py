"""Re-measure expfam/general runtimes and agreement after the shift."""
import time

import numpy as np

from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import run_chain
from sdemix.model import get_model
from sdemix.samplers import PriorSpec

T0 = time.time()


def stamp(tag):
    print(f"[{time.time() - T0:7.1f}s] {tag}")


def batch_sem(col, n_batch=10):
    m = len(col) // n_batch
    means = col[:n_batch * m].reshape(n_batch, m).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batch))


# t_diffusion builtin vs expfam, both mh, after generic shift
panel_t = synth_generate("t_diffusion", {"beta": 0.15, "gamma": 1.0},
                         n_units=8, n_obs=11, dt=1.0, seed=21)
priors_t = PriorSpec(beta_shape=1.0, beta_rate=5.0,
                     effect_shape=1.0, effect_rate=0.75)
out = {}
for sampler, iters, burn in (("auto", 500, 100), ("expfam", 500, 100)):
    cfg = RunConfig(iterations=iters, burn_in=burn, bridge_steps=30,
                    sampler=sampler)
    t1 = time.time()
    tr = run_chain("t_diffusion", panel_t, priors_t, cfg, rng=5)
    s = tr.summary()
    b = tr.params[burn:, 0]
    out[sampler] = (s["beta"]["mean"], batch_sem(b))
    stamp(f"t_diff {sampler}: {time.time()-t1:.1f}s beta {s['beta']['mean']:.5f} "
          f"sd {s['beta']['sd']:.5f} bsem {batch_sem(b):.5f} "
          f"gamma {s['gamma']['mean']:.4f} acc={tr.diagnostics.get('eta_accept_rate')}")
gap = abs(out["auto"][0] - out["expfam"][0])
tol = np.hypot(out["auto"][1], out["expfam"][1])
stamp(f"t_diff builtin-vs-expfam gap {gap:.5f} combined bsem {tol:.5f} ratio {gap/tol:.2f}")

# strategy agreement mh vs approx (builtin t_diffusion)
out = {}
for strat, iters in (("mh", 600), ("approx", 400)):
    cfg = RunConfig(iterations=iters, burn_in=100, bridge_steps=30,
                    eta_strategy=strat, approx_K=500)
    t1 = time.time()
    tr = run_chain("t_diffusion", panel_t, priors_t, cfg, rng=5)
    b = tr.params[100:, 0]
    out[strat] = (float(b.mean()), batch_sem(b))
    stamp(f"t_diff strat={strat}: {time.time()-t1:.1f}s beta {b.mean():.5f} "
          f"bsem {batch_sem(b):.5f}")
gap = abs(out["mh"][0] - out["approx"][0])
tol = np.hypot(out["mh"][1], out["approx"][1])
stamp(f"t_diff mh-vs-approx gap {gap:.5f} combined bsem {tol:.5f} ratio {gap/tol:.2f}")

# ou_speed three samplers, smaller panel for general
panel_s = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0},
                         n_units=6, n_obs=5, dt=0.5, seed=13)
priors_s = PriorSpec(beta_shape=1.0, beta_rate=0.5,
                     effect_shape=1.0, effect_rate=2.0)
out = {}
for sampler, iters, burn, extra in (
        ("auto", 600, 100, {}),
        ("expfam", 600, 100, {"eta_strategy": "mh"}),
        ("general", 2400, 800, {})):
    cfg = RunConfig(iterations=iters, burn_in=burn, bridge_steps=25,
                    sampler=sampler, **extra)
    t1 = time.time()
    tr = run_chain("ou_speed", panel_s, priors_s, cfg, rng=7)
    b = tr.params[burn:, 0]
    g = tr.params[burn:, 1]
    out[sampler] = (float(b.mean()), batch_sem(b))
    stamp(f"ou_speed {sampler}: {time.time()-t1:.1f}s beta {b.mean():.5f} "
          f"bsem {batch_sem(b):.5f} gamma {g.mean():.4f} bsem_g {batch_sem(g):.5f}")
for pair in (("auto", "expfam"), ("auto", "general")):
    gap = abs(out[pair[0]][0] - out[pair[1]][0])
    tol = np.hypot(out[pair[0]][1], out[pair[1]][1])
    stamp(f"ou_speed {pair[0]}-vs-{pair[1]} gap {gap:.5f} bsem {tol:.5f} ratio {gap/tol:.2f}")
stamp("done")
