"""Measure every empirical quantity needed to set test tolerances."""
import time

import numpy as np

from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import RngBundle, resolve_route, run_chain
from sdemix.model import get_model
from sdemix.samplers import PriorSpec

T0 = time.time()


def stamp(tag):
    print(f"[{time.time() - T0:7.1f}s] {tag}")


# --- 4. t_diffusion strategy agreement (mh vs approx) -----------------------
panel_t = synth_generate("t_diffusion", {"beta": 0.15, "gamma": 1.0},
                         n_units=8, n_obs=11, dt=1.0, seed=21)
priors_t = PriorSpec(beta_shape=1.0, beta_rate=5.0,
                     effect_shape=1.0, effect_rate=0.75)
res = {}
for strat, K in (("mh", 1000), ("approx", 2000)):
    cfg = RunConfig(iterations=400, burn_in=100, bridge_steps=30,
                    eta_strategy=strat, approx_K=K)
    tr = run_chain("t_diffusion", panel_t, priors_t, cfg, rng=5)
    s = tr.summary()
    res[strat] = s
    acc = tr.diagnostics.get("eta_accept_rate")
    stamp(f"t_diff {strat}: beta {s['beta']['mean']:.5f} sd {s['beta']['sd']:.5f} "
          f"gamma {s['gamma']['mean']:.4f} sd {s['gamma']['sd']:.4f} acc={acc}")
db = abs(res["mh"]["beta"]["mean"] - res["approx"]["beta"]["mean"])
sem = max(res["mh"]["beta"]["sd"], res["approx"]["beta"]["sd"]) / np.sqrt(300)
stamp(f"t_diff strategy gap beta: {db:.5f}  naive sem {sem:.5f}  ratio {db/sem:.2f}")

# --- 6. t_diffusion builtin vs expfam ---------------------------------------
cfg_bi = RunConfig(iterations=400, burn_in=100, bridge_steps=30)
t1 = time.time()
tr_bi = run_chain("t_diffusion", panel_t, priors_t, cfg_bi, rng=5)
stamp(f"t_diff builtin: {time.time()-t1:.1f}s "
      f"beta {tr_bi.summary()['beta']['mean']:.5f} sd {tr_bi.summary()['beta']['sd']:.5f}")
cfg_ef = RunConfig(iterations=400, burn_in=100, bridge_steps=30, sampler="expfam")
t1 = time.time()
try:
    tr_ef = run_chain("t_diffusion", panel_t, priors_t, cfg_ef, rng=5)
    stamp(f"t_diff expfam: {time.time()-t1:.1f}s "
          f"beta {tr_ef.summary()['beta']['mean']:.5f} sd {tr_ef.summary()['beta']['sd']:.5f} "
          f"names {tr_ef.param_names}")
except Exception as exc:
    stamp(f"t_diff expfam FAILED: {exc!r}")

# --- 5. cross-sampler ou_speed ----------------------------------------------
panel_s = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0},
                         n_units=8, n_obs=6, dt=0.5, seed=13)
priors_s = PriorSpec(beta_shape=1.0, beta_rate=0.5,
                     effect_shape=1.0, effect_rate=2.0)
for sampler, iters, burn in (("auto", 500, 100), ("expfam", 500, 100),
                             ("general", 2000, 600)):
    cfg = RunConfig(iterations=iters, burn_in=burn, bridge_steps=30,
                    sampler=sampler)
    t1 = time.time()
    tr = run_chain("ou_speed", panel_s, priors_s, cfg, rng=7)
    s = tr.summary()
    stamp(f"ou_speed {sampler}: {time.time()-t1:.1f}s "
          f"beta {s['beta']['mean']:.5f} sd {s['beta']['sd']:.5f} "
          f"gamma {s['gamma']['mean']:.4f} names {tr.param_names}")

# --- 7. exact vs approx ou_speed --------------------------------------------
panel_e = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0},
                         n_units=6, n_obs=5, dt=0.5, seed=17)
for exact in (False, True):
    cfg = RunConfig(iterations=400, burn_in=100, bridge_steps=30,
                    exact_bridges=exact)
    t1 = time.time()
    tr = run_chain("ou_speed", panel_e, priors_s, cfg, rng=9)
    s = tr.summary()
    stamp(f"ou_speed exact={exact}: {time.time()-t1:.1f}s "
          f"beta {s['beta']['mean']:.5f} sd {s['beta']['sd']:.5f}")

# --- 8a. ou_speed gamma conjugate -------------------------------------------
panel_g = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0},
                         n_units=3, n_obs=4, dt=1.0, seed=3)
cfg = RunConfig(iterations=400, burn_in=0, bridge_steps=25, save_effects=True)
tr = run_chain("ou_speed", panel_g, priors_s, cfg, rng=11)
gam = tr.params[:, list(tr.param_names).index("gamma")]
a_sum = tr.effects.sum(axis=1)
z = gam * (priors_s.effect_rate + a_sum)
stamp(f"gamma conjugate: mean {z.mean():.4f} (want 4) sd {z.std():.3f} "
      f"sem {z.std()/20:.4f}")

# --- 8b. ou_level xi / gamma2 standardization --------------------------------
panel_l = synth_generate("ou_level",
                         {"alpha": 2.0, "beta": 0.4, "xi": 1.0, "sigma": 0.25},
                         n_units=6, n_obs=4, dt=0.4, seed=19)
priors_l = PriorSpec(exp_rates=(5.0, 0.02, 1e-9, 0.35))
cfg = RunConfig(iterations=400, burn_in=0, bridge_steps=25, save_effects=True)
tr = run_chain("ou_level", panel_l, priors_l, cfg, rng=23)
names = list(tr.param_names)
xi = tr.params[:, names.index("xi")]
sig = tr.params[:, names.index("sigma")]
gam_t = sig ** -2.0
N = 6
a_bar = tr.effects.mean(axis=1)
lam3 = priors_l.exp_rates[2]
z = np.array([(xi[t] - a_bar[t] + lam3 / (gam_t[t - 1] * N))
              * np.sqrt(gam_t[t - 1] * N) for t in range(1, 400)])
stamp(f"xi standardized: mean {z.mean():.4f} E[z^2] {np.mean(z**2):.4f} "
      f"(want 0 / 1; sems {1/np.sqrt(399):.4f} {np.sqrt(2/399):.4f})")
lam4 = priors_l.exp_rates[3]
u = gam_t * (lam4 + 0.5 * ((tr.effects - xi[:, None]) ** 2).sum(axis=1))
stamp(f"gamma2 conjugate: mean {u.mean():.4f} (want {N/2+1}) sd {u.std():.3f}")

# --- 9. route checks ---------------------------------------------------------
import tests.support as sup
try:
    resolve_route(sup.zero_drift_model(), PriorSpec(), RunConfig(sampler="expfam"))
except ValueError as exc:
    stamp(f"zero_drift expfam route raises: {exc}")
r = resolve_route(sup.zero_drift_model(), PriorSpec(), RunConfig())
stamp(f"zero_drift auto route: {r}")
r = resolve_route(sup.atan_model(), PriorSpec(), RunConfig())
stamp(f"atan auto route: {r}")
stamp("done")
