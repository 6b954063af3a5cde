import cProfile
import pstats

from sdemix.config import RunConfig
from sdemix.data import synth_generate
from sdemix.gibbs import (GibbsLayout, RngBundle, _sweep_ou_speed, gibbs_init)
from sdemix.model import get_model
from sdemix.samplers import PriorSpec

model = get_model("ou_speed")
panel = synth_generate("ou_speed", {"beta": 1.0, "gamma": 1.0}, 30, 60, 1.0,
                       seed=7)
priors = PriorSpec(beta_shape=1.0, beta_rate=0.5, effect_shape=1.0,
                   effect_rate=2.0)
cfg = RunConfig(iterations=10, burn_in=2, bridge_steps=50)
rng = RngBundle.coerce(11, panel)
layout = GibbsLayout.build(model, panel, cfg.bridge_steps)
state = gibbs_init(model, panel, priors, cfg, rng, layout=layout,
                   route="ou_speed")


def run():
    s = state
    for _ in range(10):
        s = _sweep_ou_speed(s, model, panel, priors, cfg, rng, layout=layout)


cProfile.run("run()", "/tmp/prof.out")
p = pstats.Stats("/tmp/prof.out")
p.sort_stats("cumulative").print_stats(22)
