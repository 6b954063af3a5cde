"""Why does the t_diffusion eta MH step never accept on true paths?"""
import numpy as np

from scratch_truepath_t import (BETA, GAMMA, N, a_true, eta_logpdf_terms,
                                st, tanh_T)
from sdemix.samplers import sample_truncnorm_pos

g = np.random.default_rng(5)
eta = BETA ** -2
gam = GAMMA

for it in range(6):
    b = eta ** -0.5
    T_units = tanh_T(b)
    Bv = eta * T_units
    tv = eta * (-0.5 * st.logratio) + 0.5 * st.T_span - T_units
    a_vec = np.array([
        sample_truncnorm_pos((tv[i] - gam) / Bv[i], 1.0 / Bv[i], g)
        for i in range(N)])
    shape, rate_full, F_full = eta_logpdf_terms(a_vec)
    prop = g.gamma(shape, 1.0 / rate_full)
    fc = F_full(eta ** -0.5)
    fp = F_full(prop ** -0.5)
    print(f"it={it} cur={eta:8.3f} prop={prop:8.3f} "
          f"prop_mean={shape / rate_full:8.3f} "
          f"F(cur)={fc:12.3f} F(prop)={fp:12.3f} dF={fp - fc:9.3f}")
    # numeric slope of F in eta around the current point
    de = 0.5
    slope = (F_full((eta + de) ** -0.5) - F_full((eta - de) ** -0.5)) / (2 * de)
    print(f"      dF/deta at cur = {slope:9.4f}   "
          f"gamma-part slope = {(shape - 1) / eta - rate_full:9.4f}")
