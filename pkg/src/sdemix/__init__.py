"""Estimation of mixed-effects stochastic differential equations from panel data.

Bayesian (Gibbs) and maximum-likelihood (Monte Carlo EM) inference built on
diffusion-bridge data augmentation: unobserved paths between consecutive
observations are imputed with a forward/time-reversed crossing construction,
optionally corrected to exactness by a pseudo-marginal Metropolis-Hastings
step driven by geometric crossing counts.
"""

from .model import (
    Effects,
    ExpFamBasis,
    ModelSpec,
    MODEL_IDS,
    H_term,
    drift_mu,
    get_model,
    lamperti,
    lamperti_inv,
    phi,
)

__version__ = "0.1.0"

__all__ = [
    "Effects",
    "ExpFamBasis",
    "ModelSpec",
    "MODEL_IDS",
    "H_term",
    "drift_mu",
    "get_model",
    "lamperti",
    "lamperti_inv",
    "phi",
    "__version__",
]
