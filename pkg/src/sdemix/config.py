"""Run configuration shared by the Gibbs, EM and command-line layers."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

__all__ = ["RunConfig", "resolve_threads", "THREADS_ENV"]

THREADS_ENV = "SDEMIX_THREADS"

_ETA_STRATEGIES = (None, "mh", "approx", "rejection")
_SAMPLERS = ("auto", "expfam", "general")


@dataclass(frozen=True)
class RunConfig:
    """Knobs of a Gibbs or EM run.

    bridge_steps is the number of Euler steps per observation interval,
    so the bridge step size is (t_j - t_{j-1}) / bridge_steps.
    eta_strategy selects how the diffusion parameter conditional is
    drawn (None picks the per-model default: approximate direct
    sampling with approx_K draws, or one Metropolis-Hastings step for
    the t-diffusion). rejection_bounds / rejection_M configure the
    exact rejection strategy and are required when it is selected.
    """

    iterations: int = 1000
    burn_in: int = 100
    bridge_steps: int = 50
    exact_bridges: bool = False
    save_effects: bool = False
    sampler: str = "auto"
    eta_strategy: str | None = None
    approx_K: int = 1000
    rejection_bounds: tuple | None = None
    rejection_M: float | None = None
    em_samples: int = 50
    em_burn_in: int = 10
    em_thin: int = 2
    init: dict | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.bridge_steps < 1:
            raise ValueError(f"bridge_steps must be >= 1, got {self.bridge_steps}")
        if self.sampler not in _SAMPLERS:
            raise ValueError(f"sampler must be one of {_SAMPLERS}, got {self.sampler!r}")
        if self.eta_strategy not in _ETA_STRATEGIES:
            raise ValueError(
                f"eta_strategy must be one of {_ETA_STRATEGIES}, got {self.eta_strategy!r}")
        if self.approx_K < 1:
            raise ValueError(f"approx_K must be >= 1, got {self.approx_K}")
        if self.em_samples < 1:
            raise ValueError(f"em_samples must be >= 1, got {self.em_samples}")
        if self.em_burn_in < 0 or self.em_thin < 1:
            raise ValueError("em_burn_in must be >= 0 and em_thin >= 1")
        if self.eta_strategy == "rejection" and (
                self.rejection_bounds is None or self.rejection_M is None):
            raise ValueError(
                "the rejection strategy needs explicit rejection_bounds and "
                "rejection_M")
        if self.threads is not None and self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")

    def with_options(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)


def resolve_threads(explicit: int | None = None) -> int:
    """Worker cap: an explicit setting wins, else the SDEMIX_THREADS
    environment variable, else 1. All evaluation is serial-vectorized,
    so the cap influences scheduling only, never results."""
    if explicit is not None:
        if explicit < 1:
            raise ValueError(f"thread count must be >= 1, got {explicit}")
        return explicit
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(
            f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n
