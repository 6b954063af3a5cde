"""Panel data containers, CSV input/output, and synthetic panel generation.

All files are plain CSV with optional leading comment lines prefixed by
'#'. Floats are written with repr() so that a read-back reproduces the
exact binary values (round-trip identity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, get_model

__all__ = [
    "UnitData",
    "PanelData",
    "load_panel_csv",
    "write_panel_csv",
    "load_trace_csv",
    "write_trace_csv",
    "synth_generate",
    "summarize_trace",
    "write_summary_csv",
    "format_summary_table",
    "SIM_STEPS_PER_INTERVAL",
]

# fine simulation grid: dt / 100, deliberately finer than the default
# inference grid dt / 50 so generator and estimator never share a grid
SIM_STEPS_PER_INTERVAL = 100

PANEL_HEADER = "unit,time,value"
SUMMARY_HEADER = "param,mean,q025,q975"


@dataclass(frozen=True)
class UnitData:
    """Observations of one unit: values[j] observed at times[j]."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or values.shape != times.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if len(times) < 2:
            raise ValueError(f"a unit needs at least 2 observations, got {len(times)}")
        if not (np.isfinite(times).all() and np.isfinite(values).all()):
            raise ValueError("times and values must be finite")
        if np.any(np.diff(times) <= 0):
            raise ValueError("observation times must be strictly increasing")

    @property
    def n_obs(self) -> int:
        return len(self.times)

    @property
    def n_intervals(self) -> int:
        return len(self.times) - 1


@dataclass(frozen=True)
class PanelData:
    """A panel of units, each with its own observation grid."""

    units: tuple
    unit_ids: tuple

    def __post_init__(self):
        units = tuple(self.units)
        ids = tuple(str(u) for u in self.unit_ids)
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "unit_ids", ids)
        if not units:
            raise ValueError("panel needs at least one unit")
        if len(ids) != len(units):
            raise ValueError("unit_ids and units must have equal length")
        if len(set(ids)) != len(ids):
            raise ValueError("unit ids must be unique")

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_total(self) -> int:
        return sum(u.n_obs for u in self.units)

    @property
    def total_intervals(self) -> int:
        return sum(u.n_intervals for u in self.units)


# ---------------------------------------------------------------------------
# CSV input / output
# ---------------------------------------------------------------------------


def _data_lines(path):
    """Yield (1-based line number, stripped line) skipping comments/blanks."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_panel_csv(path) -> PanelData:
    """Read a `unit,time,value` CSV into a PanelData.

    Rows must be grouped by unit with strictly increasing times inside
    each group; violations raise ValueError naming the offending line.
    """
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ValueError(f"{path}: empty file") from None
    if header != PANEL_HEADER:
        raise ValueError(
            f"{path}:{lineno}: expected header {PANEL_HEADER!r}, got {header!r}")

    order: list[str] = []
    groups: dict[str, tuple[list, list]] = {}
    closed: set[str] = set()
    current = None
    for lineno, line in lines:
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        uid = parts[0].strip()
        if not uid:
            raise ValueError(f"{path}:{lineno}: empty unit id")
        try:
            t = float(parts[1])
            v = float(parts[2])
        except ValueError:
            raise ValueError(
                f"{path}:{lineno}: could not parse time/value from {line!r}") from None
        if uid != current:
            if uid in closed:
                raise ValueError(
                    f"{path}:{lineno}: unit {uid!r} reappears; rows must be "
                    "grouped by unit")
            if current is not None:
                closed.add(current)
            current = uid
            order.append(uid)
            groups[uid] = ([], [])
        times, values = groups[uid]
        if times and t <= times[-1]:
            raise ValueError(
                f"{path}:{lineno}: time {t!r} does not increase within unit "
                f"{uid!r} (previous {times[-1]!r}); duplicate or unsorted row")
        times.append(t)
        values.append(v)

    if not order:
        raise ValueError(f"{path}: no data rows")
    units = []
    for uid in order:
        times, values = groups[uid]
        if len(times) < 2:
            raise ValueError(f"{path}: unit {uid!r} has fewer than 2 observations")
        units.append(UnitData(np.array(times), np.array(values)))
    return PanelData(tuple(units), tuple(order))


def write_panel_csv(path, panel: PanelData, comments=()) -> None:
    """Write a PanelData as CSV; floats via repr for exact round trips."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        fh.write(PANEL_HEADER + "\n")
        for uid, unit in zip(panel.unit_ids, panel.units):
            for t, v in zip(unit.times, unit.values):
                fh.write(f"{uid},{float(t)!r},{float(v)!r}\n")


def write_trace_csv(path, param_names, rows, comments=()) -> None:
    """Write an `iter,<params>` trace; one row per iteration, 1-based."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != len(param_names):
        raise ValueError("rows must be (iterations, n_params)")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        fh.write("iter," + ",".join(param_names) + "\n")
        for k, row in enumerate(rows, start=1):
            fh.write(str(k) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_trace_csv(path):
    """Read a trace CSV; returns (param_names, iters array, value matrix)."""
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ValueError(f"{path}: empty file") from None
    cols = header.split(",")
    if cols[0] != "iter" or len(cols) < 2:
        raise ValueError(f"{path}:{lineno}: expected header 'iter,<params>'")
    iters, rows = [], []
    for lineno, line in lines:
        parts = line.split(",")
        if len(parts) != len(cols):
            raise ValueError(
                f"{path}:{lineno}: expected {len(cols)} fields, got {len(parts)}")
        try:
            iters.append(int(parts[0]))
            rows.append([float(p) for p in parts[1:]])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: could not parse row {line!r}") from None
    if not rows:
        raise ValueError(f"{path}: trace has no rows")
    return cols[1:], np.array(iters, dtype=int), np.array(rows, dtype=float)


# ---------------------------------------------------------------------------
# synthetic panels
# ---------------------------------------------------------------------------

_PARAM_KEYS = {
    "ou_speed": ("beta", "gamma"),
    "t_diffusion": ("beta", "gamma"),
    "ou_level": ("alpha", "beta", "xi", "sigma"),
}


def _draw_true_effects(model_id, params, n_units, rng):
    if model_id in ("ou_speed", "t_diffusion"):
        # a ~ Exp(gamma) with rate gamma
        return rng.exponential(scale=1.0 / params["gamma"], size=n_units)
    return params["xi"] + params["sigma"] * rng.standard_normal(n_units)


def synth_generate(model_id, params: dict, n_units: int, n_obs: int, dt: float,
                   seed: int) -> PanelData:
    """Simulate a synthetic panel from the true mixed-effects law.

    Effects are drawn from the model's random-effects distribution, each
    unit starts in its stationary law, and paths are advanced by Euler on
    a fine grid of dt / 100 between observation times t_j = j dt,
    j = 1..n_obs. All randomness comes from the single seed.
    """
    model = get_model(model_id)
    model_id = model.name
    if model_id not in _PARAM_KEYS:
        raise ValueError(f"synthetic generation supports {sorted(_PARAM_KEYS)}, "
                         f"not {model_id!r}")
    keys = _PARAM_KEYS[model_id]
    missing = [k for k in keys if k not in params]
    if missing:
        raise ValueError(f"model {model_id!r} needs parameters {keys}, missing {missing}")
    if n_units < 1 or n_obs < 2:
        raise ValueError("need n_units >= 1 and n_obs >= 2")
    beta = float(params["beta"])
    alpha = (float(params["alpha"]),) if model_id == "ou_level" else ()
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")

    rng = np.random.default_rng(seed)
    a_vec = _draw_true_effects(model_id, params, n_units, rng)
    x0 = np.array([
        model.invariant_sampler(alpha, beta, a_vec[i], (), rng)
        for i in range(n_units)
    ])

    basis = model.expfam
    alpha_arr = np.asarray(alpha, dtype=float)

    def drift_vec(x):
        out = np.zeros_like(x)
        if basis.p1:
            out += np.tensordot(alpha_arr, basis.f(x), axes=1)
        if basis.p2:
            out += a_vec * basis.g(x)[0]
        return out

    def sigma_vec(x):
        return beta * basis.c(x)

    delta = dt / SIM_STEPS_PER_INTERVAL
    sq = math.sqrt(delta)
    total_steps = (n_obs - 1) * SIM_STEPS_PER_INTERVAL
    Z = rng.standard_normal((n_units, total_steps))
    obs = np.empty((n_units, n_obs))
    obs[:, 0] = x0
    x = x0.copy()
    for j in range(total_steps):
        x = x + drift_vec(x) * delta + sigma_vec(x) * sq * Z[:, j]
        if (j + 1) % SIM_STEPS_PER_INTERVAL == 0:
            obs[:, (j + 1) // SIM_STEPS_PER_INTERVAL] = x

    times = dt * np.arange(1, n_obs + 1)
    units = tuple(UnitData(times, obs[i]) for i in range(n_units))
    return PanelData(units, tuple(str(i + 1) for i in range(n_units)))


def provenance_comments(command: str, **kwargs) -> list:
    """Deterministic provenance lines for generated CSV headers."""
    items = sorted(kwargs.items())
    return [f"{command}: " + " ".join(f"{k}={v}" for k, v in items)]


# ---------------------------------------------------------------------------
# trace summaries
# ---------------------------------------------------------------------------


def summarize_trace(trace_path, burn_in: int):
    """Posterior mean and central 95% interval per parameter.

    Rows with iter <= burn_in are dropped; the rest feed empirical
    quantiles. Returns a list of (param, mean, q025, q975) tuples.
    """
    params, iters, rows = load_trace_csv(trace_path)
    keep = iters > burn_in
    if not keep.any():
        raise ValueError(
            f"burn-in {burn_in} leaves no rows (trace has max iter {iters.max()})")
    kept = rows[keep]
    out = []
    for k, name in enumerate(params):
        col = kept[:, k]
        q025, q975 = np.quantile(col, [0.025, 0.975])
        out.append((name, float(col.mean()), float(q025), float(q975)))
    return out


def write_summary_csv(path, summary, comments=()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        fh.write(SUMMARY_HEADER + "\n")
        for name, mean, q025, q975 in summary:
            fh.write(f"{name},{mean!r},{q025!r},{q975!r}\n")


def format_summary_table(summary) -> str:
    """Plain-text table of a summarize_trace result."""
    header = ("param", "mean", "q025", "q975")
    rows = [(name, f"{mean:.6g}", f"{q025:.6g}", f"{q975:.6g}")
            for name, mean, q025, q975 in summary]
    widths = [max(len(header[c]), *(len(r[c]) for r in rows)) for c in range(4)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)
