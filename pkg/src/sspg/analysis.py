"""Trace serialization, rate-exponent fits, and theory-bound curves.

CSV is the authoritative artifact format.  Floats are written with 17
significant digits (value-preserving for float64) and absent columns as empty
cells, so files round-trip exactly and byte-identical reruns are possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import StepsizeSchedule, TheoryConstants, stepsize
from .engine import MeanTrace, Trace

Array = np.ndarray

TRACE_COLUMNS = ("k", "sq_dist_to_opt", "objective", "dist_to_feasible", "wall_time_s")
MEAN_COLUMNS = ("k", "mean_sq_dist", "stderr", "R")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, header, rows) -> None:
    """Plain deterministic CSV: comma-separated, \\n newlines, 17-digit floats."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines))
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def emit_trace_csv(trace_or_mean: Trace | MeanTrace, path) -> None:
    """Serialize a single-run trace (k, sq_dist_to_opt, objective,
    dist_to_feasible, wall_time_s) or a seed-averaged one (k, mean_sq_dist,
    stderr, R).  Absent columns become empty cells."""
    t = trace_or_mean
    if isinstance(t, MeanTrace):
        rows = [
            (int(k), t.mean_sq_dist[i], t.stderr[i], t.n_runs)
            for i, k in enumerate(t.ks)
        ]
        write_csv(path, MEAN_COLUMNS, rows)
        return
    cols = [t.sq_dist_to_opt, t.objective, t.dist_to_feasible, t.wall_time_s]
    rows = []
    for i, k in enumerate(t.ks):
        rows.append((int(k), *[None if c is None else c[i] for c in cols]))
    write_csv(path, TRACE_COLUMNS, rows)


def _read_csv(path, expected_header) -> list[list[str]]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().split("\n") if ln]
    except OSError as exc:
        raise OSError(f"reading {path}: {exc}") from exc
    if not lines or tuple(lines[0].split(",")) != tuple(expected_header):
        raise ValueError(f"{path}: expected header {','.join(expected_header)!r}")
    return [ln.split(",") for ln in lines[1:]]


def read_trace_csv(path) -> dict:
    """Columns of a single-run trace CSV as arrays (None where all-empty)."""
    cells = _read_csv(path, TRACE_COLUMNS)
    ks = np.array([int(row[0]) for row in cells], dtype=np.int64)
    out: dict = {"k": ks}
    for j, name in enumerate(TRACE_COLUMNS[1:], start=1):
        col = [row[j] for row in cells]
        if all(c == "" for c in col):
            out[name] = None
        else:
            out[name] = np.array([math.nan if c == "" else float(c) for c in col])
    return out


def read_mean_trace_csv(path) -> MeanTrace:
    cells = _read_csv(path, MEAN_COLUMNS)
    ks = np.array([int(row[0]) for row in cells], dtype=np.int64)
    rs = {int(row[3]) for row in cells}
    if len(rs) != 1:
        raise ValueError(f"{path}: R column is not constant")
    return MeanTrace(
        ks=ks,
        mean_sq_dist=np.array([float(row[1]) for row in cells]),
        stderr=np.array([float(row[2]) for row in cells]),
        n_runs=rs.pop(),
        schedule="",
    )


# --- rate fitting ---------------------------------------------------------------


def loglog_fit(xs: Array, ys: Array) -> tuple[float, float, float]:
    """OLS of log(y) on log(x): returns (slope, intercept, R^2)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 2:
        raise ValueError("need two equal-length 1-D arrays with >= 2 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs strictly positive data")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(resid @ resid) / ss_tot
    return float(slope), float(intercept), r2


def semilog_fit(ks: Array, ys: Array) -> tuple[float, float, float]:
    """OLS of log(y) on k (geometric decay fit): returns (slope, intercept, R^2)."""
    ks = np.asarray(ks, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ks.shape != ys.shape or ks.ndim != 1 or len(ks) < 2:
        raise ValueError("need two equal-length 1-D arrays with >= 2 points")
    if np.any(ys <= 0):
        raise ValueError("geometric fit needs strictly positive data")
    ly = np.log(ys)
    slope, intercept = np.polyfit(ks, ly, 1)
    resid = ly - (slope * ks + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(resid @ resid) / ss_tot
    return float(slope), float(intercept), r2


@dataclass(frozen=True)
class RateReport:
    slope: float
    window: tuple[int, int]
    r_squared: float
    theory_exponent: float
    passed: bool


def fit_rate_exponent(mean_trace: MeanTrace, window: tuple[int, int],
                      gamma_theory: float) -> RateReport:
    """Fit log E||x^k - x*||^2 against log k over the window.

    Passes when the fitted slope is within 0.2 of -gamma_theory with
    R^2 >= 0.9.  Nonpositive trace values inside the window are an error:
    the run converged below the noise floor and the window must shrink.
    """
    k_min, k_max = window
    if not (1 <= k_min < k_max):
        raise ValueError(f"need 1 <= k_min < k_max, got {window}")
    mask = (mean_trace.ks >= k_min) & (mean_trace.ks <= k_max)
    if mask.sum() < 2:
        raise ValueError(f"window {window} covers fewer than 2 recorded iterations")
    ks = mean_trace.ks[mask].astype(float)
    vals = mean_trace.mean_sq_dist[mask]
    if np.any(vals <= 0):
        raise ValueError(
            "nonpositive mean squared distance in the fit window "
            "(converged below the noise floor; shrink the window)"
        )
    slope, _, r2 = loglog_fit(ks, vals)
    passed = abs(slope + gamma_theory) <= 0.2 and r2 >= 0.9
    return RateReport(slope=slope, window=(int(k_min), int(k_max)), r_squared=r2,
                      theory_exponent=gamma_theory, passed=passed)


def plateau_level(mean_trace: MeanTrace, tail_fraction: float = 0.1) -> float:
    """Mean of the trailing tail_fraction of the mean trace."""
    if not (0.0 < tail_fraction <= 0.5):
        raise ValueError(f"tail_fraction must lie in (0, 0.5], got {tail_fraction}")
    n = len(mean_trace.mean_sq_dist)
    tail = max(1, int(math.ceil(tail_fraction * n)))
    return float(mean_trace.mean_sq_dist[-tail:].mean())


# --- theory-bound curves ----------------------------------------------------------


def phi(a: float, t: float) -> float:
    """phi_a(t) = (t^a - 1)/a, extended continuously to phi_0(t) = ln t."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if a == 0.0:
        return math.log(t)
    return (t**a - 1.0) / a


def constant_step_bound(d0_sq: float, constants: TheoryConstants, mu: float,
                        ks: Array) -> Array:
    """(1 - mu sigma_f)^k d0^2 + (mu/sigma_f) Sigma at the given ks."""
    if constants.noise_bound is None:
        raise ValueError("constants.noise_bound is required")
    if not (0 < mu < 1.0 / constants.strong_convexity):
        raise ValueError(f"need 0 < mu < 1/sigma_f for a sane envelope, got mu={mu}")
    ks = np.asarray(ks, dtype=float)
    contraction = 1.0 - mu * constants.strong_convexity
    return contraction**ks * d0_sq + (mu / constants.strong_convexity) * constants.noise_bound


def recurrence_envelope(d0_sq: float, constants: TheoryConstants,
                        schedule: StepsizeSchedule, horizon: int) -> Array:
    """Exact unroll of the one-step bound over k = 0..horizon.

    e[0] = d0^2, e[k+1] = (1 - sigma_f mu_{k+1}) e[k] + mu_{k+1}^2 Sigma.
    Dominates any closed-form relaxation of the same recurrence, so it is the
    envelope used for bound-curve comparisons under arbitrary schedules.
    """
    if constants.noise_bound is None:
        raise ValueError("constants.noise_bound is required")
    out = np.empty(horizon + 1)
    out[0] = d0_sq
    sig, noise = constants.strong_convexity, constants.noise_bound
    for k in range(horizon):
        mu = stepsize(schedule, k + 1)
        out[k + 1] = (1.0 - sig * mu) * out[k] + mu * mu * noise
    return out
