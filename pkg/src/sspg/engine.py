"""The stochastic splitting proximal gradient loop and its measurement tools.

One iteration, from iterate x^k with stepsize mu:

    draw xi   ~ uniform {0, ..., m-1}
    y   = x^k - mu * grad f(x^k; xi)
    x^{k+1} = prox_{h, mu}(y; xi)

Both oracle calls use the SAME sampled index — that single coupling is what
distinguishes the scheme from proximal SGD and makes the per-iteration cost
O(n) on the problems here.  Iteration indices are 1-based for stepsize
purposes (the step producing x^k uses stepsize(schedule, k)), so polynomial
schedules mu0/k^gamma are defined from the first step.

Expectations such as E||x^k - x*||^2 are estimated by independent replication
over seeds (run_monte_carlo), not within-run averaging, because the bounds
being checked are per-iteration expectations over the sampling history.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import ProxOracle, SmoothOracle, StepsizeSchedule, TheoryConstants, eval_full_objective, stepsize
from .rng import draw_index, draw_indices, make_rng

Array = np.ndarray

# Raw index draws are buffered in chunks; draw_indices consumes the generator
# stream exactly like repeated draw_index calls, so chunk size cannot affect
# results.
_CHUNK = 8192

# Dense per-iteration recording up to here; beyond, only power-of-two indices
# (and the final iterate) are kept, bounding trace memory on long runs.
DENSE_RECORD_LIMIT = 100_000


class DivergenceError(RuntimeError):
    """Iterate left the floating-point range (stepsize too large)."""


@dataclass
class SolverState:
    """Current iterate, iteration counter, and the sampling generator.

    The generator is owned by the state and advanced in place by sspg_step
    (exactly one raw draw per step); the returned state shares it.
    """

    x: Array
    k: int
    rng: np.random.Generator


def sspg_step(smooth: SmoothOracle, prox: ProxOracle, state: SolverState, mu: float) -> SolverState:
    """One iteration; draws exactly one component index from state.rng."""
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if smooth.m != prox.m:
        raise ValueError(f"oracles disagree on component count: {smooth.m} vs {prox.m}")
    xi = draw_index(state.rng, smooth.m)
    y = state.x - mu * smooth.grad(state.x, xi)
    x_new = prox.prox(y, xi, mu)
    if not np.all(np.isfinite(x_new)):
        raise DivergenceError(
            f"non-finite iterate after step {state.k + 1} (mu={mu:.3g}); "
            "the stepsize is likely above the stability range"
        )
    return SolverState(x=x_new, k=state.k + 1, rng=state.rng)


@dataclass(frozen=True)
class StoppingRule:
    """When to stop: a hard cap plus an optional convergence test.

    kind="max_iter":            stop at cap (a plain horizon; counts as converged)
    kind="dist_to_reference":   stop when ||x - reference|| <= threshold
    kind="gradient_map_norm":   stop when grad_map_fn(x) <= threshold
                                (reference-free; the caller supplies the map,
                                typically a full prox-gradient residual)

    Convergence tests run every check_every iterations.
    """

    kind: str
    cap: int
    threshold: float | None = None
    check_every: int = 1
    grad_map_fn: Callable[[Array], float] | None = None

    def __post_init__(self):
        if self.kind not in ("max_iter", "dist_to_reference", "gradient_map_norm"):
            raise ValueError(f"unknown stopping rule kind {self.kind!r}")
        if self.cap < 1:
            raise ValueError(f"cap must be >= 1, got {self.cap}")
        if self.check_every < 1:
            raise ValueError(f"check_every must be >= 1, got {self.check_every}")
        if self.kind != "max_iter":
            if self.threshold is None or not self.threshold > 0:
                raise ValueError(f"{self.kind} needs a positive threshold")
        if self.kind == "gradient_map_norm" and self.grad_map_fn is None:
            raise ValueError("gradient_map_norm needs grad_map_fn")


def max_iter_rule(cap: int) -> StoppingRule:
    return StoppingRule(kind="max_iter", cap=cap)


def dist_rule(threshold: float, cap: int, check_every: int = 1) -> StoppingRule:
    return StoppingRule(kind="dist_to_reference", cap=cap, threshold=threshold,
                        check_every=check_every)


@dataclass
class Trace:
    """Recorded path of one run.  Optional columns are None when not recorded."""

    ks: Array
    sq_dist_to_opt: Array | None
    objective: Array | None
    dist_to_feasible: Array | None
    wall_time_s: Array | None
    seed: int | None
    schedule: str
    x_final: Array
    n_iters: int
    converged: bool
    stop_reason: str


def _should_record(k: int, record_every: int | None) -> bool:
    if record_every is not None:
        return k % record_every == 0
    return k <= DENSE_RECORD_LIMIT or (k & (k - 1)) == 0


def run_sspg(
    smooth: SmoothOracle,
    prox: ProxOracle,
    schedule: StepsizeSchedule,
    seed: int,
    stop: StoppingRule,
    reference: Array | None = None,
    x0: Array | None = None,
    record_objective: bool = False,
    dist_fn: Callable[[Array], float] | None = None,
    record_walltime: bool = False,
    record_every: int | None = None,
) -> Trace:
    """Run the loop until the stopping rule fires; deterministic in all inputs.

    Iterates are identical to a chain of sspg_step calls with the same seed
    (the loop is inlined here only to buffer index draws).  Records are kept
    at k = 0, every k up to DENSE_RECORD_LIMIT (or every record_every-th k
    when given), power-of-two k beyond, and the final k.  Wall-clock recording
    is off by default so artifacts stay byte-identical across runs; switch it
    on for timing studies only.
    """
    if smooth.m != prox.m:
        raise ValueError(f"oracles disagree on component count: {smooth.m} vs {prox.m}")
    if stop.kind == "dist_to_reference" and reference is None:
        raise ValueError("dist_to_reference stopping needs a reference point")
    m = smooth.m
    x = np.zeros(smooth.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    ref = None if reference is None else np.asarray(reference, dtype=float)

    ks: list[int] = []
    sq_col: list[float] | None = [] if ref is not None else None
    obj_col: list[float] | None = [] if record_objective else None
    feas_col: list[float] | None = [] if dist_fn is not None else None
    wt_col: list[float] | None = [] if record_walltime else None
    t0 = time.perf_counter()

    def record(k: int, x: Array) -> None:
        ks.append(k)
        if sq_col is not None:
            d = x - ref
            sq_col.append(float(d @ d))
        if obj_col is not None:
            obj_col.append(eval_full_objective(smooth, prox, x))
        if feas_col is not None:
            feas_col.append(float(dist_fn(x)))
        if wt_col is not None:
            wt_col.append(time.perf_counter() - t0)

    rng = make_rng(seed)
    record(0, x)
    k = 0
    converged = stop.kind == "max_iter"
    stop_reason = "cap"
    buf: list[int] = []
    ptr = 0
    thr_sq = stop.threshold**2 if stop.kind == "dist_to_reference" else None
    while k < stop.cap:
        if ptr == len(buf):
            buf = draw_indices(rng, m, _CHUNK).tolist()
            ptr = 0
        xi = buf[ptr]
        ptr += 1
        mu = stepsize(schedule, k + 1)
        y = x - mu * smooth.grad(x, xi)
        x = prox.prox(y, xi, mu)
        k += 1
        sq_norm = float(x @ x)
        if not math.isfinite(sq_norm):
            raise DivergenceError(
                f"non-finite iterate after step {k} (mu={mu:.3g}); "
                "the stepsize is likely above the stability range"
            )
        if _should_record(k, record_every):
            record(k, x)
        if stop.kind != "max_iter" and k % stop.check_every == 0:
            if stop.kind == "dist_to_reference":
                d = x - ref
                if float(d @ d) <= thr_sq:
                    converged = True
                    stop_reason = "dist_to_reference"
            else:
                if float(stop.grad_map_fn(x)) <= stop.threshold:
                    converged = True
                    stop_reason = "gradient_map_norm"
            if converged:
                break
    if ks[-1] != k:
        record(k, x)

    def col(v):
        return None if v is None else np.asarray(v)

    return Trace(
        ks=np.asarray(ks, dtype=np.int64),
        sq_dist_to_opt=col(sq_col),
        objective=col(obj_col),
        dist_to_feasible=col(feas_col),
        wall_time_s=col(wt_col),
        seed=seed,
        schedule=schedule.describe(),
        x_final=x,
        n_iters=k,
        converged=converged,
        stop_reason=stop_reason,
    )


# --- Monte-Carlo estimation of E||x^k - x*||^2 ---------------------------------


@dataclass
class MeanTrace:
    """Seed-averaged squared distances on a dense iteration grid 0..K.

    sq_paths holds the full per-run matrix (R x (K+1)); the recurrence check
    uses it to form paired-difference error bars.
    """

    ks: Array
    mean_sq_dist: Array
    stderr: Array
    n_runs: int
    schedule: str
    sq_paths: Array | None = field(default=None, repr=False)


def _sq_dist_path(task) -> Array:
    """One replica: squared distance to the reference at every k in 0..K.

    Iterate-for-iterate identical to run_sspg with the same seed (same
    buffered draw scheme, same arithmetic).
    """
    smooth, prox, schedule, seed, horizon, reference, x0 = task
    m = smooth.m
    x = np.zeros(smooth.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    ref = np.asarray(reference, dtype=float)
    out = np.empty(horizon + 1)
    d = x - ref
    out[0] = float(d @ d)
    rng = make_rng(seed)
    buf: list[int] = []
    ptr = 0
    for k in range(horizon):
        if ptr == len(buf):
            buf = draw_indices(rng, m, _CHUNK).tolist()
            ptr = 0
        xi = buf[ptr]
        ptr += 1
        mu = stepsize(schedule, k + 1)
        y = x - mu * smooth.grad(x, xi)
        x = prox.prox(y, xi, mu)
        d = x - ref
        sq = float(d @ d)
        if not math.isfinite(sq):
            raise DivergenceError(
                f"non-finite iterate after step {k + 1} (seed {seed}, mu={mu:.3g})"
            )
        out[k + 1] = sq
    return out


def run_monte_carlo(
    smooth: SmoothOracle,
    prox: ProxOracle,
    schedule: StepsizeSchedule,
    seeds: int | Sequence[int],
    horizon: int,
    reference: Array,
    base_seed: int = 0,
    x0: Array | None = None,
    workers: int | None = None,
) -> MeanTrace:
    """Estimate E||x^k - x*||^2 over independent replicas.

    seeds is either a count R (replicas use base_seed .. base_seed+R-1) or an
    explicit sequence of distinct seeds, R >= 2.  Results are independent of
    worker count: replicas are deterministic and aggregation order is fixed.
    The horizon is capped so the dense (K+1)-point grid stays in memory.
    """
    if isinstance(seeds, (int, np.integer)):
        if seeds < 2:
            raise ValueError(f"need at least 2 replicas, got {seeds}")
        seed_list = [base_seed + i for i in range(int(seeds))]
    else:
        seed_list = [int(s) for s in seeds]
        if len(seed_list) < 2:
            raise ValueError(f"need at least 2 replicas, got {len(seed_list)}")
        if len(set(seed_list)) != len(seed_list):
            raise ValueError("replica seeds must be distinct")
    if reference is None:
        raise ValueError("run_monte_carlo needs a reference point")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if horizon > DENSE_RECORD_LIMIT:
        raise ValueError(
            f"horizon {horizon} above the dense-recording limit {DENSE_RECORD_LIMIT}"
        )
    tasks = [(smooth, prox, schedule, s, horizon, reference, x0) for s in seed_list]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            paths = list(pool.map(_sq_dist_path, tasks, chunksize=1))
    else:
        paths = [_sq_dist_path(t) for t in tasks]
    mat = np.vstack(paths)
    r = len(seed_list)
    return MeanTrace(
        ks=np.arange(horizon + 1, dtype=np.int64),
        mean_sq_dist=mat.mean(axis=0),
        stderr=mat.std(axis=0, ddof=1) / math.sqrt(r),
        n_runs=r,
        schedule=schedule.describe(),
        sq_paths=mat,
    )


# --- one-step recurrence verification ------------------------------------------


@dataclass
class RecurrenceReport:
    passed: bool
    n_checked: int
    violations: list[tuple[int, float, float]]  # (k, excess, stderr of the gap)
    max_violation_sigma: float
    slack: float


def check_recurrence(
    mean_trace: MeanTrace,
    constants: TheoryConstants,
    schedule: StepsizeSchedule,
    slack: float = 5.0,
) -> RecurrenceReport:
    """Test the one-step bound E d_{k+1} <= (1 - sigma_f mu) E d_k + mu^2 Sigma.

    mu is the stepsize of the step leading from k to k+1.  Each gap
    D_k = mean[k+1] - bound_k is compared against slack * stderr(D_k); the
    stderr is the paired per-run difference when the path matrix is available
    (per-run paths are strongly correlated across consecutive k, so the
    paired estimate is far tighter than combining the two marginal stderrs).
    """
    if constants.noise_bound is None:
        raise ValueError("constants.noise_bound is required (estimate it first)")
    ks = mean_trace.ks
    if len(ks) < 2 or not np.all(np.diff(ks) == 1):
        raise ValueError("recurrence check needs a dense consecutive-k trace")
    mean = mean_trace.mean_sq_dist
    sig, noise = constants.strong_convexity, constants.noise_bound
    violations: list[tuple[int, float, float]] = []
    max_sigma = -math.inf
    r = mean_trace.n_runs
    for i in range(len(ks) - 1):
        mu = stepsize(schedule, int(ks[i]) + 1)
        contraction = 1.0 - sig * mu
        gap = mean[i + 1] - (contraction * mean[i] + mu * mu * noise)
        if mean_trace.sq_paths is not None:
            diffs = mean_trace.sq_paths[:, i + 1] - contraction * mean_trace.sq_paths[:, i]
            se = float(diffs.std(ddof=1)) / math.sqrt(r)
        else:
            se = float(mean_trace.stderr[i + 1] + abs(contraction) * mean_trace.stderr[i])
        atol = 1e-12 * (1.0 + abs(mean[i]))
        allowed = slack * se + atol
        if gap > allowed:
            violations.append((int(ks[i]) + 1, float(gap), se))
        if se > 0:
            max_sigma = max(max_sigma, (gap - atol) / se)
    return RecurrenceReport(
        passed=not violations,
        n_checked=len(ks) - 1,
        violations=violations,
        max_violation_sigma=max_sigma,
        slack=slack,
    )
