"""Convex feasibility problems: the f = 0, h = indicator specialization.

A feasibility instance is a finite family of closed convex sets (halfspaces,
hyperplanes, balls).  Sampling a component and applying the solver step with
a zero smooth part reduces to projecting onto the sampled set, i.e.
randomized alternating projections.  This module supplies the exact
projections, the distance to the intersection, an empirical estimator of the
linear-regularity constant kappa, and the specialized runner.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import ProxOracle, ZeroSmoothOracle, constant_schedule
from .engine import Trace, max_iter_rule, run_sspg
from .rng import make_rng

Array = np.ndarray

CFP_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Halfspace:
    """{x : a . x <= b}"""

    a: Array
    b: float

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=float)
        if a.ndim != 1 or not np.all(np.isfinite(a)) or not math.isfinite(self.b):
            raise ValueError("halfspace needs a finite vector a and finite b")
        sq = float(a @ a)
        if sq <= 0:
            raise ValueError("halfspace normal must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "_a_sq", sq)

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class Hyperplane:
    """{x : a . x = b}"""

    a: Array
    b: float

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=float)
        if a.ndim != 1 or not np.all(np.isfinite(a)) or not math.isfinite(self.b):
            raise ValueError("hyperplane needs a finite vector a and finite b")
        sq = float(a @ a)
        if sq <= 0:
            raise ValueError("hyperplane normal must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "_a_sq", sq)

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class Ball:
    """{x : ||x - center|| <= radius}"""

    center: Array
    radius: float

    def __post_init__(self):
        c = np.ascontiguousarray(self.center, dtype=float)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("ball needs a finite center vector")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.shape[0]


ConvexSet = Halfspace | Hyperplane | Ball


def project_set(s: ConvexSet, x: Array) -> Array:
    """Exact Euclidean projection onto one set."""
    if isinstance(s, Halfspace):
        viol = float(s.a @ x) - s.b
        if viol <= 0:
            return np.asarray(x, dtype=float)
        return x - (viol / s._a_sq) * s.a
    if isinstance(s, Hyperplane):
        return x - ((float(s.a @ x) - s.b) / s._a_sq) * s.a
    if isinstance(s, Ball):
        d = x - s.center
        nd = float(np.linalg.norm(d))
        if nd <= s.radius:
            return np.asarray(x, dtype=float)
        return s.center + (s.radius / nd) * d
    raise TypeError(f"unknown set type {type(s).__name__}")


def set_distance(s: ConvexSet, x: Array) -> float:
    """Euclidean distance to one set (analytic, no projection round-trip)."""
    if isinstance(s, Halfspace):
        return max(0.0, float(s.a @ x) - s.b) / math.sqrt(s._a_sq)
    if isinstance(s, Hyperplane):
        return abs(float(s.a @ x) - s.b) / math.sqrt(s._a_sq)
    if isinstance(s, Ball):
        return max(0.0, float(np.linalg.norm(x - s.center)) - s.radius)
    raise TypeError(f"unknown set type {type(s).__name__}")


@dataclass(frozen=True)
class CFPProblem:
    """A finite family of convex sets with (optionally) a known common point."""

    sets: tuple
    x_feas: Array | None = None

    def __post_init__(self):
        sets = tuple(self.sets)
        if not sets:
            raise ValueError("need at least one set")
        dim = sets[0].dim
        if any(s.dim != dim for s in sets):
            raise ValueError("all sets must share the same dimension")
        object.__setattr__(self, "sets", sets)
        if self.x_feas is not None:
            xf = np.ascontiguousarray(self.x_feas, dtype=float)
            if xf.shape != (dim,):
                raise ValueError(f"x_feas has shape {xf.shape}, expected ({dim},)")
            worst = max(set_distance(s, xf) for s in sets)
            if worst > 1e-10:
                raise ValueError(
                    f"x_feas is not a common point: distance {worst:.3e} to some set"
                )
            object.__setattr__(self, "x_feas", xf)
        # For an all-hyperplane family the intersection is affine and the
        # distance to it is exact linear algebra; cache the stacked system.
        if all(isinstance(s, Hyperplane) for s in sets):
            A = np.vstack([s.a for s in sets])
            b = np.array([s.b for s in sets])
            object.__setattr__(self, "_affine", (A, np.linalg.pinv(A), b))
        else:
            object.__setattr__(self, "_affine", None)

    @property
    def m(self) -> int:
        return len(self.sets)

    @property
    def dim(self) -> int:
        return self.sets[0].dim


def mean_sq_set_distance(problem: CFPProblem, x: Array) -> float:
    """E_xi[dist^2(x, X_xi)] under uniform sampling."""
    return float(np.mean([set_distance(s, x) ** 2 for s in problem.sets]))


def cfp_distance(problem: CFPProblem, x: Array, tol: float = 1e-10,
                 max_cycles: int = 10000) -> float:
    """Distance from x to the intersection of all sets.

    Exact (pseudoinverse least-norm solve) when every set is a hyperplane;
    otherwise cyclic projections with Dykstra's correction, iterated until the
    per-cycle movement falls below tol.  Hitting the cycle cap leaves a
    best-effort estimate and raises a warning.
    """
    x = np.asarray(x, dtype=float)
    if problem._affine is not None:
        A, pinv, b = problem._affine
        return float(np.linalg.norm(pinv @ (A @ x - b)))
    z = x.copy()
    corr = [np.zeros_like(x) for _ in problem.sets]
    for _ in range(max_cycles):
        shift = 0.0
        for i, s in enumerate(problem.sets):
            w = z + corr[i]
            zn = project_set(s, w)
            corr[i] = w - zn
            shift = max(shift, float(np.linalg.norm(zn - z)))
            z = zn
        if shift <= tol:
            break
    else:
        warnings.warn(
            f"cyclic projection did not reach tol={tol:.1e} in {max_cycles} cycles; "
            "distance is a best-effort estimate",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(np.linalg.norm(x - z))


def estimate_kappa(problem: CFPProblem, samples: int, radius: float, seed: int,
                   dist_tol: float = 1e-10) -> float:
    """Empirical linear-regularity constant on a ball around the witness point.

    kappa_hat = min over sampled x of E_xi[dist^2(x, X_xi)] / dist^2(x, X),
    sampled uniformly in the ball of the given radius around x_feas.  Points
    with dist(x, X) < 1e-6 * radius are excluded (0/0 guards); if everything
    is excluded the region is trivially feasible and a larger radius is
    required.  The returned value is clamped into (0, 1] — the ratio is <= 1
    analytically since every dist_{X_xi} <= dist_X.
    """
    if samples < 100:
        raise ValueError(f"need at least 100 samples for a usable minimum, got {samples}")
    if not (radius > 0 and math.isfinite(radius)):
        raise ValueError(f"radius must be positive, got {radius}")
    if problem.x_feas is None:
        raise ValueError("kappa estimation needs the problem's x_feas witness")
    rng = make_rng(seed)
    n = problem.dim
    # Uniform in the ball: normal direction, radius by u^(1/n).  Draw order
    # (all directions, then all radii) is part of the determinism contract.
    dirs = rng.standard_normal((samples, n))
    fracs = rng.random(samples) ** (1.0 / n)
    best = math.inf
    kept = 0
    for i in range(samples):
        d = dirs[i]
        nd = float(np.linalg.norm(d))
        if nd == 0.0:
            continue
        x = problem.x_feas + (radius * fracs[i] / nd) * d
        dist = cfp_distance(problem, x, tol=dist_tol)
        if dist < 1e-6 * radius:
            continue
        kept += 1
        ratio = mean_sq_set_distance(problem, x) / (dist * dist)
        best = min(best, ratio)
    if kept == 0:
        raise ValueError(
            "all samples were (near-)feasible; enlarge the sampling radius"
        )
    return min(max(best, np.finfo(float).tiny), 1.0)


class IndicatorProxOracle(ProxOracle):
    """h(.; xi) = indicator of the xi-th set; prox is the exact projection.

    Membership for the 0/inf value uses a small relative tolerance: exact
    projections land on set boundaries only up to roundoff.
    """

    def __init__(self, problem: CFPProblem, feas_tol: float = 1e-8):
        self.problem = problem
        self.m = problem.m
        self.dim = problem.dim
        self.feas_tol = feas_tol

    def _tol(self, x: Array) -> float:
        return self.feas_tol * (1.0 + float(np.linalg.norm(x)))

    def value(self, x, xi):
        return 0.0 if set_distance(self.problem.sets[xi], x) <= self._tol(x) else math.inf

    def prox(self, y, xi, mu):
        return project_set(self.problem.sets[xi], y)

    def subgrad(self, x, xi):
        # minimal-norm member of the normal cone: 0 wherever x is in the set
        return np.zeros(self.dim)

    def stationarity_residual(self, y, z, xi, mu):
        """Distance from (y - z)/mu to the normal cone of the set at z."""
        s = self.problem.sets[xi]
        r = (np.asarray(y, dtype=float) - z) / mu
        tol = self._tol(z)
        if set_distance(s, z) > tol:
            raise ValueError("z lies outside the sampled set; residual undefined")
        if isinstance(s, Halfspace):
            on_boundary = abs(float(s.a @ z) - s.b) <= tol * math.sqrt(s._a_sq)
            if not on_boundary:
                return float(np.linalg.norm(r))
            t = max(0.0, float(s.a @ r) / s._a_sq)
            return float(np.linalg.norm(r - t * s.a))
        if isinstance(s, Hyperplane):
            return float(np.linalg.norm(r - (float(s.a @ r) / s._a_sq) * s.a))
        d = z - s.center
        nd = float(np.linalg.norm(d))
        if nd < s.radius * (1.0 - self.feas_tol):
            return float(np.linalg.norm(r))
        t = max(0.0, float(d @ r) / (nd * nd)) if nd > 0 else 0.0
        return float(np.linalg.norm(r - t * d))


def cfp_oracles(problem: CFPProblem) -> tuple[ZeroSmoothOracle, IndicatorProxOracle]:
    return ZeroSmoothOracle(dim=problem.dim, m=problem.m), IndicatorProxOracle(problem)


def run_rap(problem: CFPProblem, seed: int, horizon: int, x0: Array | None = None,
            stepsize_mu0: float = 1.0, record_walltime: bool = False) -> Trace:
    """Randomized alternating projections: the f = 0 specialization.

    Each step projects onto one uniformly sampled set (the stepsize is
    irrelevant with a zero smooth part; a constant schedule is used).  The
    trace records the distance to the intersection at every kept k.
    """
    smooth, prox = cfp_oracles(problem)
    return run_sspg(
        smooth,
        prox,
        constant_schedule(stepsize_mu0),
        seed=seed,
        stop=max_iter_rule(horizon),
        x0=x0,
        dist_fn=lambda x: cfp_distance(problem, x),
        record_walltime=record_walltime,
    )


# --- JSON instance container ----------------------------------------------------


def _set_to_json(s: ConvexSet) -> dict:
    if isinstance(s, Halfspace):
        return {"kind": "halfspace", "a": s.a.tolist(), "b": s.b}
    if isinstance(s, Hyperplane):
        return {"kind": "hyperplane", "a": s.a.tolist(), "b": s.b}
    if isinstance(s, Ball):
        return {"kind": "ball", "center": s.center.tolist(), "radius": s.radius}
    raise TypeError(f"unknown set type {type(s).__name__}")


def _set_from_json(spec: dict) -> ConvexSet:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"set spec must be an object with a 'kind' tag, got {spec!r}")
    kind = spec["kind"]
    fields = {
        "halfspace": {"kind", "a", "b"},
        "hyperplane": {"kind", "a", "b"},
        "ball": {"kind", "center", "radius"},
    }.get(kind)
    if fields is None:
        raise ValueError(f"unknown set kind {kind!r}")
    extra = set(spec) - fields
    if extra:
        raise ValueError(f"unknown keys in {kind} spec: {sorted(extra)}")
    if kind == "halfspace":
        return Halfspace(a=np.asarray(spec["a"], dtype=float), b=float(spec["b"]))
    if kind == "hyperplane":
        return Hyperplane(a=np.asarray(spec["a"], dtype=float), b=float(spec["b"]))
    return Ball(center=np.asarray(spec["center"], dtype=float), radius=float(spec["radius"]))


def save_cfp_instance(problem: CFPProblem, path) -> None:
    doc = {
        "format_version": CFP_FORMAT_VERSION,
        "sets": [_set_to_json(s) for s in problem.sets],
        "x_feas": None if problem.x_feas is None else problem.x_feas.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_cfp_instance(path) -> CFPProblem:
    """Read a JSON instance: either the full object form or a bare list of
    set specs (convenient for hand-written files)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        return CFPProblem(sets=tuple(_set_from_json(s) for s in doc))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a JSON object or list")
    extra = set(doc) - {"format_version", "sets", "x_feas"}
    if extra:
        raise ValueError(f"{path}: unknown keys {sorted(extra)}")
    version = doc.get("format_version")
    if version != CFP_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {version!r}")
    xf = doc.get("x_feas")
    return CFPProblem(
        sets=tuple(_set_from_json(s) for s in doc["sets"]),
        x_feas=None if xf is None else np.asarray(xf, dtype=float),
    )
