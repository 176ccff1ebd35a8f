"""KPP wave-front variational problem for generalized diffusions.

W(t, x) is the supremum of accumulated reaction minus action over paths
running from x into the source region {x <= 0} within time t. Candidate
paths descend monotonically through the structure points (scale breakpoints
and reaction discontinuities) with optional waiting intervals at those
points; extremals between structure points are line segments, so this
family contains the optimum for the built-in scenario families
(homogeneous reaction; two-piece reaction).

For homogeneous reaction the inner minimization over segment durations has
the exact closed form (sum of sqrt-weights)^2 / t, giving
W(t, x) = c t - d(0, x)^2 / (4 t) with d the quasi-distance; otherwise the
durations are optimized by pairwise coordinate descent with golden-section
line search. Ties (flat directions such as waiting at a jump point) are
resolved toward zero waiting.

The front time t*(x) solves W(t*, x) = 0 by bisection in t. Front jumps are
reported from the right-to-left running minimum of t*: its generalized
inverse is the front position, and intervals where the envelope sits below
t* (equivalently where it is locally constant) are swept at a single time.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConstructionError, HorizonError, PreconditionError
from .paths import PiecewisePath
from .scale import ScalePair

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-12, limit=200)
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FrontScenario:
    """Scale pair plus piecewise-constant reaction rate and indicator source."""

    sp: ScalePair
    c_breaks: tuple[float, ...] = ()
    c_values: tuple[float, ...] = (1.0,)
    horizon: float = 100.0

    def __post_init__(self):
        if len(self.c_values) != len(self.c_breaks) + 1:
            raise ConstructionError("need one reaction value per piece")
        if any(c <= 0 for c in self.c_values):
            raise ConstructionError("reaction rates must be positive")
        if list(self.c_breaks) != sorted(set(self.c_breaks)):
            raise ConstructionError("reaction breakpoints must be sorted and unique")

    @property
    def homogeneous(self) -> bool:
        return len(set(self.c_values)) == 1

    def c_at(self, x: float) -> float:
        """Right-continuous reaction rate."""
        return self.c_values[bisect_right(list(self.c_breaks), x)]

    def c_at_array(self, xs: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.c_breaks), np.asarray(xs), side="right")
        return np.asarray(self.c_values)[idx]

    def c_wait(self, x: float) -> float:
        """Best attainable rate while waiting at x (max of adjacent pieces)."""
        best = self.c_at(x)
        for b in self.c_breaks:
            if math.isclose(b, x, abs_tol=1e-12):
                i = list(self.c_breaks).index(b)
                best = max(self.c_values[i], self.c_values[i + 1])
        return best

    def reaction(self, xs: np.ndarray, f: np.ndarray) -> np.ndarray:
        """KPP reaction c(x, f) = c(x) (1 - f)."""
        return self.c_at_array(xs) * (1.0 - np.asarray(f))


def quasi_distance(sp: ScalePair, x: float, y: float) -> float:
    """Integral of sqrt(u' v') between x and y; jumps of v contribute nothing."""
    a, b = sorted((float(x), float(y)))
    if a == b:
        return 0.0
    edges = [a] + [z for z in sp.breaks if a < z < b] + [b]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        if sp.u.is_affine and sp.v.is_affine:
            total += math.sqrt(sp.u.deriv_right(mid) * sp.v.deriv_right(mid)) * (hi - lo)
        else:
            total += quad(
                lambda z: math.sqrt(sp.u.deriv_right(z) * sp.v.deriv_right(z)),
                lo,
                hi,
                **_QUAD_OPTS,
            )[0]
    return total


# -- the duration optimization -------------------------------------------------


@dataclass
class _LegProblem:
    """Monotone descent x = q_0 > q_1 > ... > q_m = 0 with waits at each site.

    Decision variables are the leg durations s_i (> 0) and the wait
    durations w_j (>= 0), summing to t. The objective is
    sum c_leg_i s_i - p_i / s_i + sum c_wait_j w_j.
    """

    points: np.ndarray  # descending, q_0 = x .. q_m = 0
    p: np.ndarray  # quarter squared quasi-distance per leg
    c_leg: np.ndarray
    c_wait: np.ndarray

    @property
    def n_legs(self) -> int:
        return len(self.p)

    def objective(self, z: np.ndarray) -> float:
        s = z[: self.n_legs]
        w = z[self.n_legs :]
        if np.any(s <= 0):
            return -math.inf
        return float(
            np.dot(self.c_leg, s) - np.sum(self.p / s) + np.dot(self.c_wait, w)
        )


def _build_problem(scenario: FrontScenario, x: float) -> _LegProblem:
    sp = scenario.sp
    pts = sorted(
        {float(b) for b in sp.breaks if 0.0 < b < x}
        | {float(b) for b in scenario.c_breaks if 0.0 < b < x}
    )
    points = np.array([x] + pts[::-1] + [0.0])
    p = np.array(
        [
            (0.5 * quasi_distance(sp, points[i], points[i + 1])) ** 2
            for i in range(len(points) - 1)
        ]
    )
    c_leg = np.array(
        [scenario.c_at(0.5 * (points[i] + points[i + 1])) for i in range(len(points) - 1)]
    )
    c_wait = np.array([scenario.c_wait(q) for q in points])
    return _LegProblem(points, p, c_leg, c_wait)


def _golden_max(g, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - _GOLD * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _GOLD * (b - a)
            gd = g(d)
    return 0.5 * (a + b)

def _cd_solve(
    prob: _LegProblem,
    t: float,
    init: np.ndarray | None = None,
    tol: float = 1e-10,
    max_sweeps: int = 200,
) -> tuple[np.ndarray, float]:
    """Pairwise budget-exchange coordinate descent on the simplex."""
    nl = prob.n_legs
    nv = nl + len(prob.c_wait)
    if init is not None and len(init) == nv and abs(np.sum(init) - t) < 1e-9 * t:
        z = init.copy()
    else:
        z = np.zeros(nv)
        roots = np.sqrt(prob.p)
        z[:nl] = t * roots / np.sum(roots)
    floor = 1e-13 * t
    z[:nl] = np.maximum(z[:nl], floor)
    z *= t / np.sum(z)

    best = prob.objective(z)
    pairs = [(i, j) for i in range(nv) for j in range(i + 1, nv)]
    for _ in range(max_sweeps):
        improved = 0.0
        for i, j in pairs:
            budget = z[i] + z[j]
            if budget <= 2 * floor:
                continue
            lo = floor if i < nl else 0.0
            hi = budget - (floor if j < nl else 0.0)
            if hi <= lo:
                continue

            def g(xi, i=i, j=j, budget=budget):
                z[i], z[j] = xi, budget - xi
                return prob.objective(z)

            xi = _golden_max(g, lo, hi, tol)
            z[i], z[j] = xi, budget - xi
            val = prob.objective(z)
            if val > best:
                improved += val - best
                best = val
        if improved < 1e-13 * max(1.0, abs(best)):
            break
    # canonical representative: drain numerically-zero waits into the largest leg
    w = z[nl:]
    tiny = w < 1e-9 * t
    if np.any(tiny):
        spill = float(np.sum(w[tiny]))
        w[tiny] = 0.0
        z[np.argmax(z[:nl])] += spill
        best = prob.objective(z)
    return z, best


def w_value(
    scenario: FrontScenario,
    t: float,
    x: float,
    method: str = "auto",
    _warm: dict | None = None,
) -> float:
    """Value of the variational front problem at (t, x)."""
    if t <= 0:
        raise PreconditionError("t must be positive")
    if x <= 0.0:
        return scenario.c_wait(x) * t
    if scenario.homogeneous and method == "auto":
        c = scenario.c_values[0]
        d = quasi_distance(scenario.sp, 0.0, x)
        return c * t - d * d / (4.0 * t)
    prob = _build_problem(scenario, x)
    init = None
    if _warm is not None and "z" in _warm and "t" in _warm:
        init = _warm["z"] * (t / _warm["t"])
    z, val = _cd_solve(prob, t, init=init)
    if _warm is not None:
        _warm["z"], _warm["t"] = z, t
    return val


@dataclass(frozen=True)
class WaitEntry:
    point: float
    t_start: float
    t_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def optimize_path(
    scenario: FrontScenario, t: float, x: float, method: str = "auto"
) -> tuple[PiecewisePath, tuple[WaitEntry, ...], float]:
    """Maximizing path for W(t, x), its wait schedule, and the objective."""
    if t <= 0:
        raise PreconditionError("t must be positive")
    if x <= 0.0:
        return (
            PiecewisePath.constant(x, t),
            (WaitEntry(x, 0.0, t),),
            scenario.c_wait(x) * t,
        )
    prob = _build_problem(scenario, x)
    if scenario.homogeneous and method == "auto":
        roots = np.sqrt(prob.p)
        z = np.concatenate([t * roots / np.sum(roots), np.zeros(len(prob.c_wait))])
        val = prob.objective(z)
    else:
        z, val = _cd_solve(prob, t)
    nl = prob.n_legs
    s, w = z[:nl], z[nl:]

    times = [0.0]
    values = [float(prob.points[0])]
    waits: list[WaitEntry] = []
    clock = 0.0
    for i, q in enumerate(prob.points):
        if w[i] > 1e-12 * t:
            waits.append(WaitEntry(float(q), clock, clock + w[i]))
            clock += w[i]
            times.append(clock)
            values.append(float(q))
        if i < nl:
            clock += s[i]
            times.append(clock)
            values.append(float(prob.points[i + 1]))
    times[-1] = t  # absorb float drift in the last node
    return PiecewisePath(tuple(times), tuple(values)), tuple(waits), val


def front_time(
    scenario: FrontScenario, x: float, tol: float = 1e-9, method: str = "auto"
) -> float:
    """Root of t -> W(t, x), by bisection on its strict monotonicity in t."""
    if x <= 0.0:
        raise PreconditionError("the front time is defined for x > 0")
    warm: dict = {}
    w = lambda t: w_value(scenario, t, x, method=method, _warm=warm)

    t_lo = 1e-6
    while t_lo > 1e-15 and w(t_lo) >= 0.0:
        t_lo *= 0.01
    d = quasi_distance(scenario.sp, 0.0, x)
    t_hi = max(2.0 * d / (2.0 * math.sqrt(min(scenario.c_values))), 1e-3)
    while w(t_hi) <= 0.0:
        t_hi *= 2.0
        if t_hi > scenario.horizon:
            raise HorizonError(f"W(., x={x}) does not reach 0 before t={scenario.horizon}")
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        if w(mid) < 0.0:
            t_lo = mid
        else:
            t_hi = mid
    return 0.5 * (t_lo + t_hi)


# -- front geometry reports ------------------------------------------------------


@dataclass(frozen=True)
class JumpInterval:
    x_lo: float
    x_hi: float
    t_level: float


def front_jump_detector(
    scenario: FrontScenario,
    x_grid,
    flat_tol: float = 1e-6,
    method: str = "auto",
) -> tuple[JumpInterval, ...]:
    """Intervals of x swept by the front at a single time.

    The effective arrival time is the right-to-left running minimum of
    t*(x): its generalized inverse is the front position, and maximal runs
    where the envelope is constant are exactly the front's jumps. Empty for
    homogeneous reaction.
    """
    xs = np.asarray(sorted(float(x) for x in x_grid))
    if np.any(xs <= 0):
        raise PreconditionError("jump detection needs a grid of positive x")
    tstar = np.array([front_time(scenario, float(x), method=method) for x in xs])
    envelope = np.minimum.accumulate(tstar[::-1])[::-1]

    out: list[JumpInterval] = []
    run_start = None
    for i in range(len(xs) - 1):
        flat = envelope[i + 1] - envelope[i] < flat_tol
        if flat and run_start is None:
            run_start = i
        if (not flat or i == len(xs) - 2) and run_start is not None:
            stop = i + 1 if flat else i
            if stop > run_start:
                out.append(
                    JumpInterval(float(xs[run_start]), float(xs[stop]), float(envelope[run_start]))
                )
            run_start = None
    return tuple(out)


@dataclass(frozen=True)
class ConditionNEntry:
    x: float
    t_star: float
    worst_w: float
    ok: bool


@dataclass(frozen=True)
class ConditionNReport:
    entries: tuple[ConditionNEntry, ...]

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    @property
    def violations(self) -> tuple[ConditionNEntry, ...]:
        return tuple(e for e in self.entries if not e.ok)


def condition_n_check(
    scenario: FrontScenario,
    x_grid,
    margin: float = 1e-6,
    n_samples: int = 15,
    method: str = "auto",
) -> ConditionNReport:
    """Re-evaluate W along the optimizing path at front points.

    At a front point (t*, x) the optimizing path must not travel through
    strictly positive W; values above +margin are violations (the extremal
    itself lies on the zero level set, so the closure of {W < 0} is the
    honest hull).
    """
    entries = []
    for x in x_grid:
        x = float(x)
        ts = front_time(scenario, x, method=method)
        path, _, _ = optimize_path(scenario, ts, x, method=method)
        worst = -math.inf
        for frac in np.linspace(0.05, 0.95, n_samples):
            s = frac * ts
            pos = path.value(s)
            remaining = ts - s
            if remaining <= 0:
                continue
            wv = w_value(scenario, remaining, pos, method=method)
            worst = max(worst, wv)
        scale = max(1.0, scenario.c_wait(x) * ts)
        entries.append(ConditionNEntry(x, ts, worst, worst <= margin * scale))
    return ConditionNReport(tuple(entries))


class FrontSolution:
    """Bundled front queries with a cached arrival-time map."""

    def __init__(self, scenario: FrontScenario, method: str = "auto"):
        self.scenario = scenario
        self.method = method
        self._tstar: dict[float, float] = {}

    def w(self, t: float, x: float) -> float:
        return w_value(self.scenario, t, x, method=self.method)

    def t_star(self, x: float) -> float:
        key = float(x)
        if key not in self._tstar:
            self._tstar[key] = front_time(self.scenario, key, method=self.method)
        return self._tstar[key]

    def optimal_path(self, t: float, x: float):
        return optimize_path(self.scenario, t, x, method=self.method)
