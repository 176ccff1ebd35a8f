"""Continuous piecewise-linear test paths and their regularity structure.

Paths are the dense subclass on which the action functional is evaluated:
nodes (t_k, x_k) with strictly increasing times, linear in between. The
module provides exact composition with the scale function, the uniform
metric, closed-form splitting at spatial levels, and occupation reports
for the classified non-smoothness points of a scale pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConstructionError, DomainError, PreconditionError
from .scale import PointClass, ScalePair


@dataclass(frozen=True)
class PiecewisePath:
    """Piecewise-linear path on [0, T], immutable."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != x.shape or t.size < 2:
            raise ConstructionError("need matching 1-d node arrays with >= 2 nodes")
        if t[0] != 0.0:
            raise ConstructionError("first node time must be 0")
        if not np.all(np.diff(t) > 0):
            raise ConstructionError("node times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise ConstructionError("nodes must be finite")

    @property
    def T(self) -> float:
        return self.times[-1]

    @property
    def start(self) -> float:
        return self.values[0]

    @property
    def end(self) -> float:
        return self.values[-1]

    def value(self, t: float) -> float:
        if not (0.0 <= t <= self.T):
            raise DomainError(f"t={t} outside [0, {self.T}]")
        return float(np.interp(t, self.times, self.values))

    __call__ = value

    def value_array(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if ts.size and (ts.min() < -1e-12 or ts.max() > self.T + 1e-12):
            raise DomainError("query times outside [0, T]")
        return np.interp(ts, self.times, self.values)

    def segments(self) -> list[tuple[float, float, float, float]]:
        """(t0, t1, x0, x1) per linear node interval."""
        return [
            (self.times[k], self.times[k + 1], self.values[k], self.values[k + 1])
            for k in range(len(self.times) - 1)
        ]

    def range(self) -> tuple[float, float]:
        return min(self.values), max(self.values)

    # -- constructors ---------------------------------------------------------

    @classmethod
    def from_nodes(cls, nodes: Iterable[tuple[float, float]]) -> "PiecewisePath":
        ts, xs = zip(*nodes)
        return cls(tuple(float(t) for t in ts), tuple(float(x) for x in xs))

    @classmethod
    def linear(cls, x0: float, x1: float, T: float) -> "PiecewisePath":
        return cls((0.0, float(T)), (float(x0), float(x1)))

    @classmethod
    def constant(cls, x: float, T: float) -> "PiecewisePath":
        return cls((0.0, float(T)), (float(x), float(x)))

    def refined(self, extra_per_segment: int) -> "PiecewisePath":
        """Same path with extra collinear nodes inside each segment."""
        ts: list[float] = []
        xs: list[float] = []
        for t0, t1, x0, x1 in self.segments():
            grid = np.linspace(t0, t1, extra_per_segment + 2)[:-1]
            ts.extend(grid)
            xs.extend(np.interp(grid, [t0, t1], [x0, x1]))
        ts.append(self.times[-1])
        xs.append(self.values[-1])
        return PiecewisePath(tuple(ts), tuple(xs))

    def time_scaled(self, c: float) -> "PiecewisePath":
        """Reparameterize onto [0, c*T] (same trace, slopes divided by c)."""
        return PiecewisePath(tuple(c * t for t in self.times), self.values)

    def with_wait(self, at_time: float, duration: float) -> "PiecewisePath":
        """Insert a constancy interval of the given duration at an existing node time."""
        if duration <= 0:
            return self
        ts, xs = [], []
        inserted = False
        for t, x in zip(self.times, self.values):
            if not inserted and math.isclose(t, at_time, abs_tol=1e-12):
                ts.extend([t, t + duration])
                xs.extend([x, x])
                inserted = True
            elif inserted:
                ts.append(t + duration)
                xs.append(x)
            else:
                ts.append(t)
                xs.append(x)
        if not inserted:
            raise PreconditionError(f"no node at time {at_time} to attach a wait to")
        return PiecewisePath(tuple(ts), tuple(xs))


# -- sub-segment splitting ----------------------------------------------------


@dataclass(frozen=True)
class SubSegment:
    """One piece of a path segment after splitting at spatial levels.

    Either moving (slope != 0, open x-interval free of interior levels) or
    constant (slope == 0). The x endpoints of moving sub-segments land
    exactly on the splitting levels.
    """

    t0: float
    t1: float
    x0: float
    x1: float

    @property
    def slope(self) -> float:
        return (self.x1 - self.x0) / (self.t1 - self.t0)

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    @property
    def moving(self) -> bool:
        return self.x1 != self.x0

    @property
    def x_mid(self) -> float:
        return 0.5 * (self.x0 + self.x1)


def split_at_levels(path: PiecewisePath, levels: Sequence[float]) -> list[SubSegment]:
    """Split every path segment at its crossings of the given levels.

    Crossing times come from exact affine inversion, and the sub-segment
    endpoints are pinned to the level values so downstream piece lookups
    are unambiguous.
    """
    lv = np.asarray(sorted(set(float(l) for l in levels)))
    out: list[SubSegment] = []
    for t0, t1, x0, x1 in path.segments():
        if x0 == x1:
            out.append(SubSegment(t0, t1, x0, x1))
            continue
        a, b = (x0, x1) if x0 < x1 else (x1, x0)
        inner = lv[(lv > a) & (lv < b)]
        if x0 > x1:
            inner = inner[::-1]
        m = (x1 - x0) / (t1 - t0)
        cur_t, cur_x = t0, x0
        for level in inner:
            tc = t0 + (float(level) - x0) / m
            out.append(SubSegment(cur_t, tc, cur_x, float(level)))
            cur_t, cur_x = tc, float(level)
        out.append(SubSegment(cur_t, t1, cur_x, x1))
    return out


# -- operations ----------------------------------------------------------------


def compose_u(sp: ScalePair, path: PiecewisePath, refine: int = 0) -> PiecewisePath:
    """The path t -> u(path(t)) with kinks inserted at scale-break crossings.

    Exact (piecewise-linear) when u is piecewise affine; for smooth scale
    pieces pass ``refine`` > 0 to sample extra nodes per sub-segment.
    """
    lo, hi = sp.domain
    pmin, pmax = path.range()
    if pmin < lo - 1e-12 or pmax > hi + 1e-12:
        raise DomainError("path leaves the scale pair's domain")
    subs = split_at_levels(path, sp.u.breaks)
    ts: list[float] = [subs[0].t0]
    xs: list[float] = [sp.eval_u(subs[0].x0)]
    for s in subs:
        if not sp.u.is_affine and refine > 0 and s.moving:
            grid = np.linspace(s.t0, s.t1, refine + 2)[1:]
            for t in grid:
                ts.append(float(t))
                xs.append(sp.eval_u(s.x0 + s.slope * (t - s.t0)))
        else:
            ts.append(s.t1)
            xs.append(sp.eval_u(s.x1))
    # collapse duplicate times introduced by zero-length crossings
    keep_t, keep_x = [ts[0]], [xs[0]]
    for t, x in zip(ts[1:], xs[1:]):
        if t > keep_t[-1] + 0.0:
            keep_t.append(t)
            keep_x.append(x)
    return PiecewisePath(tuple(keep_t), tuple(keep_x))


def sup_distance(p1: PiecewisePath, p2: PiecewisePath) -> float:
    """Exact uniform distance between two paths with equal horizons.

    The difference of two piecewise-linear functions is piecewise linear,
    so the supremum is attained on the merged node set.
    """
    if p1.T != p2.T:
        raise PreconditionError(f"horizon mismatch: {p1.T} vs {p2.T}")
    ts = np.union1d(np.asarray(p1.times), np.asarray(p2.times))
    return float(np.max(np.abs(p1.value_array(ts) - p2.value_array(ts))))


@dataclass(frozen=True)
class VisitedPoint:
    x: float
    point_class: PointClass
    occupation: float


@dataclass(frozen=True)
class PathRegularityReport:
    """Occupation measures of the classified point sets along a path.

    For piecewise-linear paths, positive occupation happens only on
    constancy intervals; moving segments meet any finite point set on a
    null set of times.
    """

    time_in_U: float
    time_in_V: float
    time_in_Vd: float
    time_smooth_constant: float
    time_moving: float
    visited_points: tuple[VisitedPoint, ...]

    @property
    def time_in_E(self) -> float:
        return self.time_in_U + self.time_in_V

    @property
    def total(self) -> float:
        return (
            self.time_in_U
            + self.time_in_V
            + self.time_in_Vd
            + self.time_smooth_constant
            + self.time_moving
        )


def regularity_report(sp: ScalePair, path: PiecewisePath) -> PathRegularityReport:
    lo, hi = sp.domain
    pmin, pmax = path.range()
    if pmin < lo - 1e-12 or pmax > hi + 1e-12:
        raise DomainError("path leaves the scale pair's domain")

    classified = dict(sp.classified_points())
    occupation: dict[float, float] = {}
    touched: dict[float, PointClass] = {}
    buckets = {PointClass.CORNER_U: 0.0, PointClass.CORNER_V: 0.0, PointClass.JUMP_V: 0.0}
    smooth_const = 0.0
    moving = 0.0

    for s in split_at_levels(path, list(classified)):
        if s.moving:
            moving += s.duration
            a, b = min(s.x0, s.x1), max(s.x0, s.x1)
            for z, c in classified.items():
                if a <= z <= b:
                    touched.setdefault(z, c)
                    occupation.setdefault(z, 0.0)
            continue
        z = s.x0
        cls = None
        for zc, c in classified.items():
            if math.isclose(zc, z, abs_tol=1e-12):
                z, cls = zc, c
                break
        if cls is None:
            smooth_const += s.duration
        else:
            buckets[cls] += s.duration
            touched.setdefault(z, cls)
            occupation[z] = occupation.get(z, 0.0) + s.duration

    visited = tuple(
        VisitedPoint(z, touched[z], occupation.get(z, 0.0)) for z in sorted(touched)
    )
    return PathRegularityReport(
        time_in_U=buckets[PointClass.CORNER_U],
        time_in_V=buckets[PointClass.CORNER_V],
        time_in_Vd=buckets[PointClass.JUMP_V],
        time_smooth_constant=smooth_const,
        time_moving=moving,
        visited_points=visited,
    )
