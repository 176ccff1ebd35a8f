"""Deterministic time changes induced by a scale pair along a path.

``sigma`` integrates the reciprocal half-derivative of v with respect to u
along a piecewise-linear path, producing a continuous non-decreasing
:class:`MonotoneTimeMap`; the map is flat exactly while the path waits at a
jump point of v. ``gamma`` is the right-continuous generalized inverse.

``mollify`` builds a speed function with continuous derivative with respect
to u: jumps become steep affine ramps of width 1/n (placed left of the jump
by default, so the right-continuous limit is preserved) and every corner is
blended over a comparable window; ``sigma_n`` is then strictly increasing
for every n and converges to ``sigma`` whenever the path spends no time on
corner points.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import ConstructionError, DomainError, PreconditionError, RangeError
from .paths import PiecewisePath, SubSegment, split_at_levels
from .scale import PointClass, ScalePair

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-12, limit=200)


@dataclass(frozen=True)
class TimeSegment:
    """Monotone map piece on [t0, t1]; affine between (s0, s1) unless a curve is given."""

    t0: float
    t1: float
    s0: float
    s1: float
    curve: Callable[[float], float] | None = None

    @property
    def flat(self) -> bool:
        return self.s1 == self.s0

    def value(self, t: float) -> float:
        if self.curve is not None:
            return self.curve(t)
        if self.t1 == self.t0:
            return self.s0
        w = (t - self.t0) / (self.t1 - self.t0)
        return self.s0 + w * (self.s1 - self.s0)

    def invert(self, s: float) -> float:
        """t with value(t) = s, for non-flat segments."""
        if self.curve is not None:
            f = lambda t: self.curve(t) - s
            lo, hi = f(self.t0), f(self.t1)
            if lo >= 0:
                return self.t0
            if hi <= 0:
                return self.t1
            return brentq(f, self.t0, self.t1, xtol=1e-15)
        return self.t0 + (s - self.s0) * (self.t1 - self.t0) / (self.s1 - self.s0)


@dataclass(frozen=True)
class MonotoneTimeMap:
    """Continuous non-decreasing map on [0, T] with its generalized inverse."""

    segments: tuple[TimeSegment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ConstructionError("empty time map")
        prev = self.segments[0]
        if prev.t0 != 0.0:
            raise ConstructionError("time map must start at t=0")
        for seg in self.segments[1:]:
            if not (math.isclose(seg.t0, prev.t1, abs_tol=1e-12) and seg.s0 == prev.s1):
                raise ConstructionError("time map segments must chain continuously")
            prev = seg

    @property
    def T(self) -> float:
        return self.segments[-1].t1

    @property
    def total(self) -> float:
        return self.segments[-1].s1

    def value(self, t: float) -> float:
        if not (-1e-12 <= t <= self.T + 1e-12):
            raise DomainError(f"t={t} outside [0, {self.T}]")
        t = min(max(t, 0.0), self.T)
        ends = [seg.t1 for seg in self.segments]
        i = min(bisect_right(ends, t), len(self.segments) - 1)
        return self.segments[i].value(t)

    __call__ = value

    def value_array(self, ts: np.ndarray) -> np.ndarray:
        return np.array([self.value(float(t)) for t in np.asarray(ts).ravel()])

    def gamma(self, t: float) -> float:
        """Right-continuous generalized inverse inf{s : value(s) > t}."""
        if t < -1e-12 or t > self.total + 1e-12:
            raise RangeError(f"t={t} outside [0, {self.total}]")
        t = min(max(t, 0.0), self.total)
        for seg in self.segments:
            if seg.s1 > t:
                return seg.invert(max(t, seg.s0))
        return self.T

    def gamma_left(self, t: float) -> float:
        """Left limit of gamma at t (equals gamma off the flat levels)."""
        if t <= 0.0:
            return 0.0
        if t > self.total + 1e-12:
            raise RangeError(f"t={t} outside [0, {self.total}]")
        t = min(t, self.total)
        for seg in self.segments:
            if seg.s1 >= t:
                if seg.flat:
                    return seg.t0
                return seg.invert(max(t, seg.s0))
        return self.T

    def flat_intervals(self) -> list[tuple[float, float]]:
        """Maximal intervals on which the map is constant."""
        out: list[list[float]] = []
        for seg in self.segments:
            if seg.flat and seg.t1 > seg.t0:
                if out and math.isclose(out[-1][1], seg.t0, abs_tol=1e-12):
                    out[-1][1] = seg.t1
                else:
                    out.append([seg.t0, seg.t1])
        return [(a, b) for a, b in out]

    def rows(self, n_grid: int = 0) -> list[tuple[float, float]]:
        """(t, value) pairs at the exact breakpoints plus an optional grid."""
        ts = {seg.t0 for seg in self.segments} | {self.T}
        if n_grid:
            ts |= set(np.linspace(0.0, self.T, n_grid))
        return [(t, self.value(t)) for t in sorted(ts)]


# -- the deterministic time change ---------------------------------------------


def _moving_rate(sp: ScalePair, sub: SubSegment) -> float | None:
    """Constant integrand 2 u'/v' on the sub-segment, or None when it varies."""
    up = sp.u
    vp = sp.v
    if up.is_affine and vp.is_affine:
        x = sub.x_mid
        return 2.0 * up.deriv_right(x) / vp.deriv_right(x)
    return None


def sigma(sp: ScalePair, path: PiecewisePath) -> MonotoneTimeMap:
    """Integral of [dv_du / 2]^{-1} along the path, as a monotone map.

    The integrand uses the minimum of the sided derivatives while the path
    waits on a corner point and is exactly 0 on jump points of v, so waiting
    intervals at jumps map to flat stretches.
    """
    lo, hi = sp.domain
    pmin, pmax = path.range()
    if pmin < lo - 1e-12 or pmax > hi + 1e-12:
        raise DomainError("path leaves the scale pair's domain")

    segs: list[TimeSegment] = []
    s = 0.0
    for sub in split_at_levels(path, sp.breaks):
        if not sub.moving:
            d = sp.dv_du(sub.x0)
            rate = 0.0 if math.isinf(d) else 2.0 / d
            s1 = s + rate * sub.duration
            segs.append(TimeSegment(sub.t0, sub.t1, s, s1))
            s = s1
            continue
        rate = _moving_rate(sp, sub)
        if rate is not None:
            s1 = s + rate * sub.duration
            segs.append(TimeSegment(sub.t0, sub.t1, s, s1))
            s = s1
            continue
        # smooth piece: quadrature in space, curve closure for inversion
        a, b = sorted((sub.x0, sub.x1))
        absm = abs(sub.slope)
        integrand = lambda x: sp.u.deriv_right(x) / sp.v.deriv_right(x)
        inc = (2.0 / absm) * quad(integrand, a, b, **_QUAD_OPTS)[0]

        def curve(t, s0=s, sub=sub, integrand=integrand, absm=absm):
            xa, xb = sorted((sub.x0, sub.x0 + sub.slope * (t - sub.t0)))
            return s0 + (2.0 / absm) * quad(integrand, xa, xb, **_QUAD_OPTS)[0]

        segs.append(TimeSegment(sub.t0, sub.t1, s, s + inc, curve))
        s += inc
    return MonotoneTimeMap(tuple(segs))


def gamma(tmap: MonotoneTimeMap, t: float) -> float:
    """Generalized inverse of a monotone time map (module-level alias)."""
    return tmap.gamma(t)


# -- mollified speed functions ---------------------------------------------------


@dataclass(frozen=True)
class MollifiedPair:
    """Speed function with continuous derivative with respect to u.

    Represented in the u-variable y = u(x): the derivative dv_n/du is a
    continuous piecewise-linear function of y with knots ``y_knots`` and
    values ``d_knots``; its exact antiderivative gives v_n. Outside the
    mollification windows v_n coincides with v. Pairs without any
    non-smoothness need nothing mollified and delegate to the pair itself
    (``trivial`` mode, v_n = v exactly for every n).
    """

    sp: ScalePair
    n: int
    placement: str
    y_knots: tuple[float, ...]
    d_knots: tuple[float, ...]
    w_knots: tuple[float, ...]
    trivial: bool = False

    @property
    def ramp_width(self) -> float:
        return 1.0 / self.n

    def deriv_y(self, y) -> np.ndarray | float:
        if not self.trivial:
            return np.interp(y, self.y_knots, self.d_knots)
        ys = np.asarray(y, dtype=float)
        xs = self.sp.u.inverse_array(ys)
        if self.sp.u.is_affine and self.sp.v.is_affine:
            breaks = np.asarray(self.sp.breaks)
            u_slopes = np.array([p.slope for p in self.sp.u.pieces])
            # trivial mode: derivatives agree across breaks, so any side works
            v_by_u = np.array(
                [self.sp.v.deriv_right(0.5 * (p.lo + p.hi)) for p in self.sp.u.pieces]
            ) / u_slopes
            idx = np.minimum(np.searchsorted(breaks, xs, side="right"), len(v_by_u) - 1)
            out = v_by_u[idx]
        else:
            out = np.array(
                [self.sp.dv_du_interval(float(x)) for x in xs.ravel()]
            ).reshape(xs.shape)
        return out if out.shape else float(out)

    def dvn_du(self, x: float) -> float:
        if self.trivial:
            return self.sp.dv_du_interval(x)
        return float(np.interp(self.sp.eval_u(x), self.y_knots, self.d_knots))

    def vn(self, x) -> np.ndarray | float:
        xs = np.asarray(x, dtype=float)
        if self.trivial:
            out = self.sp.v.value_array(xs)
            return out if out.shape else float(out)
        y = self.sp.u.value_array(xs)
        yk = np.asarray(self.y_knots)
        dk = np.asarray(self.d_knots)
        wk = np.asarray(self.w_knots)
        i = np.clip(np.searchsorted(yk, y, side="right") - 1, 0, len(yk) - 2)
        dy = y - yk[i]
        slope_rate = (dk[i + 1] - dk[i]) / (yk[i + 1] - yk[i])
        out = wk[i] + dk[i] * dy + 0.5 * slope_rate * dy * dy
        return out if out.shape else float(out)

    @property
    def knot_positions_x(self) -> tuple[float, ...]:
        if self.trivial:
            return ()
        return tuple(self.sp.u_inverse(y) for y in self.y_knots[1:-1])


def _window_positions(kind: str, y: float, wr: float, placement: str) -> list[float]:
    """Derivative knot positions replacing one structure point.

    Left-placed jump ramps end with a short exit blend whose tail past the
    jump point is only wr/100 wide: the ramp mass stays left of the jump
    (preserving the right-continuous limit) while the derivative at the
    jump point itself remains of ramp order, so waiting there slows the
    mollified clock down to nothing as n grows.
    """
    if kind == "corner":
        h = wr / 2.0
        return [y - h, y, y + h]
    h = wr / 4.0
    if placement == "left":
        tail = wr / 100.0
        return [y - wr, y - wr + h, y - 4 * tail, y + tail]
    if placement == "centered":
        a, b = y - wr / 2.0, y + wr / 2.0
        return [a, a + h, b - h, b]
    raise ConstructionError(f"unknown mollifier placement {placement!r}")


def _window_values(kind: str, positions: list[float], m_l: float, m_r: float,
                   rise: float) -> list[float]:
    """Derivative knot values chosen to reproduce the exact rise across the window."""
    if kind == "corner":
        h = positions[1] - positions[0]
        m_mid = rise / h - 0.5 * (m_l + m_r)
        if m_mid <= 0:
            raise ConstructionError("corner blend slope must be positive")
        return [m_l, m_mid, m_r]
    p0, p1, p2, p3 = positions
    blend_in = p1 - p0
    core = p2 - p1
    blend_out = p3 - p2
    # trapezoid areas: blend_in*(m_l+s)/2 + core*s + blend_out*(s+m_r)/2 = rise
    denom = 0.5 * blend_in + core + 0.5 * blend_out
    s = (rise - 0.5 * blend_in * m_l - 0.5 * blend_out * m_r) / denom
    if s <= 0:
        raise ConstructionError("mollifier core slope must be positive")
    return [m_l, s, s, m_r]


def mollify(sp: ScalePair, n: int, placement: str = "left") -> MollifiedPair:
    """Replace jumps of v by ramps of width 1/n and blend all corners.

    The ramp carries the exact jump mass; with the default left placement
    the jump point itself maps to the ramp's right end. Window widths are
    capped at a fraction of the gap between structure points so windows
    never overlap.
    """
    if n < 1:
        raise PreconditionError("mollifier scale n must be >= 1")
    structure = sp.classified_points()
    lo, hi = sp.domain
    y_lo, y_hi = sp.eval_u(lo), sp.eval_u(hi)

    if not structure:
        return MollifiedPair(sp, n, placement, (), (), (), trivial=True)
    if not (sp.u.is_affine and sp.v.is_affine):
        raise ConstructionError("mollification of non-smooth pairs requires affine pieces")

    ys = [sp.eval_u(x) for x, _ in structure]
    wr = 1.0 / n
    knots_y: list[float] = [y_lo]
    knots_d: list[float] = []

    def base_d(y: float, side: str) -> float:
        x = sp.u_inverse(y)
        return (
            sp.v.deriv_right(x) / sp.u.deriv_right(x)
            if side == "right"
            else sp.v.deriv_left(x) / sp.u.deriv_left(x)
        )

    knots_d.append(base_d(y_lo, "right"))
    for k, ((x, cls), y) in enumerate(zip(structure, ys)):
        gap_l = y - (ys[k - 1] if k > 0 else y_lo)
        gap_r = (ys[k + 1] if k + 1 < len(ys) else y_hi) - y
        wr_eff = min(wr, 0.3 * gap_l, 0.3 * gap_r)
        if wr_eff <= 0:
            raise ConstructionError("no room to mollify: structure points too close")
        m_l, m_r = base_d(y, "left"), base_d(y, "right")
        kind = "jump" if cls is PointClass.JUMP_V else "corner"
        wys = _window_positions(kind, y, wr_eff, placement)
        rise = sp.eval_v(sp.u_inverse(wys[-1])) - sp.eval_v(sp.u_inverse(wys[0]))
        wds = _window_values(kind, wys, m_l, m_r, rise)
        knots_y.extend(wys)
        knots_d.extend(wds)
    knots_y.append(y_hi)
    knots_d.append(base_d(y_hi, "left"))

    yk = np.asarray(knots_y)
    dk = np.asarray(knots_d)
    if not np.all(np.diff(yk) > 0):
        raise ConstructionError("mollifier knots must be increasing")
    # exact antiderivative of the piecewise-linear derivative
    rises = 0.5 * (dk[:-1] + dk[1:]) * np.diff(yk)
    wk = sp.eval_v(lo) + np.concatenate([[0.0], np.cumsum(rises)])
    return MollifiedPair(sp, n, placement, tuple(yk), tuple(dk), tuple(wk))


def sigma_n(mp: MollifiedPair, path: PiecewisePath) -> MonotoneTimeMap:
    """Time change for the mollified speed; strictly increasing for every n."""
    sp = mp.sp
    if mp.trivial:
        return sigma(sp, path)
    lo, hi = sp.domain
    pmin, pmax = path.range()
    if pmin < lo - 1e-12 or pmax > hi + 1e-12:
        raise DomainError("path leaves the scale pair's domain")

    levels = set(sp.breaks)
    levels.update(mp.knot_positions_x)
    segs: list[TimeSegment] = []
    s = 0.0
    for sub in split_at_levels(path, sorted(levels)):
        if not sub.moving:
            rate = 2.0 / mp.dvn_du(sub.x0)
            s1 = s + rate * sub.duration
            segs.append(TimeSegment(sub.t0, sub.t1, s, s1))
            s = s1
            continue
        y0 = sp.eval_u(sub.x0)
        y1 = sp.eval_u(sub.x1)
        d0 = float(mp.deriv_y(y0))
        d1 = float(mp.deriv_y(y1))
        dt = sub.duration
        beta = (d1 - d0) / dt
        if abs(beta) * dt < 1e-13 * max(d0, d1):
            rate = 0.5 * (2.0 / d0 + 2.0 / d1)
            s1 = s + rate * dt
            segs.append(TimeSegment(sub.t0, sub.t1, s, s1))
            s = s1
            continue
        inc = (2.0 / beta) * math.log(d1 / d0)

        def curve(t, s0=s, t0=sub.t0, d0=d0, beta=beta):
            return s0 + (2.0 / beta) * math.log((d0 + beta * (t - t0)) / d0)

        segs.append(TimeSegment(sub.t0, sub.t1, s, s + inc, curve))
        s += inc
    return MonotoneTimeMap(tuple(segs))


# -- structural check -------------------------------------------------------------


@dataclass(frozen=True)
class ConstancyReport:
    ok: bool
    violations: tuple[tuple[float, float, float], ...]  # (t0, t1, path oscillation)


def check_constancy_on_gamma_jump(path: PiecewisePath, tmap: MonotoneTimeMap,
                                  tol: float = 1e-9) -> ConstancyReport:
    """Verify the path is constant across every flat stretch of the map.

    Flat stretches of sigma are exactly the jumps of gamma; maps produced by
    ``sigma`` must never be flat where the path moves.
    """
    violations = []
    for a, b in tmap.flat_intervals():
        ts = [a, b] + [t for t in path.times if a < t < b]
        vals = [path.value(t) for t in ts]
        osc = max(vals) - min(vals)
        if osc > tol * max(1.0, abs(vals[0])):
            violations.append((a, b, osc))
    return ConstancyReport(ok=not violations, violations=tuple(violations))
