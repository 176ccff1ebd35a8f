"""Scale/speed pairs (u, v) for generalized one-dimensional diffusions.

A :class:`ScalePair` holds two strictly increasing functions on a common
closed domain: the scale function u (continuous) and the speed function v
(right-continuous, jumps allowed). Non-smoothness points are classified as

- ``CORNER_U``  -- u has distinct sided derivatives,
- ``CORNER_V``  -- v is continuous but has distinct sided derivatives,
- ``JUMP_V``    -- v has a positive jump,

with smooth points everywhere else. The derivative of v with respect to u
uses the minimum of the sided derivatives at corner points and an infinity
sentinel at jump points, so the time-change integrand 1 / (dv/du / 2) is
exactly zero there.

Pairs are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import ConstructionError, DomainError, RangeError
from .pieces import AffinePiece, IntegralPiece, Piece, TabulatedPiece, piece_inverse_checked

_DERIV_EQ_RTOL = 1e-9
_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-12, limit=200)


class PointClass(enum.Enum):
    SMOOTH = "smooth"
    CORNER_U = "corner_u"
    CORNER_V = "corner_v"
    JUMP_V = "jump_v"


@dataclass(frozen=True)
class PiecewiseMonotone:
    """Strictly increasing piecewise map with optional jumps at breakpoints.

    Pieces are contiguous and chained: piece i+1 starts at the value piece i
    ends with, plus the jump assigned to the shared breakpoint. A point x on
    a breakpoint evaluates on the right piece, making the map
    right-continuous; jump-free maps are plainly continuous.
    """

    pieces: tuple[Piece, ...]
    jumps: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.pieces:
            raise ConstructionError("at least one piece required")
        if len(self.jumps) != len(self.pieces) - 1:
            raise ConstructionError("need exactly one jump entry per interior breakpoint")
        for j in self.jumps:
            if j < 0 or not math.isfinite(j):
                raise ConstructionError(f"jump sizes must be finite and >= 0, got {j}")
        for left, right, j in zip(self.pieces, self.pieces[1:], self.jumps):
            if not math.isclose(left.hi, right.lo, rel_tol=0, abs_tol=1e-12):
                raise ConstructionError("pieces must tile the domain contiguously")
            if not math.isclose(right.y_lo, left.y_hi + j, rel_tol=1e-12, abs_tol=1e-12):
                raise ConstructionError("piece values must chain (previous end + jump)")

    # -- geometry -----------------------------------------------------------

    @property
    def lo(self) -> float:
        return self.pieces[0].lo

    @property
    def hi(self) -> float:
        return self.pieces[-1].hi

    @property
    def breaks(self) -> tuple[float, ...]:
        return tuple(p.hi for p in self.pieces[:-1])

    @property
    def is_affine(self) -> bool:
        return all(p.is_affine for p in self.pieces)

    def _index_right(self, x: float) -> int:
        # piece governing [break, next break): right-continuous selection
        return bisect_right(list(self.breaks), x)

    def _index_left(self, x: float) -> int:
        return bisect_left(list(self.breaks), x)

    def _check_domain(self, x: float):
        if not (self.lo - 1e-12 <= x <= self.hi + 1e-12):
            raise DomainError(f"x={x} outside domain [{self.lo}, {self.hi}]")

    # -- evaluation ---------------------------------------------------------

    def value(self, x: float) -> float:
        """Right-continuous value at x."""
        self._check_domain(x)
        i = min(self._index_right(x), len(self.pieces) - 1)
        return self.pieces[i].value(x)

    def value_left(self, x: float) -> float:
        """Left limit at x (equals value(x) wherever the map is continuous)."""
        self._check_domain(x)
        i = self._index_left(x)
        return self.pieces[i].value(x)

    def jump_at(self, x: float) -> float:
        for b, j in zip(self.breaks, self.jumps):
            if math.isclose(b, x, rel_tol=0, abs_tol=1e-12):
                return j
        return 0.0

    def deriv_right(self, x: float) -> float:
        self._check_domain(x)
        i = min(self._index_right(x), len(self.pieces) - 1)
        return self.pieces[i].derivative(x)

    def deriv_left(self, x: float) -> float:
        self._check_domain(x)
        i = self._index_left(x) if x > self.lo else 0
        i = min(i, len(self.pieces) - 1)
        return self.pieces[i].derivative(x)

    def inverse(self, y: float) -> float:
        """x with value(x) = y; jumped-over values have no preimage."""
        lo_val, hi_val = self.pieces[0].value(self.lo), self.pieces[-1].y_hi
        span = max(1.0, abs(hi_val - lo_val))
        if y < lo_val - 1e-9 * span or y > hi_val + 1e-9 * span:
            raise RangeError(f"value {y} outside range [{lo_val}, {hi_val}]")
        for p in self.pieces:
            if y <= p.y_hi or p is self.pieces[-1]:
                return piece_inverse_checked(p, y)
        raise RangeError(f"value {y} not attained")  # pragma: no cover

    def value_array(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized right-continuous evaluation (fast path for affine maps)."""
        xs = np.asarray(xs, dtype=float)
        if self.is_affine:
            idx = np.searchsorted(np.asarray(self.breaks), xs, side="right")
            idx = np.minimum(idx, len(self.pieces) - 1)
            lo = np.array([p.lo for p in self.pieces])[idx]
            y0 = np.array([p.y_lo for p in self.pieces])[idx]
            sl = np.array([p.slope for p in self.pieces])[idx]
            return y0 + sl * (xs - lo)
        return np.array([self.value(float(x)) for x in xs.ravel()]).reshape(xs.shape)

    def inverse_array(self, ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=float)
        if self.is_affine:
            y_his = np.array([p.y_hi for p in self.pieces[:-1]])
            idx = np.searchsorted(y_his, ys, side="right")
            lo = np.array([p.lo for p in self.pieces])[idx]
            y0 = np.array([p.y_lo for p in self.pieces])[idx]
            sl = np.array([p.slope for p in self.pieces])[idx]
            return lo + (ys - y0) / sl
        return np.array([self.inverse(float(y)) for y in ys.ravel()]).reshape(ys.shape)

    def derivative_bounds(self) -> tuple[float, float]:
        los, his = zip(*(p.derivative_bounds() for p in self.pieces))
        return min(los), max(his)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_slopes(
        cls,
        domain: tuple[float, float],
        breakpoints: Sequence[float],
        slopes: Sequence[float],
        anchor: tuple[float, float] = (0.0, 0.0),
        jumps: dict[float, float] | None = None,
    ) -> "PiecewiseMonotone":
        """Piecewise-affine map with given slopes between breakpoints.

        ``anchor = (x0, y0)`` pins value(x0) = y0 (x0 must not sit inside a
        jump; the anchored value is the right-continuous one).
        """
        lo, hi = float(domain[0]), float(domain[1])
        bps = [float(b) for b in breakpoints]
        if any(not lo < b < hi for b in bps) or sorted(bps) != bps or len(set(bps)) != len(bps):
            raise ConstructionError("breakpoints must be strictly inside the domain, sorted, unique")
        if len(slopes) != len(bps) + 1:
            raise ConstructionError("need one slope per interval")
        jump_map = {float(k): float(v) for k, v in (jumps or {}).items()}
        for k in jump_map:
            if not any(math.isclose(k, b, abs_tol=1e-12) for b in bps):
                raise ConstructionError(f"jump location {k} is not a breakpoint")

        edges = [lo] + bps + [hi]
        jseq = tuple(jump_map.get(b, 0.0) for b in bps)
        # chain values from a provisional start, then shift to hit the anchor
        pieces: list[AffinePiece] = []
        y = 0.0
        for (a, b), s, j in zip(
            zip(edges[:-1], edges[1:]), slopes, (0.0,) + jseq
        ):
            y += j
            pieces.append(AffinePiece(a, b, y, float(s)))
            y = pieces[-1].y_hi
        provisional = cls(tuple(pieces), jseq)
        x0, y0 = anchor
        shift = y0 - provisional.value(x0)
        shifted = tuple(
            AffinePiece(p.lo, p.hi, p.y_lo + shift, p.slope) for p in pieces
        )
        return cls(shifted, jseq)

    @classmethod
    def single(cls, piece: Piece) -> "PiecewiseMonotone":
        return cls((piece,), ())


@dataclass(frozen=True)
class GluingData:
    """Sided exit weights and delay coefficient at the origin.

    The domain condition they encode at the gluing point reads
    P_r f'(0+) - P_l f'(0-) = kappa * (generalized second derivative at 0).
    """

    p_right: float
    p_left: float
    kappa: float


@dataclass(frozen=True)
class ScalePair:
    """Immutable (u, v) pair with validated monotonicity and slope bounds.

    ``c1_bound`` is an upper bound on u' and ``c2_bound`` a positive lower
    bound on v', both over the differentiability points; violations at
    construction raise :class:`ConstructionError`.
    """

    u: PiecewiseMonotone
    v: PiecewiseMonotone
    c1_bound: float = 0.0
    c2_bound: float = 0.0
    gluing: GluingData | None = None

    def __post_init__(self):
        if any(j != 0.0 for j in self.u.jumps):
            raise ConstructionError("u must be continuous (no jumps)")
        if not (
            math.isclose(self.u.lo, self.v.lo, abs_tol=1e-12)
            and math.isclose(self.u.hi, self.v.hi, abs_tol=1e-12)
        ):
            raise ConstructionError("u and v must share a domain")
        u_lo, u_hi = self.u.derivative_bounds()
        v_lo, v_hi = self.v.derivative_bounds()
        if u_lo <= 0 or v_lo <= 0:
            raise ConstructionError("u and v must be strictly increasing")
        c1 = self.c1_bound if self.c1_bound > 0 else u_hi * (1 + 1e-9)
        c2 = self.c2_bound if self.c2_bound > 0 else v_lo * (1 - 1e-9)
        if u_hi > c1 * (1 + 1e-9):
            raise ConstructionError(f"u' exceeds c1_bound: {u_hi} > {c1}")
        if v_lo < c2 * (1 - 1e-9):
            raise ConstructionError(f"v' falls below c2_bound: {v_lo} < {c2}")
        object.__setattr__(self, "c1_bound", c1)
        object.__setattr__(self, "c2_bound", c2)
        self._validate_monotone_grid()

    def _validate_monotone_grid(self, n: int = 256):
        xs = np.unique(
            np.concatenate(
                [
                    np.linspace(self.domain[0], self.domain[1], n),
                    np.asarray(self.u.breaks, dtype=float),
                    np.asarray(self.v.breaks, dtype=float),
                ]
            )
        )
        for f in (self.u.value, self.v.value):
            vals = np.array([f(float(x)) for x in xs])
            if not np.all(np.diff(vals) > -1e-14):
                raise ConstructionError("sampled values are not increasing")

    # -- basic queries -------------------------------------------------------

    @property
    def domain(self) -> tuple[float, float]:
        return self.u.lo, self.u.hi

    def eval_u(self, x: float) -> float:
        return self.u.value(x)

    def eval_v(self, x: float) -> float:
        """Right-continuous value v(x+)."""
        return self.v.value(x)

    def eval_v_left(self, x: float) -> float:
        return self.v.value_left(x)

    def u_inverse(self, y: float) -> float:
        return self.u.inverse(y)

    @property
    def breaks(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.u.breaks) | set(self.v.breaks)))

    def jump_points(self) -> tuple[float, ...]:
        return tuple(b for b, j in zip(self.v.breaks, self.v.jumps) if j > 0)

    def jump_size(self, x: float) -> float:
        return self.v.jump_at(x)

    # -- classification ------------------------------------------------------

    def classify_point(self, x: float) -> PointClass:
        """Classify x; a jump of v takes precedence over any corner."""
        self.u._check_domain(x)
        if self.jump_size(x) > 0.0:
            return PointClass.JUMP_V
        ul, ur = self.u.deriv_left(x), self.u.deriv_right(x)
        if not math.isclose(ul, ur, rel_tol=_DERIV_EQ_RTOL, abs_tol=0.0):
            return PointClass.CORNER_U
        vl, vr = self.v.deriv_left(x), self.v.deriv_right(x)
        if not math.isclose(vl, vr, rel_tol=_DERIV_EQ_RTOL, abs_tol=0.0):
            return PointClass.CORNER_V
        return PointClass.SMOOTH

    def classified_points(self) -> tuple[tuple[float, PointClass], ...]:
        """All non-smooth points (finitely many by construction)."""
        out = []
        for b in self.breaks:
            c = self.classify_point(b)
            if c is not PointClass.SMOOTH:
                out.append((b, c))
        return tuple(out)

    def dv_du(self, x: float) -> float:
        """Derivative of v with respect to u at x, extended-real valued.

        Smooth points: v'(x)/u'(x). Corner points: min of the sided
        derivatives. Jump points: math.inf, so the time-change integrand
        [dv_du / 2]^{-1} is exactly 0 there.
        """
        cls = self.classify_point(x)
        if cls is PointClass.JUMP_V:
            return math.inf
        left = self.v.deriv_left(x) / self.u.deriv_left(x)
        right = self.v.deriv_right(x) / self.u.deriv_right(x)
        return min(left, right)

    def dv_du_interval(self, x: float) -> float:
        """dv/du for a point strictly inside a piece interval (no sides)."""
        return self.v.deriv_right(x) / self.u.deriv_right(x)

    # -- constructors ----------------------------------------------------------

    @classmethod
    def from_diffusion_coefficients(
        cls,
        a: Callable[[float], float],
        b: Callable[[float], float] | float = 0.0,
        reference: float = 0.0,
        domain: tuple[float, float] = (-5.0, 5.0),
    ) -> "ScalePair":
        """Build the pair induced by a second-order generator (a/2) d2 + b d.

        u(x) = int_ref^x exp(-B(y)) dy and v(x) = int_ref^x (2/a) exp(B(y)) dy
        with B(y) = int_ref^y 2 b/a; the normalization (unique only up to
        constants) anchors u(ref) = v(ref) = 0.
        """
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < reference < hi:
            raise ConstructionError("reference point must lie inside the domain")
        b_fn = (lambda x: float(b)) if not callable(b) else b
        for x in np.linspace(lo, hi, 65):
            if not a(float(x)) > 0.0:
                raise ConstructionError(f"diffusion coefficient non-positive at x={x}")

        drift_free = (not callable(b)) and float(b) == 0.0

        if drift_free:
            u_density = lambda y: 1.0
            v_density = lambda y: 2.0 / a(y)
        else:
            cache: dict[float, float] = {}

            def B(y: float) -> float:
                key = float(y)
                if key not in cache:
                    cache[key] = quad(lambda z: 2.0 * b_fn(z) / a(z), reference, key, **_QUAD_OPTS)[0]
                return cache[key]

            u_density = lambda y: math.exp(-B(y))
            v_density = lambda y: (2.0 / a(y)) * math.exp(B(y))

        if drift_free:
            u_map = PiecewiseMonotone.single(AffinePiece(lo, hi, lo - reference, 1.0))
        else:
            u0 = -quad(u_density, lo, reference, **_QUAD_OPTS)[0]
            u_map = PiecewiseMonotone.single(IntegralPiece(lo, hi, u0, u_density))
        v0 = -quad(v_density, lo, reference, **_QUAD_OPTS)[0]
        v_map = PiecewiseMonotone.single(IntegralPiece(lo, hi, v0, v_density))
        return cls(u_map, v_map)

    @classmethod
    def from_sided_limits(
        cls,
        a_plus: Callable[[float], float],
        a_minus: Callable[[float], float],
        b_plus: Callable[[float], float] | float = 0.0,
        b_minus: Callable[[float], float] | float = 0.0,
        p_right: float = 0.5,
        p_left: float = 0.5,
        kappa: float = 0.0,
        domain: tuple[float, float] = (-5.0, 5.0),
    ) -> "ScalePair":
        """Glue two half-line coefficient constructions at the origin.

        The scale gets factors 1/p_right (x >= 0) and 1/p_left (x < 0), the
        speed gets factors p_right / p_left and a jump kappa at 0; the
        triple (p_right, p_left, kappa) is retained as :class:`GluingData`.
        """
        if not (p_right > 0 and p_left > 0):
            raise ConstructionError("exit weights must be positive")
        if not math.isclose(p_right + p_left, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ConstructionError(f"exit weights must sum to 1, got {p_right + p_left}")
        if kappa < 0:
            raise ConstructionError("delay coefficient kappa must be >= 0")
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < 0.0 < hi:
            raise ConstructionError("domain must contain the gluing point 0")

        plus = cls.from_diffusion_coefficients(a_plus, b_plus, reference=0.0, domain=(lo, hi))
        minus = cls.from_diffusion_coefficients(a_minus, b_minus, reference=0.0, domain=(lo, hi))

        def scaled_piece(side_pair: "ScalePair", which: str, factor: float, seg: tuple[float, float], y_lo: float):
            mono = side_pair.u if which == "u" else side_pair.v
            piece = mono.pieces[0]
            if piece.is_affine:
                return AffinePiece(seg[0], seg[1], y_lo, piece.slope * factor)
            dens = piece.density
            return IntegralPiece(seg[0], seg[1], y_lo, lambda y, d=dens, f=factor: f * d(y))

        # u: continuous at 0 with u(0) = 0
        u_minus = scaled_piece(minus, "u", 1.0 / p_left, (lo, 0.0), 0.0)
        u_minus = _rebase_to_end_zero(u_minus)
        u_plus = scaled_piece(plus, "u", 1.0 / p_right, (0.0, hi), 0.0)
        u_map = PiecewiseMonotone((u_minus, u_plus), (0.0,))

        # v: v(0-) = 0, jump kappa, v(0) = kappa
        v_minus = scaled_piece(minus, "v", p_left, (lo, 0.0), 0.0)
        v_minus = _rebase_to_end_zero(v_minus)
        v_plus = scaled_piece(plus, "v", p_right, (0.0, hi), kappa)
        v_map = PiecewiseMonotone((v_minus, v_plus), (kappa,))

        return cls(u_map, v_map, gluing=GluingData(p_right, p_left, kappa))


def _rebase_to_end_zero(piece: Piece) -> Piece:
    """Shift a piece so its value at the right endpoint is 0."""
    shift = -piece.y_hi
    if isinstance(piece, AffinePiece):
        return AffinePiece(piece.lo, piece.hi, piece.y_lo + shift, piece.slope)
    if isinstance(piece, IntegralPiece):
        return IntegralPiece(piece.lo, piece.hi, piece.y_lo + shift, piece.density)
    raise ConstructionError("unsupported piece kind for rebasing")  # pragma: no cover


def wiener_pair(domain: tuple[float, float] = (-10.0, 10.0)) -> ScalePair:
    """u(x) = x, v(x) = 2x: the standard Wiener process."""
    lo, hi = domain
    u = PiecewiseMonotone.single(AffinePiece(lo, hi, lo, 1.0))
    v = PiecewiseMonotone.single(AffinePiece(lo, hi, 2 * lo, 2.0))
    return ScalePair(u, v)


def linear_pair(
    v_slope: float, u_slope: float = 1.0, domain: tuple[float, float] = (-10.0, 10.0)
) -> ScalePair:
    """u(x) = u_slope * x, v(x) = v_slope * x."""
    lo, hi = domain
    u = PiecewiseMonotone.single(AffinePiece(lo, hi, u_slope * lo, u_slope))
    v = PiecewiseMonotone.single(AffinePiece(lo, hi, v_slope * lo, v_slope))
    return ScalePair(u, v)


def jump_corner_pair(
    rate_a: float = 1.0,
    rate_b: float = 3.0,
    kappa: float = 0.5,
    x_jump: float = 1.0,
    x_corner: float = 2.0,
    domain: tuple[float, float] = (-10.0, 10.0),
) -> ScalePair:
    """u(x) = x with a speed that jumps at x_jump and has a corner at x_corner.

    v has slope rate_a below x_corner, slope rate_a + rate_b above it, and a
    jump of size kappa at x_jump (set kappa = 0 for the continuous variant).
    """
    if not domain[0] < x_jump < x_corner < domain[1]:
        raise ConstructionError("need domain lo < x_jump < x_corner < domain hi")
    lo, hi = domain
    u = PiecewiseMonotone.single(AffinePiece(lo, hi, lo, 1.0))
    jumps = {x_jump: kappa} if kappa > 0 else None
    breaks = [x_jump, x_corner] if kappa > 0 else [x_corner]
    slopes = [rate_a, rate_a, rate_a + rate_b] if kappa > 0 else [rate_a, rate_a + rate_b]
    v = PiecewiseMonotone.from_slopes((lo, hi), breaks, slopes, anchor=(0.0, 0.0), jumps=jumps)
    return ScalePair(u, v)
