"""Closed-form monotone pieces used to assemble scale and speed functions.

Three kinds are supported:

- :class:`AffinePiece` -- exact arithmetic throughout, the workhorse for
  piecewise-linear scale pairs.
- :class:`IntegralPiece` -- value given by an adaptive-quadrature integral
  of a positive density, used by the diffusion-coefficient construction.
- :class:`TabulatedPiece` -- monotone PCHIP interpolation of sampled data.

Every piece is a strictly increasing map on a closed interval [lo, hi] and
knows its own value, derivative, and inverse, plus the two helper integrals
(``integral_of_derivative_ratio``, ``integral_of_derivative_product``)
that the time-change and action evaluators need on sub-intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import ConstructionError, RangeError

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-12, limit=200)


@dataclass(frozen=True)
class AffinePiece:
    """y = y_lo + slope * (x - lo) on [lo, hi], slope > 0."""

    lo: float
    hi: float
    y_lo: float
    slope: float

    def __post_init__(self):
        if not (self.hi > self.lo):
            raise ConstructionError(f"empty piece interval [{self.lo}, {self.hi}]")
        if not (self.slope > 0.0 and math.isfinite(self.slope)):
            raise ConstructionError(f"piece slope must be positive, got {self.slope}")

    @property
    def is_affine(self) -> bool:
        return True

    @property
    def y_hi(self) -> float:
        return self.y_lo + self.slope * (self.hi - self.lo)

    def value(self, x: float) -> float:
        return self.y_lo + self.slope * (x - self.lo)

    def derivative(self, x: float) -> float:
        return self.slope

    def inverse(self, y: float) -> float:
        return self.lo + (y - self.y_lo) / self.slope

    def derivative_bounds(self) -> tuple[float, float]:
        return self.slope, self.slope


@dataclass(frozen=True)
class IntegralPiece:
    """y = y_lo + int_lo^x density(s) ds with density > 0 on [lo, hi].

    The density callable must be smooth on the interval; values are
    computed by adaptive quadrature and the inverse by bracketed root
    finding, both to ~1e-12.
    """

    lo: float
    hi: float
    y_lo: float
    density: Callable[[float], float]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (self.hi > self.lo):
            raise ConstructionError(f"empty piece interval [{self.lo}, {self.hi}]")
        for x in np.linspace(self.lo, self.hi, 33):
            if not self.density(float(x)) > 0.0:
                raise ConstructionError(f"piece density non-positive at x={x}")

    @property
    def is_affine(self) -> bool:
        return False

    @property
    def y_hi(self) -> float:
        return self.value(self.hi)

    def value(self, x: float) -> float:
        key = float(x)
        hit = self._cache.get(key)
        if hit is None:
            hit = self.y_lo + quad(self.density, self.lo, key, **_QUAD_OPTS)[0]
            self._cache[key] = hit
        return hit

    def derivative(self, x: float) -> float:
        return float(self.density(x))

    def inverse(self, y: float) -> float:
        if y <= self.y_lo:
            return self.lo
        if y >= self.y_hi:
            return self.hi
        return brentq(lambda x: self.value(x) - y, self.lo, self.hi, xtol=1e-14)

    def derivative_bounds(self) -> tuple[float, float]:
        d = [self.derivative(float(x)) for x in np.linspace(self.lo, self.hi, 257)]
        return min(d), max(d)


@dataclass(frozen=True)
class TabulatedPiece:
    """Monotone cubic (PCHIP) interpolation of strictly increasing samples."""

    lo: float
    hi: float
    y_lo: float
    xs: tuple[float, ...]
    ys: tuple[float, ...]
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ConstructionError("tabulated piece needs matching 1-d samples")
        if not (np.all(np.diff(xs) > 0) and np.all(np.diff(ys) > 0)):
            raise ConstructionError("tabulated samples must be strictly increasing")
        if not (math.isclose(xs[0], self.lo) and math.isclose(xs[-1], self.hi)):
            raise ConstructionError("tabulated samples must span [lo, hi]")
        shifted = ys - ys[0] + self.y_lo
        object.__setattr__(self, "_interp", PchipInterpolator(xs, shifted))

    @property
    def is_affine(self) -> bool:
        return False

    @property
    def y_hi(self) -> float:
        return float(self._interp(self.hi))

    def value(self, x: float) -> float:
        return float(self._interp(x))

    def derivative(self, x: float) -> float:
        return float(self._interp.derivative()(x))

    def inverse(self, y: float) -> float:
        if y <= self.y_lo:
            return self.lo
        if y >= self.y_hi:
            return self.hi
        return brentq(lambda x: self.value(x) - y, self.lo, self.hi, xtol=1e-14)

    def derivative_bounds(self) -> tuple[float, float]:
        d = [self.derivative(float(x)) for x in np.linspace(self.lo, self.hi, 257)]
        lo, hi = min(d), max(d)
        if lo <= 0:
            raise ConstructionError("tabulated piece is not strictly increasing")
        return lo, hi


Piece = AffinePiece | IntegralPiece | TabulatedPiece


def piece_inverse_checked(piece: Piece, y: float, tol: float = 1e-9) -> float:
    """Invert a piece, rejecting values outside its range (with slack tol)."""
    span = abs(piece.y_hi - piece.y_lo)
    if y < piece.y_lo - tol * max(1.0, span) or y > piece.y_hi + tol * max(1.0, span):
        raise RangeError(f"value {y} outside piece range [{piece.y_lo}, {piece.y_hi}]")
    return piece.inverse(min(max(y, piece.y_lo), piece.y_hi))
