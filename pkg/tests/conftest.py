from __future__ import annotations

import numpy as np
import pytest

from dvdu.scale import PiecewiseMonotone, ScalePair, jump_corner_pair, wiener_pair


@pytest.fixture
def paper_pair() -> ScalePair:
    """u = x; v with slope 1, jump 0.5 at x=1, corner (slope 1 -> 4) at x=2."""
    return jump_corner_pair(1.0, 3.0, 0.5, 1.0, 2.0)


@pytest.fixture
def wiener() -> ScalePair:
    return wiener_pair()


@pytest.fixture
def kinked_u_pair() -> ScalePair:
    """u has a corner at 0 (slope 1 then 2); v = 2x."""
    u = PiecewiseMonotone.from_slopes((-8.0, 8.0), [0.0], [1.0, 2.0], anchor=(0.0, 0.0))
    v = PiecewiseMonotone.from_slopes((-8.0, 8.0), [], [2.0], anchor=(0.0, 0.0))
    return ScalePair(u, v)


def random_affine_pair(rng: np.random.Generator, domain=(-6.0, 6.0)) -> ScalePair:
    breaks = np.sort(rng.uniform(domain[0] + 1, domain[1] - 1, rng.integers(1, 4)))
    u = PiecewiseMonotone.from_slopes(domain, breaks, rng.uniform(0.4, 2.0, len(breaks) + 1),
                                      anchor=(0.0, 0.0))
    v = PiecewiseMonotone.from_slopes(domain, breaks, rng.uniform(0.4, 2.0, len(breaks) + 1),
                                      anchor=(0.0, 0.0))
    return ScalePair(u, v)
