from __future__ import annotations

import math

import numpy as np
import pytest

from dvdu.errors import ConstructionError, RangeError
from dvdu.paths import PiecewisePath
from dvdu.scale import PiecewiseMonotone, ScalePair, jump_corner_pair, linear_pair, wiener_pair
from dvdu.timechange import (
    MonotoneTimeMap,
    TimeSegment,
    check_constancy_on_gamma_jump,
    mollify,
    sigma,
    sigma_n,
)


def riemann_sigma(sp, path, t, n=200_000):
    """Independent midpoint-rule oracle for the time-change integral."""
    s = (np.arange(n) + 0.5) * (t / n)
    total = 0.0
    for si in s:
        d = sp.dv_du(path.value(float(si)))
        total += 0.0 if math.isinf(d) else 2.0 / d
    return total * (t / n)


@pytest.fixture
def jump_at_zero_pair():
    """u = x; v = x below 0, jump 1 at 0, slope 3 above."""
    u = PiecewiseMonotone.from_slopes((-5, 5), [], [1.0], anchor=(0, 0))
    v = PiecewiseMonotone.from_slopes((-5, 5), [0.0], [1.0, 3.0], anchor=(-1.0, -1.0),
                                      jumps={0.0: 1.0})
    return ScalePair(u, v)


# -- sigma -------------------------------------------------------------------------


def test_sigma_linear_speed():
    sp = linear_pair(1.0)
    for path in (PiecewisePath.linear(0, 1, 1), PiecewisePath.from_nodes([(0, 0), (0.5, -1), (1, 2)])):
        m = sigma(sp, path)
        for t in (0.25, 0.7, 1.0):
            assert m.value(t) == pytest.approx(2 * t, rel=1e-12)


def test_sigma_piecewise_example(jump_at_zero_pair):
    phi = PiecewisePath.linear(-1.0, 1.0, 2.0)
    m = sigma(jump_at_zero_pair, phi)
    assert m.value(2.0) == pytest.approx(8.0 / 3.0, rel=1e-12)
    assert m.value(2.0) == pytest.approx(
        riemann_sigma(jump_at_zero_pair, phi, 2.0), rel=1e-4
    )


def test_sigma_flat_on_jump_wait(paper_pair):
    phi = PiecewisePath.from_nodes([(0, 0), (0.3, 1.0), (0.7, 1.0), (1.2, 0.0)])
    m = sigma(paper_pair, phi)
    assert m.value(0.7) == m.value(0.3)
    assert m.flat_intervals() == [(0.3, 0.7)]
    # rate 2/A on the moving stretches
    assert m.value(0.3) == pytest.approx(0.6, rel=1e-12)
    assert m.total == pytest.approx(0.6 + 1.0, rel=1e-12)


def test_sigma_min_convention_at_corner_wait(paper_pair):
    # waiting at the corner x=2 runs at the min-side derivative (dv/du = 1)
    phi = PiecewisePath.from_nodes([(0, 2.0), (1.0, 2.0), (1.5, 1.5)])
    m = sigma(paper_pair, phi)
    assert m.value(1.0) == pytest.approx(2.0, rel=1e-12)


def test_sigma_lipschitz_bound(paper_pair, kinked_u_pair):
    rng = np.random.default_rng(17)
    for sp in (paper_pair, kinked_u_pair):
        c = 2.0 * sp.c1_bound / sp.c2_bound
        for _ in range(10):
            k = int(rng.integers(2, 6))
            times = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 2.0, k - 1))])
            values = rng.uniform(-3, 3, k)
            phi = PiecewisePath(tuple(times), tuple(values))
            m = sigma(sp, phi)
            for t in np.linspace(0.05, phi.T, 7):
                assert m.value(float(t)) <= c * t * (1 + 1e-12)


def test_sigma_refinement_invariance(paper_pair):
    phi = PiecewisePath.from_nodes([(0, 0), (1, 1.5), (2, 0.5)])
    m1 = sigma(paper_pair, phi)
    m2 = sigma(paper_pair, phi.refined(4))
    for t in np.linspace(0, 2, 41):
        assert m1.value(float(t)) == pytest.approx(m2.value(float(t)), abs=1e-12)


def test_sigma_smooth_pair_uses_quadrature():
    sp = ScalePair.from_diffusion_coefficients(
        lambda x: 1.0 + 0.5 * math.sin(x), 0.0, domain=(-3.0, 3.0)
    )
    phi = PiecewisePath.linear(0.0, 2.0, 1.0)
    m = sigma(sp, phi)
    assert m.value(1.0) == pytest.approx(riemann_sigma(sp, phi, 1.0, n=20_000), rel=1e-4)
    # gamma inverts through the curve segment
    t_mid = 0.5 * m.total
    assert m.value(m.gamma(t_mid)) == pytest.approx(t_mid, abs=1e-10)


# -- gamma -------------------------------------------------------------------------


def test_gamma_affine():
    m = MonotoneTimeMap((TimeSegment(0.0, 1.0, 0.0, 2.0),))
    assert m.gamma(1.0) == pytest.approx(0.5, abs=1e-15)


def scan_gamma(m, t, n=2_000_000):
    """Direct scan oracle: first s with sigma(s) > t."""
    ss = np.linspace(0.0, m.T, n)
    vals = np.array([m.value(float(s)) for s in np.linspace(0.0, m.T, 2001)])
    # coarse pre-scan then fine local scan
    coarse = np.linspace(0.0, m.T, 2001)
    idx = np.argmax(vals > t)
    lo = coarse[max(idx - 1, 0)]
    hi = coarse[min(idx + 1, 2000)]
    for s in np.linspace(lo, hi, 40_001):
        if m.value(float(s)) > t:
            return float(s)
    return m.T


def test_gamma_right_continuity_on_flat(paper_pair):
    phi = PiecewisePath.from_nodes([(0, 0), (0.3, 1.0), (0.7, 1.0), (1.2, 0.0)])
    m = sigma(paper_pair, phi)
    level = m.value(0.3)
    assert level == pytest.approx(0.6, rel=1e-12)
    assert m.gamma(level) == pytest.approx(0.7, abs=1e-12)
    assert m.gamma(level - 1e-9) == pytest.approx(0.3, abs=1e-6)
    assert m.gamma_left(level) == pytest.approx(0.3, abs=1e-12)
    assert m.gamma(level) == pytest.approx(scan_gamma(m, level), abs=1e-4)


def test_gamma_sigma_composition(paper_pair):
    phi = PiecewisePath.from_nodes([(0, -1), (1, 3), (2, 0.5)])
    m = sigma(paper_pair, phi)
    for s in (0.2, 0.8, 1.5, 1.9):
        assert m.gamma(m.value(s)) == pytest.approx(s, abs=1e-12)


def test_gamma_range_error():
    m = MonotoneTimeMap((TimeSegment(0.0, 1.0, 0.0, 2.0),))
    with pytest.raises(RangeError):
        m.gamma(2.5)


# -- mollification -----------------------------------------------------------------


def test_mollify_smooth_pair_is_trivial(wiener):
    mp = mollify(wiener, 100)
    assert mp.trivial
    xs = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(mp.vn(xs), 2 * xs, atol=1e-12)
    assert mp.dvn_du(0.3) == pytest.approx(2.0)


def test_mollify_ramp_carries_jump(paper_pair):
    mp = mollify(paper_pair, 100)
    assert float(mp.vn(1.0)) - float(mp.vn(0.99)) >= 0.5
    # the tail past the jump point carries a vanishing share of the mass
    assert abs(float(mp.vn(1.0)) - paper_pair.eval_v(1.0)) < 0.5 / 50


def test_mollify_uniform_off_structure(paper_pair):
    for n in (10, 100, 1000):
        mp = mollify(paper_pair, n)
        max_slope = max(mp.d_knots)
        xs = np.linspace(-3, 4, 2001)
        diff = np.abs(np.asarray(mp.vn(xs)) - [paper_pair.eval_v(float(x)) for x in xs])
        assert float(np.max(diff)) <= max_slope * (1.0 / n) + 1e-12


def test_mollify_derivative_floor(paper_pair):
    mp = mollify(paper_pair, 50)
    floor = paper_pair.c2_bound / paper_pair.c1_bound
    assert min(mp.d_knots) >= floor * (1 - 1e-9)


def test_mollify_pointwise_convergence_at_continuity_points(paper_pair):
    for x in (0.3, 0.999, 1.7, 2.0, 3.5):
        errs = [abs(float(mollify(paper_pair, n).vn(x)) - paper_pair.eval_v(x))
                for n in (10, 100, 1000)]
        assert errs[-1] <= 1e-9 or errs[0] > errs[-1]


# -- sigma_n -----------------------------------------------------------------------


def test_sigma_n_equals_sigma_for_smooth(wiener):
    phi = PiecewisePath.from_nodes([(0, 0), (1, 2), (2, -1)])
    mp = mollify(wiener, 10)
    m1, m2 = sigma(wiener, phi), sigma_n(mp, phi)
    for t in np.linspace(0, 2, 21):
        assert m1.value(float(t)) == m2.value(float(t))


def test_sigma_n_converges_on_jump_fixture(paper_pair):
    phi = PiecewisePath.from_nodes([(0, 0), (1, 1.0), (1.5, 1.0), (2, 1.5)])
    ref = sigma(paper_pair, phi)
    grid = np.linspace(0, 2, 401)
    ref_vals = np.array([ref.value(float(t)) for t in grid])
    sups = []
    for n in (100, 1000):
        sn = sigma_n(mollify(paper_pair, n), phi)
        sups.append(np.max(np.abs(np.array([sn.value(float(t)) for t in grid]) - ref_vals)))
    assert sups[1] < sups[0]
    assert sups[1] < 8e-3


def test_sigma_n_strictly_increasing_on_wait(paper_pair):
    phi = PiecewisePath.from_nodes([(0, 0), (1, 1.0), (1.5, 1.0), (2, 1.5)])
    slopes = []
    for n in (100, 1000, 10_000):
        sn = sigma_n(mollify(paper_pair, n), phi)
        slope = (sn.value(1.4) - sn.value(1.1)) / 0.3
        assert slope > 0.0
        slopes.append(slope)
    assert slopes[0] > slopes[1] > slopes[2]
    assert slopes[2] < 2e-3


# -- constancy check ----------------------------------------------------------------


def test_constancy_holds_by_construction(paper_pair):
    phi = PiecewisePath.from_nodes([(0, 0), (0.3, 1.0), (0.7, 1.0), (1.2, 0.0)])
    rep = check_constancy_on_gamma_jump(phi, sigma(paper_pair, phi))
    assert rep.ok


def test_constancy_vacuous_without_flats(paper_pair):
    phi = PiecewisePath.linear(0.0, 2.5, 1.0)
    m = sigma(paper_pair, phi)
    assert m.flat_intervals() == []
    assert check_constancy_on_gamma_jump(phi, m).ok


def test_constancy_flags_adversarial_map():
    phi = PiecewisePath.linear(0.0, 1.0, 1.0)
    # hand-built map, flat while the path moves
    bad = MonotoneTimeMap((
        TimeSegment(0.0, 0.4, 0.0, 0.8),
        TimeSegment(0.4, 0.6, 0.8, 0.8),
        TimeSegment(0.6, 1.0, 0.8, 1.6),
    ))
    rep = check_constancy_on_gamma_jump(phi, bad)
    assert not rep.ok
    assert rep.violations[0][:2] == (0.4, 0.6)


def test_mollify_requires_affine_for_structure():
    from dvdu.pieces import AffinePiece, IntegralPiece

    u = PiecewiseMonotone.single(AffinePiece(-2, 2, -2, 1.0))
    v = PiecewiseMonotone(
        (IntegralPiece(-2, 0, -2.2, lambda x: 1.1), AffinePiece(0, 2, 0.0, 1.0)),
        (0.0,),
    )
    sp = ScalePair(u, v)
    if sp.classified_points():
        with pytest.raises(ConstructionError):
            mollify(sp, 10)
