from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvdu.action import (
    action,
    action_y,
    classical_action,
    holder_modulus,
    reduced_action,
    reduction_check,
    sigma_rate_bound,
)
from dvdu.errors import PreconditionError
from dvdu.paths import PiecewisePath, compose_u
from dvdu.scale import PiecewiseMonotone, ScalePair, jump_corner_pair, linear_pair, wiener_pair
from dvdu.timechange import sigma

from conftest import random_affine_pair


def gauss_legendre_integral(f, a, b, n=200):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    return 0.5 * (b - a) * float(np.sum(weights * np.vectorize(f)(x)))


def finite_difference_reduced(sp, path, n=400_000):
    """Fine-grid oracle: quarter-integral of (u o phi)'(v o phi)' by differences."""
    ts = np.linspace(0.0, path.T, n + 1)
    xs = path.value_array(ts)
    u_vals = np.array([sp.eval_u(float(x)) for x in xs])
    v_vals = np.array([sp.eval_v(float(x)) for x in xs])
    dt = path.T / n
    return float(np.sum(np.diff(u_vals) * np.diff(v_vals))) / (4.0 * dt)


# -- the general evaluator -----------------------------------------------------


def test_wiener_unit_slope(wiener):
    av = action(wiener, PiecewisePath.linear(0, 1, 1), 0.0)
    assert av.value == 0.5
    assert av.method == "time_changed"


def test_linear_speed_quadratic_cost():
    # v = A x: straight path from x to 0 over time t costs (A/4) x^2 / t
    A, x, t = 3.0, 1.7, 0.8
    sp = linear_pair(A)
    av = action(sp, PiecewisePath.linear(x, 0.0, t), x)
    assert av.value == pytest.approx((A / 4) * x**2 / t, rel=1e-14)


def test_waiting_path_formula(paper_pair):
    # descend x -> 1, wait at the jump, then 1 -> 0
    x, mu0, mu1, t = 1.5, 0.3, 0.7, 1.5
    phi = PiecewisePath.from_nodes([(0, x), (mu0, 1.0), (mu1, 1.0), (t, 0.0)])
    expected = 0.25 * (x - 1.0) ** 2 / mu0 + 0.25 * 1.0 / (t - mu1)
    assert action(paper_pair, phi, x).value == pytest.approx(expected, rel=1e-14)


def test_wrong_start_is_infinite(wiener):
    av = action(wiener, PiecewisePath.linear(0, 1, 1), 0.5)
    assert math.isinf(av.value)
    assert "start" in av.note


def test_constant_path_zero(paper_pair):
    assert action(paper_pair, PiecewisePath.constant(0.5, 2.0), 0.5).value == 0.0


def test_breakdown_sums_to_value(paper_pair):
    phi = PiecewisePath.from_nodes([(0, 2.5), (1, 0.5), (2, 3.0)])
    av = action(paper_pair, phi, 2.5)
    assert sum(p.value for p in av.breakdown) == pytest.approx(av.value, rel=1e-15)


# -- reduced form ----------------------------------------------------------------


def test_reduced_equals_wiener(wiener):
    av = reduced_action(wiener, PiecewisePath.linear(0, 1, 1), 0.0)
    assert av.value == 0.5
    assert av.method == "reduced"


def test_reduced_crossing_corner_oracle():
    # continuous v with slope 1 then 4 at x = 2; unit-slope crossing
    u = PiecewiseMonotone.from_slopes((-6, 6), [], [1.0], anchor=(0, 0))
    v = PiecewiseMonotone.from_slopes((-6, 6), [2.0], [1.0, 4.0], anchor=(0, 0))
    sp = ScalePair(u, v)
    phi = PiecewisePath.linear(1.0, 3.0, 2.0)
    av = reduced_action(sp, phi, 1.0)
    assert av.value == pytest.approx(0.25 * 1.0 * 1.0 + 0.25 * 4.0 * 1.0, rel=1e-14)
    assert av.value == pytest.approx(finite_difference_reduced(sp, phi), rel=1e-5)
    # per-piece contributions visible in the breakdown
    assert [p.value for p in av.breakdown] == pytest.approx([0.25, 1.0], rel=1e-12)


def test_reduced_rejects_jump_in_range(paper_pair):
    with pytest.raises(PreconditionError, match="action"):
        reduced_action(paper_pair, PiecewisePath.linear(0.0, 2.5, 1.0), 0.0)


def test_reduced_agrees_with_general(kinked_u_pair):
    rng = np.random.default_rng(23)
    for _ in range(30):
        sp = random_affine_pair(rng)
        k = int(rng.integers(2, 6))
        times = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 2.0, k - 1))])
        values = rng.uniform(-3, 3, k)
        phi = PiecewisePath(tuple(times), tuple(values))
        a1 = action(sp, phi, phi.start).value
        a2 = reduced_action(sp, phi, phi.start).value
        assert a2 == pytest.approx(a1, rel=1e-10)


# -- the u-coordinate functional ----------------------------------------------------


def test_action_y_identity(wiener):
    phi = PiecewisePath.from_nodes([(0, 0), (1, 1), (2, 0.5)])
    assert action_y(wiener, phi, 0.0).value == action(wiener, phi, 0.0).value


def test_action_y_scaled_u():
    # u = 2x, v = 2x: psi(s) = 2s corresponds to phi(s) = s
    sp = linear_pair(2.0, u_slope=2.0)
    psi = PiecewisePath.linear(0.0, 2.0, 1.0)
    phi = PiecewisePath.linear(0.0, 1.0, 1.0)
    assert action_y(sp, psi, 0.0).value == pytest.approx(
        action(sp, phi, 0.0).value, rel=1e-14
    )


def test_action_y_wrong_start_infinite(wiener):
    assert math.isinf(action_y(wiener, PiecewisePath.linear(1, 2, 1), 0.0).value)


def test_contraction_identity_random(paper_pair, kinked_u_pair):
    rng = np.random.default_rng(29)
    for sp in (paper_pair, kinked_u_pair):
        for _ in range(50):
            k = int(rng.integers(2, 6))
            times = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 2.0, k - 1))])
            values = rng.uniform(-3, 3.2, k)
            phi = PiecewisePath(tuple(times), tuple(values))
            psi = compose_u(sp, phi)
            gap = abs(action(sp, phi, phi.start).value - action_y(sp, psi, psi.start).value)
            assert gap < 1e-10


# -- classical form ------------------------------------------------------------------


def test_classical_unit():
    assert classical_action(lambda x: 1.0, PiecewisePath.linear(0, 1, 1), 0.0).value == pytest.approx(0.5)


def test_classical_constant_two():
    assert classical_action(lambda x: 2.0, PiecewisePath.linear(0, 1, 1), 0.0).value == pytest.approx(0.25)


def test_classical_sin_quadrature_oracle():
    a = lambda x: 1.0 + 0.5 * math.sin(x)
    phi = PiecewisePath.linear(0.0, 2.0, 2.0)
    # phi-dot = 1: oracle integral of 1/a over [0, 2] in time
    oracle = 0.5 * gauss_legendre_integral(lambda x: 1.0 / a(x), 0.0, 2.0)
    assert classical_action(a, phi, 0.0).value == pytest.approx(oracle, abs=1e-9)


def test_reduction_check_exact_cases():
    assert reduction_check(lambda x: 1.0, PiecewisePath.linear(0, 1, 1)).rel_discrepancy == 0.0
    rep = reduction_check(lambda x: 2.0, PiecewisePath.from_nodes([(0, 0), (1, 1), (2, -1)]))
    assert rep.rel_discrepancy < 1e-12


def test_reduction_check_sin_random_paths():
    a = lambda x: 1.0 + 0.5 * math.sin(x)
    rng = np.random.default_rng(37)
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(2, 6))
        times = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 2.0, k - 1))])
        values = rng.uniform(-2.5, 2.5, k)
        phi = PiecewisePath(tuple(times), tuple(values))
        worst = max(worst, reduction_check(a, phi, domain=(-4, 4)).rel_discrepancy)
    assert worst < 1e-8


# -- envelope and bounds ----------------------------------------------------------------


def test_holder_modulus_values():
    assert holder_modulus(0.0, 0.5, 1.0) == 0.0
    assert holder_modulus(0.5, 1.0, 1.0) == pytest.approx(1.0)


def test_holder_envelope_on_samples(paper_pair):
    rng = np.random.default_rng(41)
    c0 = sigma_rate_bound(paper_pair)
    for _ in range(20):
        k = int(rng.integers(2, 6))
        times = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 2.0, k - 1))])
        values = rng.uniform(-3, 3.2, k)
        phi = PiecewisePath(tuple(times), tuple(values))
        psi = compose_u(paper_pair, phi)
        s_level = action_y(paper_pair, psi, psi.start).value
        for _ in range(100):
            t = rng.uniform(0, psi.T * 0.99)
            h = rng.uniform(1e-6, psi.T - t)
            assert abs(psi.value(t + h) - psi.value(t)) <= holder_modulus(s_level, h, c0) + 1e-12


def test_sigma_rate_bound_holds(paper_pair):
    phi = PiecewisePath.from_nodes([(0, 0), (1, 3), (2, -2)])
    m = sigma(paper_pair, phi)
    assert m.total <= sigma_rate_bound(paper_pair) * phi.T + 1e-12


# -- structural properties ---------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=4, max_size=4),
    st.floats(0.3, 3.0),
)
def test_action_nonnegative_and_scaling(values, c):
    sp = jump_corner_pair(1.0, 3.0, 0.5, 1.0, 2.0)
    phi = PiecewisePath((0.0, 0.5, 1.2, 2.0), tuple(values))
    base = action(sp, phi, phi.start).value
    assert base >= 0.0
    scaled = action(sp, phi.time_scaled(c), phi.start).value
    assert scaled == pytest.approx(base / c, rel=1e-12, abs=1e-15)


def test_rescaled_pair_same_action(paper_pair):
    # (u, v) -> (c u, v / c) leaves the action unchanged
    c = 2.5
    u = PiecewiseMonotone.from_slopes((-10, 10), [], [c], anchor=(0, 0))
    v = PiecewiseMonotone.from_slopes((-10, 10), [1.0, 2.0], [1 / c, 1 / c, 4 / c],
                                      anchor=(0, 0), jumps={1.0: 0.5 / c})
    scaled = ScalePair(u, v)
    rng = np.random.default_rng(43)
    for _ in range(20):
        k = int(rng.integers(2, 6))
        times = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 2.0, k - 1))])
        vals = rng.uniform(-3, 3.2, k)
        phi = PiecewisePath(tuple(times), tuple(vals))
        assert action(scaled, phi, phi.start).value == pytest.approx(
            action(paper_pair, phi, phi.start).value, rel=1e-12
        )


def test_jump_wait_changes_nothing(paper_pair):
    base = PiecewisePath.from_nodes([(0, 1.5), (0.25, 1.0), (0.75, 0.0)])
    waited = base.with_wait(0.25, 0.5)
    assert action(paper_pair, waited, 1.5).value == action(paper_pair, base, 1.5).value


def test_corner_wait_contributes_zero(paper_pair):
    with_wait = PiecewisePath.from_nodes([(0, 2.5), (0.5, 2.0), (1.0, 2.0), (1.5, 0.0)])
    without = PiecewisePath.from_nodes([(0, 2.5), (0.5, 2.0), (1.0, 0.0)])
    assert action(paper_pair, with_wait, 2.5).value == action(paper_pair, without, 2.5).value
    wait_parts = [p for p in action(paper_pair, with_wait, 2.5).breakdown if p.x0 == p.x1]
    assert wait_parts and all(p.value == 0.0 for p in wait_parts)
