from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvdu.errors import ConstructionError, DomainError, PreconditionError
from dvdu.paths import (
    PiecewisePath,
    compose_u,
    regularity_report,
    split_at_levels,
    sup_distance,
)
from dvdu.scale import PointClass

from conftest import random_affine_pair


# -- evaluation ----------------------------------------------------------------


def test_eval_linear():
    assert PiecewisePath.linear(0, 1, 1).value(0.5) == 0.5


def test_eval_constant():
    assert PiecewisePath.constant(2.0, 1.0).value(0.7) == 2.0


def test_eval_tent():
    p = PiecewisePath.from_nodes([(0, 0), (1, 1), (2, 0)])
    assert p.value(1.5) == 0.5


def test_eval_outside_horizon():
    with pytest.raises(DomainError):
        PiecewisePath.linear(0, 1, 1).value(1.5)


def test_invalid_nodes_rejected():
    with pytest.raises(ConstructionError):
        PiecewisePath((0.0, 1.0, 1.0), (0.0, 1.0, 2.0))  # duplicate time
    with pytest.raises(ConstructionError):
        PiecewisePath((0.1, 1.0), (0.0, 1.0))  # does not start at 0


# -- composition with u ----------------------------------------------------------


def test_compose_identity(wiener):
    p = PiecewisePath.from_nodes([(0, 0), (1, 1), (2, -1)])
    q = compose_u(wiener, p)
    ts = np.linspace(0, 2, 101)
    np.testing.assert_allclose(q.value_array(ts), p.value_array(ts), atol=0)


def test_compose_kinked_inserts_crossing(kinked_u_pair):
    p = PiecewisePath.linear(-1.0, 1.0, 2.0)
    q = compose_u(kinked_u_pair, p)
    assert 1.0 in q.times  # crossing of the u-corner at x=0 happens at t=1
    assert q.value(0.0) == -1.0
    assert q.value(1.0) == 0.0
    assert q.value(2.0) == 2.0
    # pointwise evaluation oracle on a fine grid
    ts = np.linspace(0, 2, 10_001)
    oracle = np.array([kinked_u_pair.eval_u(p.value(float(t))) for t in ts])
    np.testing.assert_allclose(q.value_array(ts), oracle, atol=1e-12)


def test_compose_constant_scaling():
    from dvdu.scale import linear_pair

    sp = linear_pair(2.0, u_slope=2.0)
    q = compose_u(sp, PiecewisePath.constant(3.0, 1.0))
    assert q.value(0.4) == 6.0


def test_compose_preserves_sup_convergence(kinked_u_pair):
    # |u(phi_n) - u(phi)|_sup <= c1 |phi_n - phi|_sup
    rng = np.random.default_rng(3)
    base = PiecewisePath.from_nodes([(0, -2), (1, 1.5), (2, 0.5)])
    for k in range(1, 6):
        wobble = 2.0 ** (-k)
        pert = PiecewisePath(
            base.times, tuple(v + wobble * rng.uniform(-1, 1) for v in base.values)
        )
        lhs = sup_distance(compose_u(kinked_u_pair, pert), compose_u(kinked_u_pair, base))
        assert lhs <= kinked_u_pair.c1_bound * sup_distance(pert, base) + 1e-12


# -- uniform metric ---------------------------------------------------------------


def test_sup_distance_examples():
    assert sup_distance(PiecewisePath.linear(0, 1, 1), PiecewisePath.linear(0, 1, 1)) == 0.0
    assert sup_distance(PiecewisePath.linear(0, 0, 1), PiecewisePath.linear(0, 1, 1)) == 1.0
    p = PiecewisePath.linear(0, 2, 2)
    q = PiecewisePath.from_nodes([(0, 0), (1, 0), (2, 2)])
    # grid-max oracle
    ts = np.linspace(0, 2, 20_001)
    grid_max = float(np.max(np.abs(p.value_array(ts) - q.value_array(ts))))
    exact = sup_distance(p, q)
    assert exact == pytest.approx(1.0, abs=1e-12)
    assert grid_max <= exact <= grid_max + 1e-3


def test_sup_distance_horizon_mismatch():
    with pytest.raises(PreconditionError):
        sup_distance(PiecewisePath.linear(0, 1, 1), PiecewisePath.linear(0, 1, 2))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_sup_distance_is_a_metric(a, b, c):
    pa = PiecewisePath((0.0, 0.7, 1.5), tuple(a))
    pb = PiecewisePath((0.0, 0.4, 1.5), tuple(b))
    pc = PiecewisePath((0.0, 1.1, 1.5), tuple(c))
    dab, dba = sup_distance(pa, pb), sup_distance(pb, pa)
    assert dab == dba
    assert sup_distance(pa, pc) <= dab + sup_distance(pb, pc) + 1e-12
    assert sup_distance(pa, pa) == 0.0


# -- splitting -------------------------------------------------------------------


def test_split_pins_levels_exactly():
    p = PiecewisePath.linear(-1.0, 3.0, 1.0)
    subs = split_at_levels(p, [0.0, 1.0, 2.0])
    xs = [s.x0 for s in subs] + [subs[-1].x1]
    assert xs == [-1.0, 0.0, 1.0, 2.0, 3.0]
    assert sum(s.duration for s in subs) == pytest.approx(1.0, abs=1e-15)


def test_split_descending_and_constant():
    p = PiecewisePath.from_nodes([(0, 2.0), (1, 2.0), (3, -1.0)])
    subs = split_at_levels(p, [0.0, 1.0])
    assert not subs[0].moving
    moving = [s for s in subs if s.moving]
    assert [s.x1 for s in moving] == [1.0, 0.0, -1.0]


# -- regularity reports ------------------------------------------------------------


def test_moving_through_jump_has_zero_occupation(paper_pair):
    p = PiecewisePath.linear(0.0, 2.5, 1.0)
    rep = regularity_report(paper_pair, p)
    assert rep.time_in_Vd == 0.0
    visited = {v.x: v for v in rep.visited_points}
    assert visited[1.0].occupation == 0.0
    assert visited[1.0].point_class is PointClass.JUMP_V
    assert visited[2.0].point_class is PointClass.CORNER_V


def test_waiting_at_jump_occupation(paper_pair):
    p = PiecewisePath.from_nodes([(0, 0), (0.3, 1.0), (0.7, 1.0), (1.0, 0.5)])
    rep = regularity_report(paper_pair, p)
    assert rep.time_in_Vd == pytest.approx(0.4, abs=1e-12)
    assert rep.time_in_E == 0.0


def test_waiting_at_corner_counts_into_E(paper_pair):
    p = PiecewisePath.from_nodes([(0, 2.0), (1.0, 2.0), (1.5, 1.5)])
    rep = regularity_report(paper_pair, p)
    assert rep.time_in_V == pytest.approx(1.0, abs=1e-12)
    assert rep.time_in_E == pytest.approx(1.0, abs=1e-12)
    assert rep.time_in_Vd == 0.0


def test_occupation_partition_sums_to_horizon(paper_pair):
    rng = np.random.default_rng(8)
    for _ in range(25):
        k = int(rng.integers(2, 7))
        times = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 3.0, k - 1))])
        values = rng.uniform(-3.0, 3.5, k)
        # occasionally pin a node onto a classified point
        if rng.random() < 0.5 and k > 2:
            values[1] = 1.0
        p = PiecewisePath(tuple(times), tuple(values))
        rep = regularity_report(paper_pair, p)
        assert rep.total == pytest.approx(p.T, rel=1e-12)


def test_refined_path_same_trace(paper_pair):
    p = PiecewisePath.from_nodes([(0, 0), (1, 1.5), (2, 0.5)])
    q = p.refined(3)
    assert sup_distance(p, q) == 0.0
    assert len(q.times) == 2 * 4 + 1
