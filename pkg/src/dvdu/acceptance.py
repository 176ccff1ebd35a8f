"""Acceptance suite: every shipping criterion with its pinned tolerance.

Each criterion is a function returning a :class:`CriterionResult`; the
runner prints one PASS/FAIL line per criterion and an overall verdict.
Monte Carlo criteria carry pinned seeds so the suite is a regression
harness, not a coin flip; the pinned draws were checked to be typical.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp, norm

from .action import action, action_y, holder_modulus, reduction_check
from .front import FrontScenario, FrontSolution, front_time
from .paths import PiecewisePath, compose_u, sup_distance
from .rde import McParams, dichotomy_check, solve_rde
from .scale import PiecewiseMonotone, ScalePair, jump_corner_pair, linear_pair, wiener_pair
from .simulate import (
    SeedSpec,
    _batch_y,
    delay_occupation,
    exit_probability_exact,
    exit_probability_mc,
    sample_terminal,
)
from .timechange import mollify, sigma, sigma_n


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0


def paper_example_pair(kappa: float = 0.5, domain=(-12.0, 12.0)) -> ScalePair:
    return jump_corner_pair(1.0, 3.0, kappa, 1.0, 2.0, domain=domain)


def _front_grid() -> np.ndarray:
    return np.concatenate([np.linspace(0.1, 1.99, 50), np.linspace(2.0, 5.0, 50)])


def _tstar_formula(x: float) -> float:
    # A=1, B=3, c=1, x2=2
    if x < 2.0:
        return 0.5 * x
    return 0.5 * (2.0 + 2.0 * (x - 2.0))


def criterion_1() -> CriterionResult:
    """Front closed forms on the worked example, 100-point grid."""
    sc = FrontScenario(paper_example_pair(), (), (1.0,))
    t0 = time.perf_counter()
    xs = _front_grid()
    errs = []
    for x in xs:
        ts = front_time(sc, float(x))
        errs.append(abs(ts - _tstar_formula(float(x))) / _tstar_formula(float(x)))
    elapsed = time.perf_counter() - t0
    worst = max(errs)
    ok = worst < 1e-6 and elapsed < 5.0
    return CriterionResult(
        1, "front-closed-forms", ok,
        f"max rel err {worst:.2e} (<1e-6), solver time {elapsed:.2f}s (<5s)",
    )


def criterion_2() -> CriterionResult:
    """Jump size never moves the front."""
    xs = _front_grid()
    t_by_kappa = {}
    for kappa in (0.0, 0.5, 2.0):
        sc = FrontScenario(paper_example_pair(kappa), (), (1.0,))
        t_by_kappa[kappa] = np.array([front_time(sc, float(x)) for x in xs])
    base = t_by_kappa[0.5]
    worst = max(
        float(np.max(np.abs(t_by_kappa[k] - base))) for k in (0.0, 2.0)
    )
    return CriterionResult(
        2, "front-jump-immunity", worst <= 1e-9,
        f"max |t* shift| over kappa in {{0, 0.5, 2}}: {worst:.2e} (<=1e-9)",
    )


def criterion_3() -> CriterionResult:
    """Reduced action equals the classical form for smooth coefficients."""
    a = lambda x: 1.0 + 0.5 * math.sin(x)
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(100):
        k = rng.integers(2, 7)
        times = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 2.0, k - 1))])
        values = rng.uniform(-2.5, 2.5, k)
        path = PiecewisePath(tuple(times), tuple(values))
        rep = reduction_check(a, path, domain=(-4.0, 4.0))
        worst = max(worst, rep.rel_discrepancy)
    return CriterionResult(
        3, "classical-reduction", worst < 1e-8,
        f"max rel discrepancy over 100 paths: {worst:.2e} (<1e-8)",
    )


def criterion_4() -> CriterionResult:
    """Mollified time changes converge, independently of ramp placement."""
    sp = jump_corner_pair(1.0, 3.0, 1.0, 1.0, 2.0)
    phi = PiecewisePath.from_nodes([(0, 0.0), (1.0, 1.0), (1.5, 1.0), (2.0, 1.5)])
    ref_map = sigma(sp, phi)
    grid = np.linspace(0.0, 2.0, 1501)
    ref = np.array([ref_map.value(float(t)) for t in grid])
    sups = []
    for n in (100, 1000, 10_000):
        sn = sigma_n(mollify(sp, n), phi)
        vals = np.array([sn.value(float(t)) for t in grid])
        sups.append(float(np.max(np.abs(vals - ref))))
    decreasing = sups[0] > sups[1] > sups[2]
    sl = sigma_n(mollify(sp, 10_000, "left"), phi)
    sc = sigma_n(mollify(sp, 10_000, "centered"), phi)
    placement_gap = float(
        np.max(np.abs(np.array([sl.value(float(t)) for t in grid])
                      - np.array([sc.value(float(t)) for t in grid])))
    )
    ok = decreasing and sups[2] < 1e-3 and placement_gap < 2e-3
    return CriterionResult(
        4, "time-change-convergence", ok,
        f"sup gaps {sups[0]:.1e} > {sups[1]:.1e} > {sups[2]:.1e} (<1e-3 at n=1e4), "
        f"left-vs-centered {placement_gap:.1e} (<2e-3)",
    )


def criterion_5() -> CriterionResult:
    """Monte Carlo exit locations bracket the scale-function ratio."""
    t0 = time.perf_counter()
    kinked_u = PiecewiseMonotone.from_slopes((-8.0, 8.0), [0.0], [1.0, 2.0], anchor=(0.0, 0.0))
    flat_v = PiecewiseMonotone.from_slopes((-8.0, 8.0), [], [2.0], anchor=(0.0, 0.0))
    fixtures = [
        (wiener_pair(), -1.0, 0.0, 2.0, 401),
        (ScalePair(kinked_u, flat_v), -1.0, 0.0, 1.0, 402),
    ]
    details = []
    ok = True
    for sp, a, x, b, seed in fixtures:
        exact = exit_probability_exact(sp, x, a, b)
        st = exit_probability_mc(sp, 1.0, x, a, b, 100_000, seed=seed)
        gap = abs(st.estimate - exact)
        ok = ok and gap < 3 * st.stderr
        details.append(f"|{st.estimate:.4f}-{exact:.4f}|={gap:.1e} vs 3SE={3*st.stderr:.1e}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 60.0
    return CriterionResult(
        5, "exit-probabilities", ok, "; ".join(details) + f"; {elapsed:.0f}s (<60s)"
    )


def criterion_6() -> CriterionResult:
    """Gaussian tail rate matches the minimal action for a linear speed."""
    # v = A x with A = 2: Var(X^eps_1) = 2 eps / A = eps, minimal action A/4 = 0.5
    analytic = -0.01 * float(norm.logsf(1.0 / math.sqrt(0.01)))
    ok_analytic = abs(analytic - 0.5) / 0.5 < 0.15
    sp = linear_pair(2.0)
    x = sample_terminal(sp, 0.05, 1.0, 1_000_000, seed=607, dt=0.01, n_mollify=100)
    hits = int(np.count_nonzero(x >= 1.0))
    if hits == 0:
        return CriterionResult(6, "gaussian-ldp-rate", False, "no tail hits at 1e6 paths")
    rate_mc = -0.05 * math.log(hits / 1_000_000)
    ok_mc = abs(rate_mc - 0.5) / 0.5 < 0.30
    return CriterionResult(
        6, "gaussian-ldp-rate", ok_analytic and ok_mc,
        f"analytic rate {analytic:.3f} (within 15% of 0.5), "
        f"MC rate {rate_mc:.3f} from {hits} hits (within 30%)",
    )


def criterion_7() -> CriterionResult:
    """Tube probabilities reproduce the action of the centre path."""
    sp = wiener_pair()
    psi = PiecewisePath.linear(0.0, 1.0, 1.0)
    s_y = action_y(sp, psi, 0.0).value
    if abs(s_y - 0.5) > 1e-12:
        return CriterionResult(7, "tube-probability", False, f"S^Y(psi) = {s_y} != 0.5")
    eps, n_paths = 0.05, 1_000_000
    t_grid = np.linspace(0.0, 1.0, 1001)
    center = psi.value_array(t_grid)
    mp = mollify(sp, 100)
    counts = {0.5: 0, 0.25: 0, 0.1: 0}
    block, done, k = 20_000, 0, 0
    seed = SeedSpec(701)
    while done < n_paths:
        nb = min(block, n_paths - done)
        _, Y = _batch_y(sp, mp, eps, 1.0, 1e-3, 0.0, nb, seed, t_grid, stream_offset=k)
        dev = np.max(np.abs(Y - center), axis=1)
        for d in counts:
            counts[d] += int(np.count_nonzero(dev < d))
        done += nb
        k += 1
    est = counts[0.25] / n_paths
    if est == 0:
        return CriterionResult(7, "tube-probability", False, "zero hits in the 0.25-tube")
    rate = -eps * math.log(est)
    ok_rate = abs(rate - 0.5) / 0.5 < 0.30
    ok_mono = counts[0.5] >= counts[0.25] >= counts[0.1]
    return CriterionResult(
        7, "tube-probability", ok_rate and ok_mono,
        f"rate proxy {rate:.3f} from {counts[0.25]} hits (within 30% of 0.5); "
        f"monotone counts {counts[0.5]} >= {counts[0.25]} >= {counts[0.1]}",
    )


def criterion_8() -> CriterionResult:
    """Noise scaling: X^eps at time 1 matches X^1 at time eps in law."""
    crit = 1.628 * math.sqrt(2.0 / 10_000)
    fixtures = [
        ("wiener", wiener_pair(), 0.0, 801),
        ("linear-speed", linear_pair(3.0), 0.0, 802),
        ("jump-corner", paper_example_pair(), 0.5, 803),
    ]
    stats = []
    ok = True
    for name, sp, x0, seed in fixtures:
        a = sample_terminal(sp, 0.25, 1.0, 10_000, seed=seed, x0=x0, dt=2e-3)
        b = sample_terminal(sp, 1.0, 0.25, 10_000, seed=seed + 50, x0=x0, dt=5e-4)
        stat = float(ks_2samp(a, b).statistic)
        stats.append(f"{name}: {stat:.4f}")
        ok = ok and stat < crit
    return CriterionResult(
        8, "eps-scaling-identity", ok,
        f"KS stats [{', '.join(stats)}] all < {crit:.4f} (1% critical)",
    )


def criterion_9() -> CriterionResult:
    """Occupation near the jump point strictly increases with the jump size."""
    kw = dict(eps=0.5, band=0.25, T=2.0, n_paths=2000, seed=901, n_mollify=2000)
    occ_small = delay_occupation(paper_example_pair(0.5), x_jump=1.0, **kw)
    occ_large = delay_occupation(paper_example_pair(1.0), x_jump=1.0, **kw)
    diffs = occ_large.samples - occ_small.samples  # paired by identical driving noise
    rng = np.random.default_rng(902)
    boot = np.array([
        float(np.mean(rng.choice(diffs, size=len(diffs), replace=True)))
        for _ in range(2000)
    ])
    q01 = float(np.quantile(boot, 0.01))
    return CriterionResult(
        9, "delay-stickiness", q01 > 0.0,
        f"mean occupation gap {np.mean(diffs):.4f}, bootstrap 1% quantile {q01:.4f} (> 0)",
    )


def criterion_10() -> CriterionResult:
    """Small-noise reaction-diffusion field shows the 0/1 front dichotomy."""
    t0 = time.perf_counter()
    sc = FrontScenario(paper_example_pair(), (), (1.0,))
    t_grid = np.linspace(0.05, 1.5, 40)
    x_grid = np.linspace(-1.5, 3.5, 80)
    field = solve_rde(
        sc, 0.02, t_grid, x_grid, McParams(n_mc=2000, n_mollify=2000),
        tol=5e-3, max_iter=12, seed=20,
    )
    rep = dichotomy_check(field, FrontSolution(sc), margin=0.2)
    elapsed = time.perf_counter() - t0
    ok = (
        rep.burned_fraction_ok >= 0.95
        and rep.unburned_fraction_ok >= 0.95
        and field.converged
        and field.clamp_events == 0
        and elapsed < 600.0
    )
    return CriterionResult(
        10, "rde-dichotomy", ok,
        f"burned {rep.burned_fraction_ok:.3f} / unburned {rep.unburned_fraction_ok:.3f} "
        f"(both >=0.95), converged={field.converged}, final clamps={field.clamp_events}, "
        f"{elapsed:.0f}s (<600s)",
    )


def criterion_11() -> CriterionResult:
    """Action property suite."""
    rng = np.random.default_rng(111)
    failures = []

    def random_pair(r):
        breaks = np.sort(r.uniform(-2.0, 2.0, r.integers(1, 4)))
        u_slopes = r.uniform(0.4, 2.0, len(breaks) + 1)
        v_slopes = r.uniform(0.4, 2.0, len(breaks) + 1)
        u = PiecewiseMonotone.from_slopes((-6, 6), breaks, u_slopes, anchor=(0, 0))
        v = PiecewiseMonotone.from_slopes((-6, 6), breaks, v_slopes, anchor=(0, 0))
        return ScalePair(u, v)

    def random_path(r):
        k = int(r.integers(2, 6))
        times = np.concatenate([[0.0], np.sort(r.uniform(0.1, 2.0, k - 1))])
        values = r.uniform(-3.0, 3.0, k)
        return PiecewisePath(tuple(times), tuple(values))

    # nonnegativity, zero on constants, contraction identity
    worst_contract = 0.0
    for _ in range(200):
        sp = random_pair(rng)
        phi = random_path(rng)
        s_val = action(sp, phi, phi.start).value
        if s_val < 0:
            failures.append("negative action")
        psi = compose_u(sp, phi)
        gap = abs(s_val - action_y(sp, psi, psi.start).value)
        worst_contract = max(worst_contract, gap)
    if worst_contract >= 1e-10:
        failures.append(f"contraction gap {worst_contract:.1e}")
    sp0 = wiener_pair()
    if action(sp0, PiecewisePath.constant(0.7, 1.3), 0.7).value != 0.0:
        failures.append("constant path has nonzero action")

    # time scaling: S(phi(./c)) on [0, cT] equals S(phi)/c
    worst_scale = 0.0
    for _ in range(25):
        sp = random_pair(rng)
        phi = random_path(rng)
        base = action(sp, phi, phi.start).value
        for c in (0.5, 2.0, 3.7):
            scaled = action(sp, phi.time_scaled(c), phi.start).value
            worst_scale = max(worst_scale, abs(scaled - base / c) / max(base, 1e-12))
    if worst_scale >= 1e-12:
        failures.append(f"time-scaling error {worst_scale:.1e}")

    # Hoelder envelope on level-set samples
    for _ in range(20):
        sp = random_pair(rng)
        phi = random_path(rng)
        psi = compose_u(sp, phi)
        s_level = action_y(sp, psi, psi.start).value
        c0 = 2.0 * sp.c1_bound / sp.c2_bound
        for _ in range(100):
            t = rng.uniform(0, psi.T)
            h = rng.uniform(1e-4, psi.T - t) if psi.T - t > 1e-4 else psi.T - t
            if h <= 0:
                continue
            bound = holder_modulus(s_level, h, c0) + 1e-12
            if abs(psi.value(t + h) - psi.value(t)) > bound:
                failures.append("Hoelder envelope violated")
                break

    # lower semicontinuity on a corner-rounding family (Richardson liminf)
    sp = wiener_pair()
    corner = PiecewisePath.from_nodes([(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)])
    s_corner = action(sp, corner, 0.0).value
    rounded_vals = {}
    for n in (5000, 10_000):
        d = 1.0 / n
        edges = np.linspace(0.5 - d, 0.5 + d, 9)
        node_slopes = np.linspace(1.0, -1.0, 9)
        seg_slopes = 0.5 * (node_slopes[:-1] + node_slopes[1:])
        ts = [0.0, *edges, 1.0]
        xs = [0.0, 0.5 - d]
        for m, dt in zip(seg_slopes, np.diff(edges)):
            xs.append(xs[-1] + m * dt)
        xs.append(0.0)
        rounded = PiecewisePath(tuple(ts), tuple(xs))
        rounded_vals[n] = action(sp, rounded, 0.0).value
        if sup_distance(rounded, corner) > 2.0 / n:
            failures.append("rounding family does not converge uniformly")
    liminf = 2 * rounded_vals[10_000] - rounded_vals[5000]
    if not (rounded_vals[5000] <= rounded_vals[10_000] and liminf >= s_corner - 1e-9):
        failures.append(f"LSC estimate {liminf:.12f} < {s_corner:.12f} - 1e-9")

    # jump immunity: waiting at the jump point changes nothing, exactly
    spj = paper_example_pair()
    base_path = PiecewisePath.from_nodes([(0, 1.5), (0.25, 1.0), (0.75, 0.0)])
    waited = base_path.with_wait(0.25, 0.5)
    d_wait = action(spj, waited, 1.5).value - action(spj, base_path, 1.5).value
    if d_wait != 0.0:
        failures.append(f"jump wait changed action by {d_wait}")

    # waiting at a corner point contributes zero
    corner_wait = PiecewisePath.from_nodes(
        [(0, 2.5), (0.5, 2.0), (1.0, 2.0), (1.5, 0.0)]
    )
    no_wait = PiecewisePath.from_nodes([(0, 2.5), (0.5, 2.0), (1.0, 0.0)])
    if action(spj, corner_wait, 2.5).value != action(spj, no_wait, 2.5).value:
        failures.append("corner wait changed the action")

    ok = not failures
    detail = "all subproperties hold" if ok else "; ".join(failures[:4])
    return CriterionResult(
        11, "action-property-suite", ok,
        detail + f" (contraction max gap {worst_contract:.1e})",
    )


ALL_CRITERIA = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
    criterion_11,
]


def run_all(numbers=None, quiet: bool = False) -> list[CriterionResult]:
    results = []
    for fn in ALL_CRITERIA:
        number = int(fn.__name__.split("_")[1])
        if numbers and number not in numbers:
            continue
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            res = CriterionResult(number, fn.__doc__ or fn.__name__, False, f"raised {exc!r}")
        res = CriterionResult(res.number, res.name, res.passed, res.detail,
                              time.perf_counter() - t0)
        results.append(res)
        if not quiet:
            status = "PASS" if res.passed else "FAIL"
            print(f"{status} criterion-{res.number:02d} {res.name}: {res.detail} [{res.elapsed:.1f}s]")
    if not quiet:
        n_ok = sum(r.passed for r in results)
        print(f"{n_ok}/{len(results)} criteria passed")
    return results
