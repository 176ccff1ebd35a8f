"""Monte Carlo simulation via the random time change of a Wiener path.

The process with generator eps * (d/dv)(d/du) is realized as
u^{-1}[sqrt(eps) W_{tau(t)}] where the clock tau solves

    integral_0^tau(t)  (1/2) dv_n/du( u^{-1}(sqrt(eps) W_s) ) ds = t

for a mollified speed v_n. The clock integral is a trapezoid sum on the
Wiener grid and is inverted monotonically onto the requested output grid.
Paths are driven by counter-based Philox streams keyed by (root, stream),
so path i of a run is reproducible in isolation and workers never share
generator state. Queries beyond the pair's domain extend the end pieces
linearly; choose the domain wide enough for the noise scale at hand.

Exit-location detection combines grid crossings with Brownian-bridge
crossing draws between grid points, which removes the leading-order
unseen-excursion bias; crossing times within a detected step use the
linear-interpolated crossing fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, PathTooShortError, PreconditionError
from .paths import PiecewisePath
from .scale import PointClass, ScalePair
from .timechange import MollifiedPair, mollify

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    """Counter-based stream identity: (root, stream) keys a Philox generator."""

    root: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.root & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, k: int) -> "SeedSpec":
        return SeedSpec(self.root, self.stream + k)


def _as_seed(seed) -> SeedSpec:
    if isinstance(seed, SeedSpec):
        return seed
    return SeedSpec(int(seed))


@dataclass(frozen=True)
class WienerPath:
    """Standard Wiener path sampled on a regular grid, W(0) = w0."""

    dt: float
    values: np.ndarray
    seed_spec: SeedSpec

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.values))

    @property
    def horizon(self) -> float:
        return self.dt * (len(self.values) - 1)


def sample_wiener(T: float, dt: float, seed, w0: float = 0.0) -> WienerPath:
    if not (dt > 0 and T >= dt):
        raise PreconditionError(f"need 0 < dt <= T, got dt={dt}, T={T}")
    spec = _as_seed(seed)
    n = int(math.ceil(T / dt))
    incr = spec.generator().normal(0.0, math.sqrt(dt), n)
    vals = np.concatenate([[w0], w0 + np.cumsum(incr)])
    return WienerPath(dt, vals, spec)


def random_time_change(
    mp: MollifiedPair, w: WienerPath, eps: float, t_grid: np.ndarray
) -> np.ndarray:
    """Realized clock tau on the output grid, strictly increasing."""
    t_grid = np.asarray(t_grid, dtype=float)
    y = math.sqrt(eps) * w.values
    density = 0.5 * np.asarray(mp.deriv_y(y))
    inc = 0.5 * (density[:-1] + density[1:]) * w.dt
    A = np.concatenate([[0.0], np.cumsum(inc)])
    target = float(t_grid[-1])
    if A[-1] < target * (1 - 1e-12):
        raise PathTooShortError(
            f"Wiener path exhausted at clock time {A[-1]:.6g} < {target:.6g}",
            achieved=float(A[-1]),
        )
    return np.interp(t_grid, A, w.times)


@dataclass(frozen=True)
class SamplePathRecord:
    """One realized trajectory with its clock and RNG provenance."""

    epsilon: float
    t_grid: np.ndarray
    clock: np.ndarray
    x_values: np.ndarray
    y_values: np.ndarray
    n_mollify: int
    seed_spec: SeedSpec


def _intrinsic_horizon(sp: ScalePair, T: float) -> float:
    return 2.0 * (sp.c1_bound / sp.c2_bound) * T * 1.02


def _constant_density(mp: MollifiedPair) -> float | None:
    """Clock density when dv_n/du is globally constant, else None."""
    sp = mp.sp
    lo, hi = sp.domain
    probes = np.linspace(sp.eval_u(lo), sp.eval_u(hi), 17)
    d = np.asarray(mp.deriv_y(probes))
    if np.allclose(d, d[0], rtol=1e-12, atol=0.0):
        return 0.5 * float(d[0])
    return None


def _batch_y(
    sp: ScalePair,
    mp: MollifiedPair,
    eps: float,
    T: float,
    dt: float,
    x0: float,
    n_paths: int,
    seed: SeedSpec,
    t_grid: np.ndarray,
    stream_offset: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """(tau, Y) arrays of shape (n_paths, len(t_grid)) for one batch."""
    S = _intrinsic_horizon(sp, T)
    m = int(math.ceil(S / dt)) + 1
    y0 = sp.eval_u(x0)
    rng = seed.substream(stream_offset).generator()
    incr = rng.normal(0.0, math.sqrt(eps * dt), size=(n_paths, m))
    Y_raw = np.empty((n_paths, m + 1))
    Y_raw[:, 0] = y0
    np.cumsum(incr, axis=1, out=incr)
    Y_raw[:, 1:] = y0 + incr
    del incr

    s_grid = dt * np.arange(m + 1)
    const = _constant_density(mp)
    if const is not None:
        tau_row = np.minimum(np.asarray(t_grid) / const, s_grid[-1])
        pos = tau_row / dt
        i0 = np.minimum(pos.astype(int), m - 1)
        frac = pos - i0
        Y = Y_raw[:, i0] * (1.0 - frac) + Y_raw[:, i0 + 1] * frac
        tau = np.broadcast_to(tau_row, (n_paths, len(tau_row))).copy()
        return tau, Y

    density = 0.5 * np.asarray(mp.deriv_y(Y_raw))
    inc = 0.5 * (density[:, :-1] + density[:, 1:]) * dt
    A = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(inc, axis=1)], axis=1)
    del density, inc
    if np.min(A[:, -1]) < t_grid[-1] * (1 - 1e-12):
        raise PathTooShortError(
            "intrinsic horizon too short for the clock target",
            achieved=float(np.min(A[:, -1])),
        )
    tau = np.empty((n_paths, len(t_grid)))
    Y = np.empty_like(tau)
    for i in range(n_paths):
        tau[i] = np.interp(t_grid, A[i], s_grid)
        Y[i] = np.interp(tau[i], s_grid, Y_raw[i])
    return tau, Y


def _batch_blocks(n_paths: int, cols: int, budget: float = 1.0e7) -> int:
    return max(1, min(n_paths, int(budget / max(cols, 1))))


def sample_process(
    sp: ScalePair,
    eps: float,
    T: float,
    dt: float | None = None,
    n_mollify: int = 10_000,
    seed=0,
    x0: float = 0.0,
    n_out: int = 1001,
) -> SamplePathRecord:
    """One realized path of the small-noise process on an output grid."""
    if dt is None:
        dt = 1e-4 * T
    spec = _as_seed(seed)
    mp = mollify(sp, n_mollify)
    t_grid = np.linspace(0.0, T, n_out)
    tau, Y = _batch_y(sp, mp, eps, T, dt, x0, 1, spec, t_grid)
    y = Y[0]
    x = sp.u.inverse_array(y)
    return SamplePathRecord(eps, t_grid, tau[0], x, y, n_mollify, spec)


def sample_terminal(
    sp: ScalePair,
    eps: float,
    T: float,
    n_paths: int,
    seed=0,
    x0: float = 0.0,
    dt: float | None = None,
    n_mollify: int = 10_000,
) -> np.ndarray:
    """Terminal values X_T over many independent paths."""
    if dt is None:
        dt = 1e-3 * T
    spec = _as_seed(seed)
    mp = mollify(sp, n_mollify)
    t_grid = np.array([0.0, T])
    S = _intrinsic_horizon(sp, T)
    block = _batch_blocks(n_paths, int(S / dt) + 2)
    out = np.empty(n_paths)
    done = 0
    k = 0
    while done < n_paths:
        nb = min(block, n_paths - done)
        _, Y = _batch_y(sp, mp, eps, T, dt, x0, nb, spec, t_grid, stream_offset=k)
        out[done : done + nb] = sp.u.inverse_array(Y[:, -1])
        done += nb
        k += 1
    return out


# -- exit problems ---------------------------------------------------------------


@dataclass(frozen=True)
class ExitStats:
    interval: tuple[float, float]
    start: float
    hit_right_count: int
    hit_left_count: int
    n_total: int
    estimate: float
    stderr: float


def exit_probability_exact(sp: ScalePair, x: float, a: float, b: float) -> float:
    """Probability of leaving (a, b) on the right: a ratio of scale increments."""
    if not a < x < b:
        raise PreconditionError(f"need a < x < b, got a={a}, x={x}, b={b}")
    ua, ux, ub = sp.eval_u(a), sp.eval_u(x), sp.eval_u(b)
    return (ux - ua) / (ub - ua)


def exit_probability_mc(
    sp: ScalePair,
    eps: float,
    x: float,
    a: float,
    b: float,
    n_paths: int,
    seed=0,
    dt: float | None = None,
) -> ExitStats:
    """Monte Carlo exit-location estimate with binomial standard error.

    The time change preserves the trace of the path, so the exit location of
    the process equals the exit location of its driving scaled Wiener path
    from (u(a), u(b)); the clock never needs to be realized here.
    """
    if not a < x < b:
        raise PreconditionError(f"need a < x < b, got a={a}, x={x}, b={b}")
    la, lb, y0 = sp.eval_u(a), sp.eval_u(b), sp.eval_u(x)
    gap = min(lb - y0, y0 - la)
    if dt is None:
        dt = (gap / 20.0) ** 2 / eps
    spec = _as_seed(seed)

    n_right = 0
    n_left = 0
    block_steps = 256
    block_paths = max(1, int(4e6 / block_steps))
    done = 0
    k = 0
    sd = math.sqrt(eps * dt)
    while done < n_paths:
        nb = min(block_paths, n_paths - done)
        rng = spec.substream(k).generator()
        pos = np.full(nb, y0)
        alive = np.arange(nb)
        while alive.size:
            na = alive.size
            steps = rng.normal(0.0, sd, size=(na, block_steps))
            np.cumsum(steps, axis=1, out=steps)
            traj = pos[alive][:, None] + steps
            prev = np.concatenate([pos[alive][:, None], traj[:, :-1]], axis=1)
            up = traj >= lb
            down = traj <= la
            # Brownian-bridge crossing probabilities for steps that stay inside
            inside = ~(up | down)
            with np.errstate(over="ignore"):
                p_up = np.exp(-2.0 * (lb - prev) * (lb - traj) / (eps * dt))
                p_dn = np.exp(-2.0 * (prev - la) * (traj - la) / (eps * dt))
            draws = rng.random(size=traj.shape)
            bridge = inside & (draws < np.clip(p_up + p_dn, 0.0, 1.0))
            bridge_up = bridge & (draws >= p_dn)
            event = up | down | bridge
            has = event.any(axis=1)
            idx = np.argmax(event, axis=1)
            rows = np.nonzero(has)[0]
            if rows.size:
                right = up[rows, idx[rows]] | bridge_up[rows, idx[rows]]
                n_right += int(np.count_nonzero(right))
                n_left += int(rows.size - np.count_nonzero(right))
            pos[alive] = traj[:, -1]
            alive = alive[~has]
        done += nb
        k += 1

    est = n_right / n_paths
    se = math.sqrt(max(est * (1 - est), 1e-12) / n_paths)
    return ExitStats((a, b), x, n_right, n_left, n_paths, est, se)


# -- tube probabilities and occupation ---------------------------------------------


@dataclass(frozen=True)
class TubeEstimate:
    estimate: float
    rate_proxy: float
    hits: int
    n_paths: int
    zero_hits: bool


def tube_probability(
    sp: ScalePair,
    eps: float,
    psi: PiecewisePath,
    delta: float,
    n_paths: int,
    seed=0,
    dt: float | None = None,
    n_mollify: int = 10_000,
    n_check: int = 1001,
) -> TubeEstimate:
    """Fraction of Y-paths staying uniformly delta-close to the given path.

    Also reports -eps * log(estimate), the finite-eps proxy for the
    u-coordinate action of the centre path.
    """
    if delta <= 0:
        raise PreconditionError("tube radius delta must be positive")
    T = psi.T
    if dt is None:
        dt = 1e-3 * T
    spec = _as_seed(seed)
    mp = mollify(sp, n_mollify)
    t_grid = np.linspace(0.0, T, n_check)
    center = psi.value_array(t_grid)
    x0 = sp.u_inverse(psi.start)

    S = _intrinsic_horizon(sp, T)
    block = _batch_blocks(n_paths, int(S / dt) + n_check)
    hits = 0
    done = 0
    k = 0
    while done < n_paths:
        nb = min(block, n_paths - done)
        _, Y = _batch_y(sp, mp, eps, T, dt, x0, nb, spec, t_grid, stream_offset=k)
        dev = np.max(np.abs(Y - center), axis=1)
        hits += int(np.count_nonzero(dev < delta))
        done += nb
        k += 1
    est = hits / n_paths
    if hits == 0:
        return TubeEstimate(0.0, math.nan, 0, n_paths, True)
    return TubeEstimate(est, -eps * math.log(est), hits, n_paths, False)


@dataclass(frozen=True)
class OccupationStats:
    samples: np.ndarray
    mean: float
    stderr: float


def delay_occupation(
    sp: ScalePair,
    eps: float,
    x_jump: float,
    band: float,
    T: float,
    n_paths: int,
    seed=0,
    dt: float | None = None,
    n_mollify: int = 10_000,
    require_jump: bool = True,
    n_grid: int = 2001,
) -> OccupationStats:
    """Mean Lebesgue time the process spends within +-band of a point.

    With ``require_jump`` the point must be a jump of v (the delay
    mechanism); pass False to measure the same statistic at an ordinary
    point for baseline comparisons.
    """
    if require_jump and sp.classify_point(x_jump) is not PointClass.JUMP_V:
        raise PreconditionError(f"x={x_jump} is not a jump point of v")
    if dt is None:
        dt = 1e-4 * T
    spec = _as_seed(seed)
    mp = mollify(sp, n_mollify)
    t_grid = np.linspace(0.0, T, n_grid)
    dt_out = t_grid[1] - t_grid[0]
    lo_y, hi_y = sp.eval_u(x_jump - band), sp.eval_u(x_jump + band)

    S = _intrinsic_horizon(sp, T)
    block = _batch_blocks(n_paths, int(S / dt) + n_grid)
    samples = np.empty(n_paths)
    done = 0
    k = 0
    while done < n_paths:
        nb = min(block, n_paths - done)
        _, Y = _batch_y(sp, mp, eps, T, dt, x_jump, nb, spec, t_grid, stream_offset=k)
        inside = (Y >= lo_y) & (Y <= hi_y)
        samples[done : done + nb] = dt_out * np.count_nonzero(inside, axis=1)
        done += nb
        k += 1
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(n_paths))
    return OccupationStats(samples, mean, se)
