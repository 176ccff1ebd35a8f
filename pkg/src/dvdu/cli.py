"""Command-line front end.

Commands: classify, time-change, action, simulate, exit, ldp, delay,
front, rde, verify. Every run writes a manifest JSON (parameters, seed,
package and library versions, wall time) next to its data artifacts; data
files are written atomically and byte-identical for identical config+seed.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance failure (verify).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, acceptance
from .action import action as action_fn
from .config import (
    RunConfig,
    canonical_config,
    canonical_json,
    format_float,
    load_config,
    write_atomic,
    write_csv,
)
from .errors import ConfigError, DvduError
from .front import front_time, front_jump_detector, optimize_path, w_value
from .paths import regularity_report
from .rde import McParams, dichotomy_check, solve_rde
from .simulate import (
    delay_occupation,
    exit_probability_exact,
    exit_probability_mc,
    sample_process,
    tube_probability,
)
from .front import FrontSolution
from .timechange import check_constancy_on_gamma_jump, sigma

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4


def _manifest(cfg: RunConfig, command: str, out_dir: Path, outputs: list[str],
              wall: float, extra: dict | None = None) -> None:
    data = {
        "command": command,
        "seed": cfg.seed,
        "params": {k: v for k, v in cfg.params.items()},
        "outputs": outputs,
        "versions": {
            "dvdu": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": round(wall, 3),
    }
    if extra:
        data.update(extra)
    write_atomic(str(out_dir / f"{command.replace('-', '_')}_manifest.json"),
                 canonical_json(data) + "\n")


def _need(cfg: RunConfig, attr: str, command: str):
    val = getattr(cfg, attr)
    if val is None or (attr == "paths" and not val):
        raise ConfigError(f"command '{command}' requires a '{attr}' block in the config")
    return val


def _cmd_classify(cfg: RunConfig, out: Path) -> list[str]:
    sp = _need(cfg, "scale_pair", "classify")
    canonical = canonical_json(canonical_config(cfg)) + "\n"
    write_atomic(str(out / "config_canonical.json"), canonical)
    rows = [
        (float(x), cls.value, float(sp.jump_size(x)), float(sp.dv_du(x)))
        for x, cls in sp.classified_points()
    ]
    write_csv(out / "classified_points.csv", ["x", "class", "jump", "dv_du"], rows)
    print(canonical, end="")
    return ["config_canonical.json", "classified_points.csv"]


def _cmd_time_change(cfg: RunConfig, out: Path) -> list[str]:
    sp = _need(cfg, "scale_pair", "time-change")
    paths = _need(cfg, "paths", "time-change")
    outputs = []
    for i, path in enumerate(paths):
        tmap = sigma(sp, path)
        rows = tmap.rows(n_grid=201)
        name = f"time_change_{i}.csv"
        write_csv(out / name, ["t", "sigma"], rows)
        outputs.append(name)
        rep = check_constancy_on_gamma_jump(path, tmap)
        print(f"path {i}: sigma(T) = {format_float(tmap.total)}, "
              f"flat intervals {tmap.flat_intervals()}, constancy ok = {rep.ok}")
    return outputs


def _cmd_action(cfg: RunConfig, out: Path) -> list[str]:
    sp = _need(cfg, "scale_pair", "action")
    paths = _need(cfg, "paths", "action")
    x0 = float(cfg.param("x0"))
    outputs = []
    for i, path in enumerate(paths):
        av = action_fn(sp, path, x0 if len(paths) == 1 else path.start)
        rows = [(p.t0, p.t1, p.x0, p.x1, p.value) for p in av.breakdown]
        name = f"action_breakdown_{i}.csv"
        write_csv(out / name, ["t0", "t1", "x0", "x1", "contribution"], rows)
        outputs.append(name)
        print(f"path {i}: value = {format_float(av.value)} method = {av.method}")
    return outputs


def _cmd_simulate(cfg: RunConfig, out: Path) -> list[str]:
    sp = _need(cfg, "scale_pair", "simulate")
    rec = sample_process(
        sp,
        eps=float(cfg.param("eps")),
        T=float(cfg.param("T")),
        dt=cfg.param("dt"),
        n_mollify=int(cfg.param("n_mollify")),
        seed=cfg.seed,
        x0=float(cfg.param("x0")),
    )
    rows = list(zip(rec.t_grid, rec.clock, rec.x_values, rec.y_values))
    write_csv(out / "sample_path.csv", ["t", "tau", "x", "y"], rows)
    print(f"simulated horizon {cfg.param('T')} at eps={cfg.param('eps')}; "
          f"X_T = {format_float(float(rec.x_values[-1]))}")
    return ["sample_path.csv"]


def _cmd_exit(cfg: RunConfig, out: Path) -> list[str]:
    sp = _need(cfg, "scale_pair", "exit")
    params = cfg.params
    a, b = float(params.get("a", -1.0)), float(params.get("b", 1.0))
    x0 = float(cfg.param("x0"))
    exact = exit_probability_exact(sp, x0, a, b)
    st = exit_probability_mc(
        sp, float(cfg.param("eps")), x0, a, b,
        int(cfg.param("n_paths")), seed=cfg.seed,
    )
    summary = {
        "exact": exact,
        "estimate": st.estimate,
        "stderr": st.stderr,
        "hit_right": st.hit_right_count,
        "hit_left": st.hit_left_count,
        "n_paths": st.n_total,
        "within_3se": abs(st.estimate - exact) < 3 * st.stderr,
    }
    write_atomic(str(out / "exit_summary.json"), canonical_json(summary) + "\n")
    print(f"exact = {format_float(exact)}  estimate = {format_float(st.estimate)} "
          f"+- {format_float(st.stderr)}")
    return ["exit_summary.json"]


def _cmd_ldp(cfg: RunConfig, out: Path) -> list[str]:
    sp = _need(cfg, "scale_pair", "ldp")
    paths = _need(cfg, "paths", "ldp")
    psi = paths[0]
    tb = tube_probability(
        sp, float(cfg.param("eps")), psi, float(cfg.param("delta")),
        int(cfg.param("n_paths")), seed=cfg.seed,
        n_mollify=int(cfg.param("n_mollify")),
    )
    summary = {
        "estimate": tb.estimate,
        "rate_proxy": None if math.isnan(tb.rate_proxy) else tb.rate_proxy,
        "hits": tb.hits,
        "n_paths": tb.n_paths,
        "zero_hits": tb.zero_hits,
    }
    write_atomic(str(out / "ldp_summary.json"), canonical_json(summary) + "\n")
    print(f"tube estimate = {tb.estimate:.3e}, rate proxy = {summary['rate_proxy']}")
    return ["ldp_summary.json"]


def _cmd_delay(cfg: RunConfig, out: Path) -> list[str]:
    sp = _need(cfg, "scale_pair", "delay")
    jumps = sp.jump_points()
    if not jumps:
        raise ConfigError("delay command needs a scale pair with a jump in v")
    occ = delay_occupation(
        sp, float(cfg.param("eps")), float(jumps[0]), float(cfg.param("band")),
        float(cfg.param("T")), int(cfg.param("n_paths")), seed=cfg.seed,
        n_mollify=int(cfg.param("n_mollify")),
    )
    summary = {"mean": occ.mean, "stderr": occ.stderr, "x_jump": jumps[0],
               "band": cfg.param("band"), "n_paths": int(cfg.param("n_paths"))}
    write_atomic(str(out / "delay_summary.json"), canonical_json(summary) + "\n")
    print(f"mean occupation = {format_float(occ.mean)} +- {format_float(occ.stderr)}")
    return ["delay_summary.json"]


def _cmd_front(cfg: RunConfig, out: Path, w_grid: bool) -> list[str]:
    sc = _need(cfg, "scenario", "front")
    params = cfg.params
    x_lo = float(params.get("x_lo", 0.1))
    x_hi = float(params.get("x_hi", 4.0))
    n_x = int(params.get("n_x", 40))
    xs = np.linspace(x_lo, x_hi, n_x)
    sol = FrontSolution(sc)
    tstars = [sol.t_star(float(x)) for x in xs]
    speeds = [float("nan")] + [
        (xs[i] - xs[i - 1]) / (tstars[i] - tstars[i - 1]) if tstars[i] > tstars[i - 1] else math.inf
        for i in range(1, len(xs))
    ]
    waits = []
    for x, ts in zip(xs, tstars):
        _, schedule, _ = optimize_path(sc, ts, float(x))
        waits.append(sum(w.duration for w in schedule))
    rows = list(zip(map(float, xs), tstars, speeds, waits))
    write_csv(out / "front.csv", ["x", "t_star", "speed", "total_wait"], rows)
    outputs = ["front.csv"]
    jumps = front_jump_detector(sc, xs)
    if jumps:
        write_csv(out / "front_jumps.csv", ["x_lo", "x_hi", "t_level"],
                  [(j.x_lo, j.x_hi, j.t_level) for j in jumps])
        outputs.append("front_jumps.csv")
    if w_grid:
        t_grid = np.linspace(float(params.get("t_lo", 0.05)),
                             float(params.get("t_hi", max(tstars) * 1.2)),
                             int(params.get("n_t", 30)))
        rows = [
            (float(t), float(x), w_value(sc, float(t), float(x)))
            for t in t_grid for x in xs
        ]
        write_csv(out / "w_grid.csv", ["t", "x", "w"], rows)
        outputs.append("w_grid.csv")
    print(f"front solved on [{x_lo}, {x_hi}] ({n_x} points); "
          f"{len(jumps)} jump interval(s)")
    return outputs


def _cmd_rde(cfg: RunConfig, out: Path) -> list[str]:
    sc = _need(cfg, "scenario", "rde")
    params = cfg.params
    eps = float(cfg.param("eps"))
    t_grid = np.linspace(float(params.get("t_lo", 0.05)), float(params.get("t_hi", 1.5)),
                         int(params.get("n_t", 40)))
    x_grid = np.linspace(float(params.get("x_lo", -1.5)), float(params.get("x_hi", 3.5)),
                         int(params.get("n_x", 80)))
    mc = McParams(n_mc=int(params.get("n_mc", 2000)),
                  n_mollify=int(cfg.param("n_mollify")))
    field = solve_rde(sc, eps, t_grid, x_grid, mc, seed=cfg.seed)
    rows = [
        (float(t), float(x), float(field.values[i, j]))
        for i, t in enumerate(t_grid) for j, x in enumerate(x_grid)
    ]
    write_csv(out / "rde_field.csv", ["t", "x", "f"], rows)
    rep = dichotomy_check(field, FrontSolution(sc), margin=float(params.get("margin", 0.2)))
    summary = {
        "converged": field.converged,
        "iterations": field.iteration_count,
        "residual": field.residual,
        "clamp_events_final_sweep": field.clamp_events,
        "burned_fraction_ok": rep.burned_fraction_ok,
        "unburned_fraction_ok": rep.unburned_fraction_ok,
        "violation_fraction": rep.violation_fraction,
    }
    write_atomic(str(out / "rde_dichotomy.json"), canonical_json(summary) + "\n")
    print(f"rde converged={field.converged} burned_ok={rep.burned_fraction_ok:.3f} "
          f"unburned_ok={rep.unburned_fraction_ok:.3f}")
    return ["rde_field.csv", "rde_dichotomy.json"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dvdu",
        description="Generalized 1-d diffusions: action functionals, time changes, "
                    "simulation, KPP fronts.",
    )
    parser.add_argument("command", choices=[
        "classify", "time-change", "action", "simulate", "exit", "ldp",
        "delay", "front", "rde", "verify",
    ])
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--paths", type=int, help="override params.n_paths")
    parser.add_argument("--dt", type=float, help="override params.dt")
    parser.add_argument("--mollify-n", type=int, help="override params.n_mollify")
    parser.add_argument("--eps", type=float, help="override params.eps")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--w-grid", action="store_true",
                        help="front: also emit a (t, x, W) grid")
    parser.add_argument("--criteria", type=str, default=None,
                        help="verify: comma-separated criterion numbers")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "verify":
        numbers = None
        if args.criteria:
            numbers = {int(s) for s in args.criteria.split(",")}
        results = acceptance.run_all(numbers=numbers, quiet=args.quiet)
        return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE

    try:
        if not args.config:
            raise ConfigError(f"command '{args.command}' requires --config")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = RunConfig(cfg.scale_pair, cfg.paths, cfg.scenario, cfg.params,
                            args.seed, cfg.out_dir, cfg.raw)
        overrides = {"n_paths": args.paths, "dt": args.dt,
                     "n_mollify": args.mollify_n, "eps": args.eps}
        for key, val in overrides.items():
            if val is not None:
                cfg.params[key] = val
        out = Path(args.out if args.out is not None else cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    handlers = {
        "classify": lambda: _cmd_classify(cfg, out),
        "time-change": lambda: _cmd_time_change(cfg, out),
        "action": lambda: _cmd_action(cfg, out),
        "simulate": lambda: _cmd_simulate(cfg, out),
        "exit": lambda: _cmd_exit(cfg, out),
        "ldp": lambda: _cmd_ldp(cfg, out),
        "delay": lambda: _cmd_delay(cfg, out),
        "front": lambda: _cmd_front(cfg, out, args.w_grid),
        "rde": lambda: _cmd_rde(cfg, out),
    }
    t0 = time.perf_counter()
    try:
        if args.quiet:
            import contextlib
            import io

            with contextlib.redirect_stdout(io.StringIO()):
                outputs = handlers[args.command]()
        else:
            outputs = handlers[args.command]()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DvduError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _manifest(cfg, args.command, out, outputs, time.perf_counter() - t0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
