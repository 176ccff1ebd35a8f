"""Structured JSON configuration: parsing, validation, canonicalization.

One format covers scale pairs, paths, and front scenarios, discriminated by
a ``kind`` field per block. Floats are printed with 17 significant digits
so canonical files round-trip bit-exactly.

Scale pair block::

    {"kind": "scale_pair", "domain": [-8, 8],
     "u": {"pieces": [{"kind": "affine", "interval": [-8, 8],
                       "parameters": {"slope": 1.0}}],
           "anchor": [0.0, 0.0]},
     "v": {"pieces": [{"kind": "affine", "interval": [-8, 1],
                       "parameters": {"slope": 1.0}},
                      {"kind": "affine", "interval": [1, 8],
                       "parameters": {"slope": 1.0}, "jump": 0.5}],
           "anchor": [0.0, 0.0]}}

Path block: ``{"kind": "path", "nodes": [[t, x], ...]}``.
Scenario block: ``{"kind": "scenario", "scale_pair": {...},
"c_pieces": [{"upto": 1.0, "value": 1.0}, {"value": 4.0}]}`` where each
piece runs up to its bound (the last piece is unbounded above).
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError
from .front import FrontScenario
from .paths import PiecewisePath
from .pieces import AffinePiece, TabulatedPiece
from .scale import PiecewiseMonotone, ScalePair


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def _require(cond: bool, where: str, msg: str):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


# -- scale pairs ------------------------------------------------------------------


def _parse_monotone(block: dict, domain: tuple[float, float], where: str,
                    allow_jumps: bool) -> PiecewiseMonotone:
    _require(isinstance(block, dict), where, "expected an object")
    pieces_cfg = block.get("pieces")
    _require(isinstance(pieces_cfg, list) and pieces_cfg, where, "needs a non-empty 'pieces' list")
    anchor = tuple(block.get("anchor", (0.0, 0.0)))
    _require(len(anchor) == 2, where, "'anchor' must be [x0, y0]")

    intervals = []
    slopes_or_tables = []
    jumps: dict[float, float] = {}
    for i, pc in enumerate(pieces_cfg):
        w = f"{where}.pieces[{i}]"
        _require(isinstance(pc, dict), w, "expected an object")
        kind = pc.get("kind")
        iv = pc.get("interval")
        _require(isinstance(iv, list) and len(iv) == 2, w, "'interval' must be [lo, hi]")
        params = pc.get("parameters", {})
        if kind == "affine":
            _require("slope" in params, w, "affine piece needs parameters.slope")
            slopes_or_tables.append(("affine", float(params["slope"])))
        elif kind == "tabulated":
            _require("x" in params and "y" in params, w, "tabulated piece needs parameters.x/.y")
            slopes_or_tables.append(("tabulated", (params["x"], params["y"])))
        else:
            raise ConfigError(f"{w}: unknown piece kind {kind!r}")
        intervals.append((float(iv[0]), float(iv[1])))
        j = float(pc.get("jump", 0.0))
        if j != 0.0:
            _require(allow_jumps, w, "jumps are only allowed in v")
            _require(i > 0, w, "the first piece cannot carry a jump")
            _require(j > 0, w, "jump sizes must be positive")
            jumps[intervals[i][0]] = j

    _require(math.isclose(intervals[0][0], domain[0], abs_tol=1e-12), where,
             "pieces must start at the domain's lower end")
    _require(math.isclose(intervals[-1][1], domain[1], abs_tol=1e-12), where,
             "pieces must end at the domain's upper end")
    for (a_lo, a_hi), (b_lo, b_hi) in zip(intervals, intervals[1:]):
        _require(math.isclose(a_hi, b_lo, abs_tol=1e-12), where, "piece intervals must be contiguous")

    if all(k == "affine" for k, _ in slopes_or_tables):
        breaks = [iv[1] for iv in intervals[:-1]]
        return PiecewiseMonotone.from_slopes(
            domain, breaks, [s for _, s in slopes_or_tables],
            anchor=(float(anchor[0]), float(anchor[1])), jumps=jumps or None,
        )
    # mixed or tabulated pieces: chain values manually, anchored afterwards
    pieces = []
    y = 0.0
    for (kind, payload), (lo, hi) in zip(slopes_or_tables, intervals):
        y += jumps.get(lo, 0.0)
        if kind == "affine":
            pieces.append(AffinePiece(lo, hi, y, payload))
        else:
            xs, ys = payload
            pieces.append(TabulatedPiece(lo, hi, y, tuple(map(float, xs)), tuple(map(float, ys))))
        y = pieces[-1].y_hi
    jseq = tuple(jumps.get(lo, 0.0) for lo, _ in intervals[1:])
    provisional = PiecewiseMonotone(tuple(pieces), jseq)
    shift = float(anchor[1]) - provisional.value(float(anchor[0]))
    shifted = []
    for p in pieces:
        if isinstance(p, AffinePiece):
            shifted.append(AffinePiece(p.lo, p.hi, p.y_lo + shift, p.slope))
        else:
            shifted.append(TabulatedPiece(p.lo, p.hi, p.y_lo + shift, p.xs, p.ys))
    return PiecewiseMonotone(tuple(shifted), jseq)


def parse_scale_pair(block: dict, where: str = "scale_pair") -> ScalePair:
    _require(isinstance(block, dict), where, "expected an object")
    _require(block.get("kind") == "scale_pair", where, "kind must be 'scale_pair'")
    dom = block.get("domain")
    _require(isinstance(dom, list) and len(dom) == 2, where, "'domain' must be [lo, hi]")
    domain = (float(dom[0]), float(dom[1]))
    _require(domain[0] < domain[1], where, "domain must be non-degenerate")
    u = _parse_monotone(block.get("u", {}), domain, f"{where}.u", allow_jumps=False)
    v = _parse_monotone(block.get("v", {}), domain, f"{where}.v", allow_jumps=True)
    kwargs = {}
    if "c1_bound" in block:
        kwargs["c1_bound"] = float(block["c1_bound"])
    if "c2_bound" in block:
        kwargs["c2_bound"] = float(block["c2_bound"])
    return ScalePair(u, v, **kwargs)


def scale_pair_to_config(sp: ScalePair) -> dict:
    def mono(m: PiecewiseMonotone, with_jumps: bool) -> dict:
        pieces = []
        for i, p in enumerate(m.pieces):
            if not isinstance(p, AffinePiece):
                raise ConfigError("only affine pieces can be serialized canonically")
            entry: dict[str, Any] = {
                "kind": "affine",
                "interval": [p.lo, p.hi],
                "parameters": {"slope": p.slope},
            }
            if with_jumps and i > 0 and m.jumps[i - 1] != 0.0:
                entry["jump"] = m.jumps[i - 1]
            pieces.append(entry)
        anchor_x = m.lo
        return {"pieces": pieces, "anchor": [anchor_x, m.value(anchor_x)]}

    return {
        "kind": "scale_pair",
        "domain": [sp.domain[0], sp.domain[1]],
        "u": mono(sp.u, False),
        "v": mono(sp.v, True),
        "c1_bound": sp.c1_bound,
        "c2_bound": sp.c2_bound,
    }


# -- paths and scenarios ------------------------------------------------------------


def parse_path(block: dict, where: str = "path") -> PiecewisePath:
    _require(isinstance(block, dict), where, "expected an object")
    _require(block.get("kind") == "path", where, "kind must be 'path'")
    nodes = block.get("nodes")
    _require(isinstance(nodes, list) and len(nodes) >= 2, where, "'nodes' must list >= 2 [t, x] pairs")
    try:
        return PiecewisePath.from_nodes([(float(t), float(x)) for t, x in nodes])
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def path_to_config(path: PiecewisePath) -> dict:
    return {"kind": "path", "nodes": [[t, x] for t, x in zip(path.times, path.values)]}


def path_to_csv_rows(path: PiecewisePath) -> list[tuple[float, float]]:
    return list(zip(path.times, path.values))


def parse_path_csv(text: str) -> PiecewisePath:
    nodes = []
    for i, line in enumerate(text.strip().splitlines()):
        if i == 0 and not line.split(",")[0].strip().lstrip("-").replace(".", "").isdigit():
            continue  # header row
        t_str, x_str = line.split(",")[:2]
        nodes.append((float(t_str), float(x_str)))
    return PiecewisePath.from_nodes(nodes)


def parse_scenario(block: dict, where: str = "scenario") -> FrontScenario:
    _require(isinstance(block, dict), where, "expected an object")
    _require(block.get("kind") == "scenario", where, "kind must be 'scenario'")
    sp = parse_scale_pair(block.get("scale_pair", {}), f"{where}.scale_pair")
    pieces = block.get("c_pieces")
    _require(isinstance(pieces, list) and pieces, where, "'c_pieces' must be a non-empty list")
    breaks: list[float] = []
    values: list[float] = []
    for i, pc in enumerate(pieces):
        w = f"{where}.c_pieces[{i}]"
        _require(isinstance(pc, dict) and "value" in pc, w, "needs a 'value'")
        values.append(float(pc["value"]))
        if i < len(pieces) - 1:
            _require("upto" in pc, w, "non-final pieces need an 'upto' bound")
            breaks.append(float(pc["upto"]))
        else:
            _require("upto" not in pc, w, "the final piece must be unbounded")
    horizon = float(block.get("horizon", 100.0))
    try:
        return FrontScenario(sp, tuple(breaks), tuple(values), horizon)
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def scenario_to_config(sc: FrontScenario) -> dict:
    pieces = []
    for i, v in enumerate(sc.c_values):
        entry: dict[str, Any] = {"value": v}
        if i < len(sc.c_breaks):
            entry["upto"] = sc.c_breaks[i]
        pieces.append(entry)
    return {
        "kind": "scenario",
        "scale_pair": scale_pair_to_config(sc.sp),
        "c_pieces": pieces,
        "horizon": sc.horizon,
    }


# -- run configuration ---------------------------------------------------------------


_PARAM_DEFAULTS = {
    "eps": 0.1,
    "T": 1.0,
    "dt": None,
    "n_paths": 10_000,
    "n_mollify": 10_000,
    "x0": 0.0,
    "delta": 0.25,
    "band": 0.2,
    "tol": 1e-9,
}
_POSITIVE_PARAMS = ("eps", "T", "n_paths", "n_mollify", "delta", "band", "tol")


@dataclass(frozen=True)
class RunConfig:
    """Parsed run configuration: blocks plus numeric parameters and seed."""

    scale_pair: ScalePair | None = None
    paths: tuple[PiecewisePath, ...] = ()
    scenario: FrontScenario | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "."
    raw: dict = field(default_factory=dict)

    def param(self, name: str):
        return self.params.get(name, _PARAM_DEFAULTS.get(name))


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    _require(isinstance(raw, dict), "config", "top level must be an object")
    sp = parse_scale_pair(raw["scale_pair"]) if "scale_pair" in raw else None
    paths = tuple(
        parse_path(p, f"paths[{i}]") for i, p in enumerate(raw.get("paths", []))
    )
    if "path" in raw:
        paths = paths + (parse_path(raw["path"]),)
    scenario = parse_scenario(raw["scenario"]) if "scenario" in raw else None
    params = dict(raw.get("params", {}))
    for k, vdef in _PARAM_DEFAULTS.items():
        if k in params and params[k] is not None:
            params[k] = float(params[k]) if k not in ("n_paths", "n_mollify") else int(params[k])
    for k in _POSITIVE_PARAMS:
        if k in params and params[k] is not None and params[k] <= 0:
            raise ConfigError(f"params.{k}: must be positive")
    seed = int(raw.get("seed", 0))
    out_dir = str(raw.get("out", "."))
    return RunConfig(sp, paths, scenario, params, seed, out_dir, raw)


def canonical_config(cfg: RunConfig) -> dict:
    out: dict[str, Any] = {}
    if cfg.scale_pair is not None:
        out["scale_pair"] = scale_pair_to_config(cfg.scale_pair)
    if cfg.paths:
        out["paths"] = [path_to_config(p) for p in cfg.paths]
    if cfg.scenario is not None:
        out["scenario"] = scenario_to_config(cfg.scenario)
    params = {k: v for k, v in cfg.params.items() if v is not None}
    if params:
        out["params"] = params
    out["seed"] = cfg.seed
    out["out"] = cfg.out_dir
    return out


def canonical_json(obj) -> str:
    """Deterministic JSON with 17-significant-digit floats."""

    def encode(o):
        if isinstance(o, float):
            return float(format_float(o))
        if isinstance(o, dict):
            return {k: encode(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [encode(v) for v in o]
        if isinstance(o, (np.floating,)):
            return float(format_float(float(o)))
        if isinstance(o, (np.integer,)):
            return int(o)
        return o

    return json.dumps(encode(obj), sort_keys=True, indent=2)


def write_atomic(path: str, text: str):
    """Write via a temporary file and rename, so readers never see partial files."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, float) else str(v) for v in row))
    write_atomic(path, "\n".join(lines) + "\n")
