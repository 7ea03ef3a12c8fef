"""Command-line entry point: ``laguerre-limits <subcommand> --config run.ini``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from typing import Dict, List, Optional

from .densities import density_from_spec
from .errors import (
    DegenerateConfiguration,
    InvalidDensity,
    LaguerreError,
)
from .estimators import SCENARIOS, convergence_suite
from .geometry import Box, Disk
from .sampling import Region, read_points_csv, sample_density, write_points_csv
from .stabilization import envelope_sup, event_E, event_Hmin
from .tessellation import (
    DualTriangulation,
    build_dual,
    build_laguerre,
    read_complex_json,
    render_svg,
    skeleton_restrict,
    write_complex_json,
)

DENSITY_KEYS = {"density", "beta", "gamma", "n", "table"}
ALLOWED = {
    "sample": DENSITY_KEYS | {"seed", "region", "x0", "y0", "x1", "y1", "cx", "cy", "radius", "h_lo", "h_hi", "output"},
    "tessellate": {"points", "frame", "output"},
    "certify": {"points", "mode", "R", "r", "t"},
    "experiment": {"seed", "scenario", "replicates", "intensity_replicates", "n_grid", "eps_grid", "window"},
    "render": {"complex", "output", "skeleton_radius"},
}


class UsageError(Exception):
    """Bad configuration or arguments (exit code 2)."""


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI file with one section per subcommand")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--svg", action="store_true", help="also write an SVG rendering")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("--workers", type=int, default=1, metavar="N", help="worker processes for replicates")
    p = argparse.ArgumentParser(prog="laguerre-limits", description="Poisson-Laguerre tessellations and their limits.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("sample", "sample a weighted Poisson process to CSV"),
        ("tessellate", "build the dual triangulation and Laguerre cells of a points file"),
        ("certify", "evaluate the stabilization events for a points file"),
        ("experiment", "run a named convergence scenario"),
        ("render", "render a complex JSON file as SVG"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return p


def _section(path: Optional[str], name: str) -> Dict[str, str]:
    if path is None:
        return {}
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not cp.has_section(name):
        return {}
    values = dict(cp.items(name))
    unknown = sorted(set(values) - ALLOWED[name])
    if unknown:
        raise UsageError(f"[{name}] unknown key(s): {', '.join(unknown)}")
    return values


def _float(cfg: Dict[str, str], key: str, default: Optional[float] = None) -> float:
    if key not in cfg:
        if default is None:
            raise UsageError(f"missing key '{key}'")
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise UsageError(f"'{key}' must be a number, got {cfg[key]!r}") from None


def _int(cfg: Dict[str, str], key: str, default: int) -> int:
    try:
        return int(cfg.get(key, default))
    except ValueError:
        raise UsageError(f"'{key}' must be an integer, got {cfg[key]!r}") from None


def _list(cfg: Dict[str, str], key: str, cast) -> Optional[List]:
    if key not in cfg:
        return None
    try:
        return [cast(v) for v in cfg[key].replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"'{key}' must be a list of numbers") from None


def _seed(args, cfg: Dict[str, str]) -> int:
    seed = args.seed if args.seed is not None else _int(cfg, "seed", 0)
    if not 0 <= seed < 2 ** 64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    return seed


def _target(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, name)
    if os.path.exists(path) and not args.force:
        raise UsageError(f"refusing to overwrite {path} (use --force)")
    return path


def _input(cfg: Dict[str, str], key: str, args) -> str:
    if key not in cfg:
        raise UsageError(f"missing key '{key}'")
    path = cfg[key]
    if not os.path.isabs(path) and args.config:
        cand = os.path.join(os.path.dirname(os.path.abspath(args.config)), path)
        if os.path.exists(cand):
            path = cand
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    return path


def cmd_sample(args) -> int:
    cfg = _section(args.config, "sample")
    spec = {k: v for k, v in cfg.items() if k in DENSITY_KEYS}
    try:
        f = density_from_spec(spec)
    except (InvalidDensity, ValueError) as exc:
        raise UsageError(str(exc)) from None
    kind = cfg.get("region", "box")
    if kind == "box":
        spatial = Box(_float(cfg, "x0", 0.0), _float(cfg, "y0", 0.0), _float(cfg, "x1", 1.0), _float(cfg, "y1", 1.0))
    elif kind == "disk":
        spatial = Disk(_float(cfg, "cx", 0.0), _float(cfg, "cy", 0.0), _float(cfg, "radius", 1.0))
    else:
        raise UsageError(f"unknown region '{kind}'")
    heights = (_float(cfg, "h_lo", f.lo if math.isfinite(f.lo) else None), _float(cfg, "h_hi", f.hi if math.isfinite(f.hi) else None))
    config = sample_density(f, Region(spatial, heights), _seed(args, cfg))
    path = _target(args, cfg.get("output", "points.csv"))
    write_points_csv(config, path)
    print(f"{len(config)} points -> {path}")
    return 0


def _read_points(args, cfg):
    config = read_points_csv(_input(cfg, "points", args))
    if len(config) == 0:
        raise UsageError("points file is empty")
    return config


def cmd_tessellate(args) -> int:
    cfg = _section(args.config, "tessellate")
    config = _read_points(args, cfg)
    try:
        dual = build_dual(config)
    except DegenerateConfiguration as exc:
        raise UsageError(str(exc)) from None
    frame = None
    if "frame" in cfg:
        vals = _list(cfg, "frame", float)
        if len(vals) != 4:
            raise UsageError("frame needs x0 y0 x1 y1")
        frame = Box(*vals)
    diagram = build_laguerre(dual, frame)
    out = cfg.get("output", "complex.json")
    path = _target(args, out)
    write_complex_json(diagram, path)
    print(f"{len(dual.simplices)} simplices, {sum(1 for c in diagram.cells.values() if not c.empty)} cells -> {path}")
    if args.svg:
        svg = _target(args, os.path.splitext(out)[0] + ".svg")
        render_svg(diagram, svg)
    return 0


def cmd_certify(args) -> int:
    cfg = _section(args.config, "certify")
    config = _read_points(args, cfg)
    mode = cfg.get("mode", "dual")
    if mode not in ("dual", "laguerre"):
        raise UsageError(f"mode must be dual or laguerre, got '{mode}'")
    R, r, t = _float(cfg, "R", 1.0), _float(cfg, "r", 1.0), _float(cfg, "t", 0.0)
    if not (R > 0 and r > 0 and t <= 0):
        raise UsageError("need R > 0, r > 0 and t <= 0")
    try:
        dual = build_dual(config)
    except DegenerateConfiguration:
        dual = DualTriangulation(config, [], 0, degenerate=True)
    events = {
        "Hmin": bool(event_Hmin(config, 2 * math.sqrt((R + r) ** 2 - t), t)),
        "Hmax": bool(envelope_sup(config, R, None if dual.degenerate else dual)[0] <= (R + r) ** 2),
        "E": bool(event_E(dual, R, r, require_cover=True)) if not dual.degenerate else False,
    }
    key = "E" if mode == "dual" else "Hmax"
    events["certified"] = events[key] and events["Hmin"]
    print(json.dumps(events, sort_keys=True))
    return 0


def cmd_experiment(args) -> int:
    cfg = _section(args.config, "experiment")
    name = cfg.get("scenario")
    if name is None:
        raise UsageError("missing key 'scenario'")
    if name not in SCENARIOS:
        raise UsageError(f"unknown scenario '{name}' (known: {', '.join(sorted(SCENARIOS))})")
    n_grid = _list(cfg, "n_grid", int)
    eps = _list(cfg, "eps_grid", float) or [0.05, 0.1, 0.2]
    reps = _int(cfg, "replicates", 100)
    ireps = _int(cfg, "intensity_replicates", 50)
    if reps < 1 or ireps < 1 or args.workers < 1:
        raise UsageError("replicates and workers must be positive")
    window = _float(cfg, "window", 0.0) or None
    report = convergence_suite(name, reps, ireps, _seed(args, cfg), args.workers, n_grid, eps, window)
    for stem in ("coincidence.csv", "envelope.csv", "intensities.csv", "report.json"):
        _target(args, stem)
    paths = report.write(args.out, force=True)
    print("\n".join(paths))
    return 0


def cmd_render(args) -> int:
    cfg = _section(args.config, "render")
    diagram = read_complex_json(_input(cfg, "complex", args))
    skel = None
    if "skeleton_radius" in cfg:
        skel = skeleton_restrict(diagram, Disk(0.0, 0.0, _float(cfg, "skeleton_radius")))
    path = _target(args, cfg.get("output", "render.svg"))
    render_svg(diagram, path, skel)
    return 0


COMMANDS = {
    "sample": cmd_sample,
    "tessellate": cmd_tessellate,
    "certify": cmd_certify,
    "experiment": cmd_experiment,
    "render": cmd_render,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LaguerreError, OSError, ValueError, ArithmeticError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
