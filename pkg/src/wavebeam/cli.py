"""Command-line front end.

Every subcommand computes first and writes all of its files at the end, so a
rejected configuration or a failed first solve leaves the output directory
untouched.  Options may also come from a flat ``key = value`` file passed
with ``--config``; explicit command-line flags win over the file.

Exit codes: 0 success, 2 invalid input (or no solution at the first point),
3 partial results.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .continuation import (
    BranchCurve,
    ContinuationConfig,
    TraceLimits,
    branch_segments,
    join_pieces,
    structure_census,
    sweep_trunk,
    trunk_seed,
)
from .errors import NonConvergence, SingularJacobian, WavebeamError
from .floquet import stability_scan
from .model import RescaleParams, check_nu, rescale
from .reducible import reducible_tree
from .serialization import (
    curve_from_csv,
    curve_from_json,
    curve_to_csv,
    curve_to_json,
    field_samples,
    field_to_csv,
    fmt,
    multipliers_to_json,
    point_from_json,
    point_to_json,
    scan_to_csv,
    tree_to_csv,
    write_text,
)

logger = logging.getLogger("wavebeam")

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 2, 3


class ConfigError(ValueError):
    """Invalid option value or unknown configuration key."""


# option name -> converter; shared by the command line and config files
_GLOBAL_KEYS = {
    "nu": int, "N": int, "M": int, "tol": float, "out_dir": str,
    "threads": int, "seed_omega": float,
}
_COMMAND_KEYS = {
    "trace": {"omega_min": float, "omega_max": float, "e_max": float,
              "max_points": int, "step_min": float, "step_max": float,
              "branches": "bool"},
    "reducible-tree": {"omega_max": float, "omega_points": int, "m_max": int},
    "stability": {"K": int, "steps": int, "multipliers": "bool"},
    "field-sample": {"n_tau": int, "n_x": int, "index": int},
    "rescale": {"m_scale": int, "n_scale": int},
}

_DEFAULTS = {
    "nu": 2, "N": 1, "M": None, "tol": 1e-11, "out_dir": ".", "threads": 1,
    "seed_omega": 1.0 + 1e-4,
    "omega_min": 0.0, "omega_max": None, "e_max": math.inf, "max_points": 20000,
    "step_min": 1e-8, "step_max": 0.1, "branches": False,
    "omega_points": 301, "m_max": None,
    "K": None, "steps": 4096, "multipliers": False,
    "n_tau": 65, "n_x": 33, "index": None,
    "m_scale": 1, "n_scale": 3,
}
_OMEGA_MAX = {"trace": 3.5, "reducible-tree": 4.0}


def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config(path, command: str) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment.

    Keys may use ``-`` or ``_``.  Unknown keys raise :class:`ConfigError`.
    """
    allowed = {**_GLOBAL_KEYS, **_COMMAND_KEYS[command]}
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} for command {command}")
        conv = allowed[key]
        try:
            out[key] = _to_bool(value) if conv == "bool" else conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    return out


def _add_globals(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--nu", type=int, help="1 = wave, 2 = beam (default 2)")
    g.add_argument("--N", type=int, help="spatial modes (default 1)")
    g.add_argument("--M", type=int, help="temporal modes (default N**2)")
    g.add_argument("--tol", type=float, help="residual tolerance (default 1e-11)")
    g.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")
    g.add_argument("--threads", type=int, help="worker threads (default 1)")
    g.add_argument("--seed-omega", dest="seed_omega", type=float,
                   help="frequency of the first trunk point (default 1.0001)")
    g.add_argument("--config", help="key = value file with defaults for any option")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavebeam",
        description="Periodic solutions of the cubic wave and beam equations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="trace the trunk and optionally its branches")
    _add_globals(p)
    p.add_argument("--omega-min", dest="omega_min", type=float)
    p.add_argument("--omega-max", dest="omega_max", type=float, help="default 3.5")
    p.add_argument("--e-max", dest="e_max", type=float)
    p.add_argument("--max-points", dest="max_points", type=int)
    p.add_argument("--step-min", dest="step_min", type=float)
    p.add_argument("--step-max", dest="step_max", type=float)
    p.add_argument("--branches", action="store_const", const=True,
                   help="also write one dataset per branch met by the trunk")

    p = sub.add_parser("reducible-tree", help="closed-form trunk and two-mode branches")
    _add_globals(p)
    p.add_argument("--omega-max", dest="omega_max", type=float, help="default 4")
    p.add_argument("--omega-points", dest="omega_points", type=int)
    p.add_argument("--m-max", dest="m_max", type=int, help="largest time index (default M-1)")

    p = sub.add_parser("stability", help="Floquet scan of a stored curve")
    _add_globals(p)
    p.add_argument("curve", help="curve file (.json, or .csv together with --nu)")
    p.add_argument("--K", type=int, help="perturbation modes, odd (default 2N-1)")
    p.add_argument("--steps", type=int, help="integration steps per period")
    p.add_argument("--multipliers", action="store_const", const=True,
                   help="also write all multipliers as JSON")

    p = sub.add_parser("field-sample", help="sample u(tau, x) of a stored solution")
    _add_globals(p)
    p.add_argument("solution", help="solution JSON, or curve JSON with --index")
    p.add_argument("--n-tau", dest="n_tau", type=int)
    p.add_argument("--n-x", dest="n_x", type=int)
    p.add_argument("--index", type=int, help="point index when reading a curve")

    p = sub.add_parser("rescale", help="apply the scaling symmetry to a stored solution")
    _add_globals(p)
    p.add_argument("solution", help="solution JSON")
    p.add_argument("--m-scale", dest="m_scale", type=int, help="odd time factor (default 1)")
    p.add_argument("--n-scale", dest="n_scale", type=int, help="odd space factor (default 3)")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags; validate everything."""
    cmd = args.command
    keys = {**_GLOBAL_KEYS, **_COMMAND_KEYS[cmd]}
    cfg = {k: _DEFAULTS[k] for k in keys}
    if "omega_max" in cfg:
        cfg["omega_max"] = _OMEGA_MAX[cmd]
    if args.config:
        cfg.update(read_config(args.config, cmd))
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["M"] is None:
        cfg["M"] = cfg["N"] ** 2

    def need(cond, key, msg):
        if not cond:
            raise ConfigError(f"invalid {key}: {msg} (got {cfg[key]!r})")

    need(cfg["nu"] in (1, 2), "nu", "must be 1 or 2")
    need(cfg["N"] >= 1, "N", "must be a positive integer")
    need(cfg["M"] >= 1, "M", "must be a positive integer")
    need(cfg["tol"] > 0, "tol", "must be positive")
    need(cfg["threads"] >= 1, "threads", "must be at least 1")
    need(cfg["seed_omega"] > 1, "seed_omega", "must exceed 1")
    if cmd == "trace":
        need(0 < cfg["step_min"] <= cfg["step_max"], "step_min", "need 0 < step_min <= step_max")
        need(cfg["max_points"] >= 1, "max_points", "must be positive")
        need(cfg["e_max"] > 0, "e_max", "must be positive")
        lo, hi = max(cfg["omega_min"], 0.0), cfg["omega_max"]
        need(lo < hi and lo <= cfg["seed_omega"] < hi, "omega_max",
             f"omega range [{lo}, {hi}] is empty or misses the seed frequency")
    elif cmd == "reducible-tree":
        need(cfg["omega_max"] > 1, "omega_max", "must exceed 1")
        need(cfg["omega_points"] >= 2, "omega_points", "need at least 2")
        need(cfg["m_max"] is None or cfg["m_max"] >= 0, "m_max", "must be non-negative")
    elif cmd == "stability":
        need(cfg["K"] is None or (cfg["K"] >= 1 and cfg["K"] % 2 == 1), "K",
             "must be a positive odd integer")
        need(cfg["steps"] >= 1, "steps", "must be positive")
    elif cmd == "field-sample":
        need(cfg["n_tau"] >= 1, "n_tau", "must be positive")
        need(cfg["n_x"] >= 1, "n_x", "must be positive")
    elif cmd == "rescale":
        for k in ("m_scale", "n_scale"):
            need(cfg[k] >= 1 and cfg[k] % 2 == 1, k, "must be an odd positive integer")
    return cfg


# ---------------------------------------------------------------- commands
# each returns (exit code, {relative file name: text})

def cmd_trace(cfg: dict):
    nu, M, N = cfg["nu"], cfg["M"], cfg["N"]
    config = ContinuationConfig(step_min=cfg["step_min"], step_max=cfg["step_max"],
                                initial_step=min(0.01, cfg["step_max"]), tol=cfg["tol"])
    limits = TraceLimits(cfg["max_points"], cfg["e_max"], (cfg["omega_min"], cfg["omega_max"]))
    try:
        trunk_seed(M, N, nu, cfg["seed_omega"], tol=cfg["tol"])
    except (NonConvergence, SingularJacobian) as exc:
        logger.error("no solution at the first point: %s", exc)
        return EXIT_INVALID, {}
    pieces = sweep_trunk(M, N, nu, cfg["omega_max"], limits, config,
                         seed_omega=cfg["seed_omega"])
    trunk = join_pieces(pieces, "trunk")
    files = {"trunk.csv": curve_to_csv(trunk), "trunk.json": curve_to_json(trunk)}
    if cfg["branches"]:
        for seg in branch_segments(pieces):
            m, n = _mode_of(seg)
            files[f"branch_{m}_{n}.csv"] = curve_to_csv(seg)
            files[f"branch_{m}_{n}.json"] = curve_to_json(seg)
        rows = ["omega,energy,kind,m,n"]
        for om, e, kind, (m, n) in structure_census(pieces):
            rows.append(f"{fmt(om)},{fmt(e)},{kind},{m},{n}")
        files["structures.csv"] = "\n".join(rows) + "\n"
    if any(k == "aborted" for _, k in pieces[-1].events):
        logger.warning("trace stopped early at omega=%.6g", pieces[-1].points[-1].omega)
        return EXIT_PARTIAL, files
    return EXIT_OK, files


def _mode_of(seg: BranchCurve) -> tuple:
    inside = seg.provenance.split("=", 1)[1].strip("()")
    m, n = inside.split(",")
    return int(m), int(n)


def cmd_reducible_tree(cfg: dict):
    grid = np.linspace(1.0, cfg["omega_max"], cfg["omega_points"])
    m_max = cfg["M"] - 1 if cfg["m_max"] is None else cfg["m_max"]
    rows = reducible_tree(cfg["N"], cfg["nu"], grid, m_max)
    return EXIT_OK, {"tree.csv": tree_to_csv(rows)}


def _load_curve(path: str, nu: int) -> BranchCurve:
    text = Path(path).read_text()
    if not text.strip():
        return BranchCurve()
    if Path(path).suffix.lower() == ".json":
        return curve_from_json(text)
    return curve_from_csv(text, nu)


def cmd_stability(cfg: dict, path: str):
    try:
        curve = _load_curve(path, cfg["nu"])
    except (OSError, ValueError, KeyError) as exc:
        logger.error("cannot read curve %s: %s", path, exc)
        return EXIT_INVALID, {}
    annotated, results = stability_scan(curve, cfg["K"], threads=cfg["threads"],
                                        steps=cfg["steps"])
    files = {"scan.csv": scan_to_csv(annotated, [r.max_deviation for r in results])}
    if cfg["multipliers"]:
        files["multipliers.json"] = multipliers_to_json(r.multipliers for r in results)
    failed = sum(r.verdict == "unknown" for r in results)
    if failed:
        logger.warning("%d of %d points could not be classified", failed, len(results))
    return EXIT_OK, files


def _load_point(path: str, index: Optional[int]):
    text = Path(path).read_text()
    if index is None:
        return point_from_json(text)
    curve = curve_from_json(text)
    if not -len(curve) <= index < len(curve):
        raise ValueError(f"index {index} out of range for a curve of {len(curve)} points")
    return curve.points[index]


def cmd_field_sample(cfg: dict, path: str):
    try:
        point = _load_point(path, cfg["index"])
    except (OSError, ValueError, KeyError) as exc:
        logger.error("cannot read solution %s: %s", path, exc)
        return EXIT_INVALID, {}
    tau, x, u = field_samples(point, cfg["n_tau"], cfg["n_x"])
    return EXIT_OK, {"field.csv": field_to_csv(tau, x, u)}


def cmd_rescale(cfg: dict, path: str):
    try:
        point = point_from_json(Path(path).read_text())
    except (OSError, ValueError, KeyError) as exc:
        logger.error("cannot read solution %s: %s", path, exc)
        return EXIT_INVALID, {}
    out = rescale(point, RescaleParams(cfg["m_scale"], cfg["n_scale"]))
    return EXIT_OK, {"rescaled.json": point_to_json(out)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve(args)
        check_nu(cfg["nu"])
    except (ConfigError, ValueError) as exc:
        print(f"wavebeam: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.command == "trace":
            code, files = cmd_trace(cfg)
        elif args.command == "reducible-tree":
            code, files = cmd_reducible_tree(cfg)
        elif args.command == "stability":
            code, files = cmd_stability(cfg, args.curve)
        elif args.command == "field-sample":
            code, files = cmd_field_sample(cfg, args.solution)
        else:
            code, files = cmd_rescale(cfg, args.solution)
    except (WavebeamError, ValueError) as exc:
        print(f"wavebeam: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(cfg["out_dir"])
    # single writer, after all computation
    for name in sorted(files):
        write_text(out / name, files[name])
        logger.info("wrote %s", out / name)
    return code


if __name__ == "__main__":
    sys.exit(main())
