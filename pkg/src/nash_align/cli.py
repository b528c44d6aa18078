"""Command-line front end: ``nash-align {build,solve,sweep,verify,roots}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import AnnealSchedule, anneal_to_nash
from .dataprep import Psi, build_attractiveness_from_alignment, build_attractiveness_from_shares, build_inconsistency, validate_psd
from .errors import NashAlignError, ParseError
from .game import Coefficients, GameSpec, homogeneous_profile
from .interior import Validity, alpha_poles, f_alpha, find_alpha_roots, solve_interior
from .io import game_to_json, grid_to_csv, metrics_to_json, read_game_json, read_profile_json, read_table
from .oracle import agent_gains
from .render import render_heatmap
from .sweep import COEFFICIENTS, SweepConfig, run_sweep

log = logging.getLogger("nash_align")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_NO_INTERIOR = 3
EXIT_SINGULAR = 4
EXIT_CHECK_FAILED = 5

EPILOG = """\
exit codes:
  0  success (solve: interior equilibrium found)
  1  unexpected internal error
  2  usage error or malformed input (parse errors name the file and line)
  3  solve: no interior equilibrium exists
  4  solve: singular coefficient ratio, even after the ridge retry
  5  check failed (build: C not PSD within --tol; verify: exploitability above --tol)

environment:
  NASH_ALIGN_SEED  reserved; every algorithm here is deterministic, so it is ignored
"""


class UsageError(Exception):
    pass


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _agents(text):
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("need at least 2 agents")
    return value


def _psi(text):
    try:
        return Psi.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _existing(text):
    path = Path(text)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2)


def _add_betas(p, required):
    for flag in ("a", "i", "d"):
        p.add_argument(f"--beta-{flag}", type=_positive, required=required, default=None if required else 1.0)


def _add_schedule(p):
    defaults = AnnealSchedule()
    g = p.add_argument_group("boundary solver schedule")
    g.add_argument("--tau0", type=_positive, default=defaults.tau0)
    g.add_argument("--decay", type=float, default=defaults.decay)
    g.add_argument("--tau-min", type=_positive, default=defaults.tau_min)
    g.add_argument("--inner-steps", type=int, default=defaults.inner_steps)
    g.add_argument("--step-size", type=_positive, default=defaults.step_size)
    g.add_argument("--grad-tol", type=_positive, default=defaults.grad_tol)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nash-align",
        description="Equilibria and exclusion maps for the subpopulation-alignment game.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build C and a from probability-table CSVs", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--probs", type=_existing, required=True, help="CSV: sample_id,subpop_0..subpop_{D-1}")
    p.add_argument("--ground-truth", type=_existing, help="CSV: sample_id,option_index,gt_0..gt_{Kc-1}")
    p.add_argument("--options", type=_existing, help="CSV: sample_id,subpop,opt_0..opt_{Kc-1}")
    p.add_argument("--shares", help="comma-separated subpopulation sizes; a = sizes / sum(sizes)")
    p.add_argument("--psi", type=_psi, default=Psi(), help="identity, log1p or power:<p> (default identity)")
    p.add_argument("--tol", type=_positive, default=1e-9, help="PSD tolerance on the min eigenvalue")
    p.add_argument("--out", type=Path, required=True, help="output JSON {d, c, a}")

    p = sub.add_parser("solve", help="closed-form interior equilibrium", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--game", type=_existing, required=True)
    p.add_argument("--agents", type=_agents, required=True, help="number of agents M (no default)")
    _add_betas(p, required=True)
    p.add_argument("--boundary", action="store_true", help="on no interior equilibrium, anneal to a boundary one")
    p.add_argument("--verify", action="store_true", help="append oracle exploitability")
    p.add_argument("--stage-log", type=Path, help="JSON-lines per-stage log of the boundary solver")
    _add_schedule(p)

    p = sub.add_parser("sweep", help="log-scaled two-coefficient sweep", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--game", type=_existing, required=True)
    p.add_argument("--agents", type=_agents, required=True, help="number of agents M (no default)")
    p.add_argument("--fixed", choices=COEFFICIENTS, default="beta_d")
    p.add_argument("--fixed-value", type=_positive, default=1.0)
    p.add_argument("--range-x", type=float, nargs=2, metavar=("LO", "HI"), default=(1e-2, 1e2))
    p.add_argument("--range-y", type=float, nargs=2, metavar=("LO", "HI"), default=(1e-2, 1e2))
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--threshold", type=float, default=0.05,
                   help="exclusion when a weight is strictly below this value (default 0.05)")
    p.add_argument("--focal", type=int, help="judge exclusion on this subpopulation only")
    p.add_argument("--render", action="store_true", help="also write PREFIX.ppm (binary P6)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", type=Path, required=True,
                   help="output prefix: PREFIX.csv, PREFIX.metrics.json, PREFIX.meta.json[, PREFIX.ppm]")

    p = sub.add_parser("verify", help="oracle exploitability of a profile file", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--game", type=_existing, required=True)
    p.add_argument("--profile", type=_existing, required=True, help='JSON {"w": [[...], ...]} or {"w": [...]}')
    p.add_argument("--agents", type=_agents, help="needed when the profile is a single vector")
    _add_betas(p, required=True)
    p.add_argument("--tol", type=_positive, default=1e-8)

    p = sub.add_parser("roots", help="roots of the alpha function f on an interval", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--game", type=_existing, required=True)
    p.add_argument("--interval", type=float, nargs=2, metavar=("LO", "HI"), required=True)
    return parser


def _load_spec(path, m, coeffs=Coefficients(1.0, 1.0, 1.0)) -> GameSpec:
    c, a = read_game_json(path)
    return GameSpec(c, a, m, coeffs)


def cmd_build(args, out) -> int:
    if not args.out.parent.is_dir():
        raise UsageError(f"output directory does not exist: {args.out.parent}")
    if args.shares is None and args.ground_truth is None:
        raise UsageError("need --shares or --ground-truth/--options to build a")
    if args.ground_truth is not None and args.options is None:
        raise UsageError("--ground-truth needs --options (per-option model probabilities)")
    table = read_table(args.probs, args.ground_truth, args.options)
    c = build_inconsistency(table, args.psi)
    if args.shares is not None:
        try:
            sizes = [float(x) for x in args.shares.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse --shares {args.shares!r}") from None
        if len(sizes) != table.d:
            raise UsageError(f"--shares has {len(sizes)} entries, table has {table.d} subpopulations")
        a = build_attractiveness_from_shares(sizes)
    else:
        a = build_attractiveness_from_alignment(table)
    report = validate_psd(c, args.tol)
    args.out.write_text(game_to_json(c, a), encoding="utf-8")
    print(_dump({"out": str(args.out), "psi": str(args.psi), "psd": report.as_dict()}), file=out)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _schedule(args):
    return AnnealSchedule(
        tau0=args.tau0, decay=args.decay, tau_min=args.tau_min,
        inner_steps=args.inner_steps, step_size=args.step_size, grad_tol=args.grad_tol,
    )


def cmd_solve(args, out) -> int:
    if args.stage_log is not None and not args.stage_log.parent.is_dir():
        raise UsageError(f"output directory does not exist: {args.stage_log.parent}")
    spec = _load_spec(args.game, args.agents, Coefficients(args.beta_a, args.beta_i, args.beta_d))
    schedule = _schedule(args) if args.boundary else None
    result = solve_interior(spec)
    doc = result.to_json()
    doc["agents"] = spec.m
    if args.verify and result.validity is Validity.INTERIOR_VALID:
        doc["exploitability"] = float(agent_gains(spec, homogeneous_profile(result.w_star, spec.m)).max())
    if args.boundary and result.validity is Validity.NO_INTERIOR:
        records = []
        anneal = anneal_to_nash(spec, schedule, on_stage=records.append)
        doc["boundary"] = {
            "w": [[float(x) for x in row] for row in anneal.profile],
            "exploitability": anneal.exploitability,
            "stages": len(records),
        }
        if args.stage_log is not None:
            lines = [json.dumps(r) for r in records]
            args.stage_log.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(_dump(doc), file=out)
    return {
        Validity.INTERIOR_VALID: EXIT_OK,
        Validity.NO_INTERIOR: EXIT_NO_INTERIOR,
        Validity.SINGULAR: EXIT_SINGULAR,
    }[result.validity]


def cmd_sweep(args, out) -> int:
    prefix = args.out
    if not prefix.parent.is_dir():
        raise UsageError(f"output directory does not exist: {prefix.parent}")
    try:
        config = SweepConfig(
            fixed=args.fixed, fixed_value=args.fixed_value,
            range_x=tuple(args.range_x), range_y=tuple(args.range_y),
            resolution=args.resolution, threshold=args.threshold, focal=args.focal,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    spec = _load_spec(args.game, args.agents)
    if config.focal is not None and not 0 <= config.focal < spec.d:
        raise UsageError(f"--focal {config.focal} out of range for D={spec.d}")
    grid = run_sweep(spec, config, jobs=args.jobs)
    paths = {"csv": prefix.with_name(prefix.name + ".csv"), "metrics": prefix.with_name(prefix.name + ".metrics.json")}
    paths["csv"].write_text(grid_to_csv(grid, spec.d), encoding="utf-8")
    paths["metrics"].write_text(metrics_to_json(grid), encoding="utf-8")
    if args.render:
        paths["ppm"] = prefix.with_name(prefix.name + ".ppm")
        paths["ppm"].write_bytes(render_heatmap(grid, config.focal))
    meta = {
        "version": __version__,
        "agents": spec.m,
        "axes": {"x": config.axes[0], "y": config.axes[1]},
        "fixed": {config.fixed: config.fixed_value},
        "range_x": list(config.range_x),
        "range_y": list(config.range_y),
        "resolution": config.resolution,
        "threshold": config.threshold,
        "focal": config.focal,
    }
    paths["meta"] = prefix.with_name(prefix.name + ".meta.json")
    paths["meta"].write_text(_dump(meta) + "\n", encoding="utf-8")
    print(_dump({"metrics": grid.metrics.to_json(), "files": {k: str(v) for k, v in paths.items()}}), file=out)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    c, a = read_game_json(args.game)
    w = read_profile_json(args.profile, args.agents)
    if w.shape[1] != c.shape[0]:
        raise UsageError(f"profile has {w.shape[1]} columns, game has D={c.shape[0]}")
    if args.agents is not None and w.shape[0] != args.agents:
        raise UsageError(f"profile has {w.shape[0]} rows but --agents is {args.agents}")
    if np.any(w < 0) or np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-9:
        raise UsageError("profile rows must be non-negative and sum to 1")
    spec = GameSpec(c, a, w.shape[0], Coefficients(args.beta_a, args.beta_i, args.beta_d))
    gains = agent_gains(spec, w)
    expl = float(max(0.0, gains.max()))
    print(_dump({"exploitability": expl, "gains": [float(g) for g in gains], "nash": expl <= args.tol}), file=out)
    return EXIT_OK if expl <= args.tol else EXIT_CHECK_FAILED


def cmd_roots(args, out) -> int:
    lo, hi = args.interval
    if not 0 < lo < hi:
        raise UsageError("--interval needs 0 < LO < HI")
    spec = _load_spec(args.game, 2)
    roots = find_alpha_roots(spec, (lo, hi))
    print(_dump({
        "interval": [lo, hi],
        "poles": [float(p) for p in alpha_poles(spec)],
        "roots": roots,
        "f_at_roots": [f_alpha(spec, r) for r in roots],
    }), file=out)
    return EXIT_OK


COMMANDS = {"build": cmd_build, "solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "roots": cmd_roots}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, ParseError) as exc:
        print(f"nash-align {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NashAlignError, ValueError) as exc:
        print(f"nash-align {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
