"""``fedsa`` command line.

Exit status: 0 on success, 2 when a declared check fails, 1 on any error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import ConfigError, FedsaError
from ..operators.generators import generate
from ..operators.instance_io import fleet_from_dict
from .config import load_spec, parse_seeds, read_json, spec_from_dict
from .experiments import (chain_info, gen_instance, prop1_experiment, resolve_fleet,
                          resolve_workers, run_algorithms, sweep_agents)

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2


def _common(p: argparse.ArgumentParser, seeds: bool = True) -> None:
    p.add_argument("--config", required=True, help="experiment spec (JSON)")
    p.add_argument("--out", help="output directory (default: the spec's 'outputs' or ./out)")
    if seeds:
        p.add_argument("--seeds", help="seed count N (seeds 0..N-1) or comma-separated list")
        p.add_argument("--workers", type=int, help="worker processes (default: $FEDSA_WORKERS or 1)")
        p.add_argument("--fresh-anchor", action="store_true",
                       help="draw a separate observation for the FedHSA anchor")
        p.add_argument("--plot", action="store_true", help="also write plot.svg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsa", description="Federated stochastic approximation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run the spec's algorithms over all seeds"))
    _common(sub.add_parser("compare", help="FedHSA against Local SA on one instance"))
    sweep = sub.add_parser("sweep-agents", help="error floors over a list of fleet sizes")
    _common(sweep)
    sweep.add_argument("--M-list", help="comma-separated agent counts (overrides the spec)")
    _common(sub.add_parser("prop1", help="closed-form and simulated Local SA limit"), seeds=False)
    gen = sub.add_parser("gen", help="write an instance file from generator parameters")
    gen.add_argument("--config", required=True, help="generator parameters or a spec with 'problem'")
    gen.add_argument("--out", required=True, help="instance file to write")
    info = sub.add_parser("chain-info", help="stationary distributions and mixing times")
    info.add_argument("--config", required=True, help="instance file, spec, or generator parameters")
    info.add_argument("--out", required=True, help="output directory")
    info.add_argument("--epsilon", type=float, default=0.01, help="mixing accuracy (default 0.01)")
    return parser


def _spec(args, require_run_fields: bool = True):
    spec = load_spec(args.config, require_run_fields)
    overrides = {}
    if getattr(args, "seeds", None):
        overrides["seeds"] = parse_seeds(args.seeds)
    if getattr(args, "fresh_anchor", False):
        overrides["fresh_anchor"] = True
    return spec.with_overrides(**overrides)


def _out(args, spec) -> Path:
    if args.out:
        return Path(args.out)
    if spec.outputs:
        return spec.base_dir / spec.outputs
    return Path("out")


def _problem_params(path) -> dict:
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return data.get("problem", data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("run", "compare"):
            spec = _spec(args)
            if args.command == "compare":
                spec = spec.with_overrides(algorithms=["fedhsa", "local_sa"])
            summary = run_algorithms(spec, _out(args, spec), resolve_workers(args.workers),
                                     args.plot, args.command)
        elif args.command == "sweep-agents":
            spec = _spec(args)
            m_list = None
            if args.M_list:
                try:
                    m_list = [int(x) for x in args.M_list.split(",") if x.strip()]
                except ValueError:
                    raise ConfigError(f"--M-list: cannot parse {args.M_list!r}") from None
            summary = sweep_agents(spec, _out(args, spec), m_list, resolve_workers(args.workers), args.plot)
        elif args.command == "prop1":
            spec = _spec(args, require_run_fields=False)
            summary = prop1_experiment(spec, _out(args, spec))
        elif args.command == "gen":
            path = gen_instance(_problem_params(args.config), args.out)
            print(f"wrote {path}")
            return EXIT_OK
        else:
            data = read_json(args.config)
            if isinstance(data, dict) and "agents" in data:
                fleet = fleet_from_dict(data)
            elif isinstance(data, dict) and "problem" in data:
                fleet = resolve_fleet(spec_from_dict(data, Path(args.config).parent, False))
            else:
                fleet = generate(_problem_params(args.config))
            chain_info(fleet, args.out, args.epsilon)
            print(f"wrote {Path(args.out) / 'chain_info.json'}")
            return EXIT_OK
    except (FedsaError, OSError) as exc:
        print(f"fedsa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for check in summary.get("checks", []):
        mark = "PASS" if check["passed"] else "FAIL"
        print(f"[{mark}] {check['check']}: {check['detail']}")
    floors = summary.get("floors")
    if isinstance(floors, dict):
        for algo, est in floors.items():
            print(f"{algo}: floor {est['floor']:.6g} (stderr {est['stderr']:.3g}, {est['n_seeds']} seeds)")
    return EXIT_OK if summary.get("passed", True) else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
