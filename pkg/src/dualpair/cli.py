"""Command-line entry point ``dualpair``.

Exit codes: 0 ran to completion (verdicts are in the report), 1 invalid
config, 2 infrastructure error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, corpus_document, corpus_get, corpus_list, load_config, \
    resolve_hamiltonian
from .flows import FlowError, fiber_coverage_probe, integrate_hamiltonian, write_trajectory
from .manifold import ManifoldError
from .report import InfrastructureError, canonical_json, run_plan

EXIT_OK, EXIT_CONFIG, EXIT_INFRA = 0, 1, 2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _run(config, args) -> int:
    try:
        report = run_plan(config, rank_tol=args.tol)
    except InfrastructureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA
    _emit(canonical_json(report), args.out)
    if args.out:
        print(f"{report['classification']}: {report['summary']}", file=sys.stderr)
    return EXIT_OK


def _with_seed(config, seed):
    if seed is None:
        return config
    plan = config.plan
    checks = {k: ({**v, "grid": replace(v["grid"], seed=seed)} if v.get("grid") else v)
              for k, v in plan.checks.items()}
    return replace(config, plan=replace(plan, grid=replace(plan.grid, seed=seed), checks=checks))


def cmd_check(args) -> int:
    config = _with_seed(load_config(args.config), args.seed)
    return _run(config, args)


def cmd_corpus(args) -> int:
    if args.action == "list":
        for name in corpus_list():
            print(name)
        return EXIT_OK
    if not args.name:
        raise ConfigError("", f"corpus {args.action} needs an entry name")
    if args.action == "show":
        corpus_get(args.name)  # validate before printing
        _emit(canonical_json(corpus_document(args.name)), args.out)
        return EXIT_OK
    return _run(_with_seed(corpus_get(args.name), args.seed), args)


def cmd_flow(args) -> int:
    if not Path(args.config).exists() and args.config in corpus_list():
        config = corpus_get(args.config)
    else:
        config = load_config(args.config)
    h = resolve_hamiltonian(config, args.hamiltonian)
    M = config.diagram.total
    if args.start is not None:
        try:
            start = [float(v) for v in args.start.split(",")]
        except ValueError:
            raise ConfigError("--start", f"not a comma-separated point: {args.start!r}") from None
        if not M.contains(start):
            raise ConfigError("--start", f"not a point of chart {M.name!r}")
    elif "flow_probe" in config.plan.checks:
        start = config.plan.checks["flow_probe"]["start"]
    else:
        start = [0.0 if c.bounds is None else 0.5 * sum(c.bounds) for c in M.coordinates]
    try:
        traj = integrate_hamiltonian(h, config.diagram.bivector, start, args.T, args.dt)
    except (FlowError, ManifoldError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA
    if args.dump:
        write_trajectory(traj, args.dump, args.stride)
    summary = {"hamiltonian": traj.hamiltonian, "T": args.T, "dt": args.dt,
               "samples": int(traj.points.shape[0]), "energy_drift": traj.drift,
               "end": [float(v) for v in traj.points[-1]],
               "windings": [int(w) for w in traj.windings]}
    periodic = [c.name for c in M.coordinates if c.periodic]
    if periodic and args.resolution:
        cov = fiber_coverage_probe(traj, periodic, args.resolution)
        summary["coverage"] = {"coordinates": periodic, "resolution": cov.resolution,
                               "covered_fraction": cov.covered_fraction,
                               "max_gap_fraction": cov.max_gap_fraction}
    sys.stdout.write(canonical_json(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualpair", description="Check dual pairs of Poisson maps.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def run_opts(sp):
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.add_argument("--seed", type=int, help="override grid seeds")
        sp.add_argument("--tol", type=float, help="relative rank tolerance (default 1e-9)")

    c = sub.add_parser("check", help="run the analysis plan of a config file")
    c.add_argument("config")
    run_opts(c)
    c.set_defaults(func=cmd_check)

    k = sub.add_parser("corpus", help="built-in example configs")
    k.add_argument("action", choices=["list", "show", "run"])
    k.add_argument("name", nargs="?")
    run_opts(k)
    k.set_defaults(func=cmd_corpus)

    f = sub.add_parser("flow", help="integrate a Hamiltonian flow on the total space")
    f.add_argument("config")
    f.add_argument("--hamiltonian", required=True,
                   help="name of a scalar map on the total space, or an expression")
    f.add_argument("--T", type=float, required=True)
    f.add_argument("--dt", type=float, required=True)
    f.add_argument("--start", help="comma-separated start point")
    f.add_argument("--dump", help="write the trajectory to this file")
    f.add_argument("--stride", type=int, default=1, help="keep every n-th sample in the dump")
    f.add_argument("--resolution", type=int, default=10,
                   help="coverage grid over periodic coordinates (0 disables)")
    f.set_defaults(func=cmd_flow)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA


if __name__ == "__main__":
    sys.exit(main())
