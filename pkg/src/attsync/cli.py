"""Command-line front end: ``attsync simulate | verify | equilibria``.

Exit codes: 0 success, 1 a verification property failed or the
integration broke down, 2 the scenario violates a modelling assumption.
Set ``ATTSYNC_LOG_LEVEL`` (DEBUG, INFO, ...) for log output on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis as an
from . import verify as vf
from .presets import PRESETS, preset
from .scenario import load_scenario, summarize, write_outputs
from .sim import IntegrationError, simulate

log = logging.getLogger("attsync")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load(args, **overrides):
    """``(SimConfig, NetworkState, out_dir)`` from ``--config`` or ``--preset``."""
    if args.preset:
        cfg, x0 = preset(args.preset)
        out = None
        if args.seed is not None:
            overrides["seed"] = args.seed
    else:
        sc = load_scenario(args.config, seed=args.seed)
        cfg, x0, out = sc.config, sc.initial, sc.out_dir
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg, x0, out


def cmd_simulate(args):
    cfg, x0, out = _load(args, dt=args.dt, duration=args.duration)
    out = Path(args.out) if args.out else out
    if out is None:
        raise ValueError("no output directory: pass --out or set [output] dir")
    t0 = time.perf_counter()
    traj = simulate(cfg, x0)
    summary = summarize(traj, time.perf_counter() - t0)
    write_outputs(out, traj, summary)
    print(f"{cfg.mode}: t = {summary['final_time']:g}s, sync error {summary['terminal_sync_error']:.3e}, "
          f"max |w| {summary['terminal_max_omega_norm']:.3e}, Lyapunov violations {summary['lyapunov_violations']}")
    print(f"wrote {out}/states.csv, diagnostics.csv, summary.json")
    return EXIT_OK


def cmd_verify(args):
    results = vf.run_all(seed=args.seed, trials=args.trials, escape_per_label=args.escape_per_label)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<12} {r.detail}  [{r.seconds:.1f}s]")
    if failed:
        replay = Path(args.replay_dir)
        replay.mkdir(parents=True, exist_ok=True)
        for r in failed:
            path = replay / f"{r.name}.json"
            path.write_text(json.dumps({"check": r.name, "seed": args.seed, "detail": r.detail,
                                        "state": r.failure}, indent=2) + "\n")
            print(f"failing state for {r.name} written to {path}")
        return EXIT_FAIL
    return EXIT_OK


def _fmt_eigs(e):
    return "[" + " ".join(f"{x:+.6g}" for x in np.asarray(e).ravel()) + "]"


def cmd_equilibria(args):
    cfg, _, _ = _load(args)
    topo, vs = cfg.topology, cfg.vector_set
    lam = vs.eigenvalues
    print(f"A eigenvalues {_fmt_eigs(lam)}; {4 ** topo.n_edges} label combinations over {topo.n_edges} edges")
    for b in range(3):
        print(f"  pi-{b + 1}: rotation by pi about u{b + 1} = {_fmt_eigs(vs.eigenvectors[:, b])}")
    print(f"{'#':>5}  {'edge labels':<{max(12, 9 * topo.n_edges)}} {'kind':<10} {'class':<8} Hessian block spectra")
    for n, (labels, _, rep) in enumerate(an.enumerate_equilibria(topo, vs), 1):
        spectra = " ".join(_fmt_eigs(e) for e in rep.hessian_block_eigenvalues)
        print(f"{n:>5}  {' '.join(labels):<{max(12, 9 * topo.n_edges)}} {rep.kind:<10} {rep.classification:<8} {spectra}")
    return EXIT_OK


def _source_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--config", type=Path, help="scenario INI file")
    g.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int, default=None)


def build_parser():
    p = argparse.ArgumentParser(prog="attsync", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate a scenario and write CSV/JSON outputs")
    _source_args(s)
    s.add_argument("--out", type=Path)
    s.add_argument("--dt", type=float)
    s.add_argument("--duration", type=float)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run the numerical property suite")
    v.add_argument("--trials", type=int, default=10, help="Monte Carlo convergence trials")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--escape-per-label", type=int, default=5,
                   help="perturbed runs per undesired single-edge equilibrium")
    v.add_argument("--replay-dir", default="verify-failures")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("equilibria", help="tabulate the equilibria and their Hessian spectra")
    _source_args(e)
    e.set_defaults(func=cmd_equilibria)
    return p


def main(argv=None):
    logging.basicConfig(level=os.environ.get("ATTSYNC_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
