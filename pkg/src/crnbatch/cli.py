"""Command-line interface.

Subcommands: simulate, transform, compare, bench, and the testing
helper `dist coll`.  Same seed + same flags reproduce byte-identical
output files (within one backend).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from importlib.metadata import version as pkg_version

import numpy as np

from . import backend as backend_mod
from .collision import CollisionRunParams, sample_coll
from .continuous import ContinuousParams, run_continuous
from .discrete import run_discrete
from .errors import CrnBatchError
from .parser import parse_config, parse_crn, serialize_crn
from .reference import gillespie_run
from .uniformize import uniformize
from .validate import (TrialSpec, chisq_compare, endpoint_histogram,
                       fit_loglog_slope, hist_mean, scaling_bench, tvd)


def _read_crn(path: str):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return text, parse_crn(text)


def _out_stream(path: str | None):
    return open(path, "w", encoding="utf-8", newline="") if path else sys.stdout


def _write_records(records, crn, meta, fmt, out):
    names = crn.names
    if fmt == "csv":
        writer = csv.writer(out)
        writer.writerow(["step", "time", "passive_fraction", *names])
        for r in records:
            writer.writerow([r.step, repr(float(r.time)), f"{r.passive_fraction:.6g}",
                             *[int(c) for c in r.config]])
    else:
        rows = [{"step": r.step, "time": r.time,
                 "passive_fraction": r.passive_fraction,
                 "coarse": r.coarse,
                 "counts": {n: int(c) for n, c in zip(names, r.config)}}
                for r in records]
        json.dump({"meta": meta, "rows": rows}, out, indent=2)
        out.write("\n")


def _cmd_simulate(args) -> int:
    text, crn = _read_crn(args.crn)
    config = parse_config(args.init, crn)
    meta = {
        "seed": args.seed,
        "method": args.method,
        "volume": args.volume,
        "crn_sha256": hashlib.sha256(serialize_crn(crn).encode()).hexdigest(),
        "version": pkg_version("crnbatch"),
        "time_sampler": args.time_sampler,
        "p": args.p,
    }
    if args.method == "gillespie":
        records = gillespie_run(crn, args.volume, config.counts, t_max=args.time,
                                steps_max=args.steps, seed=args.seed,
                                checkpoints=args.checkpoints)
    elif args.time is not None:
        params = ContinuousParams(args.time, p=args.p, time_sampler=args.time_sampler)
        result = run_continuous(crn, args.volume, config.counts, params,
                                seed=args.seed, checkpoints=args.checkpoints,
                                use_hybrid=args.method == "auto")
        records = result.records
    else:
        result = run_discrete(crn, args.volume, config.counts, args.steps,
                              seed=args.seed, time_sampler=args.time_sampler,
                              checkpoints=args.checkpoints,
                              use_hybrid=args.method == "auto")
        records = result.records
    out = _out_stream(args.output)
    try:
        _write_records(records, crn, meta, args.format, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_transform(args) -> int:
    _, crn = _read_crn(args.crn)
    k0 = args.k0 if args.k0 is not None else max(r.order for r in crn.reactions)
    uni = uniformize(crn, args.volume, k0)
    sys.stdout.write(f"# k_max = {uni.k_max!r}\n")
    sys.stdout.write(serialize_crn(uni.base))
    return 0


def _cmd_compare(args) -> int:
    text, crn = _read_crn(args.crn)
    methods = args.methods.split(",")
    if len(methods) != 2:
        raise CrnBatchError("--methods needs exactly two comma-separated methods")
    hists = []
    for i, method in enumerate(methods):
        spec = TrialSpec(text, args.init, args.volume, args.species,
                         method=method.strip(), at_time=args.at_time,
                         at_steps=args.at_steps, time_sampler=args.time_sampler)
        hists.append(endpoint_histogram(spec, args.trials, seed=args.seed + i,
                                        workers=args.workers))
    stat, p_value = chisq_compare(hists[0], hists[1])
    distance = tvd(hists[0], hists[1])
    print(f"trials per method: {args.trials}")
    for method, hist in zip(methods, hists):
        print(f"mean[{args.species}] ({method}): {hist_mean(hist):.4f}")
    print(f"chi-square statistic: {stat:.4f}")
    print(f"p-value: {p_value:.6g}")
    print(f"total variation distance: {distance:.6g}")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["count", f"freq_{methods[0]}", f"freq_{methods[1]}"])
            for value in sorted(set(hists[0]) | set(hists[1])):
                writer.writerow([value, hists[0].get(value, 0), hists[1].get(value, 0)])
    return 0


def _cmd_bench(args) -> int:
    text, _ = _read_crn(args.crn)
    sizes = [int(float(s)) for s in args.sizes.split(",")]
    fracs = {}
    for chunk in args.init_frac.split(","):
        name, _, val = chunk.partition("=")
        fracs[name.strip()] = float(val)
    methods = tuple(m.strip() for m in args.methods.split(","))
    backends = tuple(b.strip() for b in args.backends.split(",")) if args.backends else None
    rows = scaling_bench(text, sizes, args.time, fracs, methods=methods,
                         seed=args.seed, backends=backends)
    out = _out_stream(args.output)
    try:
        writer = csv.writer(out)
        writer.writerow(["n", "method", "backend", "wall_time"])
        for r in rows:
            writer.writerow([r["n"], r["method"], r["backend"], f"{r['wall_time']:.6f}"])
    finally:
        if out is not sys.stdout:
            out.close()
    for method in methods:
        for bk in backends or (backend_mod.get_backend(),):
            try:
                slope = fit_loglog_slope(rows, method, bk)
                print(f"# log-log slope [{method}/{bk}]: {slope:.3f}", file=sys.stderr)
            except CrnBatchError:
                pass
    return 0


def _cmd_dist_coll(args) -> int:
    params = CollisionRunParams(args.n, args.r, args.o, args.g)
    rng = np.random.default_rng(args.seed)
    for _ in range(args.samples):
        sys.stdout.write(f"{sample_coll(params, rng)}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crnbatch",
                                 description="Exact batched CRN stochastic simulation")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample one trajectory")
    sim.add_argument("--crn", required=True)
    sim.add_argument("--init", default="")
    sim.add_argument("--volume", type=float, required=True)
    stop = sim.add_mutually_exclusive_group(required=True)
    stop.add_argument("--time", type=float)
    stop.add_argument("--steps", type=int)
    sim.add_argument("--method", choices=["batch", "gillespie", "auto"], default="batch")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--checkpoints", type=int, default=0)
    sim.add_argument("--output")
    sim.add_argument("--format", choices=["csv", "json"], default="csv")
    sim.add_argument("--p", type=float, default=None)
    sim.add_argument("--time-sampler", choices=["exact", "gamma", "direct"],
                     default="gamma", dest="time_sampler")
    sim.set_defaults(func=_cmd_simulate)

    tr = sub.add_parser("transform", help="print the uniformized CRN")
    tr.add_argument("--crn", required=True)
    tr.add_argument("--volume", type=float, required=True)
    tr.add_argument("--k0", type=int, default=None)
    tr.set_defaults(func=_cmd_transform)

    cmp_ = sub.add_parser("compare", help="endpoint distribution comparison")
    cmp_.add_argument("--crn", required=True)
    cmp_.add_argument("--init", default="")
    cmp_.add_argument("--volume", type=float, required=True)
    cmp_.add_argument("--trials", type=int, required=True)
    stop = cmp_.add_mutually_exclusive_group(required=True)
    stop.add_argument("--at-time", type=float, dest="at_time")
    stop.add_argument("--at-steps", type=int, dest="at_steps")
    cmp_.add_argument("--species", required=True)
    cmp_.add_argument("--methods", default="batch,gillespie")
    cmp_.add_argument("--time-sampler", choices=["exact", "gamma", "direct"],
                      default="gamma", dest="time_sampler")
    cmp_.add_argument("--seed", type=int, default=0)
    cmp_.add_argument("--workers", type=int, default=None)
    cmp_.add_argument("--output")
    cmp_.set_defaults(func=_cmd_compare)

    be = sub.add_parser("bench", help="wall-clock scaling benchmark")
    be.add_argument("--crn", required=True)
    be.add_argument("--sizes", required=True, help="comma-separated populations")
    be.add_argument("--time", type=float, default=1.0)
    be.add_argument("--init-frac", default="", dest="init_frac",
                    help='e.g. "R=0.5,F=0.5": counts = frac * n, volume = n')
    be.add_argument("--methods", default="batch,gillespie")
    be.add_argument("--backends", default=None,
                    help="comma-separated kernel backends to compare (numba,numpy)")
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--output")
    be.set_defaults(func=_cmd_bench)

    dist = sub.add_parser("dist", help="sample internal distributions (testing)")
    dist_sub = dist.add_subparsers(dest="distribution", required=True)
    coll = dist_sub.add_parser("coll")
    coll.add_argument("--n", type=int, required=True)
    coll.add_argument("--r", type=int, default=0)
    coll.add_argument("--o", type=int, required=True)
    coll.add_argument("--g", type=int, required=True)
    coll.add_argument("--samples", type=int, default=1)
    coll.add_argument("--seed", type=int, default=0)
    coll.set_defaults(func=_cmd_dist_coll)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CrnBatchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
