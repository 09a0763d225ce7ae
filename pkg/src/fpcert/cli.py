"""Command-line interface.

Exit codes: 0 certified/success, 1 unknown, 2 usage or parse error,
3 diverged/exhausted.  Reports are JSON on stdout (or --out); traces are
CSV via --trace.
"""

import argparse
import json
import sys

import numpy as np

from . import householder, model_io, mondeq, verifier
from .engine import EngineConfig, Status
from .errors import Diverged, Exhausted, ParseError, ShapeMismatch


def _parse_vector(text):
    try:
        return np.asarray([float(t) for t in text.split(",") if t.strip() != ""])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad vector {text!r}: {exc}")


def _add_engine_flags(sp):
    sp.add_argument("--alpha-pr", type=float, default=0.1)
    sp.add_argument("--r", type=int, default=3)
    sp.add_argument("--r-prime", type=int, default=50)
    sp.add_argument("--n-max", type=int, default=500)
    sp.add_argument("--expansion", choices=["const", "exp"], default="const")
    sp.add_argument("--w-mul", type=float, default=1e-3)
    sp.add_argument("--w-add", type=float, default=1e-2)


def _engine_config(args):
    return EngineConfig(
        r=args.r, r_prime=args.r_prime, n_max=args.n_max,
        w_mul=args.w_mul, w_add=args.w_add, expansion_schedule=args.expansion,
    )


def _emit(report, args):
    text = json.dumps(report, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _verdict_exit(status):
    if status is Status.CERTIFIED:
        return 0
    if status is Status.UNKNOWN:
        return 1
    return 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fpcert",
        description="Certification of fixpoint iterators (robustness and case studies).",
    )
    parser.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("verify-local", help="certify an epsilon-ball around one input")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True, type=_parse_vector)
    sp.add_argument("--eps", required=True, type=float)
    sp.add_argument("--target", required=True, type=int)
    sp.add_argument("--g2", default="fb-linesearch")
    sp.add_argument("--lambda-opt", choices=["off", "reduced", "full"], default="off")
    sp.add_argument("--trace")
    sp.add_argument("--out")
    _add_engine_flags(sp)

    sp = sub.add_parser("verify-global", help="bisect an input box and certify leaves")
    sp.add_argument("--model", required=True)
    sp.add_argument("--lo", required=True, type=_parse_vector)
    sp.add_argument("--hi", required=True, type=_parse_vector)
    sp.add_argument("--max-depth", type=int, default=4)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out")
    sp.add_argument("--leaves-csv")
    _add_engine_flags(sp)

    sp = sub.add_parser("householder", help="reciprocal square root case study")
    sp.add_argument("--lo", required=True, type=float)
    sp.add_argument("--hi", required=True, type=float)
    sp.add_argument("--mode", choices=["fix", "reach"], default="fix")
    sp.add_argument("--eps", type=float, default=1e-8)
    sp.add_argument("--trace")
    sp.add_argument("--out")

    sp = sub.add_parser("gen-model", help="write a random model file")
    sp.add_argument("--p", type=int, default=8)
    sp.add_argument("--q", type=int, default=2)
    sp.add_argument("--classes", type=int, default=2)
    sp.add_argument("--m", type=float, default=20.0)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("baseline", help="Kleene or interval-only baseline")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True, type=_parse_vector)
    sp.add_argument("--eps", required=True, type=float)
    sp.add_argument("--target", required=True, type=int)
    sp.add_argument("--method", choices=["kleene", "box"], default="kleene")
    sp.add_argument("--domain", choices=["zonotope", "box"], default="zonotope")
    sp.add_argument("--unroll", type=int, default=2)
    sp.add_argument("--out")
    _add_engine_flags(sp)

    return parser


def _make_task(args):
    model = model_io.load_model(args.model)
    return verifier.VerificationTask(
        model, args.input, args.eps, args.target,
        g1=mondeq.SolverConfig("pr", args.alpha_pr),
        g2=getattr(args, "g2", "fb-linesearch"),
        engine=_engine_config(args),
        lambda_opt=getattr(args, "lambda_opt", "off"),
    )


def run(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    np.random.seed(args.seed)

    try:
        if args.subcommand == "verify-local":
            task = _make_task(args)
            verdict = verifier.verify_local(task)
            if args.trace and verdict.trace is not None:
                verdict.trace.to_csv(args.trace)
            _emit(verdict.to_dict(), args)
            return _verdict_exit(verdict.status)

        if args.subcommand == "verify-global":
            model = model_io.load_model(args.model)
            report = verifier.verify_global(
                model, (args.lo, args.hi), args.max_depth, jobs=args.jobs
            )
            if args.leaves_csv:
                report.to_csv(args.leaves_csv)
            _emit(json.loads(report.to_json()), args)
            return 0 if report.certified_fraction == 1.0 else 1

        if args.subcommand == "householder":
            task = householder.RootTask((args.lo, args.hi), epsilon=args.eps, mode=args.mode)
            rows = [] if args.trace else None
            try:
                lo, hi, iters = householder.analyze_root(task, trace=rows)
            except Diverged:
                _emit({"status": "Diverged"}, args)
                return 3
            if args.trace:
                import csv

                with open(args.trace, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["step", "s_lo", "s_hi"])
                    writer.writerows(rows)
            _emit(
                {"status": "ok", "root_lo": lo, "root_hi": hi, "iterations": iters},
                args,
            )
            return 0

        if args.subcommand == "gen-model":
            params = mondeq.random_monotone_model(
                args.p, args.q, args.classes, args.m, args.seed
            )
            model_io.save_model(params, args.out)
            print(f"wrote {args.out}")
            return 0

        if args.subcommand == "baseline":
            task = _make_task(args)
            if args.method == "kleene":
                verdict = verifier.verify_kleene(task, domain=args.domain, unroll_k=args.unroll)
            else:
                verdict = verifier.verify_box(task)
            _emit(verdict.to_dict(), args)
            return _verdict_exit(verdict.status)

    except (ParseError, ShapeMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (Diverged, Exhausted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 2


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
