"""Command-line entry point: ``framesync run``, ``framesync gap`` and ``framesync verify``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .harness import METHODS, MethodOptions, emit, run_experiment
from .instances import InstanceSpec, NOISE_MODELS, TRANSFORM_CLASSES

DEFAULT_CLASS = {"gn": "linear", "affine": "affine", "euclidean": "euclidean"}


def _epsilon(text: str):
    return text if text == "auto" else float(text)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", choices=NOISE_MODELS, default=None)
    p.add_argument("--radius", type=float, default=np.pi / 4)
    p.add_argument("--class", dest="transform_class", choices=TRANSFORM_CLASSES, default=None,
                   help="transform class (default depends on the method)")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="framesync",
                                     description="Synchronize noisy pairwise transforms between frames.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded experiment sweep for one method")
    run.add_argument("--method", choices=METHODS, required=True)
    _common(run)
    run.add_argument("--epsilon", type=_epsilon, default=0.01)
    run.add_argument("--rounds", type=int, default=5000)
    run.add_argument("--max-iters", type=int, default=5)
    run.add_argument("--missing", type=int, default=None,
                     help="use the complete graph minus this many random non-tree edges")

    gap = sub.add_parser("gap", help="optimality-gap certificate for projected H-method solutions")
    _common(gap)
    gap.add_argument("--missing", type=int, default=100)
    gap.set_defaults(n=100, noise="geodesic", trials=50, transform_class="orthogonal")

    sub.add_parser("verify", help="run the invariant checks on small instances")
    return parser


def _spec(args, method: str) -> InstanceSpec:
    cls = args.transform_class or DEFAULT_CLASS.get(method, "orthogonal")
    return InstanceSpec(n=args.n, d=args.d, sigma=args.sigma, rho=args.rho, transform_class=cls,
                        noise_model=args.noise, seed=args.seed, radius=args.radius,
                        missing_edges=args.missing)


def _write(result, args) -> None:
    if args.out == "-":
        from .harness import to_csv, to_json
        sys.stdout.write(to_csv([result]) if args.format == "csv" else to_json([result]))
    else:
        emit(result, args.format, args.out)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        from .verify import run_checks
        results = run_checks()
        for name, ok, value in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  ({value:.3g})")
        return 0 if all(ok for _, ok, _ in results) else 1
    try:
        if args.command == "run":
            spec = _spec(args, args.method)
            opts = MethodOptions(epsilon=args.epsilon, rounds=args.rounds, max_iters=args.max_iters)
            result = run_experiment(spec, args.method, args.trials, args.seed, opts)
        else:
            spec = _spec(args, "h")
            result = run_experiment(spec, "h", args.trials, args.seed)
            print(f"mean h = {result.mean('h'):.3e} over {len(result.values('h'))} trials", file=sys.stderr)
    except ValueError as exc:
        print(f"framesync: error: {exc}", file=sys.stderr)
        return 2
    _write(result, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
