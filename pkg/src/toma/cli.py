"""Command-line front end.

Subcommands: gen (synthetic token files), run (stepwise pipeline report),
bench (merge/unmerge micro-timings), flops (cost sheet). Reports are JSON on
stdout or --out; errors are one-line JSON objects on stderr.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import DataError, LayoutError, NumericalError
from .harness import bench_report, flops_report, run_report
from .synth import SynthConfig, drift_sequence
from .tensorfile import read_tensor_file, write_tensor_file
from .tensors import TokenMatrix


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value > 0 or value != value or value == float("inf"):
        raise argparse.ArgumentTypeError("must be a finite positive number")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 <= value < float("inf"):
        raise argparse.ArgumentTypeError("must be a finite non-negative number")
    return value


def _unit_float(text: str) -> float:
    value = _nonneg_float(text)
    if value > 1:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="cap BLAS/OpenMP threads (env TOMA_THREADS as fallback)")

    parser = _Parser(prog="toma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common],
                       help="write a synthetic token sequence as a tensor file")
    p.add_argument("--height", type=_positive_int, required=True)
    p.add_argument("--width", type=_positive_int, required=True)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--sigma", type=_nonneg_float, default=0.0,
                   help="gaussian blur width in grid cells")
    p.add_argument("--drift", type=_unit_float, default=0.0,
                   help="per-step mixing weight of fresh noise")
    p.add_argument("--steps", type=_positive_int, default=1)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", default="tokens.toma")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", parents=[common],
                       help="run the merge/unmerge pipeline over step files")
    p.add_argument("inputs", nargs="+", help="tensor files; batch slices become steps")
    p.add_argument("--ratio", required=True,
                   help="destination fraction, e.g. 0.25 or 1/4")
    p.add_argument("--tau", type=_positive_float, default=0.1)
    p.add_argument("--layout", choices=["global", "stripe", "tile"], default="global")
    p.add_argument("--regions", type=_positive_int, default=1)
    p.add_argument("--dest-every", type=_positive_int, default=1)
    p.add_argument("--weights-every", type=_positive_int, default=1)
    p.add_argument("--unmerge", choices=["transpose", "pinv"], default="transpose")
    p.add_argument("--core", choices=["identity"], default="identity")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--compare-unmerge", action="store_true",
                   help="report round-trip MSE for both unmerge methods")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", parents=[common],
                       help="micro-benchmark merge and unmerge in isolation")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--ratios", required=True, help="comma-separated, e.g. 0.25,0.5,0.75")
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--warmup", type=_nonneg_int, default=50)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--csv", action="store_true", help="emit the timing table as CSV")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("flops", parents=[common],
                       help="arithmetic cost sheet for one shape")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--ratio", required=True)
    p.add_argument("--tiles", type=_positive_int, default=1)
    p.add_argument("--with-adds", action="store_true",
                   help="include the multiply+add view next to multiplications")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_flops)

    return parser


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_gen(args) -> int:
    cfg = SynthConfig(grid=(args.height, args.width), d=args.dim,
                      smooth_sigma=args.sigma, drift=args.drift,
                      steps=args.steps, seed=args.seed)
    states = drift_sequence(cfg)
    stacked = np.stack([s.data for s in states])
    write_tensor_file(args.out, stacked, grid=cfg.grid)
    print(json.dumps({
        "schema_version": 1,
        "kind": "gen",
        "out": str(args.out),
        "batch": cfg.steps,
        "tokens": cfg.n,
        "dim": cfg.d,
        "grid": list(cfg.grid),
    }))
    return 0


def _load_states(paths: list[str]) -> list[TokenMatrix]:
    states: list[TokenMatrix] = []
    for path in paths:
        data, grid = read_tensor_file(path)
        for b in range(data.shape[0]):
            states.append(TokenMatrix(data[b], grid=grid))
    return states


def cmd_run(args) -> int:
    states = _load_states(args.inputs)
    report = run_report(
        states,
        ratio=args.ratio,
        tau=args.tau,
        layout_kind=args.layout,
        regions=args.regions,
        dest_every=args.dest_every,
        weights_every=args.weights_every,
        unmerge_method=args.unmerge,
        deterministic=args.deterministic,
        compare_unmerge=args.compare_unmerge,
    )
    _emit(report, args.out)
    return 0


def _bench_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["ratio", "destinations", "merge_median_s", "merge_iqr_s",
                     "unmerge_median_s", "unmerge_iqr_s"])
    for row in report["timings"]["rows"]:
        writer.writerow([row["ratio"], row["destinations"],
                         row["merge_seconds"]["median"], row["merge_seconds"]["iqr"],
                         row["unmerge_seconds"]["median"], row["unmerge_seconds"]["iqr"]])
    return buf.getvalue()


def cmd_bench(args) -> int:
    ratios = [part.strip() for part in args.ratios.split(",") if part.strip()]
    report = bench_report(args.n, args.dim, ratios, reps=args.reps,
                          warmup=args.warmup, seed=args.seed)
    if args.csv:
        text = _bench_csv(report)
        if args.out:
            Path(args.out).write_text(text)
        else:
            print(text, end="")
    else:
        _emit(report, args.out)
    return 0


def cmd_flops(args) -> int:
    report = flops_report(args.n, args.dim, args.ratio, tiles=args.tiles,
                          with_adds=args.with_adds)
    _emit(report, args.out)
    return 0


def _fail(code: int, kind: str, message: str, **extra) -> int:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    print(json.dumps(payload), file=sys.stderr)
    return code


def _thread_guard(args):
    limit = getattr(args, "threads", None)
    if limit is None:
        raw = os.environ.get("TOMA_THREADS", "").strip()
        if raw:
            limit = int(raw)  # ValueError surfaces as usage error in main
            if limit < 1:
                raise ValueError("TOMA_THREADS must be at least 1")
    return threadpool_limits(limits=limit) if limit else nullcontext()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        guard = _thread_guard(args)
    except ValueError as exc:
        return _fail(1, "usage", f"bad TOMA_THREADS value: {exc}")
    try:
        with guard:
            return args.func(args)
    except LayoutError as exc:
        return _fail(2, "data", str(exc), valid_regions=list(exc.valid_regions))
    except NumericalError as exc:
        return _fail(3, "numerical", str(exc))
    except DataError as exc:
        return _fail(2, "data", str(exc))
    except OSError as exc:
        return _fail(2, "data", f"io failure: {exc}")


if __name__ == "__main__":
    sys.exit(main())
