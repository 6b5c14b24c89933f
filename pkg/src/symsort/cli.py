"""Command-line interface: ``symsort <command> ...``.

Randomized commands require ``--seed``; there is no default, so every
output file can be regenerated exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic, experiments, kernels
from .errors import SymsortError
from .lexcmp import DEFAULT_DEPTH_CAP
from .sources import load_source, shipped_sources, spec_to_dict


class UsageError(Exception):
    pass


# -- output -----------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_result(result, path, fmt: str = "json") -> None:
    """Write an ExperimentResult (or its ``to_dict()``) as JSON or CSV."""
    d = result if isinstance(result, dict) else result.to_dict()
    path = Path(path)
    try:
        if fmt == "json":
            path.write_text(json.dumps(d, indent=1, allow_nan=False) + "\n")
        elif fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["rep", "N", "K", "S", "Y"])
                for rec in d["replicates"]:
                    w.writerow([_fmt(rec[c]) for c in ("rep", "N", "K", "S", "Y")])
        else:
            raise UsageError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_samples(path) -> np.ndarray:
    """The Y column of a result file written by :func:`write_result`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if path.suffix.lower() == ".csv" or text.startswith("rep,"):
        rows = list(csv.DictReader(text.splitlines()))
        return np.array([float(r["Y"]) for r in rows])
    try:
        d = json.loads(text)
        return np.array([rec["Y"] for rec in d["replicates"]], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: not a result file ({exc})") from exc


def write_plot_data(samples, path) -> None:
    """Empirical CDF as whitespace-separated columns, readable by gnuplot."""
    y = np.sort(np.asarray(samples, dtype=float))
    F = np.arange(1, y.size + 1) / y.size
    with open(path, "w") as fh:
        fh.write("# Y empirical_cdf\n")
        for a, b in zip(y, F):
            fh.write("%.17g %.17g\n" % (a, b))


def _print_json(d) -> None:
    print(json.dumps(d, indent=1, allow_nan=False))


# -- helpers --------------------------------------------------------------------------

def _source(arg):
    if arg is None:
        raise UsageError("--source is required")
    if not os.path.exists(arg):
        shipped = shipped_sources()
        if arg in shipped:
            return shipped[arg]
        raise OSError(f"cannot read {arg}: no such file (shipped sources: {', '.join(shipped)})")
    try:
        return load_source(arg)
    except OSError as exc:
        raise OSError(f"cannot read {arg}: {exc.strerror or exc}") from exc


def _need(args, name, flag):
    v = getattr(args, name)
    if v is None:
        raise UsageError(f"{flag} is required here")
    return v


def _threads(args):
    n = args.threads
    if n is None and os.environ.get("SYMSORT_THREADS"):
        try:
            n = int(os.environ["SYMSORT_THREADS"])
        except ValueError:
            raise UsageError("SYMSORT_THREADS must be an integer") from None
    if n is not None and n < 1:
        raise UsageError("--threads must be at least 1")
    kernels.set_threads(n)


def _seed(v: str) -> int:
    try:
        s = int(v, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {v!r}") from None
    if not 0 <= s < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


def _emit(result, args):
    write_result(result, args.out, args.format)
    if args.plot_data:
        write_plot_data(result.Y, args.plot_data)
    st = result.stats
    if st is not None:
        print(f"wrote {args.out}: reps={result.reps} mean(Y)={st.mean:.6g} se={st.se_mean:.3g} var(Y)={st.variance:.6g}")
    else:
        print(f"wrote {args.out}: reps={result.reps}")


# -- commands -----------------------------------------------------------------------------

def cmd_simulate(args):
    _threads(args)
    source = None
    if args.mode != "key-only":
        source = _source(args.source).spec
    if args.mode == "poisson":
        cfg = experiments.ExperimentConfig("poisson", args.reps, args.seed, source=source,
                                           t=_need(args, "t", "--t"), depth_cap=args.depth_cap, tol=args.tol)
    else:
        mode = args.mode
        cfg = experiments.ExperimentConfig(mode, args.reps, args.seed, source=source,
                                           n=_need(args, "n", "--n"), depth_cap=args.depth_cap, tol=args.tol,
                                           control_variate=args.control_variate)
    _emit(experiments.run(cfg), args)


def cmd_fixedpoint(args):
    cfg = experiments.ExperimentConfig("fixed-point", args.reps, args.seed, depth=args.depth)
    _emit(experiments.run(cfg), args)


def cmd_mean(args):
    kind = args.kind
    bound = 0.0
    params = {}
    if kind in ("key-n", "key-n-asym", "symbol-n"):
        n = params["n"] = _need(args, "n", "--n")
    else:
        t = params["t"] = _need(args, "t", "--t")
    if kind == "key-n":
        value = analytic.exp_key_discrete(n)
    elif kind == "key-n-asym":
        value = analytic.exp_key_discrete_asym(n)
    elif kind == "key-t":
        value = analytic.exp_key_poisson(t)
    elif kind == "key-t-asym":
        value = analytic.exp_key_poisson_asym(t)
    else:
        src = _source(args.source)
        params["source"] = spec_to_dict(src.spec)
        params["tol"] = args.tol
        fn = analytic.exp_symbol_poisson if kind == "symbol-t" else analytic.exp_symbol_discrete
        value, bound = fn(src, t if kind == "symbol-t" else n, tol=args.tol)
    if args.json:
        _print_json({"kind": kind, **params, "value": value, "bound": bound, "version": __version__})
    else:
        print(f"{value:.12g}")


def cmd_tameness(args):
    src = _source(args.source)
    reports = {"p": analytic.tameness_report(src, p=args.p, k_max=args.kmax).to_dict()}
    if args.p_prime is not None:
        reports["p_prime"] = analytic.tameness_report(src, p=args.p_prime, k_max=args.kmax).to_dict()
    _print_json({"source": spec_to_dict(src.spec), "kmax": args.kmax, **reports, "version": __version__})


def cmd_compare_dist(args):
    a, b = read_samples(args.file_a), read_samples(args.file_b)
    ks = experiments.ks_distance(a, b)
    if args.json:
        crit = experiments.ks_critical_value(a.size, b.size, args.alpha)
        _print_json({"file_a": str(args.file_a), "file_b": str(args.file_b), "n_a": int(a.size), "n_b": int(b.size),
                     "ks": ks, "critical_value": crit, "alpha": args.alpha, "version": __version__})
    else:
        print(f"{ks:.12g}")


def cmd_devcheck(args):
    freq, value = experiments.moderate_dev_check(args.t, args.eps, args.reps, experiments.rng_stream(args.seed, (0,)))
    _print_json({"t": args.t, "eps": args.eps, "reps": args.reps, "seed": args.seed,
                 "empirical": freq, "analytic": value, "ratio": freq / value if value > 0 else math.nan,
                 "version": __version__})


# -- parser ----------------------------------------------------------------------------------

def _add_output(p):
    p.add_argument("--out", required=True, metavar="PATH", help="result file to write")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="result file format (default: json)")
    p.add_argument("--plot-data", metavar="PATH", help="also write the empirical CDF of Y as gnuplot columns")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symsort", description="QuickSort symbol-comparison costs over probabilistic sources.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo replicates of S(t), S_n or K_n")
    p.add_argument("--mode", choices=("poisson", "fixed-n", "key-only"), required=True,
                   help="poisson: N(t) ~ Poisson(t) keys; fixed-n: exactly n keys; key-only: K_n on random permutations")
    p.add_argument("--source", metavar="FILE", help="source spec JSON file, or the name of a shipped source")
    p.add_argument("--t", type=float, help="Poisson intensity, i.e. expected number of keys (poisson mode)")
    p.add_argument("--n", type=int, help="number of keys (fixed-n and key-only modes)")
    p.add_argument("--reps", type=int, required=True, help="number of independent replicates")
    p.add_argument("--seed", type=_seed, required=True, help="64-bit master seed")
    p.add_argument("--tol", type=float, help="absolute accuracy of the centering mean, in symbol comparisons "
                                            "(default: 1e-6 times t or n)")
    p.add_argument("--depth-cap", type=int, default=DEFAULT_DEPTH_CAP,
                   help=f"maximum symbols inspected per key comparison (default: {DEFAULT_DEPTH_CAP})")
    p.add_argument("--threads", type=int, help="worker threads for replicates (default: $SYMSORT_THREADS, else all cores)")
    p.add_argument("--control-variate", action="store_true",
                   help="fixed-n only: reduce variance of mean(Y) using K_n, whose mean is known exactly")
    _add_output(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mean", help="exact or asymptotic expected costs")
    p.add_argument("--kind", required=True,
                   choices=("key-n", "key-n-asym", "key-t", "key-t-asym", "symbol-t", "symbol-n"),
                   help="key-*: key comparisons; symbol-*: symbol comparisons; -n fixed n, -t Poisson(t) keys")
    p.add_argument("--n", type=int, help="number of keys")
    p.add_argument("--t", type=float, help="Poisson intensity (expected number of keys)")
    p.add_argument("--source", metavar="FILE", help="source spec (symbol-* kinds)")
    p.add_argument("--tol", type=float, default=1e-6, help="certified absolute accuracy, in comparisons (default: 1e-6)")
    p.add_argument("--json", action="store_true", help="print a JSON record with the parameters and truncation bound")
    p.set_defaults(func=cmd_mean)

    p = sub.add_parser("tameness", help="partial sums and convergence verdicts of the tameness series")
    p.add_argument("--source", metavar="FILE", required=True, help="source spec JSON file or shipped name")
    p.add_argument("--p", type=float, default=2.0, help="moment order p >= 2 (default: 2)")
    p.add_argument("--p-prime", type=float, help="optional second moment order p' reported alongside p")
    p.add_argument("--kmax", type=int, default=200, help="number of series terms summed exactly (default: 200)")
    p.set_defaults(func=cmd_tameness)

    p = sub.add_parser("fixedpoint", help="samples of the limit T of (K_n - E K_n)/(n+1) by iterating its fixed-point map")
    p.add_argument("--depth", type=int, required=True, help="number of iterations of the map, starting from T = 0")
    p.add_argument("--reps", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=_seed, required=True, help="64-bit master seed")
    _add_output(p)
    p.set_defaults(func=cmd_fixedpoint)

    p = sub.add_parser("compare-dist", help="KS distance between the Y samples of two result files")
    p.add_argument("file_a", help="result file (JSON or CSV)")
    p.add_argument("file_b", help="result file (JSON or CSV)")
    p.add_argument("--alpha", type=float, default=0.01, help="level for the reported critical value (default: 0.01)")
    p.add_argument("--json", action="store_true", help="also report sample sizes and the two-sample critical value")
    p.set_defaults(func=cmd_compare_dist)

    p = sub.add_parser("devcheck", help="empirical vs lead-order P(|N(t) - t| >= t^(1/2+eps))")
    p.add_argument("--t", type=float, required=True, help="Poisson mean, t >= 1")
    p.add_argument("--eps", type=float, required=True, help="deviation exponent, 0 < eps < 1/6")
    p.add_argument("--reps", type=int, required=True, help="number of Poisson draws")
    p.add_argument("--seed", type=_seed, required=True, help="64-bit master seed")
    p.set_defaults(func=cmd_devcheck)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)  # exits with status 2 on malformed flags
    try:
        args.func(args)
    except (UsageError, ValueError) as exc:
        ap.print_usage(sys.stderr)
        print(f"symsort {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SymsortError, OSError) as exc:
        print(f"symsort {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
