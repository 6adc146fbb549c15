"""Command-line entry point.

Every subcommand reads observations (one per line, optional header, '#'
comments), computes its statistic and writes a report as JSON (keys
manifest, config, results) or CSV. Exit codes: 0 ok, 1 usage, 2 data or
parameter error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bandwidth import select_bandwidth
from .binning import CellPartition
from .density import evaluate_on_grid
from .divergence import kld_rows
from .errors import DomainError, KldselError, NumericError, ParameterError
from .hypothesis import bootstrap_scale, gof_statistic, select_model
from .models import (
    FAMILIES,
    bkde_cell_probs,
    default_partition,
    fit_mle,
    kde_cell_probs,
    model_cell_probs,
)
from .rng import stream
from .simulate import (
    ExperimentConfig,
    _bandwidths,
    histogram_table,
    mse_rate_experiment,
    run_experiment,
    worker_count,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DIGITS = 9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------- input

def read_observations(path: str) -> np.ndarray:
    """One value per line. Blank lines and '#' comments are skipped; the first
    content line may be a non-numeric header."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror or exc}") from None
    values = []
    seen_content = False
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            if not seen_content:
                seen_content = True
                continue
            raise DomainError(f"{path}, line {lineno}: not a number: {raw.strip()!r}") from None
        seen_content = True
        if not math.isfinite(v):
            raise DomainError(f"{path}, line {lineno}: non-finite value {raw.strip()!r}")
        values.append(v)
    if not values:
        raise DomainError(f"{path}: no observations")
    return np.asarray(values)


def _is_integer(x) -> bool:
    return bool(np.all(x == np.floor(x)))


def _offset(arg, x) -> float:
    if arg == "auto":
        return 0.5 if _is_integer(x) else 0.0
    return float(arg)


def _cells(arg) -> CellPartition:
    if arg is None:
        return default_partition()
    return CellPartition(tuple(float(c) for c in arg.split(",")))


def _bandwidth_arg(text):
    if text in ("mcv", "cv"):
        return text
    try:
        h = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'mcv', 'cv' or a positive number, got {text!r}")
    if not h > 0:
        raise argparse.ArgumentTypeError("a fixed bandwidth must be positive")
    return h


def _offset_arg(text):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}")


# ---------------------------------------------------------------- output

def _round(v):
    """Round floats to DIGITS significant digits; NaN and inf become null."""
    if isinstance(v, dict):
        return {k: _round(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return None
        return float(f"{v:.{DIGITS}g}")
    return v


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{DIGITS}g}" if math.isfinite(v) else "nan"
    return str(v)


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        elif isinstance(v, (list, tuple)):
            yield key, ";".join(_cell(x) for x in v)
        else:
            yield key, v


def render_csv(results: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    table = results.get("table")
    if table:
        cols = list(table[0])
        w.writerow(cols)
        for row in table:
            w.writerow([_cell(row[c]) for c in cols])
    else:
        w.writerow(["statistic", "value"])
        for k, v in _flatten(results):
            w.writerow([k, _cell(v)])
    return buf.getvalue()


def render_json(manifest: dict, config: dict, results: dict) -> str:
    doc = {"manifest": _round(manifest), "config": _round(config), "results": _round(results)}
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _now(enabled: bool):
    return datetime.now(timezone.utc).isoformat(timespec="seconds") if enabled else None


def _format(args) -> str:
    if args.format:
        return args.format
    if args.out and args.out.lower().endswith(".csv"):
        return "csv"
    return "json"


# ---------------------------------------------------------------- commands

def cmd_density(args):
    x = read_observations(args.input)
    h_b, h_c = _bandwidths(x, args.bandwidth)
    grid = np.linspace(x.min() - 4.0 * max(h_b, h_c), x.max() + 4.0 * max(h_b, h_c), args.grid)
    fc = evaluate_on_grid(x, h_c, grid, "classical").values
    fb = evaluate_on_grid(x, h_b, grid, "bias_reduced").values
    table = [{"x": float(g), "f_classical": float(a), "f_bias_reduced": float(b)}
             for g, a, b in zip(grid, fc, fb)]
    config = {"input": args.input, "bandwidth": args.bandwidth, "grid": args.grid}
    return config, {"h_classical": h_c, "h_bias_reduced": h_b, "n": int(x.size), "table": table}


def cmd_bandwidth(args):
    x = read_observations(args.input)
    out = {"n": int(x.size)}
    for name in ("cv", "mcv"):
        sel = select_bandwidth(x, name, args.search_lo, args.search_hi)
        out[name] = {"h": sel.h_star, "objective": sel.objective_value,
                     "search_lo": sel.search_lo, "search_hi": sel.search_hi,
                     "evaluations": sel.evaluations}
    config = {"input": args.input, "search_lo": args.search_lo, "search_hi": args.search_hi}
    return config, out


def _count_setup(args):
    x = read_observations(args.input)
    cells = _cells(args.cells)
    off = _offset(args.cell_offset, x)
    return x, cells, off


def cmd_kld(args):
    x, cells, off = _count_setup(args)
    h_b, h_c = _bandwidths(x, args.bandwidth)
    m = fit_mle(args.model, x, strict=False)
    q = model_cell_probs(m, cells).masses
    fb = bkde_cell_probs(x, h_b, cells, offset=off).masses
    fc = kde_cell_probs(x, h_c, cells, offset=off).masses
    d_b, d_c = float(kld_rows(fb, q)), float(kld_rows(fc, q))
    config = {"input": args.input, "model": args.model, "bandwidth": args.bandwidth,
              "cells": list(cells.boundaries), "cell_offset": off}
    results = {
        "n": int(x.size), "h_bias_reduced": h_b, "h_classical": h_c,
        "parameter": m.parameter, "degenerate_fit": m.degenerate,
        "divergence": d_b, "n_divergence": x.size * d_b,
        "divergence_classical": d_c, "mkld": d_b / d_c if d_c > 0 else float("nan"),
        "cells": cells.labels(), "bias_reduced_masses": fb.tolist(),
        "model_masses": q.tolist(),
    }
    return config, results


def cmd_gof(args):
    x, cells, off = _count_setup(args)
    h, _ = _bandwidths(x, args.bandwidth)
    m = fit_mle(args.model, x, strict=False)
    boot = bootstrap_scale(x, h, (args.model,), cells, args.B, stream(args.seed, 0, "bootstrap"), off)
    res = gof_statistic(x, h, cells, m, boot.lambda_phi_hat[args.model], args.alpha, off)
    config = {"input": args.input, "model": args.model, "bandwidth": args.bandwidth,
              "alpha": args.alpha, "B": args.B, "cells": list(cells.boundaries), "cell_offset": off}
    results = {"n": int(x.size), "h": h, "parameter": m.parameter, "statistic": res.statistic,
               "lambda_phi_hat": res.scale, "p_value": res.p_value, "decision": res.decision,
               "degenerate": res.degenerate}
    return config, results


def cmd_select(args):
    x, cells, off = _count_setup(args)
    h, _ = _bandwidths(x, args.bandwidth)
    res, det = select_model(x, h, args.model_1, args.model_2, cells, args.alpha, args.B,
                            stream(args.seed, 0, "bootstrap"), off)
    config = {"input": args.input, "model_1": args.model_1, "model_2": args.model_2,
              "bandwidth": args.bandwidth, "alpha": args.alpha, "B": args.B,
              "cells": list(cells.boundaries), "cell_offset": off}
    results = {"n": int(x.size), "h": h,
               "parameter_1": det["model_1"].parameter, "parameter_2": det["model_2"].parameter,
               "divergence_1": det["d_1"], "divergence_2": det["d_2"],
               "kl_n": res.statistic, "xi_hat": res.scale, "p_value": res.p_value,
               "decision": res.decision, "degenerate": res.degenerate}
    return config, results


def cmd_simulate(args):
    cfg = ExperimentConfig(pi=args.pi, n=args.n, reps=args.reps, alpha=args.alpha, seed=args.seed,
                           bandwidth_policy=args.bandwidth, B=args.B, cells=_cells(args.cells),
                           cell_offset=0.5 if args.cell_offset == "auto" else float(args.cell_offset))
    report = run_experiment(cfg, threads=worker_count(args.threads))
    d = report.to_dict(include_records=args.records)
    results = {k: v for k, v in d.items() if k != "config"}
    if _format(args) == "csv":
        if args.records:
            results = {"table": d["records"]}
        else:
            results = {"table": [{"statistic": k, "mean": v["mean"], "sd": v["sd"], "count": v["count"]}
                                 for k, v in d["summary"].items()]
                       + [{"statistic": f"selection_percent.{k}", "mean": v, "sd": float("nan"), "count": cfg.reps}
                          for k, v in d["selection_percent"].items()]}
    return cfg.to_dict(), results


def cmd_rate(args):
    sizes = [int(s) for s in args.n_list.split(",")]
    table, slopes = [], {}
    for kind in ("bias_reduced", "classical"):
        slope, det = mse_rate_experiment(sizes, args.reps, args.x0, args.seed, kind, details=True)
        slopes[kind] = slope
        for n, mse in zip(det["n"], det["mse"]):
            table.append({"kind": kind, "n": n, "mse": mse})
    config = {"n_list": sizes, "reps": args.reps, "x0": args.x0}
    return config, {"slope_bias_reduced": slopes["bias_reduced"],
                    "slope_classical": slopes["classical"], "table": table}


def cmd_hist(args):
    x = read_observations(args.input)
    if not _is_integer(x) or np.any(x < 0):
        raise DomainError("hist needs nonnegative integer observations")
    table = histogram_table(x, max_value=args.max_value)
    config = {"input": args.input, "max_value": args.max_value}
    return config, {"n": int(x.size), "table": table}


# ---------------------------------------------------------------- parser

def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"),
                        help="report format (default: from --out suffix, else json)")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit wall-clock times from the manifest")

    p = _Parser(prog="kldsel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"kldsel {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, func, help_text, data=True):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if data:
            sp.add_argument("--input", required=True, help="file with one observation per line")
        sp.set_defaults(func=func)
        return sp

    def count_opts(sp):
        sp.add_argument("--bandwidth", type=_bandwidth_arg, default="mcv", help="mcv, cv or a fixed h")
        sp.add_argument("--cells", help="comma-separated cell boundaries (default 0,1,...,7)")
        sp.add_argument("--cell-offset", type=_offset_arg, default="auto",
                        help="shift of the cell edges; 'auto' is 0.5 for integer data, else 0")

    sp = add("density", cmd_density, "evaluate classical and bias-reduced estimates on a grid")
    sp.add_argument("--bandwidth", type=_bandwidth_arg, default="mcv")
    sp.add_argument("--grid", type=int, default=512, help="number of grid points")

    sp = add("bandwidth", cmd_bandwidth, "CV and MCV bandwidth selection")
    sp.add_argument("--search-lo", type=float)
    sp.add_argument("--search-hi", type=float)

    sp = add("kld", cmd_kld, "binned divergence between the estimate and a fitted model")
    sp.add_argument("--model", choices=FAMILIES, required=True)
    count_opts(sp)

    sp = add("gof", cmd_gof, "goodness-of-fit test of one model")
    sp.add_argument("--model", choices=FAMILIES, required=True)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("-B", type=int, default=500, help="bootstrap resamples")
    count_opts(sp)

    sp = add("select", cmd_select, "divergence-based selection between two models")
    sp.add_argument("--model-1", choices=FAMILIES, default="poisson")
    sp.add_argument("--model-2", choices=FAMILIES, default="geometric")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("-B", type=int, default=500, help="bootstrap resamples")
    count_opts(sp)

    sp = add("simulate", cmd_simulate, "Monte Carlo study on the Poisson/Geometric mixture", data=False)
    sp.add_argument("--pi", type=float, required=True, help="Poisson mixture weight")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--reps", type=int, default=200)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("-B", type=int, default=500, help="bootstrap resamples")
    sp.add_argument("--threads", type=int, help="worker processes (default KLDSEL_THREADS or 1; 0 = all)")
    sp.add_argument("--records", action="store_true", help="include per-replication records")
    count_opts(sp)

    sp = add("rate", cmd_rate, "Monte Carlo MSE rate of the estimate at a point", data=False)
    sp.add_argument("--n-list", default="200,400,800,1600,3200")
    sp.add_argument("--reps", type=int, default=400)
    sp.add_argument("--x0", type=float, default=0.0)

    sp = add("hist", cmd_hist, "bin counts with fitted model pmf columns")
    sp.add_argument("--max-value", type=int)
    return p


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and --version
        return EXIT_OK if not exc.code else EXIT_USAGE

    started = _now(not args.no_timestamp)
    try:
        config, results = args.func(args)
        fmt = _format(args)
        outputs = [args.out] if args.out else []
        sidecar = f"{args.out}.manifest.json" if args.out and fmt == "csv" else None
        if sidecar:
            outputs.append(sidecar)
        manifest = {
            "command": args.command, "seed": args.seed, "version": __version__,
            "started_at": started, "finished_at": _now(not args.no_timestamp),
            "outputs": outputs,
        }
        if fmt == "csv":
            _emit(render_csv(results), args.out)
            if sidecar:
                # CSV has no room for the manifest, so it travels next to the file
                _emit(render_json(manifest, config, {}), sidecar)
        else:
            _emit(render_json(manifest, config, results), args.out)
    except (ParameterError, DomainError, ValueError) as exc:
        print(f"kldsel {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"kldsel {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KldselError as exc:
        print(f"kldsel {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"kldsel {args.command}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
