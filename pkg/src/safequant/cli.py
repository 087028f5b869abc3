"""Command-line entry point.

Subcommands map one-to-one onto quantifier operations:

    robustness    Lipschitzian metric + conservative safe radius (CI property)
    targeted      robustness against a specific target label
    uncertainty   KL-minimizing uncertainty-example search
    reachability  max of one label's probability over a ball
    certify       re-derive the safe radius from a stored report
    baseline-rs   random-sampling baseline for the metric
    oracle-grid   exhaustive grid oracle (low-dimensional models only)
    inspect-model print a model's layer pipeline and digest

Exit codes: 0 success, 2 configuration error, 3 model error, 4 risk witness
found while --fail-on-risk is set.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import modelio
from .modelio import (ModelFormatError, ReportFormatError, RunConfigError,
                      load_model, parse_p, save_report)
from .properties import (ConfidenceInterval, ConfigError, Reachability,
                         UncertaintyUniform, make_ci_case)
from .quantify import (CenterAtRiskError, GridSizeError, NormBall, QuantReport,
                       certify_radius, grid_oracle, lipschitz_metric,
                       random_sampling_baseline, reach_range,
                       targeted_robustness, uncertainty_search)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_RISK = 4

CSV_COLUMNS = ["input_id", "p", "d", "Q", "d_prime", "fevals", "batches", "method"]


class _CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _add_shared(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; explicit flags win")
    sub.add_argument("--model", help="model JSON file")
    sub.add_argument("--inputs", help="inputs JSON file (flattened, with labels)")
    sub.add_argument("--input-index", type=int, help="row in the inputs file")
    sub.add_argument("--center", help="inline center, comma-separated floats")
    sub.add_argument("--d", type=float, help="ball radius")
    sub.add_argument("--p", default=None, help="norm order: 1, 2, or inf")
    sub.add_argument("--budget", type=int, default=None,
                     help="function evaluation budget (default 20000)")
    sub.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    sub.add_argument("--out", help="report JSON output path")
    sub.add_argument("--csv", help="append a summary row to this CSV file")
    sub.add_argument("--fail-on-risk", action="store_true",
                     help="exit 4 when a risk witness is found")
    sub.add_argument("--no-timing", action="store_true",
                     help="omit wall time from the report (byte-stable output)")
    sub.add_argument("--threads", type=int,
                     default=int(os.environ.get("SAFEQUANT_THREADS",
                                                os.cpu_count() or 1)),
                     help="batch fan-out width (falls back to SAFEQUANT_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safequant",
        description="Black-box safety-risk quantification for feedforward networks")
    subs = parser.add_subparsers(dest="command", required=True)

    rob = subs.add_parser("robustness", help="Lipschitzian metric + safe radius")
    _add_shared(rob)
    rob.add_argument("--case", type=int, default=1, choices=(1, 2, 3),
                     help="confidence-interval instantiation at the center")
    rob.add_argument("--target", type=int, help="target label for case 2")
    rob.add_argument("--epsilon", type=float, default=0.0,
                     help="required confidence gap")

    tgt = subs.add_parser("targeted", help="robustness against a target label")
    _add_shared(tgt)
    tgt.add_argument("--target", type=int, required=True)
    tgt.add_argument("--epsilon", type=float, default=0.0)

    unc = subs.add_parser("uncertainty", help="uncertainty-example search")
    _add_shared(unc)
    unc.add_argument("--epsilon", type=float, required=True,
                     help="smallest KL distance from uniform deemed safe")
    unc.add_argument("--epsilon-label", type=float, default=0.1,
                     help="labelling margin threshold")
    unc.add_argument("--trace-csv", help="write (iteration, KL) trajectory rows")

    rea = subs.add_parser("reachability", help="max label probability over a ball")
    _add_shared(rea)
    rea.add_argument("--label", type=int, required=True)
    rea.add_argument("--epsilon", type=float, required=True)

    cert = subs.add_parser("certify", help="safe radius from a stored report")
    cert.add_argument("--report", required=True)

    rs = subs.add_parser("baseline-rs", help="random-sampling baseline")
    _add_shared(rs)
    rs.add_argument("--samples", type=int, default=500_000)
    rs.add_argument("--case", type=int, default=1, choices=(1, 2, 3))
    rs.add_argument("--target", type=int)
    rs.add_argument("--epsilon", type=float, default=0.0)

    grid = subs.add_parser("oracle-grid", help="exhaustive grid oracle")
    _add_shared(grid)
    grid.add_argument("--points-per-dim", type=int, default=101)
    grid.add_argument("--case", type=int, default=1, choices=(1, 2, 3))
    grid.add_argument("--target", type=int)
    grid.add_argument("--epsilon", type=float, default=0.0)

    ins = subs.add_parser("inspect-model", help="print layer pipeline and digest")
    ins.add_argument("--model", required=True)
    return parser


def _merge_config(args: argparse.Namespace) -> None:
    """Fill unset flags from --config; explicit flags win."""
    if not getattr(args, "config", None):
        return
    try:
        doc = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _CliError(f"config: cannot read {args.config}: {exc}", EXIT_CONFIG)
    mapping = {"model": "model", "inputs": "inputs", "input_index": "input_index",
               "d": "d", "p": "p", "budget": "budget", "seed": "seed",
               "out": "out", "center": "center"}
    for key, attr in mapping.items():
        if key in doc and getattr(args, attr, None) is None:
            setattr(args, attr, doc[key])


def _resolve_center(args: argparse.Namespace, n: int) -> np.ndarray:
    if getattr(args, "center", None) is not None:
        raw = args.center
        if isinstance(raw, str):
            try:
                vec = np.array([float(v) for v in raw.split(",")])
            except ValueError:
                raise _CliError("center: expected comma-separated floats",
                                EXIT_CONFIG)
        else:
            vec = np.asarray(raw, dtype=np.float64)
    elif getattr(args, "inputs", None) is not None:
        if args.input_index is None:
            raise _CliError("input-index: required with --inputs", EXIT_CONFIG)
        try:
            doc = json.loads(Path(args.inputs).read_text())
            vec = np.asarray(doc["inputs"][args.input_index], dtype=np.float64)
        except (OSError, json.JSONDecodeError, KeyError, IndexError) as exc:
            raise _CliError(f"inputs: cannot load row {args.input_index} "
                            f"from {args.inputs}: {exc}", EXIT_CONFIG)
    else:
        raise _CliError("center: provide --center or --inputs/--input-index",
                        EXIT_CONFIG)
    if vec.shape != (n,):
        raise _CliError(f"center: expected {n} coordinates, got {vec.shape[0]}",
                        EXIT_CONFIG)
    if np.any(vec < 0) or np.any(vec > 1):
        raise _CliError("center: coordinates must lie in [0,1]", EXIT_CONFIG)
    return vec


def _common_run_params(args: argparse.Namespace):
    if args.model is None:
        raise _CliError("model: required", EXIT_CONFIG)
    if args.d is None or args.d <= 0:
        raise _CliError("d: a positive ball radius is required", EXIT_CONFIG)
    try:
        p = parse_p(args.p if args.p is not None else "inf")
    except RunConfigError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    budget = args.budget if args.budget is not None else 20_000
    if budget < 1:
        raise _CliError("budget: must be >= 1", EXIT_CONFIG)
    seed = args.seed if args.seed is not None else 0
    return p, budget, seed


def _load_model_checked(path: str):
    try:
        return load_model(path)
    except ModelFormatError as exc:
        raise _CliError(f"model: {exc}", EXIT_MODEL)


def _ci_expr(args, net, center):
    out = net.forward_single(center)
    try:
        return make_ci_case(args.case, out, epsilon=args.epsilon,
                            target_l=getattr(args, "target", None))
    except ConfigError as exc:
        raise _CliError(f"property: {exc}", EXIT_CONFIG)


def _finish(report: QuantReport, args, net, started: float) -> int:
    report = replace(report, model_digest=getattr(net, "digest", None),
                     wall_time_ms=(None if args.no_timing
                                   else (time.perf_counter() - started) * 1e3))
    if args.out:
        save_report(report, args.out)
    if args.csv:
        emit_csv_row(report, args.csv,
                     input_id=getattr(args, "input_index", None))
    d_disp = "inf" if math.isinf(report.ball.p) else int(report.ball.p)
    print(f"method={report.method} p={d_disp} d={report.ball.radius} "
          f"Q={report.Q_estimate:.6g} s(x)={report.s_at_x:.6g} "
          f"d'={report.safe_radius:.6g} clamped={report.radius_clamped} "
          f"fevals={report.fevals} batches={report.batches}")
    if report.risk_found is not None:
        print(f"risk witness found: s = {report.risk_found.s_value:.6g}")
        if args.fail_on_risk:
            return EXIT_RISK
    return EXIT_OK


def emit_csv(reports: list[QuantReport], path, input_ids=None) -> None:
    """Write one row per report with a stable column order."""
    methods_seen = {type(r.property).__name__ for r in reports}
    if len(methods_seen) > 1:
        raise ReportFormatError(
            f"mixed property schemas in CSV emission: {sorted(methods_seen)}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i, r in enumerate(reports):
            input_id = input_ids[i] if input_ids is not None else i
            writer.writerow(_csv_row(r, input_id))


def _csv_row(r: QuantReport, input_id):
    p_disp = "inf" if math.isinf(r.ball.p) else int(r.ball.p)
    return [input_id, p_disp, r.ball.radius, r.Q_estimate, r.safe_radius,
            r.fevals, r.batches, r.method]


def emit_csv_row(report: QuantReport, path, input_id=None) -> None:
    exists = Path(path).exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if not exists:
            writer.writerow(CSV_COLUMNS)
        writer.writerow(_csv_row(report, input_id if input_id is not None else ""))


def _cmd_robustness(args) -> int:
    p, budget, seed = _common_run_params(args)
    net = _load_model_checked(args.model)
    center = _resolve_center(args, net.input_dim)
    expr = _ci_expr(args, net, center)
    started = time.perf_counter()
    try:
        report = lipschitz_metric(net, expr, NormBall(center, args.d, p),
                                  budget=budget, seed=seed)
    except ConfigError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    return _finish(report, args, net, started)


def _cmd_targeted(args) -> int:
    p, budget, seed = _common_run_params(args)
    net = _load_model_checked(args.model)
    center = _resolve_center(args, net.input_dim)
    started = time.perf_counter()
    try:
        report = targeted_robustness(net, center, args.target, args.d, p,
                                     budget=budget, seed=seed,
                                     epsilon=args.epsilon)
    except ConfigError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    return _finish(report, args, net, started)


def _cmd_uncertainty(args) -> int:
    p, budget, seed = _common_run_params(args)
    net = _load_model_checked(args.model)
    center = _resolve_center(args, net.input_dim)
    started = time.perf_counter()
    try:
        report, trajectory = uncertainty_search(
            net, center, args.d, p, epsilon=args.epsilon, budget=budget,
            seed=seed, epsilon_label=args.epsilon_label)
    except ConfigError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    if args.trace_csv:
        with open(args.trace_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "kl"])
            writer.writerows(trajectory)
    return _finish(report, args, net, started)


def _cmd_reachability(args) -> int:
    p, budget, seed = _common_run_params(args)
    net = _load_model_checked(args.model)
    center = _resolve_center(args, net.input_dim)
    try:
        result = reach_range(net, center, args.label, args.d, p,
                             epsilon=args.epsilon, budget=budget, seed=seed)
    except ConfigError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    print(f"label={args.label} max={result.max_value:.6g} "
          f"at_center={result.value_at_center:.6g} "
          f"reachable={result.reachable} fevals={result.fevals} "
          f"batches={result.batches}")
    if args.out:
        Path(args.out).write_text(json.dumps({
            "label": args.label, "max_value": result.max_value,
            "value_at_center": result.value_at_center,
            "reachable": result.reachable, "epsilon": result.epsilon,
            "witness": [float(v) for v in result.witness],
            "fevals": result.fevals, "batches": result.batches,
        }, indent=2, sort_keys=True) + "\n")
    if result.reachable and args.fail_on_risk:
        return EXIT_RISK
    return EXIT_OK


def _cmd_certify(args) -> int:
    try:
        report = modelio.load_report(args.report)
        d_prime, cert = certify_radius(report)
    except (ReportFormatError, CenterAtRiskError) as exc:
        raise _CliError(f"certify: {exc}", EXIT_CONFIG)
    print(f"d'={d_prime:.6g} clamped={cert.radius_clamped} "
          f"Q_provenance={cert.q_provenance} method={cert.method}")
    return EXIT_OK


def _cmd_baseline_rs(args) -> int:
    p, _, seed = _common_run_params(args)
    net = _load_model_checked(args.model)
    center = _resolve_center(args, net.input_dim)
    expr = _ci_expr(args, net, center)
    started = time.perf_counter()
    report = random_sampling_baseline(net, expr, NormBall(center, args.d, p),
                                      sample_count=args.samples, seed=seed)
    return _finish(report, args, net, started)


def _cmd_oracle_grid(args) -> int:
    p, _, _ = _common_run_params(args)
    net = _load_model_checked(args.model)
    center = _resolve_center(args, net.input_dim)
    expr = _ci_expr(args, net, center)
    started = time.perf_counter()
    try:
        report = grid_oracle(net, expr, NormBall(center, args.d, p),
                             points_per_dim=args.points_per_dim)
    except (GridSizeError, ConfigError) as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    return _finish(report, args, net, started)


def _cmd_inspect(args) -> int:
    net = _load_model_checked(args.model)
    print(f"input_shape={net.input_shape} output_dim={net.output_dim}")
    shape = net.input_shape
    for i, layer in enumerate(net.layers):
        shape = layer.out_shape(shape)
        print(f"  layer {i}: {layer.kind} -> {shape}")
    print(f"digest={getattr(net, 'digest', None)}")
    meta = getattr(net, "metadata", {})
    if meta:
        print(f"metadata={json.dumps(meta, sort_keys=True)}")
    return EXIT_OK


_COMMANDS = {
    "robustness": _cmd_robustness,
    "targeted": _cmd_targeted,
    "uncertainty": _cmd_uncertainty,
    "reachability": _cmd_reachability,
    "certify": _cmd_certify,
    "baseline-rs": _cmd_baseline_rs,
    "oracle-grid": _cmd_oracle_grid,
    "inspect-model": _cmd_inspect,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "config"):
            _merge_config(args)
        return _COMMANDS[args.command](args)
    except _CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except RunConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except ModelFormatError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MODEL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
