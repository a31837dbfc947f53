"""``pidfit`` command-line interface.

Exit codes: 0 success, 2 unstable result, 3 config error, 4 numeric or
structural failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import (fotd_parameters, lambda_pi, pole_placement_pi_first_order, reaction_curve,
                        ultimate_point, zn_reaction_pid, zn_ultimate)
from .config import RunConfig, parse_config
from .errors import ConfigError, DomainError, NotFoundError, PidfitError
from .lti import PidGains, simulate_closed_loop, step_response
from .svg import emit_svg
from .tuner import TuneProblem, TuneResult, evaluate, tune

EXIT_OK = 0
EXIT_UNSTABLE = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4

METHODS = ("srcf", "zn-reaction", "zn-ultimate", "lambda", "pole-placement")
TABLE_COLUMNS = ("method", "kp", "ki", "kd", "ts", "po_pct", "iae", "ms", "stable", "objective", "status", "reason")


class Skip(Exception):
    """A comparison method does not apply to this problem."""


def _use_color() -> bool:
    return sys.stdout.isatty() and not os.environ.get("PIDFIT_NO_COLOR")


def _say(text: str, color: Optional[str] = None) -> None:
    codes = {"green": "32", "red": "31", "yellow": "33"}
    if color and _use_color():
        text = f"\033[{codes[color]}m{text}\033[0m"
    print(text)


def _clean(x):
    """JSON-safe float: None for NaN/inf."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def report_dict(method: str, result: TuneResult, config: Optional[RunConfig] = None,
                files: Optional[dict] = None) -> dict:
    """Serializable row; the config and file list are added when given."""
    m = result.metrics
    row = {
        "method": method,
        "status": result.status,
        "gains": {"kp": result.gains.kp, "ki": result.gains.ki, "kd": result.gains.kd},
        "metrics": {
            "ts": _clean(m.settling_time),
            "po_pct": _clean(m.overshoot_pct),
            "iae": _clean(m.iae),
            "ms": _clean(m.ms),
            "ms_omega": _clean(m.ms_omega),
            "decay_ratio": _clean(m.decay_ratio),
            "final_value": _clean(m.final_value),
        },
        "stable": m.stable,
        "objective": _clean(result.objective),
        "evals_used": result.evals_used,
        "converged": result.converged,
        # effective grid; n_samples can exceed the configured one after delay alignment
        "grid": {"t_final": result.problem.grid.t_final, "n_samples": result.problem.grid.n_samples},
    }
    if files is not None:
        row["files"] = files
    if config is not None:
        row["config"] = config.as_dict()
    return row


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join("%.9g" % v for v in row) + "\n")


def _summary(method: str, result: TuneResult) -> None:
    g, m = result.gains, result.metrics
    ts = "-" if m.settling_time is None else f"{m.settling_time:.4g}"
    ms = "-" if m.ms is None else f"{m.ms:.4g}"
    color = "green" if m.stable else "red"
    _say(f"{method:>14}: Kp={g.kp:.4f} Ki={g.ki:.4f} Kd={g.kd:.4f} Ts={ts} "
         f"PO={m.overshoot_pct:.3g}% Ms={ms} [{result.status}]", color)


def _emit_result(method: str, result: TuneResult, config: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    files = {"response": "response.csv", "plot": "plot.svg"}
    _write_csv(out / files["response"], ("t", "y_desired", "y_actual"),
               (result.response.t, result.desired.values, result.response.values))
    emit_svg([result.desired, result.response], ["desired", method], out / files["plot"],
             title=f"{method} vs desired step response")
    (out / "report.json").write_text(dump_json(report_dict(method, result, config, files)), encoding="utf-8")
    _summary(method, result)
    return EXIT_OK if result.metrics.stable else EXIT_UNSTABLE


def cmd_tune(config: RunConfig, out: Path, seed: Optional[int] = None) -> int:
    if seed is not None:
        config = config.with_seed(seed)
    result = tune(config.problem())
    return _emit_result("srcf", result, config, out)


def cmd_evaluate(config: RunConfig, gains: Optional[PidGains], out: Path) -> int:
    if gains is None:
        raise ConfigError("--gains", "evaluate needs --gains kp,ki,kd")
    result = evaluate(config.problem(), gains)
    return _emit_result("fixed", result, config, out)


def cmd_simulate(config: RunConfig, gains: Optional[PidGains], out: Path) -> int:
    plant, grid = config.plant(), config.grid()
    y = step_response(plant, grid) if gains is None else simulate_closed_loop(plant, gains, grid)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "response.csv", ("t", "y"), (y.t, y.values))
    _say(f"wrote {out / 'response.csv'} ({len(y)} samples)")
    return EXIT_OK


def _structure(problem: TuneProblem) -> str:
    _, ki_hi, kd_hi = problem.bounds_hi
    if ki_hi == 0 and kd_hi == 0:
        return "P"
    return "PI" if kd_hi == 0 else "PID"


def method_gains(method: str, problem: TuneProblem) -> PidGains:
    """Gains proposed by a classical rule, or Skip with the reason."""
    plant, spec = problem.plant, problem.spec
    try:
        if method == "zn-reaction":
            return zn_reaction_pid(reaction_curve(plant))
        if method == "zn-ultimate":
            return zn_ultimate(ultimate_point(plant), _structure(problem))
        if method == "lambda":
            try:
                K, T, L = fotd_parameters(plant)
            except DomainError:
                raise Skip("plant is not first-order-plus-delay") from None
            if spec.kind != "fotd":
                raise Skip("lambda needs an fotd target to supply Tcl")
            return lambda_pi(K, T, L, spec.Tcl)
        if method == "pole-placement":
            try:
                K, T, L = fotd_parameters(plant)
            except DomainError:
                raise Skip("plant is not first-order") from None
            if L != 0:
                raise Skip("pole placement needs a delay-free first-order plant")
            if spec.kind != "second_order" or spec.PO is None:
                raise Skip("pole placement needs a second_order target given by PO and Ts")
            return pole_placement_pi_first_order(T, spec.PO, spec.Ts, K)
    except (NotFoundError, DomainError) as exc:
        raise Skip(str(exc)) from None
    raise ConfigError("--methods", f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def _row(method: str, result: Optional[TuneResult], reason: str = "") -> dict:
    if result is None:
        return {"method": method, "status": "skipped", "reason": reason}
    row = report_dict(method, result)
    row["reason"] = reason
    return row


def cmd_compare(config: RunConfig, methods: Sequence[str], out: Path, seed: Optional[int] = None) -> int:
    for m in methods:
        if m not in METHODS:
            raise ConfigError("--methods", f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if seed is not None:
        config = config.with_seed(seed)
    problem = config.problem()
    rows, traces, labels = [], [problem.desired], ["desired"]
    for method in methods:
        try:
            result = tune(problem) if method == "srcf" else evaluate(problem, method_gains(method, problem))
        except Skip as exc:
            rows.append(_row(method, None, str(exc)))
            _say(f"{method:>14}: skipped ({exc})", "yellow")
            continue
        rows.append(_row(method, result))
        traces.append(result.response)
        labels.append(method)
        _summary(method, result)
    out.mkdir(parents=True, exist_ok=True)
    table = {"config": config.as_dict(), "rows": rows}
    (out / "table.json").write_text(dump_json(table), encoding="utf-8")
    with (out / "table.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for r in rows:
            g, m = r.get("gains", {}), r.get("metrics", {})
            flat = {**g, **m, "method": r["method"], "stable": r.get("stable", ""),
                    "objective": r.get("objective"), "status": r["status"], "reason": r.get("reason", "")}
            writer.writerow(["" if flat.get(c) is None else
                             ("%.9g" % flat[c] if isinstance(flat[c], float) else flat[c])
                             for c in TABLE_COLUMNS])
    emit_svg(traces, labels, out / "plot.svg", title="Step response comparison")
    return EXIT_OK if len(traces) > 1 else EXIT_NUMERIC


def _parse_gains(text: Optional[str]) -> Optional[PidGains]:
    if text is None:
        return None
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError("--gains", "expected kp,ki,kd")
    try:
        return PidGains(*(float(p) for p in parts))
    except ValueError as exc:
        raise ConfigError("--gains", str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pidfit", description="PID tuning by step-response curve fitting")
    parser.add_argument("command", choices=("tune", "compare", "simulate", "evaluate"))
    parser.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    parser.add_argument("--out", type=Path, default=Path("pidfit-out"), help="output directory")
    parser.add_argument("--gains", help="fixed gains kp,ki,kd (simulate/evaluate)")
    parser.add_argument("--methods", default="srcf,zn-reaction",
                        help=f"comma-separated methods for compare ({', '.join(METHODS)})")
    parser.add_argument("--seed", type=int, help="override optimizer.seed")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        config = parse_config(args.config)
        gains = _parse_gains(args.gains)
        if args.command == "tune":
            return cmd_tune(config, args.out, args.seed)
        if args.command == "evaluate":
            return cmd_evaluate(config, gains, args.out)
        if args.command == "simulate":
            return cmd_simulate(config, gains, args.out)
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        return cmd_compare(config, methods, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PidfitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
