"""Command-line front end.

Subcommands:

- ``gen``     write a seeded problem instance as versioned JSON (prints a
              sha256 content digest for reproducibility logs)
- ``run``     run the solver from a JSON config; writes a CSV trace and a
              summary JSON (``--sweep`` runs several configs on a process pool)
- ``check``   finite-difference oracle checks, prox grid-oracle tests, and the
              schedule sandwich test for one problem family
- ``subseq``  extract the certified monotone subsequence from a trace column

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 verification
failure.  ``SDCAM_LOG_LEVEL`` in {error, info, debug} controls logging.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .diagnostics import (
    RateConstants,
    rate_bound_check,
    rate_constants,
    select_subsequence,
)
from .oracles import Problem
from .prox import prox_lp_power
from .schedule import ScheduleSpec
from .solver import SolveResult, SolverConfig, SolverError, solve
from .verify import verify_problem_oracles, verify_prox_family, verify_schedule_sandwich
from .problems import (
    load_instance,
    mimo_generate,
    mimo_initial_point,
    mimo_problem,
    mlp_generate,
    mlp_initial_point,
    mlp_problem,
    mlp_sup_abs_fg,
    qcqp_generate,
    qcqp_initial_point,
    qcqp_problem,
    relative_feasibility,
    save_instance,
)
from .problems.mimo import mimo_sup_abs_fg
from .problems.qcqp import QcqpInstance
from .problems.mimo import MimoInstance
from .problems.mlp import MlpInstance

__all__ = ["main"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VERIFICATION = 3

SCHEMA_VERSION = 1

CSV_HEADER = (
    "t,mu_t,beta_t,step_norm,scaled_step,gap,prev_gap,residual,"
    "fg_value,h_at_y,H_value,Theta_value,unsuccessful_this_iter,rel_feas"
)

# Per-family solver defaults (mu_max, mu_init, rho, eta) used when the config
# omits a field.
_SOLVER_DEFAULTS = {
    "qcqp": {"mu_max": 1e7, "mu_init": 1.0, "rho": 0.8, "eta": 1.2},
    "mimo": {"mu_max": 1e7, "mu_init": 1.0, "rho": 0.5, "eta": 2.0},
    "mlp": {"mu_max": 1e7, "mu_init": 0.01, "rho": 0.5, "eta": 2.0},
}

# Bound-check regime per family: box-constrained h domain for qcqp, globally
# Lipschitz h for mimo, finite-everywhere h for mlp.
_FAMILY_REGIME = {
    "qcqp": "bounded_domains",
    "mimo": "lipschitz_h",
    "mlp": "full_domain_h",
}

_SUBSEQ_COLUMNS = ("step_norm_sq", "scaled_step_sq")


class UsageError(ValueError):
    """Bad flags or config contents."""


def _configure_logging() -> None:
    level_name = os.environ.get("SDCAM_LOG_LEVEL", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        raise UsageError(
            f"SDCAM_LOG_LEVEL must be one of {sorted(levels)}, got {level_name!r}"
        )
    logging.basicConfig(level=levels[level_name], format="%(levelname)s %(name)s: %(message)s")


def _require_keys(obj: Dict[str, Any], allowed: Dict[str, bool], where: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise UsageError(f"unknown key(s) {unknown} in {where}")
    missing = sorted(k for k, req in allowed.items() if req and k not in obj)
    if missing:
        raise UsageError(f"missing required key(s) {missing} in {where}")


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


# ---------------------------------------------------------------------------
# problem construction


def _build_instance(problem_cfg: Dict[str, Any], seed: int):
    if "instance" in problem_cfg:
        _require_keys(problem_cfg, {"instance": True}, "problem")
        inst = load_instance(problem_cfg["instance"])
        family = {QcqpInstance: "qcqp", MimoInstance: "mimo", MlpInstance: "mlp"}[type(inst)]
        return family, inst
    family = problem_cfg.get("family")
    if family == "qcqp":
        _require_keys(
            problem_cfg,
            {"family": True, "n": True, "m": True, "alpha": False, "p": False, "scale0": False},
            "problem",
        )
        kwargs = {k: problem_cfg[k] for k in ("alpha", "p", "scale0") if k in problem_cfg}
        return family, qcqp_generate(seed, problem_cfg["n"], problem_cfg["m"], **kwargs)
    if family == "mimo":
        _require_keys(
            problem_cfg,
            {
                "family": True,
                "n": True,
                "m": True,
                "p_psk": False,
                "lambda1": False,
                "lambda2": False,
                "r_lo": False,
            },
            "problem",
        )
        kwargs = {
            k: problem_cfg[k] for k in ("p_psk", "lambda1", "lambda2", "r_lo") if k in problem_cfg
        }
        return family, mimo_generate(seed, problem_cfg["n"], problem_cfg["m"], **kwargs)
    if family == "mlp":
        _require_keys(
            problem_cfg,
            {
                "family": True,
                "layer_dims": False,
                "n_samples": False,
                "p": False,
                "lam": False,
                "activation": False,
                "source": False,
                "images_path": False,
                "labels_path": False,
            },
            "problem",
        )
        kwargs = {k: v for k, v in problem_cfg.items() if k != "family"}
        if "layer_dims" in kwargs:
            kwargs["layer_dims"] = tuple(kwargs["layer_dims"])
        return family, mlp_generate(seed, **kwargs)
    raise UsageError(
        "problem must carry either an 'instance' path or a 'family' in {qcqp, mimo, mlp}"
    )


def _problem_bundle(family: str, inst) -> Tuple[Problem, np.ndarray, np.ndarray, Any, Optional[float]]:
    """Returns (problem, x0, y0, rel_feas_fn, sup_abs_fg_bound)."""
    if family == "qcqp":
        prob = qcqp_problem(inst)
        x0, y0 = qcqp_initial_point(inst)
        return prob, x0, y0, (lambda x: relative_feasibility(inst, x)), None
    if family == "mimo":
        prob = mimo_problem(inst)
        x0, y0 = mimo_initial_point(inst)
        return prob, x0, y0, None, mimo_sup_abs_fg(inst)
    prob = mlp_problem(inst)
    x0, y0 = mlp_initial_point(inst)
    return prob, x0, y0, None, mlp_sup_abs_fg(inst)


# ---------------------------------------------------------------------------
# run


def _load_run_config(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must be a JSON object")
    _require_keys(
        cfg,
        {
            "schema_version": True,
            "seed": True,
            "problem": True,
            "solver": False,
            "schedule": True,
            "output": True,
            "assert_level": False,
        },
        "config",
    )
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise UsageError(
            f"schema_version {cfg['schema_version']!r} unsupported (expected {SCHEMA_VERSION})"
        )
    if not isinstance(cfg["seed"], int):
        raise UsageError("seed must be an integer")
    return cfg


def _solver_config(cfg: Dict[str, Any], family: str) -> SolverConfig:
    solver_cfg = dict(cfg.get("solver", {}))
    _require_keys(
        solver_cfg,
        {
            "mu_max": False,
            "mu_init": False,
            "rho": False,
            "eta": False,
            "max_successful_iters": True,
            "max_total_trials": False,
            "stop_residual": False,
            "stop_gap": False,
        },
        "solver",
    )
    defaults = _SOLVER_DEFAULTS[family]
    for key, value in defaults.items():
        solver_cfg.setdefault(key, value)
    iters = solver_cfg["max_successful_iters"]
    solver_cfg.setdefault("max_total_trials", max(1000, 50 * iters))
    schedule_cfg = dict(cfg["schedule"])
    _require_keys(
        schedule_cfg,
        {"family": False, "beta0": True, "delta": True, "K": False},
        "schedule",
    )
    schedule_cfg.setdefault("family", "power")
    try:
        schedule = ScheduleSpec(**schedule_cfg)
        return SolverConfig(
            schedule=schedule,
            assert_level=cfg.get("assert_level", "cheap"),
            **solver_cfg,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write_trace_csv(path: str, result: SolveResult) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in result.trace:
            fields = [
                str(r.t),
                _fmt(r.mu_t),
                _fmt(r.beta_t),
                _fmt(r.step_norm),
                _fmt(r.scaled_step),
                _fmt(r.gap),
                _fmt(r.prev_gap),
                _fmt(r.residual),
                _fmt(r.fg_value),
                _fmt(r.h_at_y),
                _fmt(r.H_value),
                _fmt(r.Theta_value),
                str(r.unsuccessful_this_iter),
                _fmt(r.rel_feas),
            ]
            fh.write(",".join(fields) + "\n")


def _rate_report_dict(trace, consts: RateConstants, regime: str) -> Dict[str, Any]:
    report = rate_bound_check(trace, consts, regime)
    return {
        "regime": report.regime,
        "checkable": report.checkable,
        "passed": report.passed,
        "checked": report.checked,
        "skipped": report.skipped,
        "missing": report.missing,
        "violations": [
            {"inequality": name, "t": t, "lhs": lhs, "rhs": rhs}
            for name, t, lhs, rhs in report.violations
        ],
        "constants": {
            f.name: getattr(consts, f.name)
            for f in dataclasses.fields(consts)
            if f.name != "provenance"
        },
        "provenance": consts.provenance,
    }


def _write_summary(
    path: str, result: SolveResult, rate_report: Optional[Dict[str, Any]]
) -> None:
    last = result.trace[-1] if result.trace else None
    final = None
    if last is not None:
        final = {
            "t": last.t,
            "mu_t": last.mu_t,
            "beta_t": last.beta_t,
            "step_norm": last.step_norm,
            "scaled_step": last.scaled_step,
            "gap": last.gap,
            "prev_gap": last.prev_gap,
            "residual": last.residual,
            "fg_value": last.fg_value,
            "rel_feas": last.rel_feas,
        }
    doc = {
        "status": result.status,
        "total_trials": result.total_trials,
        "total_unsuccessful": result.total_unsuccessful,
        "successful_iters": len(result.trace),
        "final": final,
        "rate_bound_check": rate_report,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def run_config_file(path: str) -> int:
    """Execute one run config; returns a process exit code."""
    cfg = _load_run_config(path)
    family, inst = _build_instance(dict(cfg["problem"]), cfg["seed"])
    problem, x0, y0, rel_feas, sup_abs_fg = _problem_bundle(family, inst)
    solver_cfg = _solver_config(cfg, family)

    output_cfg = dict(cfg["output"])
    _require_keys(output_cfg, {"trace": True, "summary": False}, "output")
    trace_path = output_cfg["trace"]
    summary_path = output_cfg.get("summary", trace_path + ".summary.json")

    try:
        result = solve(problem, solver_cfg, x0, y0, rel_feas=rel_feas)
    except SolverError as exc:
        logger.error("numerical failure: %s", exc)
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    consts = rate_constants(
        problem,
        solver_cfg.schedule,
        result.anchors,
        rho=solver_cfg.rho,
        mu_max=solver_cfg.mu_max,
        sup_abs_fg_bound=sup_abs_fg,
    )
    rate_report = _rate_report_dict(result.trace, consts, _FAMILY_REGIME[family])
    _write_trace_csv(trace_path, result)
    _write_summary(summary_path, result, rate_report)
    logger.info(
        "run finished: status=%s iters=%d trials=%d trace=%s",
        result.status,
        len(result.trace),
        result.total_trials,
        trace_path,
    )
    print(f"{path}: {result.status}, {len(result.trace)} accepted steps -> {trace_path}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    paths: List[str] = args.config
    if not args.sweep and len(paths) != 1:
        raise UsageError("multiple configs require --sweep")
    if not args.sweep:
        return run_config_file(paths[0])
    codes: List[int] = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
        for path, code in zip(paths, pool.map(run_config_file, paths)):
            codes.append(code)
            if code != EXIT_OK:
                logger.error("sweep member %s exited with code %d", path, code)
    return max(codes) if codes else EXIT_OK


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args: argparse.Namespace) -> int:
    problem_cfg: Dict[str, Any] = {"family": args.family}
    if args.family in ("qcqp", "mimo"):
        if args.n is None or args.m is None:
            raise UsageError(f"gen {args.family} requires --n and --m")
        problem_cfg["n"] = args.n
        problem_cfg["m"] = args.m
    if args.family == "qcqp":
        for key, val in (("alpha", args.alpha), ("p", args.p), ("scale0", args.scale0)):
            if val is not None:
                problem_cfg[key] = val
    elif args.family == "mimo":
        for key, val in (
            ("p_psk", args.p_psk),
            ("lambda1", args.lambda1),
            ("lambda2", args.lambda2),
            ("r_lo", args.r_lo),
        ):
            if val is not None:
                problem_cfg[key] = val
    else:
        if args.layer_dims is not None:
            problem_cfg["layer_dims"] = [int(s) for s in args.layer_dims.split(",")]
        for key, val in (
            ("n_samples", args.n_samples),
            ("p", args.p),
            ("lam", args.lam),
            ("activation", args.activation),
            ("source", args.source),
            ("images_path", args.images),
            ("labels_path", args.labels),
        ):
            if val is not None:
                problem_cfg[key] = val
    try:
        _, inst = _build_instance(problem_cfg, args.seed)
    except (ValueError, RuntimeError) as exc:
        raise UsageError(str(exc)) from exc
    save_instance(inst, args.out)
    with open(args.out, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    print(f"sha256 {digest}  {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check


def cmd_check(args: argparse.Namespace) -> int:
    failures: List[str] = []

    if args.instance is not None:
        inst = load_instance(args.instance)
        family = {QcqpInstance: "qcqp", MimoInstance: "mimo", MlpInstance: "mlp"}[type(inst)]
    else:
        family = args.family
        if family is None:
            raise UsageError("check requires --family or --instance")
        if family == "qcqp":
            inst = qcqp_generate(args.seed, n=10, m=3)
        elif family == "mimo":
            inst = mimo_generate(args.seed, n=6, m=12)
        else:
            inst = mlp_generate(args.seed, layer_dims=(8, 5, 3, 1), n_samples=20)

    problem, x0, _, _, _ = _problem_bundle(family, inst)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed, spawn_key=(99,))))
    points = [x0] + [x0 + 0.1 * rng.standard_normal(x0.size) for _ in range(9)]
    oracle_failures = verify_problem_oracles(problem, points, seed=args.seed)
    failures.extend(oracle_failures)
    print(f"oracle checks ({family}, 10 points): "
          f"{'pass' if not oracle_failures else 'FAIL'}")

    prox_report = verify_prox_family(prox_lp_power, n_instances=args.prox_instances,
                                     seed=args.seed)
    print(f"prox grid-oracle ({args.prox_instances} instances): "
          f"{'pass' if prox_report.passed else 'FAIL'} "
          f"(max objective excess {prox_report.max_excess:.3e})")
    if not prox_report.passed:
        failures.append(f"prox grid-oracle excess {prox_report.max_excess} at "
                        f"{prox_report.worst_case}")

    schedule_ok = True
    for fam, delta, K in (("power", 0.3, 1), ("power", 0.5, 1),
                          ("blocked", 0.3, 3), ("blocked", 0.5, 10)):
        spec = ScheduleSpec(family=fam, beta0=1.0, delta=delta, K=K)
        if not verify_schedule_sandwich(spec, t_max=10_000):
            schedule_ok = False
            failures.append(f"schedule sandwich violated: {spec}")
    print(f"schedule sandwich: {'pass' if schedule_ok else 'FAIL'}")

    if family == "qcqp":
        eigs = np.array([np.linalg.eigvalsh(Qi).min() for Qi in inst.Q])
        psd_ok = bool(np.all(eigs >= -1e-10)) and bool(np.all(inst.ri < 0.0))
        print(f"qcqp structure (PSD blocks, negative offsets): "
              f"{'pass' if psd_ok else 'FAIL'}")
        if not psd_ok:
            failures.append("qcqp PSD/offset structure violated")

    for msg in failures:
        print(f"FAIL: {msg}", file=sys.stderr)
    return EXIT_OK if not failures else EXIT_VERIFICATION


# ---------------------------------------------------------------------------
# subseq


def cmd_subseq(args: argparse.Namespace) -> int:
    with open(args.trace, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise UsageError(f"trace {args.trace} is empty")
    if args.column not in _SUBSEQ_COLUMNS:
        raise UsageError(
            f"unknown column {args.column!r}; valid columns: {', '.join(_SUBSEQ_COLUMNS)}"
        )
    source = "step_norm" if args.column == "step_norm_sq" else "scaled_step"
    a = np.array([float(r[source]) for r in rows]) ** 2
    b = np.cumsum(a) / np.arange(1, a.size + 1)
    selected = select_subsequence(a)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("T,a_T,b_T_minus_1\n")
        for T in selected:
            fh.write(f"{T},{_fmt(a[T - 1])},{_fmt(b[T - 2])}\n")
    print(f"{len(selected)} indices selected from {a.size} rows -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # map argparse's exit(2) onto usage code 1
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdcam", description="Single-loop prox-penalty solver toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate and serialize a problem instance")
    p_gen.add_argument("--family", required=True, choices=("qcqp", "mimo", "mlp"))
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--n", type=int)
    p_gen.add_argument("--m", type=int)
    p_gen.add_argument("--alpha", type=float)
    p_gen.add_argument("--p", type=float)
    p_gen.add_argument("--scale0", type=float)
    p_gen.add_argument("--p-psk", dest="p_psk", type=int)
    p_gen.add_argument("--lambda1", type=float)
    p_gen.add_argument("--lambda2", type=float)
    p_gen.add_argument("--r-lo", dest="r_lo", type=float)
    p_gen.add_argument("--layer-dims", dest="layer_dims")
    p_gen.add_argument("--n-samples", dest="n_samples", type=int)
    p_gen.add_argument("--lam", type=float)
    p_gen.add_argument("--activation", choices=("tanh", "sigmoid"))
    p_gen.add_argument("--source", choices=("synthetic", "idx"))
    p_gen.add_argument("--images")
    p_gen.add_argument("--labels")
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="run the solver from JSON config(s)")
    p_run.add_argument("--config", nargs="+", required=True)
    p_run.add_argument("--sweep", action="store_true",
                       help="run all configs on a process pool")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="verification suite for a problem family")
    p_check.add_argument("--family", choices=("qcqp", "mimo", "mlp"))
    p_check.add_argument("--instance")
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--prox-instances", dest="prox_instances", type=int, default=200)
    p_check.set_defaults(func=cmd_check)

    p_sub = sub.add_parser("subseq", help="extract the certified subsequence from a trace")
    p_sub.add_argument("--trace", required=True)
    p_sub.add_argument("--column", required=True)
    p_sub.add_argument("--out", required=True)
    p_sub.set_defaults(func=cmd_subseq)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        _configure_logging()
        parser = _build_parser()
        args = parser.parse_args(argv)
        return int(args.func(args))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, RuntimeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
