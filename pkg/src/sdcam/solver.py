"""Single-loop prox-penalty solver for  min f(x) + g(x) + h(c(x)).

Each outer trial solves one prox subproblem

    x~ = argmin_x  <v, x> + (1/mu)*||x - x^t||^2 + g(x),
    v  = grad f(x^t) + beta_t * J_c(x^t)^T (c(x^t) - y^t),

accepts it when the backtracking condition below holds, and then updates the
auxiliary point y by one prox step on h:

  (i)  ||c(x~) - c(x^t)||  <=  sqrt(1/(mu*beta_t)) * ||x~ - x^t||
  (ii) f(x~)+g(x~)+(beta_t/2)||c(x~)-y^t||^2
         <=  f(x^t)+g(x^t)+(beta_t/2)||c(x^t)-y^t||^2 - (1/(2mu))||x~-x^t||^2

On acceptance mu grows by eta (capped at mu_max) and the schedule index t
advances; on rejection mu shrinks by rho and the state is untouched.  beta_t
is indexed by the accepted-step counter only: rejected trials reuse beta_t.

c(x^t) and grad f(x^t) are cached across rejected trials (they depend only on
x^t); the backtracking loop re-solves only the prox.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from .oracles import Problem, Vector
from .schedule import ScheduleSpec, beta_at
from . import diagnostics

__all__ = [
    "SolverConfig",
    "SolverState",
    "TraceRow",
    "RunAnchors",
    "SolveResult",
    "SolverError",
    "trial_step",
    "condition_check",
    "ConditionReport",
    "step",
    "solve",
]


class SolverError(RuntimeError):
    """Numerical failure: an oracle violated its contract mid-run."""


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    mu_max: float
    mu_init: float
    rho: float
    eta: float
    schedule: ScheduleSpec
    max_successful_iters: int
    max_total_trials: int
    stop_residual: Optional[float] = None
    stop_gap: Optional[float] = None
    assert_level: str = "cheap"  # off | cheap | full

    def __post_init__(self) -> None:
        if not (0.0 < self.mu_init < self.mu_max):
            raise ValueError("require 0 < mu_init < mu_max")
        if not (0.0 < self.rho < 1.0):
            raise ValueError("rho must lie in (0,1)")
        if self.eta < 1.0:
            raise ValueError("eta must be >= 1")
        if self.max_successful_iters < 1 or self.max_total_trials < 1:
            raise ValueError("iteration budgets must be positive")
        if self.assert_level not in ("off", "cheap", "full"):
            raise ValueError(f"unknown assert_level {self.assert_level!r}")


@dataclasses.dataclass
class SolverState:
    """Mutable run state; caches c(x) and grad f(x) at the current iterate."""

    t: int
    x: Vector
    y: Vector
    mu: float
    c_x: Vector
    grad_fx: Vector
    fg_x: float  # f(x) + g(x)
    h_y: float  # h(y)
    trial_count: int = 0
    unsuccessful_count: int = 0
    unsuccessful_since_accept: int = 0


@dataclasses.dataclass(frozen=True)
class TraceRow:
    """One accepted step (produces x^{t+1} from x^t).

    H_value = f+g(x^{t+1}) + (beta_t/2)||c(x^{t+1})-y^t||^2 + h(y^t);
    Theta_value = (f+g(x^{t+1}) - inf_fg)/beta_t + ||c(x^{t+1})-y^t||^2/2
                  + h(y^t)/beta_t  (None when no inf_fg lower bound is known).
    """

    t: int
    mu_t: float
    beta_t: float
    step_norm: float
    scaled_step: float
    gap: float
    prev_gap: float
    residual: float
    fg_value: float
    h_at_y: float
    H_value: float
    Theta_value: Optional[float]
    unsuccessful_this_iter: int
    rel_feas: Optional[float] = None


@dataclasses.dataclass
class RunAnchors:
    """Initial-point quantities needed by the rate-constant formulas."""

    beta0: float
    gap_x0_y0: float
    h_y0: float
    fg_x1: Optional[float] = None
    gap_x1_y0: Optional[float] = None


@dataclasses.dataclass
class SolveResult:
    x: Vector
    y: Vector
    t: int
    status: str
    trace: List[TraceRow]
    anchors: RunAnchors
    total_trials: int
    total_unsuccessful: int
    condition_margins: List[Tuple[float, float]]


@dataclasses.dataclass(frozen=True)
class ConditionReport:
    passed: bool
    margin_i: float
    margin_ii: float
    tol: float
    c_trial: Vector
    fg_trial: float


def trial_step(p: Problem, st: SolverState, beta_t: float, mu: float) -> Vector:
    """Exact minimizer of <v,x> + (1/mu)||x-x^t||^2 + g(x)."""
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    v = st.grad_fx + beta_t * np.asarray(p.c.vjp(st.x, st.c_x - st.y), dtype=float)
    return np.asarray(p.g.prox(st.x - 0.5 * mu * v, 0.5 * mu), dtype=float)


def condition_check(
    p: Problem,
    x_t: Vector,
    x_trial: Vector,
    y_t: Vector,
    beta_t: float,
    mu: float,
    fg_xt: float,
    c_xt: Vector,
) -> ConditionReport:
    """Backtracking acceptance test; margins >= -tol means pass.

    tol = 1e-12*(1+|f(x^t)+g(x^t)|) guards floating-point ties at margin 0.
    """
    g_trial = float(p.g.value(x_trial))
    if g_trial == math.inf:
        raise SolverError("g.prox returned a point outside dom g")
    fg_trial = float(p.f.value(x_trial)) + g_trial
    c_trial = np.asarray(p.c.value(x_trial), dtype=float)
    dx = float(np.linalg.norm(x_trial - x_t))
    dc = float(np.linalg.norm(c_trial - c_xt))
    margin_i = math.sqrt(1.0 / (mu * beta_t)) * dx - dc
    lhs = fg_trial + 0.5 * beta_t * float(np.linalg.norm(c_trial - y_t)) ** 2
    rhs = fg_xt + 0.5 * beta_t * float(np.linalg.norm(c_xt - y_t)) ** 2
    margin_ii = rhs - lhs - dx * dx / (2.0 * mu)
    tol = 1e-12 * (1.0 + abs(fg_xt))
    passed = margin_i >= -tol and margin_ii >= -tol
    return ConditionReport(passed, margin_i, margin_ii, tol, c_trial, fg_trial)


def step(
    p: Problem,
    st: SolverState,
    cfg: SolverConfig,
    rel_feas: Optional[Callable[[Vector], float]] = None,
) -> Tuple[Optional[TraceRow], Optional[ConditionReport], float]:
    """One trial.  Returns (row, report, cxy_sq): row is None on rejection;
    cxy_sq = ||c(x^t)-y^t||^2 at the pre-step state (used by descent asserts).
    """
    beta_t = beta_at(cfg.schedule, st.t)
    beta_prev = beta_at(cfg.schedule, st.t - 1) if st.t >= 1 else cfg.schedule.beta0
    x_trial = trial_step(p, st, beta_t, st.mu)
    st.trial_count += 1
    rep = condition_check(p, st.x, x_trial, st.y, beta_t, st.mu, st.fg_x, st.c_x)
    cxy_sq = float(np.linalg.norm(st.c_x - st.y)) ** 2
    if not rep.passed:
        st.mu *= cfg.rho
        st.unsuccessful_count += 1
        st.unsuccessful_since_accept += 1
        return None, rep, cxy_sq

    mu_t = st.mu
    residual = diagnostics.stationarity_residual(
        p, st.x, x_trial, st.y, mu_t, beta_t, beta_prev
    )
    step_norm = float(np.linalg.norm(x_trial - st.x))
    prev_gap = float(np.linalg.norm(rep.c_trial - st.y))
    y_new = np.asarray(p.h.prox(rep.c_trial, 1.0 / beta_t), dtype=float)
    h_y_new = float(p.h.value(y_new))
    if h_y_new == math.inf:
        raise SolverError("h.prox returned a point outside dom h")
    gap = float(np.linalg.norm(rep.c_trial - y_new))
    H = rep.fg_trial + 0.5 * beta_t * prev_gap * prev_gap + st.h_y
    theta: Optional[float] = None
    if p.inf_fg_lower_bound is not None:
        theta = (
            (rep.fg_trial - p.inf_fg_lower_bound) / beta_t
            + 0.5 * prev_gap * prev_gap
            + st.h_y / beta_t
        )
    row = TraceRow(
        t=st.t,
        mu_t=mu_t,
        beta_t=beta_t,
        step_norm=step_norm,
        scaled_step=step_norm / mu_t,
        gap=gap,
        prev_gap=prev_gap,
        residual=residual,
        fg_value=rep.fg_trial,
        h_at_y=h_y_new,
        H_value=H,
        Theta_value=theta,
        unsuccessful_this_iter=st.unsuccessful_since_accept,
        rel_feas=None if rel_feas is None else float(rel_feas(x_trial)),
    )
    st.x = x_trial
    st.c_x = rep.c_trial
    st.grad_fx = np.asarray(p.f.grad(x_trial), dtype=float)
    st.fg_x = rep.fg_trial
    st.y = y_new
    st.h_y = h_y_new
    st.t += 1
    st.mu = min(cfg.mu_max, cfg.eta * st.mu)
    st.unsuccessful_since_accept = 0
    return row, rep, cxy_sq


def solve(
    p: Problem,
    cfg: SolverConfig,
    x0: Vector,
    y0: Vector,
    rel_feas: Optional[Callable[[Vector], float]] = None,
) -> SolveResult:
    """Run trials until the accepted-step budget, the trial budget, or (when
    both thresholds are set) scaled_step <= stop_residual and gap <= stop_gap.

    assert_level "cheap" re-asserts the acceptance margins of every accepted
    row; "full" additionally asserts the merit-function monotonicity and the
    per-step pseudo-descent inequality (requires inf_fg_lower_bound).
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if x0.size != p.n or y0.size != p.m:
        raise ValueError("x0/y0 dimensions do not match the problem")
    g0 = float(p.g.value(x0))
    if g0 == math.inf:
        raise ValueError("x0 is infeasible: g(x0) = +inf")
    h0 = float(p.h.value(y0))
    if h0 == math.inf:
        raise ValueError("y0 is infeasible: h(y0) = +inf")
    if cfg.assert_level == "full" and p.inf_fg_lower_bound is None:
        raise ValueError("assert_level='full' requires inf_fg_lower_bound")

    st = SolverState(
        t=0,
        x=x0.copy(),
        y=y0.copy(),
        mu=cfg.mu_init,
        c_x=np.asarray(p.c.value(x0), dtype=float),
        grad_fx=np.asarray(p.f.grad(x0), dtype=float),
        fg_x=float(p.f.value(x0)) + g0,
        h_y=h0,
    )
    anchors = RunAnchors(
        beta0=cfg.schedule.beta0,
        gap_x0_y0=float(np.linalg.norm(st.c_x - y0)),
        h_y0=h0,
    )

    trace: List[TraceRow] = []
    margins: List[Tuple[float, float]] = []
    status = "trial budget"
    prev_theta: Optional[float] = None
    while True:
        if len(trace) >= cfg.max_successful_iters:
            status = "iteration budget"
            break
        if st.trial_count >= cfg.max_total_trials:
            status = "trial budget"
            break
        fg_before = st.fg_x
        h_y_before = st.h_y
        beta_prev = beta_at(cfg.schedule, st.t - 1) if st.t >= 1 else cfg.schedule.beta0
        row, rep, cxy_sq = step(p, st, cfg, rel_feas)
        if row is None:
            continue
        if not all(
            math.isfinite(v)
            for v in (row.step_norm, row.gap, row.prev_gap, row.residual, row.fg_value)
        ):
            raise SolverError(f"non-finite trace quantities at t={row.t}")
        margins.append((rep.margin_i, rep.margin_ii))
        if cfg.assert_level in ("cheap", "full"):
            if rep.margin_i < -rep.tol or rep.margin_ii < -rep.tol:
                raise SolverError(f"acceptance margin violated at t={row.t}")
        if cfg.assert_level == "full":
            if prev_theta is not None and row.Theta_value is not None:
                tol = 1e-7 * (1.0 + abs(prev_theta))
                if row.Theta_value > prev_theta + tol:
                    raise SolverError(
                        f"merit nonincrease violated at t={row.t}: "
                        f"{row.Theta_value} > {prev_theta}"
                    )
            if row.t >= 1:
                h_prev = fg_before + 0.5 * beta_prev * cxy_sq + h_y_before
                bound = (
                    h_prev
                    - row.step_norm**2 / (2.0 * row.mu_t)
                    + 0.5 * (row.beta_t - beta_prev) * cxy_sq
                )
                tol = 1e-9 * (1.0 + abs(h_prev))
                if row.H_value > bound + tol:
                    raise SolverError(f"pseudo-descent violated at t={row.t}")
        prev_theta = row.Theta_value if row.Theta_value is not None else prev_theta
        trace.append(row)
        if row.t == 0:
            anchors.fg_x1 = row.fg_value
            anchors.gap_x1_y0 = row.prev_gap
        if (
            cfg.stop_residual is not None
            and cfg.stop_gap is not None
            and row.scaled_step <= cfg.stop_residual
            and row.gap <= cfg.stop_gap
        ):
            status = "converged"
            break

    return SolveResult(
        x=st.x,
        y=st.y,
        t=st.t,
        status=status,
        trace=trace,
        anchors=anchors,
        total_trials=st.trial_count,
        total_unsuccessful=st.unsuccessful_count,
        condition_margins=margins,
    )
