"""Independent verification oracles: a brute-force scalar prox minimizer,
and batch checks used by the command-line `check` subcommand and the test
suite.  Everything here deliberately avoids reusing the closed-form /
Newton machinery it is meant to validate.
"""

from __future__ import annotations

import dataclasses
import math
from typing import List, Optional, Tuple

import numpy as np

from .oracles import Problem, check_gradient, check_vjp
from .prox import LpProxParams
from .schedule import ScheduleSpec, beta_at

__all__ = [
    "scalar_prox_objective",
    "grid_prox_scalar",
    "ProxComparison",
    "verify_prox_family",
    "verify_problem_oracles",
    "verify_schedule_sandwich",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def scalar_prox_objective(u: float, z: float, params: LpProxParams) -> float:
    """(1/(2*gamma))*(z-u)^2 + alpha*|u|^p."""
    return 0.5 / params.gamma * (z - u) ** 2 + params.alpha * abs(u) ** params.p


def _golden_refine(lo: float, hi: float, fn, iters: int = 200) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if b - a < 1e-15 * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def grid_prox_scalar(z: float, params: LpProxParams, grid_points: int = 4001) -> float:
    """Brute-force minimizer of the scalar prox objective: coarse grid over
    the bracket [0, |z|] (the minimizer has the sign of z and magnitude at
    most |z|), then golden-section refinement inside the best grid cell."""
    if z == 0.0:
        return 0.0
    a = abs(z)
    grid = np.linspace(0.0, a, grid_points)
    vals = 0.5 / params.gamma * (a - grid) ** 2 + params.alpha * grid**params.p
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid_points - 1)]
    u = _golden_refine(lo, hi, lambda t: scalar_prox_objective(t, a, params))
    # the origin is always a candidate (the objective is nonsmooth there)
    if scalar_prox_objective(0.0, a, params) <= scalar_prox_objective(u, a, params):
        u = 0.0
    return math.copysign(u, z) if u != 0.0 else 0.0


@dataclasses.dataclass
class ProxComparison:
    passed: bool
    max_excess: float  # worst (candidate objective - grid objective)
    worst_case: Optional[Tuple[float, float, float, float]]  # (z, p, alpha, gamma)


def verify_prox_family(
    prox_fn,
    n_instances: int = 1000,
    seed: int = 0,
    p_choices: Tuple[float, ...] = (0.5, 0.8),
    tol: float = 1e-8,
) -> ProxComparison:
    """Check that prox_fn(z, params) never loses to the brute-force grid
    minimizer by more than tol in objective value, over random scalar
    instances with gamma log-uniform on [1e-3, 1e3]."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    max_excess = -math.inf
    worst = None
    for _ in range(n_instances):
        p = float(rng.choice(p_choices))
        gamma = float(10.0 ** rng.uniform(-3.0, 3.0))
        alpha = float(10.0 ** rng.uniform(-2.0, 1.0))
        z = float(rng.uniform(-10.0, 10.0))
        params = LpProxParams(p=p, alpha=alpha, gamma=gamma)
        u_cand = prox_fn(z, params)
        u_grid = grid_prox_scalar(z, params)
        excess = scalar_prox_objective(u_cand, z, params) - scalar_prox_objective(
            u_grid, z, params
        )
        if excess > max_excess:
            max_excess = excess
            worst = (z, p, alpha, gamma)
    return ProxComparison(passed=max_excess <= tol, max_excess=max_excess, worst_case=worst)


def verify_problem_oracles(
    problem: Problem, points: List[np.ndarray], seed: int = 0
) -> List[str]:
    """Run the finite-difference gradient and adjoint-product checks at each
    point; returns a list of failure messages (empty means all passed)."""
    failures: List[str] = []
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    for k, x in enumerate(points):
        rep = check_gradient(problem.f, x, rng=rng)
        if not rep.passed:
            failures.append(f"gradient check failed at point {k}: {rep.message}")
        rep = check_vjp(problem.c, x, rng=rng)
        if not rep.passed:
            failures.append(f"adjoint-product check failed at point {k}: {rep.message}")
    return failures


def verify_schedule_sandwich(spec: ScheduleSpec, t_max: int = 100_000) -> bool:
    """alpha0*(t+1)^delta <= beta_t <= gamma0*(t+1)^delta for t in [0, t_max]."""
    t = np.arange(t_max + 1)
    beta = np.array([beta_at(spec, t_i) for t_i in t])
    growth = (t + 1.0) ** spec.delta
    lo = spec.alpha0 * growth
    hi = spec.gamma0 * growth
    eps = 1e-12
    return bool(np.all(beta >= lo * (1.0 - eps)) and np.all(beta <= hi * (1.0 + eps)))
