import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdcam.diagnostics import (
    H_value,
    certificate,
    rate_bound_check,
    rate_constants,
    select_subsequence,
    stationarity_residual,
    suggest_delta,
    theta_value,
)
from sdcam.oracles import MapOracle, Problem, ProxOracle, SmoothOracle
from sdcam.schedule import ScheduleSpec
from sdcam.solver import SolverConfig, solve
from sdcam.problems import (
    mlp_generate,
    mlp_problem,
    mlp_initial_point,
    mlp_sup_abs_fg,
    qcqp_generate,
    qcqp_initial_point,
    qcqp_problem,
)


# --- subsequence selection ---------------------------------------------------


def test_select_subsequence_enumerated_example():
    # running averages of (4,2,3,1): 4, 3, 3, 2.5 -> dips at T = 2, 3, 4
    assert select_subsequence([4.0, 2.0, 3.0, 1.0]) == [2, 3, 4]


def test_select_subsequence_monotone_increasing_is_empty():
    assert select_subsequence([1.0, 2.0, 3.0]) == []


def test_select_subsequence_constant_selects_everything():
    assert select_subsequence([5.0] * 6) == [2, 3, 4, 5, 6]


def test_select_subsequence_empty_raises():
    with pytest.raises(ValueError):
        select_subsequence([])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=60))
def test_select_subsequence_certifies_dip(a):
    arr = np.asarray(a)
    b = np.cumsum(arr) / np.arange(1, arr.size + 1)
    for T in select_subsequence(a):
        # b_T <= b_{T-1} is equivalent to a_T <= b_{T-1}
        assert arr[T - 1] <= b[T - 2] + 1e-9 * (1.0 + abs(b[T - 2]))


# --- suggest_delta -----------------------------------------------------------


def test_suggest_delta_equal_tolerances_is_exactly_one_third():
    assert suggest_delta(1e-3, 1e-3) == 1.0 / 3.0
    assert suggest_delta(0.123, 0.123) == 1.0 / 3.0


def test_suggest_delta_formula():
    eps1, eps2 = 1e-2, 1e-4
    expected = math.log(1e4) / (2 * math.log(1e2) + math.log(1e4))
    assert suggest_delta(eps1, eps2) == pytest.approx(expected)


def test_suggest_delta_domain():
    for bad in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ValueError):
            suggest_delta(bad, 0.5)
        with pytest.raises(ValueError):
            suggest_delta(0.5, bad)


def test_suggest_delta_in_open_interval():
    rng = np.random.default_rng(0)
    for _ in range(100):
        e1, e2 = 10.0 ** rng.uniform(-8, -0.01, 2)
        assert 0.0 < suggest_delta(float(e1), float(e2)) < 1.0


# --- residual and merit values ----------------------------------------------


def _linear_problem():
    f = SmoothOracle(value=lambda x: float(0.5 * x @ x), grad=lambda x: x)
    free = ProxOracle(value=lambda x: 0.0, prox=lambda z, g: np.asarray(z, dtype=float))
    c = MapOracle(value=lambda x: x.copy(), vjp=lambda x, w: np.asarray(w, dtype=float))
    return Problem(f=f, g=free, h=free, c=c, n=2, m=2, inf_fg_lower_bound=0.0)


def test_stationarity_residual_zero_at_consistent_fixed_point():
    # at x_t = x_next = y_t = 0 all witness terms vanish
    p = _linear_problem()
    r = stationarity_residual(p, np.zeros(2), np.zeros(2), np.zeros(2), 1.0, 2.0, 1.0)
    assert r == pytest.approx(0.0, abs=1e-15)


def test_stationarity_residual_matches_independent_assembly():
    # recompute psi and xi with explicit dense algebra on a QCQP step
    inst = qcqp_generate(5, n=4, m=2)
    p = qcqp_problem(inst)
    rng = np.random.default_rng(1)
    x_t = np.clip(rng.standard_normal(4) * 0.1, -inst.r, inst.r)
    x_next = np.clip(x_t + 0.01 * rng.standard_normal(4), -inst.r, inst.r)
    y_t = -np.abs(rng.standard_normal(2))
    mu_t, beta_t, beta_prev = 0.3, 2.0, 1.5

    def grad_f(x):
        return inst.Q0 @ x + inst.b0

    def c_val(x):
        return 0.5 * np.einsum("ijk,j,k->i", inst.Q, x, x) + inst.ri

    def jac_T(x, w):
        return np.einsum("i,ijk,k->j", w, inst.Q, x)

    d = c_val(x_t) - y_t
    psi = -grad_f(x_t) - beta_t * jac_T(x_t, d) - (2.0 / mu_t) * (x_next - x_t)
    xi = beta_prev * d
    expected = np.linalg.norm(grad_f(x_next) + psi + jac_T(x_t, xi))
    got = stationarity_residual(p, x_t, x_next, y_t, mu_t, beta_t, beta_prev)
    assert got == pytest.approx(float(expected), rel=1e-12)


def test_certificate_report():
    p = _linear_problem()
    x = np.zeros(2)
    rep = certificate(p, x, x, x, psi=-x, xi=np.zeros(2), eps1=1e-9, eps2=1e-9, eps3=1e-9)
    assert rep.passed
    rep2 = certificate(
        p, np.ones(2), np.zeros(2), np.ones(2), psi=np.zeros(2), xi=np.zeros(2),
        eps1=1e-9, eps2=1e-9, eps3=1e-9,
    )
    assert not rep2.passed
    assert rep2.d2 == pytest.approx(math.sqrt(2.0))


def test_H_and_theta_values_and_domain_errors():
    p = _linear_problem()
    x = np.array([1.0, 0.0])
    y = np.array([0.0, 0.0])
    assert H_value(p, x, 2.0, y) == pytest.approx(0.5 + 1.0)
    assert theta_value(p, x, 2.0, y, 0.0) == pytest.approx(0.25 + 0.5)
    box = ProxOracle(
        value=lambda v: 0.0 if np.all(np.abs(v) <= 0.5) else math.inf,
        prox=lambda z, g: np.clip(z, -0.5, 0.5),
    )
    p_box = Problem(f=p.f, g=box, h=p.h, c=p.c, n=2, m=2)
    with pytest.raises(ValueError):
        H_value(p_box, x, 2.0, y)
    with pytest.raises(ValueError):
        theta_value(p_box, x, 2.0, y, 0.0)


# --- rate constants and bound checks ------------------------------------------


def _qcqp_run(iters=200, delta=0.3):
    inst = qcqp_generate(1, n=10, m=3)
    prob = qcqp_problem(inst)
    x0, y0 = qcqp_initial_point(inst)
    cfg = SolverConfig(
        mu_max=1e7, mu_init=1.0, rho=0.8, eta=1.2,
        schedule=ScheduleSpec(family="power", beta0=1.0, delta=delta),
        max_successful_iters=iters, max_total_trials=100 * iters,
    )
    res = solve(prob, cfg, x0, y0)
    return prob, cfg, res


def test_rate_constants_provenance_qcqp():
    prob, cfg, res = _qcqp_run()
    rc = rate_constants(prob, cfg.schedule, res.anchors, rho=cfg.rho, mu_max=cfg.mu_max)
    for name in ("M0", "M1", "L", "L_c", "M_c", "lambda5", "lambda6", "lambda7", "lambda8"):
        assert getattr(rc, name) is not None, name
    assert rc.provenance["M0"] == "computed"
    assert rc.provenance["L"] == "user_supplied"
    # no h-Lipschitz constant and no sup bounds for this family
    assert rc.K0 is None
    assert rc.M3 is None
    assert rc.provenance["M3"] == "unavailable"


def test_rate_bound_check_bounded_domains_passes():
    prob, cfg, res = _qcqp_run()
    rc = rate_constants(prob, cfg.schedule, res.anchors, rho=cfg.rho, mu_max=cfg.mu_max)
    rep = rate_bound_check(res.trace, rc, "bounded_domains")
    assert rep.checkable
    assert rep.passed
    assert rep.violations == []
    assert rep.skipped == []


def test_rate_bound_check_detects_wrong_constant():
    prob, cfg, res = _qcqp_run()
    rc = rate_constants(prob, cfg.schedule, res.anchors, rho=cfg.rho, mu_max=cfg.mu_max)
    rc.M1 = rc.M1 * 1e-9  # deliberately wrong: bound must now be violated
    rc.M0 = rc.M0 * 1e-9
    rc.lambda5 = rc.lambda5 * 1e-9
    rep = rate_bound_check(res.trace, rc, "bounded_domains")
    assert not rep.passed
    assert rep.violations


def test_rate_bound_check_unknown_regime():
    prob, cfg, res = _qcqp_run(iters=5)
    rc = rate_constants(prob, cfg.schedule, res.anchors)
    with pytest.raises(ValueError):
        rate_bound_check(res.trace, rc, "exotic")


def test_rate_bound_check_skips_without_guessing():
    # the MLP family has no Jacobian constants; curvature-dependent
    # inequalities must be skipped and reported, not guessed
    inst = mlp_generate(0, layer_dims=(6, 4, 1), n_samples=20)
    prob = mlp_problem(inst)
    x0, y0 = mlp_initial_point(inst)
    cfg = SolverConfig(
        mu_max=1e7, mu_init=0.01, rho=0.5, eta=2.0,
        schedule=ScheduleSpec(family="power", beta0=1.0, delta=0.5),
        max_successful_iters=100, max_total_trials=10_000,
    )
    res = solve(prob, cfg, x0, y0)
    rc = rate_constants(
        prob, cfg.schedule, res.anchors, rho=cfg.rho, mu_max=cfg.mu_max,
        sup_abs_fg_bound=mlp_sup_abs_fg(inst),
    )
    rep = rate_bound_check(res.trace, rc, "full_domain_h")
    assert rep.checkable
    assert rep.passed
    assert "mu_floor" in rep.skipped
    assert "L_c" in rep.missing
    # the inequalities that only need M1/M2/M3 must have been checked
    assert rep.checked > 0
