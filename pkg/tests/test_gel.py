"""Switching-time Newton iteration."""

import dataclasses

import numpy as np
import pytest

import hybridjump.gel as gel_mod
from conftest import gel_result, problem
from hybridjump.bvp import BvpGuess, Formulation
from hybridjump.errors import ContractViolation, DerivativeVanished
from hybridjump.gel import GelConfig, StopReason, absolute_error, residual_F, solve_gel

FORMS = list(Formulation)


@pytest.mark.parametrize("form", FORMS)
def test_converges_on_every_registry_problem(problem_name, form):
    res = gel_result(problem_name, form)
    assert res.converged
    assert res.trace.stop_reason in (StopReason.RESIDUAL_BELOW_TOL, StopReason.STEP_BELOW_TOL)
    assert res.iterations <= 8
    assert res.solution.residual_norm <= 1e-9


@pytest.mark.parametrize("form", FORMS)
def test_residual_shrinks_along_accepted_steps(problem_name, form):
    F = [abs(r.F) for r in gel_result(problem_name, form).trace.records]
    assert all(b < a for a, b in zip(F, F[1:]))


@pytest.mark.parametrize("form", FORMS)
def test_fixed_point_satisfies_the_other_held_out_condition(problem_name, form):
    # each formulation's root must also be a root of the other one
    other = FORMS[1] if form is FORMS[0] else FORMS[0]
    res = gel_result(problem_name, form)
    p = problem(problem_name)
    F, _ = residual_F(p, res.tau_star, other, guess=BvpGuess.warm_start(res.solution))
    assert abs(F) <= 10 * GelConfig().tol


def test_residual_changes_sign_across_the_circle_optimum():
    p = problem("circle-tiv")
    lo, _ = residual_F(p, 0.5)
    hi, _ = residual_F(p, 1.2)
    assert lo * hi < 0


def test_trace_records_switching_times():
    res = gel_result("ex2-linear-terminal")
    taus = res.trace.taus()
    assert taus[0] == pytest.approx(1.5)
    assert taus[-1] == pytest.approx(res.tau_star)
    for r in res.trace.records[:-1]:
        assert r.dF is not None and np.isfinite(r.dF)


def test_interface_form_probes_past_an_unsolvable_start():
    # at tau0 = 0.5 the interface inner problem of ex3 has no solution
    res = gel_result("ex3-bilinear-tv", Formulation.INTERFACE)
    assert 0.5 in res.trace.failed_starts
    assert res.converged


def test_iteration_budget_stops_with_best_iterate():
    p = problem("ex1-scalar-tv")
    res = solve_gel(p, GelConfig(max_iters=1))
    assert res.trace.stop_reason is StopReason.MAX_ITERS
    assert not res.converged
    assert abs(res.F_star) <= abs(res.trace.records[0].F)


def test_flat_residual_raises(monkeypatch):
    monkeypatch.setattr(gel_mod, "held_out_residual", lambda p, sol, form: 0.25)
    with pytest.raises(DerivativeVanished) as err:
        solve_gel(problem("circle-tiv"))
    assert err.value.trace is not None


def test_damped_steps_still_converge():
    res = solve_gel(problem("circle-tiv"), GelConfig(tau0=0.6, alpha=0.5, max_iters=60))
    assert res.converged
    assert absolute_error(res.tau_star, gel_result("circle-tiv").tau_star) <= 1e-3


def _errors(res):
    return [abs(t - res.tau_star) for t in res.trace.taus()]


def test_contraction_constant_over_last_two_steps_is_finite():
    res = solve_gel(problem("circle-tiv"), GelConfig(tol=1e-8, max_iters=40))
    e = [v for v in _errors(res) if v > 0]
    near = [k for k in range(len(e) - 1) if e[k] < 0.05]
    C = [e[k + 1] / e[k] ** 2 for k in near[-2:]]
    assert len(C) == 2 and all(np.isfinite(C))


def test_fixed_perturbation_gives_linear_rate():
    # the forward-difference slope uses delta_tau = 0.1 regardless of the error,
    # so the error shrinks by a roughly constant factor rather than squaring
    res = solve_gel(problem("circle-tiv"), GelConfig(tol=1e-8, max_iters=40))
    e = [v for v in _errors(res) if v > 0]
    ratios = np.array(e[3:-1]) / np.array(e[2:-2])
    assert np.all((ratios > 0.1) & (ratios < 0.4))


@pytest.mark.parametrize(
    "kwargs", [dict(tol=0.0), dict(delta_tau=-0.1), dict(alpha=1.5), dict(alpha=0.0), dict(max_iters=0)]
)
def test_config_validation(kwargs):
    with pytest.raises(ContractViolation):
        GelConfig(**kwargs)


def test_formulation_accepts_string_values():
    cfg = dataclasses.replace(GelConfig(), formulation="interface")
    assert cfg.formulation is Formulation.INTERFACE


def test_absolute_error():
    assert absolute_error(0.7495, 0.7495) == 0.0
    assert absolute_error(0.7230, 0.7495) == pytest.approx(0.0265)
    assert absolute_error(1.0004, 1.0000) == pytest.approx(4e-4)


@pytest.mark.parametrize("name", ["ex1-scalar-tv", "ex2-linear-terminal", "ex3-bilinear-tv"])
def test_examples_need_few_updates_and_no_backtracking(name):
    res = gel_result(name)
    assert res.iterations <= 5
    assert all(r.backtracks == 0 for r in res.trace.records)


def test_start_near_the_horizon_shrinks_the_perturbation():
    p = problem("circle-tiv")
    res = solve_gel(p, GelConfig(tau0=1.95))
    assert res.converged
    assert absolute_error(res.tau_star, gel_result("circle-tiv").tau_star) <= 1e-3
