import numpy as np
import pytest

from hybridjump.errors import ContractViolation, NumericalBlowup, StepBudgetExceeded
from hybridjump.integrate import IntegratorConfig, OdeTrajectory, hermite, integrate, propagate


def growth(y, t):
    return y


def test_rkf45_exponential_relative_error():
    traj = integrate(growth, [1.0], 0.0, 1.0)
    assert abs(traj.values[-1, 0] / np.e - 1.0) <= 1e-8


def test_rk4_fourth_order_convergence():
    errs = []
    for steps in (10, 20, 40):
        y = propagate(growth, np.ones((1, 1)), 0.0, 1.0, IntegratorConfig(method="rk4"), steps=steps).y_end
        errs.append(abs(y[0, 0] - np.e))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 3.8)


@pytest.mark.parametrize("method", ["rk4", "rkf45"])
def test_exact_on_linear_in_time_solution(method):
    # y1' = 2 y2, y2' = 0 from (0, 1): y = (2t, 1)
    rhs = lambda y, t: np.stack([2 * y[..., 1], np.zeros_like(y[..., 1])], axis=-1)
    traj = integrate(rhs, [0.0, 1.0], 0.0, 1.0, IntegratorConfig(method=method))
    np.testing.assert_allclose(traj.values[-1], [2.0, 1.0], rtol=0, atol=1e-14)


def test_batch_rows_with_different_spans():
    y0 = np.ones((3, 1))
    out = propagate(growth, y0, 0.0, np.array([0.5, 1.0, 2.0]))
    np.testing.assert_allclose(out.y_end[:, 0], np.exp([0.5, 1.0, 2.0]), rtol=1e-8)


def test_time_dependent_rhs_sees_physical_time():
    rhs = lambda y, t: np.cos(t)[:, None] * np.ones_like(y)
    out = propagate(rhs, np.zeros((2, 1)), np.array([0.0, 1.0]), np.array([1.0, 3.0]))
    np.testing.assert_allclose(out.y_end[:, 0], [np.sin(1.0), np.sin(3.0) - np.sin(1.0)], atol=1e-9)


def test_schedule_replay_reproduces_adaptive_result():
    y0 = np.array([[1.0, 0.0]])
    rhs = lambda y, t: np.stack([y[..., 1], -y[..., 0]], axis=-1)
    first = propagate(rhs, y0, 0.0, 3.0)
    again = propagate(rhs, y0, 0.0, 3.0, schedule=first.nodes)
    np.testing.assert_allclose(first.y_end, again.y_end, rtol=1e-13, atol=1e-15)


def test_replay_is_smooth_in_initial_state():
    rhs = lambda y, t: -y**3
    base = propagate(rhs, np.array([[1.0]]), 0.0, 1.0)
    eps = np.array([1e-7, 2e-7, 3e-7])
    ends = [propagate(rhs, np.array([[1.0 + e]]), 0.0, 1.0, schedule=base.nodes).y_end[0, 0] for e in eps]
    # equally spaced perturbations give equally spaced outputs to rounding
    assert abs((ends[2] - ends[1]) - (ends[1] - ends[0])) < 1e-13


def test_hermite_exact_at_samples_and_cubic():
    times = np.array([0.0, 0.5, 1.5, 2.0])
    vals = (times**3)[:, None]
    ders = (3 * times**2)[:, None]
    np.testing.assert_array_equal(hermite(times, vals, ders, times), vals)
    t = np.linspace(0, 2, 17)
    np.testing.assert_allclose(hermite(times, vals, ders, t)[:, 0], t**3, atol=1e-12)


def test_trajectory_call_without_derivatives_interpolates_linearly():
    traj = OdeTrajectory(np.array([0.0, 1.0]), np.array([[0.0], [2.0]]))
    assert traj(0.25)[0] == pytest.approx(0.5)


def test_output_grid_contains_endpoints():
    traj = integrate(growth, [1.0], 0.0, 1.0, output_grid=[0.25, 0.5])
    np.testing.assert_allclose(traj.times, [0.0, 0.25, 0.5, 1.0])
    np.testing.assert_allclose(traj.values[:, 0], np.exp(traj.times), rtol=1e-8)


def test_blowup_reports_time():
    rhs = lambda y, t: y**2
    with pytest.raises(NumericalBlowup) as err:
        integrate(rhs, [1.0], 0.0, 2.0)
    assert 0.9 < err.value.t < 1.1


def test_blowup_tolerated_when_unchecked():
    rhs = lambda y, t: y**2
    with np.errstate(all="ignore"):
        out = propagate(rhs, np.array([[1.0], [0.1]]), 0.0, 2.0, IntegratorConfig(method="rk4"), steps=100, check_finite=False)
    assert not np.isfinite(out.y_end[0, 0])
    assert out.y_end[1, 0] == pytest.approx(0.1 / (1 - 0.2), rel=1e-6)


def test_step_budget():
    with pytest.raises(StepBudgetExceeded):
        integrate(lambda y, t: np.cos(50 * t)[:, None] * np.ones_like(y), [0.0], 0.0, 10.0, IntegratorConfig(max_steps=5))


@pytest.mark.parametrize(
    "kwargs", [dict(method="euler"), dict(fixed_steps_per_unit_time=10), dict(rel_tol=0.0), dict(max_steps=0)]
)
def test_config_validation(kwargs):
    with pytest.raises(ContractViolation):
        IntegratorConfig(**kwargs)


def test_reversed_interval_rejected():
    with pytest.raises(ContractViolation):
        integrate(growth, [1.0], 1.0, 0.0)
