"""Jump-law algebra: identities that hold for any switch-point data."""

import dataclasses

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hybridjump.errors import ContractViolation, TangentialCrossing
from hybridjump.jump import (
    SwitchPointData,
    compute_jump,
    compute_jump_tiv,
    compute_jump_tv,
    consistent_lambda_plus,
    hamiltonian_gap,
    multiplier_from_jump,
    one_sided_magnitudes,
    tangential_part,
)

coord = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def switch_data(draw, time_varying=None, consistent=False):
    """Random switch-point data with a well-conditioned crossing."""
    n = draw(st.integers(1, 3))
    v = lambda: np.array(draw(st.lists(coord, min_size=n, max_size=n)))
    m = v()
    assume(np.linalg.norm(m) > 0.1)
    if time_varying is None:
        time_varying = draw(st.booleans())
    mu = draw(coord) if time_varying else 0.0
    f_minus, f_plus, lam_minus = v(), v(), v()
    L_minus, L_plus = draw(coord), draw(coord)
    scale = (np.linalg.norm(m) + abs(mu)) * (1 + np.linalg.norm(f_minus) + np.linalg.norm(f_plus))
    for f in (f_minus, f_plus, 0.5 * (f_minus + f_plus)):
        assume(abs(m @ f + mu) > 0.05 * scale)
    d = SwitchPointData(
        x_s=v(), tau=draw(st.floats(0.1, 2.0)), u_minus=np.zeros(1), u_plus=np.zeros(1),
        lambda_minus=lam_minus, lambda_plus=v(), f_minus=f_minus, f_plus=f_plus,
        L_minus=L_minus, L_plus=L_plus, m=m, mu=mu,
    )
    if consistent:
        d = dataclasses.replace(d, lambda_plus=consistent_lambda_plus(d))
    return d


@settings(max_examples=1000, deadline=None)
@given(switch_data(consistent=True))
def test_round_trip_gap_vanishes_at_consistent_data(d):
    scale = 1 + abs(d.L_minus) + abs(d.L_plus) + np.abs(d.lambda_minus).max() * (np.abs(d.f_minus).max() + np.abs(d.f_plus).max())
    assert abs(hamiltonian_gap(None, d)) <= 1e-10 * scale
    # the averaged form reproduces the jump that made the data consistent
    np.testing.assert_allclose(compute_jump(d).delta_lambda, d.delta_lambda, atol=1e-9 * scale)


@settings(max_examples=300, deadline=None)
@given(switch_data(consistent=True))
def test_one_sided_forms_agree_at_consistent_data(d):
    a, b = one_sided_magnitudes(d)
    nu = compute_jump(d).magnitude_nu
    assert a == pytest.approx(nu, rel=1e-8, abs=1e-9)
    assert b == pytest.approx(nu, rel=1e-8, abs=1e-9)
    assert multiplier_from_jump(d) == pytest.approx(nu, rel=1e-8, abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(switch_data(), st.floats(0.1, 10.0), st.booleans())
def test_scaling_the_interface_leaves_the_jump_unchanged(d, c, flip):
    c = -c if flip else c
    scaled = dataclasses.replace(d, m=c * d.m, mu=c * d.mu)
    np.testing.assert_allclose(compute_jump(scaled).delta_lambda, compute_jump(d).delta_lambda, rtol=1e-9, atol=1e-10)


@settings(max_examples=300, deadline=None)
@given(switch_data())
def test_mode_swap_negates_the_jump(d):
    np.testing.assert_allclose(compute_jump(d.swapped()).delta_lambda, -compute_jump(d).delta_lambda, rtol=1e-12, atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(switch_data(time_varying=False))
def test_moving_law_reduces_to_fixed_law_at_zero_mu(d):
    a, b = compute_jump_tv(d), compute_jump_tiv(d)
    np.testing.assert_array_equal(a.delta_lambda, b.delta_lambda)
    assert a.magnitude_nu == b.magnitude_nu


@settings(max_examples=300, deadline=None)
@given(switch_data())
def test_jump_is_parallel_to_normal(d):
    dl = compute_jump(d).delta_lambda
    assert np.linalg.norm(tangential_part(dl, d.m)) <= 1e-12 * (1 + np.linalg.norm(dl))


@settings(max_examples=200, deadline=None)
@given(switch_data())
def test_identical_modes_give_zero_jump(d):
    same = dataclasses.replace(d, f_plus=d.f_minus, L_plus=d.L_minus)
    np.testing.assert_array_equal(compute_jump(same).delta_lambda, np.zeros_like(d.m))


def _planar(f_minus, f_plus, mu=0.0):
    return SwitchPointData(
        x_s=[1.0, 0.0], tau=0.5, u_minus=[0.0], u_plus=[0.0], lambda_minus=[0.3, -0.2], lambda_plus=[0.1, 0.4],
        f_minus=f_minus, f_plus=f_plus, L_minus=1.0, L_plus=2.0, m=[2.0, 0.0], mu=mu,
    )


def test_tangential_crossing_raises():
    # both vector fields point along the circle's tangent at (1, 0)
    with pytest.raises(TangentialCrossing) as err:
        compute_jump(_planar([0.0, 1.0], [0.0, -2.0]))
    assert err.value.denominator == 0.0


def test_moving_interface_can_restore_transversality():
    d = _planar([0.0, 1.0], [0.0, -2.0], mu=1.0)
    assert np.all(np.isfinite(compute_jump(d).delta_lambda))


def test_hand_computed_jump():
    # dL = 1, <lam> = (0.2, 0.1), df = (1, 0) -> D = 1.2; <f> = (0.5, 0), den = 2 * 0.5 = 1
    d = _planar([0.0, 0.0], [1.0, 0.0])
    j = compute_jump(d)
    assert j.magnitude_nu == pytest.approx(1.2)
    np.testing.assert_allclose(j.delta_lambda, [-2.4, 0.0])


def test_fixed_law_rejects_moving_interface():
    with pytest.raises(ContractViolation):
        compute_jump_tiv(_planar([1.0, 0.0], [1.0, 0.0], mu=0.5))


def test_switch_data_validation():
    with pytest.raises(ContractViolation):
        dataclasses.replace(_planar([1.0, 0.0], [1.0, 0.0]), m=[0.0, 0.0])
    with pytest.raises(ContractViolation):
        dataclasses.replace(_planar([1.0, 0.0], [1.0, 0.0]), L_plus=float("nan"))


def test_augmented_gap_uses_observed_multiplier():
    d = _planar([1.0, 0.0], [2.0, 0.0], mu=0.5)
    h_minus = d.L_minus + d.lambda_minus @ d.f_minus
    h_plus = d.L_plus + d.lambda_plus @ d.f_plus
    assert hamiltonian_gap(None, d) == pytest.approx(h_plus - h_minus - multiplier_from_jump(d) * 0.5)
