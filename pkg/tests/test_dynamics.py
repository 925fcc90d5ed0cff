import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubeltl.dynamics import ConstraintViolation, LtiModel, accumulated_disturbance_support, discretize_zoh
from tubeltl.geometry import Polytope, regular_polygon, support

from oracles import taylor_expm

AC = np.array([[0.2, -0.3], [0.5, -0.5]])
U6 = Polytope.box([-6, -6], [6, 6])
W01 = Polytope.box([-0.1, -0.1], [0.1, 0.1])


def model(A=None, B=None, U=U6, W=W01):
    return LtiModel(np.eye(2) if A is None else A, np.eye(2) if B is None else B, U, W)


def test_step_identity():
    np.testing.assert_allclose(model().step([1, 0], [0, 1], [0, 0]), [1, 1])


def test_step_zero_dynamics():
    np.testing.assert_array_equal(model(A=np.zeros((2, 2))).step([3, -2], [0, 0]), [0, 0])


def test_step_rejects_input_outside_u():
    with pytest.raises(ConstraintViolation, match="U"):
        model().step([0, 0], [7, 0])


def test_step_rejects_disturbance_outside_w():
    with pytest.raises(ConstraintViolation, match="W"):
        model().step([0, 0], [0, 0], [0.2, 0])


def test_u_must_contain_origin():
    with pytest.raises(ValueError):
        model(U=Polytope.box([0.5, 0.5], [1, 1]))


def test_zero_disturbance_set_allowed():
    m = model(W=Polytope.singleton([0, 0]))
    assert m.accumulated_disturbance_support(5, [1, 0]) == 0.0


def test_zoh_pure_integrator():
    A, B = discretize_zoh(np.zeros((2, 2)), np.eye(2), 0.05)
    np.testing.assert_allclose(A, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(B, 0.05 * np.eye(2), atol=1e-15)


def test_zoh_case_study_matches_series_oracle():
    h = 0.05
    A, B = discretize_zoh(AC, np.eye(2), h)
    np.testing.assert_allclose(A, taylor_expm(h * AC), atol=1e-10)
    # integral of exp(Ac s) from 0 to h by the same series, term by term
    integral = np.zeros((2, 2))
    term = np.eye(2) * h
    for k in range(1, 40):
        integral += term
        term = term @ AC * h / (k + 1)
    np.testing.assert_allclose(B, integral, atol=1e-12)
    second = np.eye(2) + h * AC + h**2 / 2 * AC @ AC
    np.testing.assert_allclose(A, second, atol=1e-4)


def test_zoh_diagonal():
    a = np.array([-1.3, 0.7])
    A, _ = discretize_zoh(np.diag(a), np.eye(2), 0.3)
    np.testing.assert_allclose(A, np.diag(np.exp(0.3 * a)), atol=1e-13)


def test_zoh_large_norm_uses_squaring():
    M = np.array([[0.0, 4.0], [-4.0, 0.0]])
    A, _ = discretize_zoh(M, np.eye(2), 1.0)
    rot = np.array([[np.cos(4), np.sin(4)], [-np.sin(4), np.cos(4)]])
    np.testing.assert_allclose(A, rot, atol=1e-12)


def test_zoh_small_step_limit():
    A, B = discretize_zoh(AC, np.eye(2), 1e-6)
    np.testing.assert_allclose(A, np.eye(2), atol=1e-5)
    np.testing.assert_allclose(B, np.zeros((2, 2)), atol=1e-5)


def test_zoh_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        discretize_zoh(AC, np.eye(2), 0.0)


def test_accumulated_support_examples():
    m = model()
    assert accumulated_disturbance_support(m, 0, [1, 0]) == 0.0
    assert accumulated_disturbance_support(m, 3, [1, 0]) == pytest.approx(0.3)
    W8 = regular_polygon(0.15, 8)
    m8 = model(A=discretize_zoh(AC, np.eye(2), 0.05)[0], W=W8)
    d = np.array([0.6, -0.8])
    assert m8.accumulated_disturbance_support(1, d) == support(W8, d)


def test_accumulated_support_matches_explicit_sum():
    A = discretize_zoh(AC, np.eye(2), 0.05)[0]
    W = regular_polygon(0.15, 8)
    m = model(A=A, W=W)
    d = np.array([1.0, 2.0])
    expect = sum(support(W, np.linalg.matrix_power(A.T, j) @ d) for j in range(7))
    assert m.accumulated_disturbance_support(7, d) == pytest.approx(expect, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 25))
def test_accumulated_support_monotone(d0, d1, ell):
    A = discretize_zoh(AC, np.eye(2), 0.05)[0]
    m = model(A=A, W=regular_polygon(0.15, 8))
    d = [d0, d1]
    assert m.accumulated_disturbance_support(ell + 1, d) >= m.accumulated_disturbance_support(ell, d) - 1e-15


@settings(max_examples=40, deadline=None)
@given(*[st.floats(-2, 2)] * 8)
def test_step_is_linear(a, b, c, d, e, f, g, h):
    A = discretize_zoh(AC, np.eye(2), 0.05)[0]
    m = model(A=A)
    x1, x2, u1, u2 = np.array([a, b]), np.array([c, d]), np.array([e, f]), np.array([g, h])
    lhs = m.step(x1 + x2, u1 + u2)
    np.testing.assert_allclose(lhs, m.step(x1, u1) + m.step(x2, u2), atol=1e-12)
