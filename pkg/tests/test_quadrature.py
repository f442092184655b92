import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfns.quadrature import MAX_DEGREE, triangle_rule
from surfns.reference import lagrange_basis


def monomial_integral(a, b):
    # int over reference triangle of x^a y^b = a! b! / (a+b+2)!
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def test_degree_one_is_midpoint_rule():
    r = triangle_rule(1)
    assert r.points.shape == (1, 2)
    assert np.allclose(r.points[0], [1 / 3, 1 / 3])
    assert r.weights[0] == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5, 6, 7, 8, 10, 12])
def test_monomial_exactness(degree):
    r = triangle_rule(degree)
    assert r.weights.sum() == pytest.approx(0.5, abs=1e-14)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            val = np.sum(r.weights * r.points[:, 0] ** a * r.points[:, 1] ** b)
            assert val == pytest.approx(monomial_integral(a, b), abs=1e-14)


def test_degree_beyond_table_rejected():
    with pytest.raises(ValueError):
        triangle_rule(MAX_DEGREE + 1)
    with pytest.raises(ValueError):
        triangle_rule(-1)


@given(st.integers(min_value=1, max_value=3), st.integers(min_value=2, max_value=8))
@settings(max_examples=20, deadline=None)
def test_partition_of_unity_at_quadrature_points(k, degree):
    basis = lagrange_basis(k)
    r = triangle_rule(degree)
    vals = basis.eval(r.points)
    assert np.abs(vals.sum(axis=1) - 1.0).max() < 1e-13
    grads = basis.grad(r.points)
    assert np.abs(grads.sum(axis=1)).max() < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_lagrange_property(k):
    basis = lagrange_basis(k)
    vals = basis.eval(basis.nodes)
    assert np.abs(vals - np.eye(basis.n_basis)).max() < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_basis_reproduces_polynomials(k):
    basis = lagrange_basis(k)
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 0.5, size=(20, 2))

    def poly(p):
        return 1.0 + 2 * p[:, 0] - p[:, 1] + (p[:, 0] * p[:, 1] if k >= 2 else 0) + (p[:, 0] ** k)

    coeffs = poly(basis.nodes)
    assert np.abs(basis.eval(pts) @ coeffs - poly(pts)).max() < 1e-12


def test_hessian_matches_fd():
    basis = lagrange_basis(3)
    rng = np.random.default_rng(2)
    pts = rng.uniform(0.05, 0.4, size=(5, 2))
    eps = 1e-6
    H = basis.hess(pts)
    for d in range(2):
        dp = np.zeros(2)
        dp[d] = eps
        fd = (basis.grad(pts + dp) - basis.grad(pts - dp)) / (2 * eps)
        assert np.abs(H[..., d] - fd).max() < 1e-6
