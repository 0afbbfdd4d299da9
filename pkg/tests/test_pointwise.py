import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from covol.errors import DomainError
from covol.ratefn.ldp import legendre_numeric
from covol.ratefn.pointwise import (
    cgf_gradient,
    cgf_hessian,
    cgf_hessian_at_zero,
    cgf_pointwise,
    domain_margin,
    in_cone,
    in_domain,
    legendre_argmax,
    legendre_pointwise,
    recession,
)


def mc_cgf(lam, c, size=2_000_000, seed=0):
    """Monte Carlo oracle for log E exp(lam1 xi^2 + lam2 xi'^2 + lam3 xi xi')."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((size, 2))
    xi = z[:, 0]
    xj = c * z[:, 0] + np.sqrt(1 - c * c) * z[:, 1]
    return np.log(np.mean(np.exp(lam[0] * xi**2 + lam[1] * xj**2 + lam[2] * xi * xj)))


def gauss_cgf(lam, c):
    """Independent oracle: -1/2 log det(I - 2 L C) for the 2x2 Gaussian quadratic form."""
    L = np.array([[lam[0], lam[2] / 2], [lam[2] / 2, lam[1]]])
    C = np.array([[1.0, c], [c, 1.0]])
    return -0.5 * np.log(np.linalg.det(np.eye(2) - 2 * L @ C))


def test_zero():
    assert cgf_pointwise([0.0, 0.0, 0.0], 0.3) == pytest.approx(0.0, abs=1e-15)


def test_independent_value():
    assert cgf_pointwise([0.25, 0.0, 0.0], 0.0) == pytest.approx(0.5 * np.log(2), abs=1e-15)


@pytest.mark.parametrize("c", [-0.7, 0.0, 0.4])
def test_against_determinant_oracle(c):
    rng = np.random.default_rng(1)
    for _ in range(50):
        lam = rng.uniform(-1, 0.2, 3)
        assume_ok = np.all(np.linalg.eigvals(np.eye(2) - 2 * np.array([[lam[0], lam[2] / 2], [lam[2] / 2, lam[1]]]) @ np.array([[1, c], [c, 1]])).real > 0)
        if assume_ok and in_domain(lam, c):
            assert cgf_pointwise(lam, c) == pytest.approx(gauss_cgf(lam, c), abs=1e-12)


def test_against_monte_carlo():
    lam, c = np.array([0.1, 0.05, -0.1]), 0.5
    assert cgf_pointwise(lam, c) == pytest.approx(mc_cgf(lam, c), abs=5e-3)


def test_outside_domain_is_inf():
    assert cgf_pointwise([0.5, 0.0, 0.0], 0.0) == np.inf
    assert not in_domain([0.5, 0.0, 0.0], 0.0)
    assert domain_margin([0.5, 0.0, 0.0], 0.0) <= 0


def test_bad_correlation():
    with pytest.raises(DomainError):
        cgf_pointwise([0, 0, 0], 1.0)


def test_gradient_at_zero_is_mean():
    np.testing.assert_allclose(cgf_gradient([0.0, 0.0, 0.0], 0.3), [1.0, 1.0, 0.3], atol=1e-15)


def test_hessian_at_zero():
    c = 0.3
    np.testing.assert_allclose(cgf_hessian([0.0, 0.0, 0.0], c), cgf_hessian_at_zero(c), atol=1e-14)
    np.testing.assert_allclose(
        cgf_hessian_at_zero(c), [[2, 0.18, 0.6], [0.18, 2, 0.6], [0.6, 0.6, 1.09]], atol=1e-15
    )


def test_hessian_matches_sample_covariance():
    c, size = -0.4, 1_000_000
    rng = np.random.default_rng(2)
    z = rng.standard_normal((size, 2))
    xi, xj = z[:, 0], c * z[:, 0] + np.sqrt(1 - c * c) * z[:, 1]
    cov = np.cov(np.stack([xi**2, xj**2, xi * xj]))
    np.testing.assert_allclose(cov, cgf_hessian_at_zero(c), atol=0.02)


def test_gradient_outside_domain_raises():
    with pytest.raises(DomainError):
        cgf_gradient([1.0, 0.0, 0.0], 0.0)


@pytest.mark.parametrize("c", [-0.5, 0.0, 0.8])
def test_derivatives_finite_difference(c):
    lam = np.array([0.05, -0.1, 0.07])
    h = 1e-6
    g = cgf_gradient(lam, c)
    H = cgf_hessian(lam, c)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (cgf_pointwise(lam + e, c) - cgf_pointwise(lam - e, c)) / (2 * h)
        assert g[i] == pytest.approx(fd, abs=1e-8)
        fdg = (cgf_gradient(lam + e, c) - cgf_gradient(lam - e, c)) / (2 * h)
        np.testing.assert_allclose(H[:, i], fdg, atol=1e-6)


def test_conjugate_zero_at_mean():
    assert legendre_pointwise([1.0, 1.0, 0.3], 0.3) == pytest.approx(0.0, abs=1e-15)


def test_conjugate_off_cone_is_inf():
    assert legendre_pointwise([1.0, 1.0, 1.0], 0.0) == np.inf
    assert legendre_pointwise([-1.0, 1.0, 0.0], 0.0) == np.inf
    assert not in_cone([1.0, 1.0, 1.0])


def test_chi_square_conjugate():
    # with c = 0, x = (q, 1, 0): (q - 1 - log q) / 2
    q = 2.5
    assert legendre_pointwise([q, 1.0, 0.0], 0.0) == pytest.approx((q - 1 - np.log(q)) / 2, abs=1e-14)


@pytest.mark.parametrize("x,c", [((2.0, 0.5, 0.3), 0.2), ((0.4, 1.3, -0.5), -0.6), ((1.0, 1.0, 0.9), 0.0)])
def test_conjugate_matches_numeric(x, c):
    assert legendre_pointwise(x, c) == pytest.approx(legendre_numeric(x, c), abs=1e-9)


def test_argmax_attains_conjugate():
    x, c = np.array([2.0, 0.5, 0.3]), 0.2
    lam = legendre_argmax(x, c)
    assert in_domain(lam, c)
    np.testing.assert_allclose(cgf_gradient(lam, c), x, rtol=1e-12)
    assert lam @ x - cgf_pointwise(lam, c) == pytest.approx(legendre_pointwise(x, c), abs=1e-13)


def test_recession():
    assert recession([0, 0, 0], 0.3) == 0.0
    assert recession([1, 1, 2], 0.3) == np.inf
    x, c = np.array([1.0, 2.0, 0.5]), 0.3
    h = 1e6
    assert recession(x, c) == pytest.approx(legendre_pointwise(h * x, c) / h, rel=1e-4)


cs = st.floats(-0.95, 0.95)
lams = st.tuples(st.floats(-2, 0.4), st.floats(-2, 0.4), st.floats(-2, 2))


@given(lams, cs)
def test_conjugate_duality(lam, c):
    """Fenchel-Young with equality at x = grad P(lam)."""
    lam = np.array(lam)
    assume(domain_margin(lam, c) > 1e-3)
    x = cgf_gradient(lam, c)
    assert in_cone(x)
    lhs = legendre_pointwise(x, c) + cgf_pointwise(lam, c)
    assert lhs == pytest.approx(lam @ x, abs=1e-8 * (1 + np.abs(lam) @ np.abs(x)))


@given(lams, cs)
def test_hessian_positive_definite(lam, c):
    lam = np.array(lam)
    assume(domain_margin(lam, c) > 1e-3)
    assert np.all(np.linalg.eigvalsh(cgf_hessian(lam, c)) > -1e-9)


@given(st.tuples(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(-1, 1)), cs)
def test_conjugate_nonnegative(x, c):
    x = np.array([x[0], x[1], x[2] * np.sqrt(x[0] * x[1]) * 0.99])
    assert legendre_pointwise(x, c) >= -1e-12
