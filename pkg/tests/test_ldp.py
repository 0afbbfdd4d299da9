import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize

from covol.coefficients import CoefficientSpec, Tabulated
from covol.errors import ContractError
from covol.estimators import integrated_truth
from covol.ratefn import (
    cgf_pointwise,
    finite_n_cgf,
    halfspace_infimum,
    integrated_cgf,
    integrated_cgf_gradient,
    ldp_conjugate,
    ldp_rate,
    ldp_rate_constant,
    mdp_sigma1,
    pathwise_ldp_rate,
)

SCALAR_RATE = 0.25 - 0.5 * math.log(1.5)  # (x - 1 - log x) / 2 at x = 1.5


def chi_rate(q, s=1.0):
    x = q / s**2
    return 0.5 * (x - 1 - math.log(x))


def quad_cgf_oracle(lam1):
    """int_0^1 -1/2 log(1 - 2 lam1 sigma1(t)^2) dt for sigma1 = 1 + t, by adaptive quadrature."""
    return integrate.quad(lambda t: -0.5 * math.log(1 - 2 * lam1 * (1 + t) ** 2), 0, 1, epsabs=1e-13)[0]


def nelder_mead_conjugate(x, spec):
    """Derivative-free sup of <lam, x> - Lambda(lam)."""
    out = optimize.minimize(
        lambda lam: integrated_cgf(lam, spec) - lam @ x,
        np.zeros(3),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 20_000, "maxfev": 40_000},
    )
    return -out.fun


@pytest.fixture
def ramp():
    return CoefficientSpec(Tabulated((1.0, 2.0)), 1.0, 0.0)


class TestIntegratedCgf:
    def test_zero(self, varying):
        assert integrated_cgf([0, 0, 0], varying) == 0.0

    def test_constant_collapses(self):
        spec = CoefficientSpec.constant(1.0, 2.0, 0.5)
        lam = np.array([0.05, 0.02, -0.03])
        assert integrated_cgf(lam, spec) == pytest.approx(cgf_pointwise(lam * [1, 4, 2], 0.5), abs=1e-15)

    @pytest.mark.parametrize("lam1", [-1.0, 0.05, 0.12])
    def test_against_quad(self, ramp, lam1):
        assert integrated_cgf([lam1, 0, 0], ramp) == pytest.approx(quad_cgf_oracle(lam1), abs=1e-12)

    def test_outside_domain(self, ramp):
        # 2 lam sigma1^2 reaches 1 at t = 1 when lam = 1/8
        assert integrated_cgf([0.2, 0, 0], ramp) == math.inf

    def test_gradient_is_truth(self, varying):
        np.testing.assert_allclose(
            integrated_cgf_gradient([0, 0, 0], varying), integrated_truth(varying).as_array(), atol=1e-10
        )

    def test_taylor(self):
        # third-order remainder is about 8 max(sigma)^6 |lam|^3 / 6, so keep volatilities near 1
        varying = CoefficientSpec(Tabulated((0.9, 1.1)), Tabulated((1.0, 0.8)), Tabulated((-0.3, 0.2, 0.6)))
        rng = np.random.default_rng(0)
        mean = integrated_truth(varying).as_array()
        sigma = mdp_sigma1(varying).sigma1_matrix
        for _ in range(10):
            lam = rng.standard_normal(3)
            lam *= 1e-3 / np.linalg.norm(lam)
            approx = lam @ mean + 0.5 * lam @ sigma @ lam
            assert integrated_cgf(lam, varying) == pytest.approx(approx, abs=1e-8)


class TestFiniteN:
    def test_constant_equal_every_n(self, unit_half):
        lam = np.array([0.1, -0.2, 0.05])
        for n in (1, 7, 100):
            assert finite_n_cgf(lam, unit_half, n) == pytest.approx(integrated_cgf(lam, unit_half), abs=1e-14)

    def test_below_limit_gap_shrinking(self, ramp):
        lam1 = 0.1
        limit = quad_cgf_oracle(lam1)
        gaps = [limit - finite_n_cgf([lam1, 0, 0], ramp, n) for n in (2, 8, 32)]
        assert all(g > 0 for g in gaps)
        assert gaps[0] > gaps[1] > gaps[2]

    def test_direct_sum(self, ramp):
        # interval k has a1 = int sigma1^2 over the interval, so the exact value is a plain sum
        n, lam1 = 4, 0.08
        edges = np.arange(n + 1) / n
        a1 = ((1 + edges[1:]) ** 3 - (1 + edges[:-1]) ** 3) / 3
        want = np.mean(-0.5 * np.log(1 - 2 * lam1 * n * a1))
        assert finite_n_cgf([lam1, 0, 0], ramp, n) == pytest.approx(want, abs=1e-14)


class TestRate:
    def test_zero_at_truth(self, varying):
        assert ldp_rate(integrated_truth(varying).as_array(), varying) == pytest.approx(0.0, abs=1e-9)

    def test_scalar_reduction(self, unit_independent):
        assert ldp_rate([1.5, 1.0, 0.0], unit_independent) == pytest.approx(SCALAR_RATE, abs=1e-10)
        assert SCALAR_RATE == pytest.approx(0.047268, abs=1e-6)

    def test_constant_closed_form(self, unit_half):
        x = [1.2, 1.0, 0.6]
        assert ldp_rate(x, unit_half) == pytest.approx(ldp_rate_constant(x, 1, 1, 0.5), abs=1e-9)

    def test_closed_form_zero(self):
        assert ldp_rate_constant([1.0, 4.0, 1.0], 1.0, 2.0, 0.5) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("x", [(2.0, 1.5, 0.4), (1.0, 0.8, 0.3), (3.0, 1.0, -0.5)])
    def test_against_derivative_free(self, varying, x):
        x = np.array(x)
        got = ldp_conjugate(x, varying)
        assert got.attained
        assert got.value == pytest.approx(nelder_mead_conjugate(x, varying), abs=1e-7)

    def test_off_cone(self, varying):
        res = ldp_conjugate([1.0, 1.0, 2.0], varying)
        assert res.value == math.inf and not res.attained

    def test_bad_shape(self, varying):
        with pytest.raises(ContractError):
            ldp_rate([1.0, 1.0], varying)

    def test_mdp_local_consistency(self, varying):
        truth = integrated_truth(varying).as_array()
        v = np.array([0.3, -0.2, 0.1])
        sig = mdp_sigma1(varying).sigma1_matrix
        quad = 0.5 * v @ np.linalg.solve(sig, v)
        h = 1e-3
        assert ldp_rate(truth + h * v, varying) / h**2 == pytest.approx(quad, rel=0.01)


class TestPathwise:
    def test_linear_equals_fixed_time(self, unit_half):
        x = np.array([1.3, 0.9, 0.5])
        times = np.array([0.0, 0.5, 1.0])
        values = np.outer(times, x)
        assert pathwise_ldp_rate(times, values, unit_half) == pytest.approx(ldp_rate_constant(x, 1, 1, 0.5), abs=1e-13)

    def test_truth_trajectory(self):
        spec = CoefficientSpec.constant(1.0, 2.0, -0.3)
        times = np.linspace(0, 1, 64)
        values = np.outer(times, integrated_truth(spec).as_array())
        assert pathwise_ldp_rate(times, values, spec) == pytest.approx(0.0, abs=1e-14)

    def test_negative_slope_infinite(self, unit_half):
        times = np.array([0.0, 0.5, 1.0])
        values = np.array([[0, 0, 0], [0.5, 0.5, 0.2], [0.4, 1.0, 0.3]])
        assert pathwise_ldp_rate(times, values, unit_half) == math.inf

    def test_must_start_at_origin(self, unit_half):
        with pytest.raises(ContractError):
            pathwise_ldp_rate([0.0, 1.0], [[0.1, 0, 0], [1, 1, 0]], unit_half)

    def test_bounds_fixed_time_rate(self, varying):
        """Contraction: the endpoint rate is the infimum over paths."""
        times = np.array([0.0, 0.3, 1.0])
        values = np.array([[0, 0, 0], [0.6, 0.3, 0.05], [2.0, 1.2, 0.3]])
        assert pathwise_ldp_rate(times, values, varying) >= ldp_rate(values[-1], varying) - 1e-9


class TestHalfspace:
    def test_chi_square(self, unit_independent):
        res = halfspace_infimum(unit_independent, "q1", 1.5)
        assert res.rate == pytest.approx(SCALAR_RATE, abs=1e-12)
        np.testing.assert_allclose(res.tilt, [(1 - 1 / 1.5) / 2, 0, 0], atol=1e-12)
        assert res.dominating_point[0] == pytest.approx(1.5, abs=1e-10)

    def test_lower_tail(self, unit_independent):
        res = halfspace_infimum(unit_independent, "q1", 0.5, "<=")
        assert res.rate == pytest.approx(chi_rate(0.5), abs=1e-12)

    def test_contains_mean(self, unit_half):
        assert halfspace_infimum(unit_half, "c", 0.2).rate == 0.0

    def test_impossible(self, unit_half):
        assert halfspace_infimum(unit_half, "q2", -0.1, "<=").rate == math.inf

    def test_matches_vector_rate_at_dominating_point(self, varying):
        res = halfspace_infimum(varying, "c", 1.0)
        assert res.rate == pytest.approx(ldp_rate(res.dominating_point, varying), abs=1e-8)

    def test_bad_component(self, unit_half):
        with pytest.raises(ContractError):
            halfspace_infimum(unit_half, "correlation", 0.9)


@given(st.floats(0.05, 4.0), st.floats(0.05, 4.0), st.floats(-0.95, 0.95), st.floats(-0.9, 0.9))
def test_rate_nonnegative(x1, x2, frac, rho):
    spec = CoefficientSpec.constant(1.0, 1.5, rho)
    x = [x1, x2, frac * math.sqrt(x1 * x2)]
    assert ldp_rate_constant(x, 1.0, 1.5, rho) >= -1e-12


@given(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4), st.floats(0.01, 0.99))
def test_integrated_cgf_convex(a, b, alpha):
    spec = CoefficientSpec(Tabulated((1.0, 1.5)), 1.0, Tabulated((0.2, -0.4)))
    l1, l2 = np.array([a, b, 0.1]), np.array([b, -a, -0.2])
    mix = integrated_cgf(alpha * l1 + (1 - alpha) * l2, spec)
    assert mix <= alpha * integrated_cgf(l1, spec) + (1 - alpha) * integrated_cgf(l2, spec) + 1e-12
