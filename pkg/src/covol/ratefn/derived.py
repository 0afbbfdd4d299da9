"""Rates of the realized correlation ``C / sqrt(Q1 Q2)`` and beta ``C / Q_ell``.

Both statistics are smooth functions of the realized vector, so their LDP
rate is the contraction ``inf {I(x) : g(x) = u}`` and their MDP rate the
minimum of the quadratic MDP form over the linearized constraint
``<a, x> = u``, which is ``u^2 / (2 <a, Sigma a>)``.

For constant coefficients the infima are explicit:

* correlation, LDP: ``log((1 - rho u) / sqrt((1 - rho^2)(1 - u^2)))``,
  attained at ``x = s1^2 (1 - rho^2) / (1 - rho u)``,
  ``y = s2^2 (1 - rho^2) / (1 - rho u)``;
* correlation, MDP: ``u^2 / (2 (1 - rho^2)^2)``;
* beta_ell, LDP: ``1/2 log(1 + (s_ell u - rho s_i)^2 / (s_i^2 (1 - rho^2)))``;
* beta_ell, MDP: ``s_ell^2 u^2 / (2 s_i^2 (1 - rho^2))``,

where ``s_i`` is the other volatility.  With time-varying correlation
(volatilities must stay constant) the same problems are solved numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..coefficients import integrate_coefficient
from ..errors import ContractError, ConvergenceError, UnsupportedHypothesisError
from .ldp import ldp_conjugate
from .mdp import _factor, mdp_sigma1

STATISTICS = ("correlation", "beta1", "beta2")


@dataclass(frozen=True)
class DerivedRate:
    """Rate of a derived statistic together with the minimizing vector."""

    rate: float
    minimizer: np.ndarray
    attained: bool = True


def _require_constant_sigma(spec):
    if not spec.has_constant_sigma:
        raise UnsupportedHypothesisError(
            "rates of realized correlation and beta are only available for constant volatilities"
        )
    return spec.sigma1.value, spec.sigma2.value


def _mean_correlation(spec, s1, s2):
    return integrate_coefficient(spec, "sigma1*sigma2*rho") / (s1 * s2)


def _check_ell(ell):
    if ell not in (1, 2):
        raise ContractError("ell must be 1 or 2")
    return ell


# ---------------------------------------------------------------------------
# LDP
# ---------------------------------------------------------------------------


def _minimize_on_manifold(to_point, chain, start, spec):
    """Minimize ``I(to_point(p))`` over unconstrained ``p``.

    The gradient of the rate is the dual maximizer (envelope theorem), so the
    objective's gradient is ``chain(p)^T lambda*``.
    """
    cache = {}

    def evaluate(p):
        key = tuple(p)
        if key not in cache:
            res = ldp_conjugate(to_point(p), spec)
            cache.clear()
            cache[key] = res
        return cache[key]

    def fun(p):
        return evaluate(p).value

    def jac(p):
        return chain(p).T @ evaluate(p).argmax

    out = minimize(fun, start, jac=jac, method="BFGS", options={"gtol": 1e-10, "maxiter": 500})
    if not np.isfinite(out.fun):
        raise ConvergenceError("manifold minimization diverged", {"message": out.message})
    x = to_point(out.x)
    return DerivedRate(float(out.fun), x, bool(evaluate(out.x).attained))


def correlation_ldp_numeric(u, spec, start=None):
    """Minimize the vector LDP rate over ``{z = u sqrt(x y)}`` numerically.

    The manifold is parameterized by ``(log x, log y)``.
    """
    s1, s2 = _require_constant_sigma(spec)
    u = float(u)
    if not abs(u) < 1.0:
        return DerivedRate(math.inf, np.full(3, np.nan), False)
    if start is None:
        r = _mean_correlation(spec, s1, s2)
        k = (1.0 - r * r) / (1.0 - r * u)
        start = np.log([s1 * s1 * k, s2 * s2 * k])

    def to_point(p):
        x, y = np.exp(p)
        return np.array([x, y, u * math.sqrt(x * y)])

    def chain(p):
        x, y = np.exp(p)
        z = u * math.sqrt(x * y)
        return np.array([[x, 0.0], [0.0, y], [0.5 * z, 0.5 * z]])

    return _minimize_on_manifold(to_point, chain, np.asarray(start, float), spec)


def beta_ldp_numeric(u, ell, spec, start=None):
    """Minimize the vector LDP rate over ``{x3 = u x_ell}`` numerically.

    Parameterized by ``x_ell = e^a`` and ``x_i = u^2 x_ell + e^b`` so that
    every trial point lies in the open cone.
    """
    s1, s2 = _require_constant_sigma(spec)
    ell = _check_ell(ell)
    u = float(u)
    i_ell, i_oth = (0, 1) if ell == 1 else (1, 0)
    s_ell, s_oth = (s1, s2) if ell == 1 else (s2, s1)
    if start is None:
        start = np.array([math.log(s_ell**2), math.log(s_oth**2)])

    def to_point(p):
        xl = math.exp(p[0])
        x = np.empty(3)
        x[i_ell] = xl
        x[i_oth] = u * u * xl + math.exp(p[1])
        x[2] = u * xl
        return x

    def chain(p):
        xl, e = math.exp(p[0]), math.exp(p[1])
        j = np.zeros((3, 2))
        j[i_ell, 0] = xl
        j[i_oth, 0] = u * u * xl
        j[i_oth, 1] = e
        j[2, 0] = u * xl
        return j

    return _minimize_on_manifold(to_point, chain, np.asarray(start, float), spec)


def correlation_ldp(u, spec):
    """LDP rate of the realized correlation with its minimizing vector."""
    s1, s2 = _require_constant_sigma(spec)
    u = float(u)
    if not abs(u) < 1.0:
        return DerivedRate(math.inf, np.full(3, np.nan), False)
    if not spec.rho.is_constant:
        return correlation_ldp_numeric(u, spec)
    r = spec.rho.value
    k = (1.0 - r * r) / (1.0 - r * u)
    x, y = s1 * s1 * k, s2 * s2 * k
    rate = math.log((1.0 - r * u) / math.sqrt((1.0 - r * r) * (1.0 - u * u)))
    return DerivedRate(max(rate, 0.0), np.array([x, y, u * math.sqrt(x * y)]))


def correlation_ldp_rate(u, spec):
    return correlation_ldp(u, spec).rate


def beta_ldp(u, ell, spec):
    """LDP rate of the realized beta ``C / Q_ell`` with its minimizing vector."""
    s1, s2 = _require_constant_sigma(spec)
    ell = _check_ell(ell)
    u = float(u)
    if not spec.rho.is_constant:
        return beta_ldp_numeric(u, ell, spec)
    r = spec.rho.value
    s_ell, s_oth = (s1, s2) if ell == 1 else (s2, s1)
    dev = (s_ell * u - r * s_oth) ** 2 / (s_oth**2 * (1.0 - r * r))
    rate = 0.5 * math.log1p(dev)
    return DerivedRate(rate, _beta_ldp_point(u, ell, s1, s2, r))


def _beta_ldp_point(u, ell, s1, s2, r):
    """Minimizer of the constant-coefficient rate on ``{x3 = u x_ell}``.

    In standardized units the slope is ``v = u s_ell / s_i``.  Writing the
    other coordinate as ``x_i = v^2 x_ell + e``, the rate separates in
    ``(x_ell, e)`` and stationarity gives ``e = 1 - r^2`` and
    ``x_ell = 1 / (1 + (v - r)^2 / (1 - r^2))``.
    """
    s_ell, s_oth = (s1, s2) if ell == 1 else (s2, s1)
    v = u * s_ell / s_oth
    d = 1.0 - r * r
    xl = 1.0 / (1.0 + (v - r) ** 2 / d)
    x = np.empty(3)
    x[0 if ell == 1 else 1] = xl * s_ell**2
    x[1 if ell == 1 else 0] = (v * v * xl + d) * s_oth**2
    x[2] = v * xl * s_ell * s_oth
    return x


def beta_ldp_rate(u, ell, spec):
    return beta_ldp(u, ell, spec).rate


# ---------------------------------------------------------------------------
# MDP
# ---------------------------------------------------------------------------


def _affine_minimum(a, u, spec):
    """``min {1/2 <x, Sigma^{-1} x> : <a, x> = u}`` and its minimizer.

    The Lagrange condition gives ``x = t Sigma a`` with ``t = u / <a, Sigma a>``.
    """
    sigma = mdp_sigma1(spec).sigma1_matrix
    _factor(sigma)  # conditioning check
    sa = sigma @ a
    q = float(a @ sa)
    return DerivedRate(0.5 * u * u / q, (u / q) * sa)


def correlation_constraint(spec):
    """Gradient of ``z / sqrt(x y)`` at the law-of-large-numbers limit."""
    s1, s2 = _require_constant_sigma(spec)
    r = _mean_correlation(spec, s1, s2)
    return np.array([-r / (2.0 * s1 * s1), -r / (2.0 * s2 * s2), 1.0 / (s1 * s2)])


def beta_constraint(ell, spec):
    """Gradient of ``x3 / x_ell`` at the law-of-large-numbers limit."""
    s1, s2 = _require_constant_sigma(spec)
    ell = _check_ell(ell)
    r = _mean_correlation(spec, s1, s2)
    a = np.zeros(3)
    if ell == 1:
        a[0] = -r * s2 / s1**3
        a[2] = 1.0 / s1**2
    else:
        a[1] = -r * s1 / s2**3
        a[2] = 1.0 / s2**2
    return a


def correlation_mdp_numeric(u, spec):
    return _affine_minimum(correlation_constraint(spec), float(u), spec)


def beta_mdp_numeric(u, ell, spec):
    return _affine_minimum(beta_constraint(ell, spec), float(u), spec)


def correlation_mdp(u, spec):
    """MDP rate of the centred, rescaled realized correlation."""
    _require_constant_sigma(spec)
    u = float(u)
    if not spec.rho.is_constant:
        return correlation_mdp_numeric(u, spec)
    r = spec.rho.value
    if abs(r) > 1.0 - spec.rho_margin:
        raise ContractError("|rho| within rho_margin of 1")
    point = correlation_mdp_numeric(u, spec).minimizer
    return DerivedRate(u * u / (2.0 * (1.0 - r * r) ** 2), point)


def correlation_mdp_rate(u, spec):
    return correlation_mdp(u, spec).rate


def beta_mdp(u, ell, spec):
    """MDP rate of the centred, rescaled realized beta ``C / Q_ell``."""
    s1, s2 = _require_constant_sigma(spec)
    ell = _check_ell(ell)
    u = float(u)
    if not spec.rho.is_constant:
        return beta_mdp_numeric(u, ell, spec)
    r = spec.rho.value
    if abs(r) > 1.0 - spec.rho_margin:
        raise ContractError("|rho| within rho_margin of 1")
    s_ell, s_oth = (s1, s2) if ell == 1 else (s2, s1)
    point = beta_mdp_numeric(u, ell, spec).minimizer
    return DerivedRate(s_ell**2 * u * u / (2.0 * s_oth**2 * (1.0 - r * r)), point)


def beta_mdp_rate(u, ell, spec):
    return beta_mdp(u, ell, spec).rate


def derived_rate(statistic, u, spec, scale="ldp"):
    """Dispatch on ``statistic`` in :data:`STATISTICS` and ``scale``."""
    if statistic not in STATISTICS:
        raise ContractError(f"statistic must be one of {STATISTICS}")
    if scale not in ("ldp", "mdp"):
        raise ContractError("scale must be 'ldp' or 'mdp'")
    if statistic == "correlation":
        return correlation_ldp(u, spec) if scale == "ldp" else correlation_mdp(u, spec)
    ell = 1 if statistic == "beta1" else 2
    return beta_ldp(u, ell, spec) if scale == "ldp" else beta_mdp(u, ell, spec)
