"""Pointwise cumulant generating function of a standardized Gaussian pair.

For ``(xi, xi')`` centred Gaussian with unit variances and correlation ``c``,

    P_c(lam) = log E exp(lam1 xi^2 + lam2 xi'^2 + lam3 xi xi')
             = -1/2 log(((1 - 2 lam1 d)(1 - 2 lam2 d) - (lam3 d + c)^2) / d),

with ``d = 1 - c^2``, finite exactly on the open set where both
``1 - 2 lam_l d > 0`` and the determinant term is positive.  Everything here
is vectorized: ``lam`` has shape ``(..., 3)`` and broadcasts against ``c``.
"""

from __future__ import annotations

import math

import numpy as np

from .._validation import check_correlation
from ..errors import DomainError


def _terms(lam, c):
    lam = np.asarray(lam, dtype=float)
    c = np.asarray(c, dtype=float)
    d = 1.0 - c * c
    u1 = 1.0 - 2.0 * lam[..., 0] * d
    u2 = 1.0 - 2.0 * lam[..., 1] * d
    v = lam[..., 2] * d + c
    return d, u1, u2, v, u1 * u2 - v * v


def _check_c(c):
    c = np.asarray(c, dtype=float)
    if np.any(~(np.abs(c) < 1.0)):
        raise DomainError("correlation must satisfy |c| < 1")
    return c


def in_domain(lam, c):
    """Membership of ``lam`` in the open effective domain ``D_c``."""
    c = _check_c(c)
    _, u1, u2, _, det = _terms(lam, c)
    out = (u1 > 0.0) & (u2 > 0.0) & (det > 0.0)
    return bool(out) if out.ndim == 0 else out


def domain_margin(lam, c):
    """``exp(-2 P_c(lam))``: 1 at the origin, tends to 0 at the domain boundary,
    non-positive outside."""
    d, u1, u2, _, det = _terms(lam, c)
    return np.where((u1 > 0.0) & (u2 > 0.0), det / d, -1.0)


def cgf_pointwise(lam, c):
    """``P_c(lam)``, with ``+inf`` outside the effective domain."""
    c = _check_c(c)
    d, u1, u2, _, det = _terms(lam, c)
    ok = (u1 > 0.0) & (u2 > 0.0) & (det > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(ok, -0.5 * np.log(np.where(ok, det / d, 1.0)), np.inf)
    return float(val) if val.ndim == 0 else val


def _gradient(lam, c):
    d, u1, u2, v, det = _terms(lam, c)
    g = np.stack([d * u2, d * u1, d * v], axis=-1) / det[..., None]
    return g, d, det


def cgf_gradient(lam, c):
    """Analytic gradient of ``P_c``; raises outside the open domain."""
    c = _check_c(c)
    if not np.all(in_domain(lam, c)):
        raise DomainError("gradient requested outside the effective domain")
    return _gradient(lam, c)[0]


def cgf_hessian(lam, c):
    """Analytic Hessian of ``P_c``, shape ``(..., 3, 3)``."""
    c = _check_c(c)
    if not np.all(in_domain(lam, c)):
        raise DomainError("Hessian requested outside the effective domain")
    g, d, det = _gradient(lam, c)
    h = 2.0 * g[..., :, None] * g[..., None, :]
    h[..., 0, 1] -= 2.0 * d * d / det
    h[..., 1, 0] -= 2.0 * d * d / det
    h[..., 2, 2] += d * d / det
    return h


def cgf_hessian_at_zero(c):
    """Covariance of ``(xi^2, xi'^2, xi xi')``, the Hessian of ``P_c`` at 0."""
    c = check_correlation(c)
    return np.array(
        [
            [2.0, 2.0 * c * c, 2.0 * c],
            [2.0 * c * c, 2.0, 2.0 * c],
            [2.0 * c, 2.0 * c, 1.0 + c * c],
        ]
    )


def in_cone(x):
    """``x1 > 0, x2 > 0, x1 x2 > x3^2``: the set where the conjugate is finite."""
    x = np.asarray(x, dtype=float)
    out = (x[..., 0] > 0.0) & (x[..., 1] > 0.0) & (x[..., 0] * x[..., 1] > x[..., 2] ** 2)
    return bool(out) if out.ndim == 0 else out


def legendre_pointwise(x, c):
    """Closed-form convex conjugate ``P_c^*(x)``; ``+inf`` off the open cone."""
    c = _check_c(c)
    x = np.asarray(x, dtype=float)
    d = 1.0 - c * c
    ok = np.asarray(in_cone(x))
    with np.errstate(divide="ignore", invalid="ignore"):
        gram = np.where(ok, x[..., 0] * x[..., 1] - x[..., 2] ** 2, 1.0)
        val = (
            0.5 * np.log(d / gram)
            - 1.0
            + (x[..., 0] + x[..., 1] - 2.0 * c * x[..., 2]) / (2.0 * d)
        )
    val = np.where(ok, val, np.inf)
    return float(val) if val.ndim == 0 else val


def legendre_argmax(x, c):
    """Maximizer of ``<lam, x> - P_c(lam)`` for ``x`` in the open cone.

    Writing ``S = [[x1, x3], [x3, x2]]`` and ``C = [[1, c], [c, 1]]``, the
    tilted second-moment matrix must equal ``S``, so ``C^{-1} - 2 L = S^{-1}``
    with ``L = [[lam1, lam3/2], [lam3/2, lam2]]``.
    """
    c = check_correlation(c)
    x = np.asarray(x, dtype=float)
    if not in_cone(x):
        raise DomainError("the conjugate is infinite off the open cone")
    d = 1.0 - c * c
    g = x[0] * x[1] - x[2] ** 2
    return np.array(
        [
            0.5 * (1.0 / d - x[1] / g),
            0.5 * (1.0 / d - x[0] / g),
            -c / d + x[2] / g,
        ]
    )


def recession(x, c):
    """Recession function of ``P_c^*``: ``lim_h P_c^*(h x) / h``.

    Equals ``(x1 + x2 - 2 c x3) / (2 (1 - c^2))`` on the open cone, 0 at the
    origin and ``+inf`` elsewhere.
    """
    c = float(check_correlation(c))
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return 0.0
    if not in_cone(x):
        return math.inf
    return float((x[0] + x[1] - 2.0 * c * x[2]) / (2.0 * (1.0 - c * c)))
