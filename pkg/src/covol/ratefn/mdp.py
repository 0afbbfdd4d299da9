"""Moderate-deviation quadratic forms.

Two matrices appear here and must not be confused.

``Sigma_t`` is the per-time matrix

    [[s1^4,           s1^2 s2^2 r^2, s1^3 s2 r            ],
     [s1^2 s2^2 r^2,  s2^4,          s1 s2^3 r            ],
     [s1^3 s2 r,      s1 s2^3 r,     s1^2 s2^2 (1 + r^2)/2]]

together with its closed-form inverse and determinant
``det Sigma_t = s1^6 s2^6 (1 - r^2)^3 / 2``.

The covariance of the Gaussian limit of ``sqrt(n) (V_1^n - [V]_1)`` is
``2 int_0^1 Sigma_t dt``: it is the time integral of the Hessian of the
pointwise CGF at zero, scaled by the coefficients, and a direct Monte Carlo
check reproduces it (e.g. ``Var(Q_1)`` of a chi-square sum is ``2 int s1^4``).
:func:`mdp_sigma1` returns this CLT covariance, and the rates below are the
quadratic forms of its inverse.  Consequently the pathwise rate is
``int 1/4 <phi', Sigma_t^{-1} phi'> dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .._validation import check_gamma, check_vector3
from ..errors import DomainError, SingularCovarianceError
from .ldp import _check_piecewise_linear, _path_nodes

MAX_CONDITION = 1e12


def sigma_t_matrix(s1, s2, r):
    """``Sigma_t`` for scalar coefficients."""
    return np.array(
        [
            [s1**4, (s1 * s2 * r) ** 2, s1**3 * s2 * r],
            [(s1 * s2 * r) ** 2, s2**4, s1 * s2**3 * r],
            [s1**3 * s2 * r, s1 * s2**3 * r, 0.5 * (s1 * s2) ** 2 * (1.0 + r * r)],
        ]
    )


def sigma_t_det(s1, s2, r):
    return 0.5 * s1**6 * s2**6 * (1.0 - r * r) ** 3


def sigma_t_inverse(s1, s2, r):
    """Closed-form inverse of ``Sigma_t`` (adjugate over determinant).

    Vectorized: scalar or array coefficients give shape ``(..., 3, 3)``.
    """
    s1, s2, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s1, s2, r)))
    om = 1.0 - r * r
    det = sigma_t_det(s1, s2, r)
    out = np.empty(s1.shape + (3, 3))
    out[..., 0, 0] = 0.5 * s1**2 * s2**6 * om
    out[..., 1, 1] = 0.5 * s1**6 * s2**2 * om
    out[..., 2, 2] = s1**4 * s2**4 * (1.0 - r**4)
    out[..., 0, 1] = out[..., 1, 0] = 0.5 * s1**4 * s2**4 * r * r * om
    out[..., 0, 2] = out[..., 2, 0] = -(s1**3) * s2**5 * r * om
    out[..., 1, 2] = out[..., 2, 1] = -(s1**5) * s2**3 * r * om
    return out / det[..., None, None]


@dataclass(frozen=True)
class MdpCovariance:
    """CLT covariance ``sigma1_matrix`` plus per-time evaluators.

    ``sigma1_matrix = 2 int Sigma_t dt``; ``sigma_t``, ``sigma_t_inv`` and
    ``det_t`` evaluate the per-time matrix at a given time.
    """

    sigma1_matrix: np.ndarray
    condition_number: float
    spec: object

    def _coeffs(self, t):
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise DomainError("t must lie in [0, 1]")
        return float(self.spec.sigma1(t)), float(self.spec.sigma2(t)), float(self.spec.rho(t))

    def sigma_t(self, t):
        return sigma_t_matrix(*self._coeffs(t))

    def sigma_t_inv(self, t):
        return sigma_t_inverse(*self._coeffs(t))

    def det_t(self, t):
        return float(sigma_t_det(*self._coeffs(t)))


_ENTRIES = (
    ((0, 0), "sigma1^4"),
    ((1, 1), "sigma2^4"),
    ((2, 2), "sigma1^2*sigma2^2*(1+rho^2)/2"),
    ((0, 1), "sigma1^2*sigma2^2*rho^2"),
    ((0, 2), "sigma1^3*sigma2*rho"),
    ((1, 2), "sigma1*sigma2^3*rho"),
)


def mdp_sigma1(spec):
    """CLT covariance of the realized vector at t = 1.

    >>> from covol.coefficients import CoefficientSpec
    >>> mdp_sigma1(CoefficientSpec.constant(1.0, 1.0, 0.0)).sigma1_matrix
    array([[2., 0., 0.],
           [0., 2., 0.],
           [0., 0., 1.]])
    """
    from ..coefficients import integrate_coefficient

    m = np.empty((3, 3))
    for (i, j), sel in _ENTRIES:
        m[i, j] = m[j, i] = 2.0 * integrate_coefficient(spec, sel, 0.0, 1.0)
    m.flags.writeable = False
    return MdpCovariance(m, float(np.linalg.cond(m)), spec)


def _factor(matrix):
    cond = float(np.linalg.cond(matrix))
    if not cond <= MAX_CONDITION:
        raise SingularCovarianceError(f"covariance is numerically singular (condition {cond:.3g})")
    try:
        return cho_factor(matrix)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(str(exc)) from exc


def quadratic_rate(x, matrix):
    """``1/2 <x, M^{-1} x>`` via a Cholesky solve."""
    x = np.asarray(x, dtype=float)
    return float(0.5 * x @ cho_solve(_factor(matrix), x))


def mdp_rate(x, spec):
    """Fixed-time MDP rate ``1/2 <x, Sigma^{-1} x>`` of the centred, rescaled vector."""
    return quadratic_rate(check_vector3(x), mdp_sigma1(spec).sigma1_matrix)


def pathwise_mdp_rate(times, values, spec):
    """Pathwise MDP rate of a piecewise-linear ``phi`` with ``phi(0) = 0``.

    Integrates ``1/4 <phi', Sigma_t^{-1} phi'>`` (the quadratic form of the
    per-time CLT covariance ``2 Sigma_t``) cell by cell with the closed-form
    inverse.
    """
    times, values = _check_piecewise_linear(times, values)
    t, w, slope = _path_nodes(spec, times, values)
    s1, s2, r = spec.sigma1(t), spec.sigma2(t), spec.rho(t)
    if np.any(np.abs(r) > 1.0 - spec.rho_margin):
        raise SingularCovarianceError("|rho| within rho_margin of 1; Sigma_t is nearly singular")
    inv = sigma_t_inverse(s1, s2, np.broadcast_to(r, t.shape))
    q = np.einsum("ja,jab,jb->j", slope, inv, slope)
    return float(0.25 * np.dot(w, q))


@dataclass(frozen=True)
class MdpScale:
    """Moderate-deviation scale ``b_n = n**gamma`` with ``0 < gamma < 1/2``."""

    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", check_gamma(self.gamma))

    def b(self, n):
        return float(n) ** self.gamma

    def speed(self, n):
        """``b_n^2``."""
        return float(n) ** (2.0 * self.gamma)

    def normalization(self, n):
        """``sqrt(n) / b_n``, the factor applied to ``V^n - [V]``."""
        return math.sqrt(n) / self.b(n)
