"""Large-deviation rate functions of the realized (co-)volatility vector.

The limiting scaled CGF is a time integral of the pointwise CGF,

    Lambda(lam) = int_0^1 P_{rho_t}(lam1 s1_t^2, lam2 s2_t^2, lam3 s1_t s2_t) dt,

and the fixed-time rate is its convex conjugate.  Both Lambda and its
finite-n counterpart Lambda_n are weighted sums of ``P_c`` over a set of
nodes (quadrature nodes, or observation intervals), represented by
:class:`CgfNodes`.  The conjugate is computed by damped Newton ascent from
``lam = 0``, which is always strictly inside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._validation import check_vector3
from ..coefficients import cell_edges, gauss_legendre_nodes, interval_moments, quadrature_rule
from ..errors import ContractError, ConvergenceError, DomainError
from .pointwise import _terms, in_cone, legendre_pointwise

NEWTON_TOL = 1e-9
NEWTON_MAX_ITER = 200
BOUNDARY_MARGIN = 1e-8
CGF_SUBCELLS = 64


@dataclass(frozen=True)
class CgfNodes:
    """``Lambda(lam) = sum_j w_j P_{c_j}(scale_j * lam)``."""

    c: np.ndarray
    scale: np.ndarray
    weight: np.ndarray

    @classmethod
    def from_spec(cls, spec):
        # the integrand is a log, not a polynomial: refine on a uniform grid so
        # that tilts close to the domain boundary stay accurate
        extra = None if spec.is_constant else np.linspace(0.0, 1.0, CGF_SUBCELLS + 1)
        t, w = quadrature_rule(spec, 0.0, 1.0, extra=extra)
        s1, s2, r = spec.sigma1(t), spec.sigma2(t), spec.rho(t)
        s1, s2, r = (np.broadcast_to(np.asarray(v, float), t.shape) for v in (s1, s2, r))
        return cls(np.asarray(r, float), np.column_stack([s1 * s1, s2 * s2, s1 * s2]), w)

    @classmethod
    def from_moments(cls, moments):
        n = moments.n
        scale = n * np.column_stack(
            [moments.a1, moments.a2, np.sqrt(moments.a1 * moments.a2)]
        )
        return cls(moments.c, scale, np.full(n, 1.0 / n))

    def _mu(self, lam):
        return self.scale * np.asarray(lam, dtype=float)

    def in_domain(self, lam):
        _, u1, u2, _, det = _terms(self._mu(lam), self.c)
        return bool(np.all(u1 > 0.0) and np.all(u2 > 0.0) and np.all(det > 0.0))

    def margin(self, lam):
        """Smallest ``exp(-2 P_c)`` over nodes; 0 means on the boundary."""
        d, u1, u2, _, det = _terms(self._mu(lam), self.c)
        if np.any(u1 <= 0.0) or np.any(u2 <= 0.0):
            return -1.0
        return float(np.min(det / d))

    def value(self, lam):
        d, u1, u2, _, det = _terms(self._mu(lam), self.c)
        if np.any(u1 <= 0.0) or np.any(u2 <= 0.0) or np.any(det <= 0.0):
            return math.inf
        return float(-0.5 * np.dot(self.weight, np.log(det / d)))

    def derivatives(self, lam):
        """``(Lambda, grad, Hessian)`` at an in-domain ``lam``."""
        d, u1, u2, v, det = _terms(self._mu(lam), self.c)
        val = float(-0.5 * np.dot(self.weight, np.log(det / d)))
        g = np.column_stack([d * u2, d * u1, d * v]) / det[:, None]
        h = 2.0 * g[:, :, None] * g[:, None, :]
        corr = d * d / det
        h[:, 0, 1] -= 2.0 * corr
        h[:, 1, 0] -= 2.0 * corr
        h[:, 2, 2] += corr
        ws = self.weight[:, None] * self.scale
        grad = np.sum(ws * g, axis=0)
        hess = np.einsum("j,ja,jb,jab->ab", self.weight, self.scale, self.scale, h)
        return val, grad, hess


@dataclass(frozen=True)
class ConjugateResult:
    """Outcome of a numerical Legendre transform.

    ``attained`` is False when the iterates ran into the domain boundary with
    a non-vanishing gradient; ``value`` is then a lower estimate of the sup.
    """

    value: float
    argmax: np.ndarray
    attained: bool
    iterations: int
    gradient_norm: float
    diagnostics: dict = field(default_factory=dict)


def maximize_dual(x, nodes, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """``sup_lam <lam, x> - Lambda(lam)`` by damped Newton with backtracking.

    Steps are halved until the trial point is inside the domain at every node
    and the Armijo ascent condition holds.
    """
    x = np.asarray(x, dtype=float)
    lam = np.zeros(3)
    f, g, h = nodes.derivatives(lam)
    it = 0
    for it in range(max_iter + 1):
        r = x - g
        gnorm = float(np.linalg.norm(r))
        if gnorm < tol:
            return ConjugateResult(float(lam @ x - f), lam, True, it, gnorm)
        if it == max_iter:
            break
        step = np.linalg.solve(h, r)
        decrement = float(r @ step)
        obj = float(lam @ x - f)
        t = 1.0
        while True:
            cand = lam + t * step
            if nodes.in_domain(cand):
                # near the optimum the ascent is below rounding; take the step
                if decrement < 1e-14:
                    break
                if float(cand @ x) - nodes.value(cand) >= obj + 1e-4 * t * decrement:
                    break
            t *= 0.5
            if t < 1e-18:
                margin = nodes.margin(lam)
                if margin < BOUNDARY_MARGIN:
                    return ConjugateResult(
                        obj, lam, False, it, gnorm, {"margin": margin, "reason": "boundary"}
                    )
                raise ConvergenceError(
                    "line search failed in Legendre transform",
                    {"lambda": lam.tolist(), "gradient_norm": gnorm, "iterations": it, "x": x.tolist()},
                )
        lam = cand
        f, g, h = nodes.derivatives(lam)
    margin = nodes.margin(lam)
    if margin < BOUNDARY_MARGIN:
        return ConjugateResult(
            float(lam @ x - f), lam, False, it, gnorm, {"margin": margin, "reason": "boundary"}
        )
    raise ConvergenceError(
        f"Newton ascent did not converge in {max_iter} iterations",
        {"lambda": lam.tolist(), "gradient_norm": gnorm, "x": x.tolist()},
    )


# ---------------------------------------------------------------------------
# CGFs
# ---------------------------------------------------------------------------


def integrated_cgf(lam, spec):
    """Limiting scaled CGF ``Lambda(lam)``; ``+inf`` if any quadrature node
    leaves its domain."""
    return CgfNodes.from_spec(spec).value(check_vector3(lam, "lam"))


def integrated_cgf_gradient(lam, spec):
    nodes = CgfNodes.from_spec(spec)
    lam = check_vector3(lam, "lam")
    if not nodes.in_domain(lam):
        raise DomainError("gradient requested outside the effective domain")
    return nodes.derivatives(lam)[1]


def finite_n_cgf(lam, spec, n):
    """``Lambda_n(lam) = (1/n) log E exp(n <lam, V_1^n(X - Y)>)``, exactly."""
    return CgfNodes.from_moments(interval_moments(spec, n)).value(check_vector3(lam, "lam"))


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------


def ldp_conjugate(x, spec):
    """Numerical conjugate of ``Lambda`` at ``x`` with solver details."""
    x = check_vector3(x)
    if not in_cone(x):
        return ConjugateResult(math.inf, np.full(3, np.nan), False, 0, math.inf, {"reason": "outside cone"})
    return maximize_dual(x, CgfNodes.from_spec(spec))


def ldp_rate(x, spec):
    """Fixed-time LDP rate ``I(x) = sup_lam <lam, x> - Lambda(lam)``."""
    return ldp_conjugate(x, spec).value


def ldp_rate_constant(x, sigma1, sigma2, rho):
    """Closed-form rate for constant coefficients: ``P_rho^*`` on rescaled x."""
    x = np.asarray(x, dtype=float)
    if sigma1 <= 0 or sigma2 <= 0:
        raise DomainError("volatilities must be positive")
    scaled = np.stack(
        [x[..., 0] / sigma1**2, x[..., 1] / sigma2**2, x[..., 2] / (sigma1 * sigma2)], axis=-1
    )
    return legendre_pointwise(scaled, rho)


def legendre_numeric(x, c):
    """Numerical conjugate of ``P_c`` alone (one node of unit weight)."""
    nodes = CgfNodes(np.array([float(c)]), np.ones((1, 3)), np.ones(1))
    x = check_vector3(x)
    if not in_cone(x):
        return math.inf
    return maximize_dual(x, nodes).value


def _check_piecewise_linear(times, values):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or values.shape != (len(times), 3):
        raise ContractError("values must have shape (len(times), 3)")
    if len(times) < 2 or times[0] != 0.0 or times[-1] != 1.0 or np.any(np.diff(times) <= 0):
        raise ContractError("breakpoints must increase strictly from 0 to 1")
    if np.any(values[0] != 0.0):
        raise ContractError("trajectory must start at the origin, f(0) = 0")
    return times, values


def _path_nodes(spec, times, values):
    """Quadrature nodes of the path's linearity cells refined by the spec's
    breakpoints, with the path slope at every node."""
    slopes = np.diff(values, axis=0) / np.diff(times)[:, None]
    edges = cell_edges(spec, 0.0, 1.0, extra=times)
    t, w = gauss_legendre_nodes(edges[:-1], edges[1:])
    t, w = t.ravel(), w.ravel()
    owner = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(slopes) - 1)
    return t, w, slopes[owner]


def pathwise_ldp_rate(times, values, spec):
    """Pathwise LDP rate of an absolutely continuous piecewise-linear trajectory.

    ``times`` are breakpoints from 0 to 1 and ``values`` the trajectory there
    (shape ``(len(times), 3)``, first row zero).  Returns ``+inf`` as soon as
    the density ``f'`` leaves the open cone on some cell.
    """
    times, values = _check_piecewise_linear(times, values)
    t, w, slope = _path_nodes(spec, times, values)
    if not np.all(in_cone(slope)):
        return math.inf
    s1 = np.broadcast_to(spec.sigma1(t), t.shape)
    s2 = np.broadcast_to(spec.sigma2(t), t.shape)
    r = np.broadcast_to(spec.rho(t), t.shape)
    scaled = np.column_stack([slope[:, 0] / s1**2, slope[:, 1] / s2**2, slope[:, 2] / (s1 * s2)])
    return float(np.dot(w, legendre_pointwise(scaled, r)))


# ---------------------------------------------------------------------------
# half-space events
# ---------------------------------------------------------------------------

_COMPONENT = {"q1": 0, "q2": 1, "c": 2}


@dataclass(frozen=True)
class HalfspaceInfimum:
    """``inf I`` over ``{x_i >= a}`` or ``{x_i <= a}``.

    ``tilt`` is the dual maximizer (a multiple of the i-th unit vector) and
    ``dominating_point`` the rate minimizer on the event boundary.
    """

    rate: float
    tilt: np.ndarray
    dominating_point: np.ndarray


def halfspace_infimum(spec, component, threshold, direction=">="):
    """Minimize the LDP rate over a half-space event on one coordinate.

    By convex duality the infimum over ``{x_i >= a}`` equals the 1D conjugate
    ``sup_theta (theta a - Lambda(theta e_i))``; the maximizing ``theta`` is
    found by bisection on the monotone derivative, which diverges at the
    domain boundary.
    """
    if component not in _COMPONENT:
        raise ContractError(f"half-space events are on q1, q2 or c, not {component!r}")
    if direction not in (">=", "<="):
        raise ContractError("direction must be '>=' or '<='")
    i = _COMPONENT[component]
    nodes = CgfNodes.from_spec(spec)
    zero = np.zeros(3)
    mean = nodes.derivatives(zero)[1]
    a = float(threshold)
    sign = 1.0 if direction == ">=" else -1.0
    if sign * (a - mean[i]) <= 0.0:
        return HalfspaceInfimum(0.0, zero, mean)
    if i < 2 and direction == "<=" and a <= 0.0:
        return HalfspaceInfimum(math.inf, np.full(3, np.nan), np.full(3, np.nan))

    e = np.zeros(3)
    e[i] = sign

    def below_root(theta):
        lam = theta * e
        if not nodes.in_domain(lam):
            return False
        return sign * (nodes.derivatives(lam)[1][i] - a) < 0.0

    lo, hi = 0.0, 1.0
    while below_root(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise ConvergenceError("could not bracket the dominating tilt", {"theta": hi})
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if below_root(mid):
            lo = mid
        else:
            hi = mid
    lam = lo * e
    val, grad, _ = nodes.derivatives(lam)
    return HalfspaceInfimum(float(lam[i] * a - val), lam, grad)
