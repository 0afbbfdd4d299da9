"""Deterministic model coefficients and their per-interval Gaussian moments.

The model is the bivariate diffusion

    dX_l = sigma_l(t) dB_l + b_l dt,   corr(dB_1, dB_2) = rho(t),   t in [0, 1],

with deterministic ``sigma_1``, ``sigma_2``, ``rho``.  Every function of time is
either a :class:`Constant` or a :class:`Tabulated` piecewise-linear table on a
uniform grid covering [0, 1].  Integrals over time use Gauss-Legendre
quadrature of order 8 on each linearity cell, which is exact for polynomial
integrands up to degree 15 and therefore for every built-in integrand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import jsonschema
import numpy as np

from .errors import ConsistencyError, ContractError, DomainError

QUADRATURE_ORDER = 8
DEFAULT_RHO_MARGIN = 1e-3

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(QUADRATURE_ORDER)


# ---------------------------------------------------------------------------
# functions of time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    """Time-constant coefficient."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if not math.isfinite(self.value):
            raise ContractError("constant coefficient must be finite")

    is_constant = True

    @property
    def breakpoints(self):
        return np.array([0.0, 1.0])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, self.value) if t.ndim else self.value

    def to_dict(self):
        return {"constant": self.value}


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear function through ``values`` on a uniform grid of [0, 1].

    ``values`` holds M + 1 samples at ``t = i / M``; M >= 1.
    """

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise ContractError("a tabulated coefficient needs at least 2 grid values")
        if not all(math.isfinite(v) for v in vals):
            raise ContractError("tabulated coefficient values must be finite")
        object.__setattr__(self, "values", vals)

    is_constant = False

    @property
    def breakpoints(self):
        return np.linspace(0.0, 1.0, len(self.values))

    def __call__(self, t):
        out = np.interp(t, self.breakpoints, self.values)
        return out if np.ndim(t) else float(out)

    def to_dict(self):
        return {"grid": list(self.values)}


def _as_function(f):
    if isinstance(f, (Constant, Tabulated)):
        return f
    if np.ndim(f) == 0:
        return Constant(f)
    return Tabulated(tuple(f))


def _function_from_dict(doc):
    if "constant" in doc:
        return Constant(doc["constant"])
    return Tabulated(tuple(doc["grid"]))


# ---------------------------------------------------------------------------
# drifts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeOnlyDrift:
    """Bounded drift ``b_l(t)`` depending on time only."""

    b1: Constant | Tabulated
    b2: Constant | Tabulated

    def __post_init__(self):
        object.__setattr__(self, "b1", _as_function(self.b1))
        object.__setattr__(self, "b2", _as_function(self.b2))

    state_dependent = False

    def __call__(self, t, x1=None, x2=None):
        return self.b1(t), self.b2(t)

    def to_dict(self):
        return {"time_only": {"b1": self.b1.to_dict(), "b2": self.b2.to_dict()}}


@dataclass(frozen=True)
class LinearMeanRevertingDrift:
    """``b_l(t, x) = kappa_l * (theta_l - x_l)``; linear growth in the state."""

    kappa: tuple = (1.0, 1.0)
    theta: tuple = (0.0, 0.0)

    def __post_init__(self):
        kappa = tuple(float(k) for k in self.kappa)
        theta = tuple(float(v) for v in self.theta)
        if len(kappa) != 2 or len(theta) != 2:
            raise ContractError("kappa and theta need exactly two entries")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "theta", theta)

    state_dependent = True

    def __call__(self, t, x1, x2):
        return (
            self.kappa[0] * (self.theta[0] - np.asarray(x1)),
            self.kappa[1] * (self.theta[1] - np.asarray(x2)),
        )

    def to_dict(self):
        return {"linear": {"kappa": list(self.kappa), "theta": list(self.theta)}}


def _drift_from_dict(doc):
    if doc is None or "none" in doc:
        return None
    if "time_only" in doc:
        sub = doc["time_only"]
        return TimeOnlyDrift(_function_from_dict(sub["b1"]), _function_from_dict(sub["b2"]))
    sub = doc["linear"]
    return LinearMeanRevertingDrift(tuple(sub["kappa"]), tuple(sub["theta"]))


# ---------------------------------------------------------------------------
# coefficient set
# ---------------------------------------------------------------------------

_FUNCTION_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "properties": {"constant": {"type": "number"}},
            "required": ["constant"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "grid": {"type": "array", "items": {"type": "number"}, "minItems": 2}
            },
            "required": ["grid"],
            "additionalProperties": False,
        },
    ],
}

SPEC_SCHEMA = {
    "type": "object",
    "properties": {
        "sigma1": _FUNCTION_SCHEMA,
        "sigma2": _FUNCTION_SCHEMA,
        "rho": _FUNCTION_SCHEMA,
        "drift": {
            "type": "object",
            "oneOf": [
                {
                    "properties": {"none": {"const": True}},
                    "required": ["none"],
                    "additionalProperties": False,
                },
                {
                    "properties": {
                        "time_only": {
                            "type": "object",
                            "properties": {"b1": _FUNCTION_SCHEMA, "b2": _FUNCTION_SCHEMA},
                            "required": ["b1", "b2"],
                            "additionalProperties": False,
                        }
                    },
                    "required": ["time_only"],
                    "additionalProperties": False,
                },
                {
                    "properties": {
                        "linear": {
                            "type": "object",
                            "properties": {
                                "kappa": {
                                    "type": "array",
                                    "items": {"type": "number"},
                                    "minItems": 2,
                                    "maxItems": 2,
                                },
                                "theta": {
                                    "type": "array",
                                    "items": {"type": "number"},
                                    "minItems": 2,
                                    "maxItems": 2,
                                },
                            },
                            "required": ["kappa", "theta"],
                            "additionalProperties": False,
                        }
                    },
                    "required": ["linear"],
                    "additionalProperties": False,
                },
            ],
        },
        "rho_margin": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    },
    "required": ["sigma1", "sigma2", "rho"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class CoefficientSpec:
    """Ground-truth coefficients of the bivariate model on [0, 1].

    Parameters
    ----------
    sigma1, sigma2 : float, sequence or Constant/Tabulated
        Positive volatilities.  A float becomes :class:`Constant`, a sequence
        becomes :class:`Tabulated`.
    rho : float, sequence or Constant/Tabulated
        Instantaneous Brownian correlation, ``|rho| <= 1 - rho_margin``.
    drift : None, TimeOnlyDrift or LinearMeanRevertingDrift
    rho_margin : float
        Hard distance kept between ``|rho|`` and 1.
    """

    sigma1: Constant | Tabulated
    sigma2: Constant | Tabulated
    rho: Constant | Tabulated
    drift: TimeOnlyDrift | LinearMeanRevertingDrift | None = None
    rho_margin: float = DEFAULT_RHO_MARGIN
    _breaks: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "rho"):
            object.__setattr__(self, name, _as_function(getattr(self, name)))
        object.__setattr__(self, "rho_margin", float(self.rho_margin))
        if not 0.0 < self.rho_margin < 1.0:
            raise ContractError("rho_margin must lie in (0, 1)")
        breaks = np.unique(
            np.concatenate([self.sigma1.breakpoints, self.sigma2.breakpoints, self.rho.breakpoints])
        )
        breaks.flags.writeable = False
        object.__setattr__(self, "_breaks", breaks)
        # piecewise-linear functions attain their extremes at breakpoints
        s1, s2, r = self.sigma1(breaks), self.sigma2(breaks), self.rho(breaks)
        if np.any(s1 <= 0) or np.any(s2 <= 0):
            raise ContractError("volatilities must be strictly positive on [0, 1]")
        if np.any(np.abs(r) > 1.0 - self.rho_margin):
            raise ContractError(
                f"|rho| must not exceed 1 - rho_margin = {1.0 - self.rho_margin:g}"
            )

    @classmethod
    def constant(cls, sigma1, sigma2, rho, drift=None, rho_margin=DEFAULT_RHO_MARGIN):
        return cls(Constant(sigma1), Constant(sigma2), Constant(rho), drift, rho_margin)

    @property
    def is_constant(self):
        """True when sigma1, sigma2 and rho are all time-constant."""
        return self.sigma1.is_constant and self.sigma2.is_constant and self.rho.is_constant

    @property
    def has_constant_sigma(self):
        return self.sigma1.is_constant and self.sigma2.is_constant

    @property
    def breakpoints(self):
        """Union of the linearity breakpoints of sigma1, sigma2 and rho."""
        return self._breaks

    def without_drift(self):
        return CoefficientSpec(self.sigma1, self.sigma2, self.rho, None, self.rho_margin)

    # serialization -------------------------------------------------------

    def to_dict(self):
        return {
            "sigma1": self.sigma1.to_dict(),
            "sigma2": self.sigma2.to_dict(),
            "rho": self.rho.to_dict(),
            "drift": {"none": True} if self.drift is None else self.drift.to_dict(),
            "rho_margin": self.rho_margin,
        }

    @classmethod
    def from_dict(cls, doc):
        jsonschema.validate(doc, SPEC_SCHEMA)
        return cls(
            _function_from_dict(doc["sigma1"]),
            _function_from_dict(doc["sigma2"]),
            _function_from_dict(doc["rho"]),
            _drift_from_dict(doc.get("drift")),
            doc.get("rho_margin", DEFAULT_RHO_MARGIN),
        )

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# evaluation and quadrature
# ---------------------------------------------------------------------------


def evaluate(spec, t):
    """Return ``(sigma1, sigma2, rho)`` at time(s) ``t`` in [0, 1]."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0) or np.any(np.isnan(t_arr)):
        raise DomainError("t must lie in [0, 1]")
    return spec.sigma1(t), spec.sigma2(t), spec.rho(t)


#: integrand selectors, each a function of (sigma1, sigma2, rho)
INTEGRANDS: dict[str, Callable] = {
    "sigma1^2": lambda s1, s2, r: s1 * s1,
    "sigma2^2": lambda s1, s2, r: s2 * s2,
    "sigma1*sigma2*rho": lambda s1, s2, r: s1 * s2 * r,
    "sigma1^4": lambda s1, s2, r: s1**4,
    "sigma2^4": lambda s1, s2, r: s2**4,
    "sigma1^2*sigma2^2*rho^2": lambda s1, s2, r: (s1 * s2 * r) ** 2,
    "sigma1^3*sigma2*rho": lambda s1, s2, r: s1**3 * s2 * r,
    "sigma1*sigma2^3*rho": lambda s1, s2, r: s1 * s2**3 * r,
    "sigma1^2*sigma2^2*(1+rho^2)/2": lambda s1, s2, r: 0.5 * (s1 * s2) ** 2 * (1.0 + r * r),
}


def _cells(edges):
    edges = np.asarray(edges, dtype=float)
    return edges[:-1], edges[1:]


def gauss_legendre_nodes(lo, hi):
    """Order-8 Gauss-Legendre nodes and weights on every cell ``[lo_i, hi_i]``.

    Returns arrays of shape ``(len(lo), 8)``.
    """
    lo = np.asarray(lo, dtype=float)[:, None]
    hi = np.asarray(hi, dtype=float)[:, None]
    half = 0.5 * (hi - lo)
    return lo + half * (_GL_NODES + 1.0), half * _GL_WEIGHTS


def cell_edges(spec, s, u, extra=None):
    """Sorted cell boundaries of ``[s, u]`` refined by the spec's breakpoints."""
    pts = [np.array([s, u]), spec.breakpoints]
    if extra is not None:
        pts.append(np.asarray(extra, dtype=float))
    edges = np.unique(np.concatenate(pts))
    return edges[(edges >= s) & (edges <= u)]


def quadrature_rule(spec, s=0.0, u=1.0, extra=None):
    """Flattened quadrature nodes/weights for integrating smooth functions of
    the coefficients over ``[s, u]``.

    A constant spec collapses to the single node ``(s + u) / 2`` with weight
    ``u - s``, which is exact and avoids redundant work.
    """
    if spec.is_constant and extra is None:
        return np.array([0.5 * (s + u)]), np.array([u - s])
    lo, hi = _cells(cell_edges(spec, s, u, extra))
    t, w = gauss_legendre_nodes(lo, hi)
    return t.ravel(), w.ravel()


def integrate_coefficient(spec, selector, s=0.0, u=1.0):
    """Integrate one of the :data:`INTEGRANDS` over ``[s, u]``.

    Examples
    --------
    >>> spec = CoefficientSpec.constant(1.0, 1.0, 0.5)
    >>> integrate_coefficient(spec, "sigma1^2*sigma2^2*(1+rho^2)/2")
    0.625
    """
    if selector not in INTEGRANDS:
        raise ContractError(f"unknown integrand selector {selector!r}")
    if not 0.0 <= s <= 1.0 or not 0.0 <= u <= 1.0:
        raise DomainError("integration bounds must lie in [0, 1]")
    if s > u:
        raise DomainError(f"lower bound {s} exceeds upper bound {u}")
    if s == u:
        return 0.0
    f = INTEGRANDS[selector]
    if spec.is_constant:
        return float(f(spec.sigma1.value, spec.sigma2.value, spec.rho.value) * (u - s))
    t, w = quadrature_rule(spec, s, u)
    return float(np.dot(w, f(spec.sigma1(t), spec.sigma2(t), spec.rho(t))))


def integrate_time_function(fn, spec, s, u):
    """Integrate a Constant/Tabulated function of time over ``[s, u]``."""
    if fn.is_constant:
        return fn.value * (u - s)
    t, w = quadrature_rule(spec, s, u, extra=fn.breakpoints)
    return float(np.dot(w, fn(t)))


def interval_integrals(spec, n, integrand, extra=None):
    """Integrals of ``integrand(t)`` over each ``[(k-1)/n, k/n]``, vectorized.

    ``integrand`` receives an array of times.  Cells are the observation
    intervals refined by the spec's breakpoints (and ``extra``), so each
    piecewise-linear piece is integrated on its own.
    """
    grid = np.arange(n + 1) / n
    pts = [grid, spec.breakpoints]
    if extra is not None:
        pts.append(np.asarray(extra, dtype=float))
    edges = np.unique(np.concatenate(pts))
    lo, hi = _cells(edges)
    t, w = gauss_legendre_nodes(lo, hi)
    cell_values = (w * integrand(t)).sum(axis=1)
    # map each cell to its observation interval via the cell midpoint
    owner = np.minimum((0.5 * (lo + hi) * n).astype(np.int64), n - 1)
    return np.bincount(owner, weights=cell_values, minlength=n)


@dataclass(frozen=True)
class IncrementMoments:
    """Per-interval Gaussian moments of the martingale increments.

    Attributes
    ----------
    n : int
    a1, a2 : ndarray
        ``a_{l,k}``, integrated variance of asset l over interval k.
    vartheta : ndarray
        Integrated covariance over interval k.
    c : ndarray
        Correlation of the standardized increments, ``vartheta / sqrt(a1 a2)``.
    """

    n: int
    a1: np.ndarray
    a2: np.ndarray
    vartheta: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("a1", "a2", "vartheta", "c"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def covariance(self):
        """Increment covariance matrices, shape ``(n, 2, 2)``."""
        out = np.empty((self.n, 2, 2))
        out[:, 0, 0] = self.a1
        out[:, 1, 1] = self.a2
        out[:, 0, 1] = out[:, 1, 0] = self.vartheta
        return out


def interval_moments(spec, n):
    """Compute :class:`IncrementMoments` on the uniform grid ``t_k = k / n``."""
    n = int(n)
    if n < 1:
        raise DomainError("n must be a positive integer")
    if spec.is_constant:
        s1, s2, r = spec.sigma1.value, spec.sigma2.value, spec.rho.value
        a1 = np.full(n, s1 * s1 / n)
        a2 = np.full(n, s2 * s2 / n)
        vt = np.full(n, s1 * s2 * r / n)
    else:

        def moments(t):
            s1, s2, r = spec.sigma1(t), spec.sigma2(t), spec.rho(t)
            return s1 * s1, s2 * s2, s1 * s2 * r

        a1 = interval_integrals(spec, n, lambda t: moments(t)[0])
        a2 = interval_integrals(spec, n, lambda t: moments(t)[1])
        vt = interval_integrals(spec, n, lambda t: moments(t)[2])
    if np.any(a1 <= 0) or np.any(a2 <= 0):
        raise ConsistencyError("non-positive interval variance from a valid spec")
    c = vt / (np.sqrt(a1) * np.sqrt(a2))
    if np.any(np.abs(c) >= 1.0):
        raise ConsistencyError("interval correlation reached +-1")
    return IncrementMoments(n, a1, a2, vt, c)
