"""Realized (co-)volatility vector and the statistics derived from it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_paths, check_time
from .coefficients import integrate_coefficient
from .errors import ContractError, DegeneratePathError


@dataclass(frozen=True)
class RealizedVector:
    """``(Q1, Q2, C)``: realized variances and realized covariance."""

    q1: float
    q2: float
    c: float

    def as_array(self):
        return np.array([self.q1, self.q2, self.c])

    def __iter__(self):
        return iter((self.q1, self.q2, self.c))


@dataclass(frozen=True)
class RealizedTrajectory:
    """Step-function trajectory: ``values[k]`` sums the first k increments."""

    n: int
    values: np.ndarray  # shape (n + 1, 3)

    def __getitem__(self, k):
        return RealizedVector(*map(float, self.values[k]))

    def at(self, t):
        return self[_index(self.n, t)]


def _index(n, t):
    # [nt] with a guard against 0.3 * 10 = 2.9999999999999996
    return min(n, int(math.floor(n * check_time(t) + 1e-9)))


def _vector(dx, k):
    a, b = dx[:k, 0], dx[:k, 1]
    return RealizedVector(float(a @ a), float(b @ b), float(a @ b))


def realized_vector(path, t=1.0):
    """Sums of squared and cross increments over ``k = 1..[nt]``.

    >>> from covol.simulate import SamplePath
    >>> p = SamplePath(2, [0.0, 0.1, -0.1], [0.0, 0.3, 0.4])
    >>> v = realized_vector(p)
    >>> round(v.q1, 12), round(v.q2, 12), round(v.c, 12)
    (0.05, 0.1, 0.01)
    """
    return _vector(path.increments, _index(path.n, t))


def realized_trajectory(path):
    dx = path.increments
    vals = np.zeros((path.n + 1, 3))
    vals[1:, 0] = np.cumsum(dx[:, 0] ** 2)
    vals[1:, 1] = np.cumsum(dx[:, 1] ** 2)
    vals[1:, 2] = np.cumsum(dx[:, 0] * dx[:, 1])
    vals.flags.writeable = False
    return RealizedTrajectory(path.n, vals)


def drift_corrected_vector(path, t=1.0):
    """Realized vector of ``X - Y``, the path with its drift integral removed.

    Needs the martingale increments retained by the simulator, so paths
    read from CSV are rejected.
    """
    if path.martingale is None:
        raise ContractError(
            "path carries no martingale part (e.g. read from CSV); use realized_vector"
        )
    return _vector(path.martingale, _index(path.n, t))


def tilde_vector(path, spec, t=1.0):
    """Realized vector with each increment corrected by ``b(t_{k-1}, X_{k-1}) / n``."""
    if spec.drift is None:
        raise ContractError("spec has no drift; use realized_vector")
    n = path.n
    tk = np.arange(n) / n
    b1, b2 = spec.drift(tk, path.x1[:-1], path.x2[:-1])
    dx = path.increments - np.column_stack([np.broadcast_to(b1, (n,)), np.broadcast_to(b2, (n,))]) / n
    return _vector(dx, _index(n, t))


def realized_correlation(v):
    """``C / sqrt(Q1 Q2)``."""
    if v.q1 <= 0.0 or v.q2 <= 0.0:
        raise DegeneratePathError("realized correlation needs q1 > 0 and q2 > 0")
    return v.c / math.sqrt(v.q1 * v.q2)


def realized_beta(v, ell):
    """Realized regression coefficient ``C / Q_ell``."""
    if ell not in (1, 2):
        raise ContractError("ell must be 1 or 2")
    q = v.q1 if ell == 1 else v.q2
    if q <= 0.0:
        raise DegeneratePathError(f"realized beta{ell} needs q{ell} > 0")
    return v.c / q


def integrated_truth(spec, t=1.0):
    """Quadratic (co-)variation ``[V]_t`` of the model."""
    t = check_time(t)
    return RealizedVector(
        integrate_coefficient(spec, "sigma1^2", 0.0, t),
        integrate_coefficient(spec, "sigma2^2", 0.0, t),
        integrate_coefficient(spec, "sigma1*sigma2*rho", 0.0, t),
    )


# ---------------------------------------------------------------------------
# batch helpers used by the Monte Carlo layer
# ---------------------------------------------------------------------------


def realized_vectors(dx):
    """Realized vectors at t = 1 for a batch of increments ``(paths, n, 2)``."""
    a, b = dx[..., 0], dx[..., 1]
    return np.stack([np.einsum("ij,ij->i", a, a), np.einsum("ij,ij->i", b, b), np.einsum("ij,ij->i", a, b)], axis=-1)


STATISTICS = ("q1", "q2", "c", "correlation", "beta1", "beta2")


def statistic(v, name):
    """Column ``name`` from an array of realized vectors ``(..., 3)``.

    Ratio statistics of degenerate rows come out as nan rather than raising.
    """
    v = np.asarray(v, dtype=float)
    q1, q2, c = v[..., 0], v[..., 1], v[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        if name == "q1":
            return q1
        if name == "q2":
            return q2
        if name == "c":
            return c
        if name == "correlation":
            return c / np.sqrt(q1 * q2)
        if name == "beta1":
            return c / q1
        if name == "beta2":
            return c / q2
    raise ContractError(f"unknown statistic {name!r}; expected one of {STATISTICS}")


class RealizedCovolatility(TransformerMixin, BaseEstimator):
    """Transformer mapping observed paths to realized statistics.

    Parameters
    ----------
    t : float, default=1.0
        Horizon in [0, 1]; sums run over the first ``[n t]`` increments.
    statistics : tuple of str, default=("q1", "q2", "c")
        Columns to emit, any of ``q1, q2, c, correlation, beta1, beta2``.
    spec : CoefficientSpec or None
        Needed when ``correction="tilde"``.
    correction : {"none", "tilde"}
        ``"tilde"`` subtracts the known drift evaluated at the left endpoint
        of every interval before squaring.

    Input ``X`` is an array of log-price paths of shape ``(n_paths, n + 1, 2)``
    (a single ``(n + 1, 2)`` path is accepted too).
    """

    def __init__(self, t=1.0, statistics=("q1", "q2", "c"), spec=None, correction="none"):
        self.t = t
        self.statistics = statistics
        self.spec = spec
        self.correction = correction

    def fit(self, X, y=None):
        X = check_paths(X)
        check_time(self.t)
        for name in self.statistics:
            if name not in STATISTICS:
                raise ContractError(f"unknown statistic {name!r}")
        if self.correction not in ("none", "tilde"):
            raise ContractError("correction must be 'none' or 'tilde'")
        if self.correction == "tilde" and (self.spec is None or self.spec.drift is None):
            raise ContractError("correction='tilde' needs a spec with a drift")
        self.n_intervals_ = X.shape[1] - 1
        return self

    def transform(self, X):
        check_is_fitted(self, "n_intervals_")
        X = check_paths(X)
        n = X.shape[1] - 1
        if n != self.n_intervals_:
            raise ContractError(f"fitted on n={self.n_intervals_} intervals, got n={n}")
        dx = np.diff(X, axis=1)
        if self.correction == "tilde":
            tk = np.arange(n) / n
            b1, b2 = self.spec.drift(tk, X[:, :-1, 0], X[:, :-1, 1])
            dx = dx - np.stack(np.broadcast_arrays(b1, b2), axis=-1) / n
        k = _index(n, self.t)
        v = realized_vectors(dx[:, :k])
        return np.column_stack([statistic(v, s) for s in self.statistics])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.statistics, dtype=object)
