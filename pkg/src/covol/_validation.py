"""Input validation helpers."""

import math

import numpy as np
from sklearn.utils import check_array

from .errors import ContractError, DomainError


def check_time(t):
    """Return ``t`` as a float, raising :class:`DomainError` outside [0, 1]."""
    t = float(t)
    if not 0.0 <= t <= 1.0 or math.isnan(t):
        raise DomainError(f"t = {t} lies outside [0, 1]")
    return t


def check_paths(X):
    """Coerce observed paths to a float array of shape ``(n_paths, n + 1, 2)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[2] != 2:
        raise ContractError("paths must have shape (n_paths, n + 1, 2)")
    if X.shape[1] < 2:
        raise ContractError("a path needs at least two observations")
    check_array(X.reshape(X.shape[0], -1), ensure_all_finite=True)
    return X


def check_vector3(x, name="x"):
    """Coerce to a finite length-3 float vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise ContractError(f"{name} must have exactly three components")
    if not np.all(np.isfinite(x)):
        raise ContractError(f"{name} must be finite")
    return x


def check_correlation(c):
    c = float(c)
    if not abs(c) < 1.0:
        raise DomainError(f"correlation {c} must satisfy |c| < 1")
    return c


def check_gamma(gamma):
    """MDP exponent: ``b_n = n**gamma`` with ``0 < gamma < 1/2``."""
    gamma = float(gamma)
    if not 0.0 < gamma < 0.5:
        raise DomainError("the MDP exponent gamma must lie in (0, 1/2)")
    return gamma
