"""Exact-in-law simulation of synchronous observations of the model.

Martingale increments over each observation interval are centred Gaussian
with covariance ``[[a1_k, vartheta_k], [vartheta_k, a2_k]]`` (see
:func:`covol.coefficients.interval_moments`), so they are drawn exactly via a
2x2 Cholesky factor; there is no discretization bias for the diffusion part.
Time-only drift is added as its exact interval integral.  The
mean-reverting drift is integrated with an Euler scheme on ``m = 8``
substeps per observation interval, driven by exact sub-interval Gaussian
increments.

Seeding: every path is a pure function of ``(spec, n, seed)``.  Batched Monte
Carlo (``covol.montecarlo``) derives one child stream per fixed-size block of
paths from a root seed with :class:`numpy.random.SeedSequence`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .coefficients import integrate_time_function, interval_integrals, interval_moments
from .errors import ContractError, DomainError, TiltDomainError

EULER_SUBSTEPS = 8


def make_rng(seed, *spawn_key):
    """Generator for ``seed`` (a non-negative integer up to 64 bits).

    ``spawn_key`` selects an independent child stream, e.g. one per block.
    """
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ContractError("seed must be a non-negative 64-bit integer")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(spawn_key)))


@dataclass(frozen=True)
class SamplePath:
    """Observations of (X1, X2) on ``t_k = k / n``, ``k = 0..n``.

    ``martingale`` holds the pure diffusion increments (shape ``(n, 2)``).
    Simulated paths always carry it (without drift it equals the observed
    increments); paths read from CSV do not.
    """

    n: int
    x1: np.ndarray
    x2: np.ndarray
    seed: int | None = None
    martingale: np.ndarray | None = None

    def __post_init__(self):
        x1 = np.array(self.x1, dtype=float)
        x2 = np.array(self.x2, dtype=float)
        if x1.shape != (self.n + 1,) or x2.shape != (self.n + 1,):
            raise ContractError("x1 and x2 must both have n + 1 entries")
        for arr in (x1, x2):
            arr.flags.writeable = False
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        if self.martingale is not None:
            m = np.array(self.martingale, dtype=float)
            if m.shape != (self.n, 2):
                raise ContractError("martingale increments must have shape (n, 2)")
            m.flags.writeable = False
            object.__setattr__(self, "martingale", m)

    @property
    def times(self):
        return np.arange(self.n + 1) / self.n

    @property
    def increments(self):
        """Observed increments, shape ``(n, 2)``."""
        return np.column_stack([np.diff(self.x1), np.diff(self.x2)])

    def to_csv(self, fh):
        """Write ``t,x1,x2`` rows with 17 significant digits."""
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "x1", "x2"])
        for t, a, b in zip(self.times, self.x1, self.x2):
            writer.writerow([f"{t:.17g}", f"{a:.17g}", f"{b:.17g}"])

    @classmethod
    def from_csv(cls, fh, seed=None):
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["t", "x1", "x2"]:
            raise ContractError(f"expected header t,x1,x2, got {header}")
        rows = np.array([[float(v) for v in row] for row in reader if row])
        if rows.ndim != 2 or rows.shape[0] < 2:
            raise ContractError("a path needs at least two observations")
        n = rows.shape[0] - 1
        if not np.allclose(rows[:, 0], np.arange(n + 1) / n, rtol=0, atol=1e-12):
            raise ContractError("observation times must be the uniform grid k/n")
        return cls(n, rows[:, 1], rows[:, 2], seed)


@dataclass(frozen=True)
class TiltedSample:
    """A path drawn under the tilted law plus ``log(dP/dP_tilt)`` on it."""

    path: SamplePath
    log_weight: float


# ---------------------------------------------------------------------------
# batched kernels
# ---------------------------------------------------------------------------


def _cholesky_2x2(a1, a2, cov):
    l11 = np.sqrt(a1)
    l21 = cov / l11
    l22 = np.sqrt(np.maximum(a2 - l21 * l21, 0.0))
    return l11, l21, l22


def draw_increments(rng, l11, l21, l22, size):
    """Draw ``size`` paths of Gaussian increments with per-interval Cholesky
    factors; returns shape ``(size, n, 2)``."""
    z = rng.standard_normal((size, len(l11), 2))
    out = np.empty_like(z)
    out[..., 0] = l11 * z[..., 0]
    out[..., 1] = l21 * z[..., 0] + l22 * z[..., 1]
    return out


def martingale_factors(moments):
    """Cholesky factors of the untilted increment covariances."""
    return _cholesky_2x2(moments.a1, moments.a2, moments.vartheta)


def scaled_tilt(moments, lam):
    """Per-interval tilt acting on standardized increments, shape ``(n, 3)``:
    ``n * (lam1 a1_k, lam2 a2_k, lam3 sqrt(a1_k a2_k))``."""
    lam = np.asarray(lam, dtype=float)
    n = moments.n
    return np.column_stack(
        [
            n * lam[0] * moments.a1,
            n * lam[1] * moments.a2,
            n * lam[2] * np.sqrt(moments.a1 * moments.a2),
        ]
    )


def tilted_factors(moments, lam):
    """Cholesky factors of the exponentially tilted increment covariances.

    The tilted density of the standardized pair is proportional to
    ``exp(mu1 xi1^2 + mu2 xi2^2 + mu3 xi1 xi2)`` times the Gaussian density,
    i.e. Gaussian with precision ``C^{-1} - 2 L``.
    """
    # imported here to keep the module graph acyclic at import time
    from .ratefn.pointwise import in_domain

    mu = scaled_tilt(moments, lam)
    ok = in_domain(mu, moments.c)
    if not np.all(ok):
        k = int(np.flatnonzero(~ok)[0])
        raise TiltDomainError(
            f"tilt {tuple(np.asarray(lam, float))} leaves the domain on interval {k + 1}",
            interval=k + 1,
        )
    c = moments.c
    inv = 1.0 / (1.0 - c * c)
    p11 = inv - 2.0 * mu[:, 0]
    p22 = inv - 2.0 * mu[:, 1]
    p12 = -c * inv - mu[:, 2]
    det = p11 * p22 - p12 * p12
    s11, s22, s12 = p22 / det, p11 / det, -p12 / det
    r1, r2 = np.sqrt(moments.a1), np.sqrt(moments.a2)
    return _cholesky_2x2(s11 * r1 * r1, s22 * r2 * r2, s12 * r1 * r2)


def drift_increments_time_only(spec, n):
    """Exact interval integrals of a time-only drift, shape ``(n, 2)``."""
    drift = spec.drift
    out = np.empty((n, 2))
    for j, fn in enumerate((drift.b1, drift.b2)):
        if fn.is_constant:
            out[:, j] = fn.value / n
        else:
            out[:, j] = interval_integrals(spec, n, fn, extra=fn.breakpoints)
    return out


def simulate_block(spec, n, rng, size, x0=(0.0, 0.0), moments=None):
    """Simulate ``size`` paths at once.

    Returns
    -------
    dx : ndarray, shape (size, n, 2)
        Observed increments of X.
    dm : ndarray, shape (size, n, 2)
        Martingale increments (``dx`` itself when there is no drift).
    """
    drift = spec.drift
    if drift is None or not drift.state_dependent:
        if moments is None:
            moments = interval_moments(spec, n)
        dm = draw_increments(rng, *martingale_factors(moments), size)
        if drift is None:
            return dm, dm
        return dm + drift_increments_time_only(spec, n), dm

    m = EULER_SUBSTEPS
    fine = interval_moments(spec, n * m)
    dm_fine = draw_increments(rng, *martingale_factors(fine), size)
    dt = 1.0 / (n * m)
    x = np.empty((size, 2))
    x[:, 0], x[:, 1] = x0
    obs = np.empty((size, n + 1, 2))
    obs[:, 0] = x
    for j in range(n * m):
        b1, b2 = drift(j * dt, x[:, 0], x[:, 1])
        x[:, 0] += b1 * dt + dm_fine[:, j, 0]
        x[:, 1] += b2 * dt + dm_fine[:, j, 1]
        if (j + 1) % m == 0:
            obs[:, (j + 1) // m] = x
    dm = dm_fine.reshape(size, n, m, 2).sum(axis=2)
    return np.diff(obs, axis=1), dm


def _assemble(n, dx, dm, x0, seed):
    x = np.concatenate([np.asarray(x0, float)[None, :], np.asarray(x0, float) + np.cumsum(dx, axis=0)])
    if dm is None or dm is dx:
        # no drift: keep the martingale bit-identical to the observed increments
        dm = np.diff(x, axis=0)
    return SamplePath(n, x[:, 0], x[:, 1], seed, dm)


def _check_n(n):
    n = int(n)
    if n < 1:
        raise DomainError("n must be a positive integer")
    return n


def simulate_path(spec, n, seed, x0=(0.0, 0.0), stream=()):
    """Simulate one path of the model on the grid ``k / n``.

    The same ``(spec, n, seed, x0, stream)`` always gives a bit-identical
    path; ``stream`` selects an independent child stream of ``seed``.
    """
    n = _check_n(n)
    dx, dm = simulate_block(spec, n, make_rng(seed, *stream), 1, x0)
    return _assemble(n, dx[0], None if dm is dx else dm[0], x0, seed)


def simulate_tilted(spec, n, lam, seed, x0=(0.0, 0.0)):
    """Simulate one path under the law tilted by ``exp(n <lam, V_1^n>)``.

    ``log_weight = -n <lam, V_1^n(path)> + n Lambda_n(lam)`` so that
    ``E_tilt[exp(log_weight) 1_A] = P(A)`` for every event ``A``.

    Raises
    ------
    TiltDomainError
        If the scaled tilt leaves the effective domain on some interval; the
        exception carries the (1-based) interval index.
    """
    from .estimators import realized_vector
    from .ratefn.ldp import finite_n_cgf

    n = _check_n(n)
    if spec.drift is not None:
        raise ContractError("tilted sampling is only available without drift")
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (3,):
        raise ContractError("tilt must be a vector of three reals")
    moments = interval_moments(spec, n)
    rng = make_rng(seed)
    if not np.any(lam):
        dm = draw_increments(rng, *martingale_factors(moments), 1)[0]
        return TiltedSample(_assemble(n, dm, None, x0, seed), 0.0)
    dm = draw_increments(rng, *tilted_factors(moments, lam), 1)[0]
    path = _assemble(n, dm, None, x0, seed)
    v = realized_vector(path, 1.0)
    log_w = -n * (lam[0] * v.q1 + lam[1] * v.q2 + lam[2] * v.c) + n * finite_n_cgf(lam, spec, n)
    return TiltedSample(path, float(log_w))
