"""Monte Carlo verification of the deviation principles.

Tail probabilities of the realized vector (or of a derived statistic) are
estimated by plain simulation or, for half-space LDP events, by exponential
tilting at the dominating point.  Paths are generated in fixed-size blocks;
block ``b`` draws from the child stream ``SeedSequence(seed, spawn_key=(b,))``
and the block size depends on ``n`` only, so every estimate is a pure
function of the query and is independent of the number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaincc
from scipy.stats import chi2

from .coefficients import interval_moments
from .errors import ContractError, DomainError, UnsupportedHypothesisError
from .estimators import integrated_truth, realized_vectors, statistic
from .ratefn.derived import derived_rate
from .ratefn.ldp import CgfNodes, halfspace_infimum
from .ratefn.mdp import MdpScale, mdp_sigma1
from .simulate import draw_increments, make_rng, martingale_factors, simulate_block, tilted_factors

#: normal pairs per simulation block (memory bound, not a tuning knob for results)
BLOCK_DRAWS = 1 << 19
COMPONENTS = ("q1", "q2", "c", "correlation", "beta1", "beta2")
DIRECTIONS = (">=", "<=", "abs>=")
MIN_ESS = 10.0


def resolve_threads(threads=None):
    """``threads``, else ``$COVOL_THREADS``, else the machine's CPU count."""
    if threads is None:
        env = os.environ.get("COVOL_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    threads = int(threads)
    if threads < 1:
        raise ContractError("threads must be at least 1")
    return threads


def block_layout(n, paths):
    """Sizes of the simulation blocks for ``paths`` paths of ``n`` intervals."""
    per = max(1, BLOCK_DRAWS // n)
    full, rest = divmod(paths, per)
    return [per] * full + ([rest] if rest else [])


def _run_blocks(fn, n, paths, threads):
    sizes = block_layout(n, paths)
    jobs = list(enumerate(sizes))
    threads = min(resolve_threads(threads), max(1, len(jobs)))
    if threads == 1:
        return [fn(b, size) for b, size in jobs]
    with ThreadPoolExecutor(threads) as pool:
        # map preserves block order, so the reduction below is order-fixed
        return list(pool.map(lambda job: fn(*job), jobs))


# ---------------------------------------------------------------------------
# queries and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailQuery:
    """A tail event of the realized vector at t = 1.

    Parameters
    ----------
    component : str
        ``q1``, ``q2``, ``c``, ``correlation``, ``beta1`` or ``beta2``.
    direction : str
        ``">="``, ``"<="`` or ``"abs>="`` (two-sided, around the limit).
    threshold : float
        On the ``"ldp"`` scale the raw statistic is compared with it (for
        ``"abs>="`` its distance to the limit).  On the ``"mdp"`` scale the
        comparison is made for ``(sqrt(n) / b_n) (statistic - limit)``.
    n, paths, seed : int
    scale : {"ldp", "mdp"}
    gamma : float, optional
        MDP exponent, ``b_n = n**gamma``; required when ``scale="mdp"``.
    """

    component: str
    direction: str
    threshold: float
    n: int
    paths: int
    seed: int = 0
    scale: str = "ldp"
    gamma: float | None = None

    def __post_init__(self):
        if self.component not in COMPONENTS:
            raise ContractError(f"component must be one of {COMPONENTS}")
        if self.direction not in DIRECTIONS:
            raise ContractError(f"direction must be one of {DIRECTIONS}")
        if int(self.n) < 1 or int(self.paths) < 1:
            raise ContractError("n and paths must be positive")
        if self.scale not in ("ldp", "mdp"):
            raise ContractError("scale must be 'ldp' or 'mdp'")
        if self.scale == "mdp":
            if self.gamma is None:
                raise ContractError("an MDP query needs gamma")
            MdpScale(self.gamma)
        if self.direction == "abs>=" and self.threshold < 0:
            raise ContractError("a two-sided threshold must be non-negative")
        if not math.isfinite(self.threshold):
            raise ContractError("threshold must be finite")

    @property
    def speed(self):
        return float(self.n) if self.scale == "ldp" else MdpScale(self.gamma).speed(self.n)

    def to_dict(self):
        return {
            "component": self.component,
            "direction": self.direction,
            "threshold": self.threshold,
            "n": self.n,
            "paths": self.paths,
            "seed": self.seed,
            "scale": self.scale,
            "gamma": self.gamma,
        }


@dataclass(frozen=True)
class TailEstimate:
    """Probability estimate with its standard error and the rate comparison."""

    p_hat: float
    std_err: float
    effective_sample_size: float
    empirical_rate: float
    predicted_rate: float
    speed: float
    hits: int
    paths: int
    method: str
    tilt: tuple = (0.0, 0.0, 0.0)
    flags: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            "p_hat": self.p_hat,
            "std_err": self.std_err,
            "effective_sample_size": self.effective_sample_size,
            "empirical_rate": self.empirical_rate,
            "predicted_rate": self.predicted_rate,
            "speed": self.speed,
            "hits": self.hits,
            "paths": self.paths,
            "method": self.method,
            "tilt": list(self.tilt),
            "flags": list(self.flags),
        }


def _limit(component, spec):
    v = integrated_truth(spec, 1.0).as_array()
    return float(statistic(v, component))


def _event(query, spec):
    """Vectorized indicator of the event on realized vectors ``(m, 3)``."""
    limit = _limit(query.component, spec)
    if query.scale == "mdp":
        norm = MdpScale(query.gamma).normalization(query.n)
    a = query.threshold

    def indicator(v):
        s = statistic(v, query.component)
        if query.scale == "mdp":
            s = norm * (s - limit)
            centre = 0.0
        else:
            centre = limit
        with np.errstate(invalid="ignore"):
            if query.direction == ">=":
                hit = s >= a
            elif query.direction == "<=":
                hit = s <= a
            else:
                hit = np.abs(s - centre) >= a
        return hit & ~np.isnan(s)

    return indicator


def predicted_rate(query, spec):
    """Infimum of the relevant rate function over the query's event."""
    comp, a = query.component, query.threshold
    if query.scale == "mdp":
        if comp in ("q1", "q2", "c"):
            i = ("q1", "q2", "c").index(comp)
            var = mdp_sigma1(spec).sigma1_matrix[i, i]
            one_sided = 0.5 * a * a / var
        else:
            one_sided = derived_rate(comp, a, spec, "mdp").rate
        if query.direction == ">=" and a <= 0 or query.direction == "<=" and a >= 0:
            return 0.0
        return one_sided

    limit = _limit(comp, spec)
    if comp in ("q1", "q2", "c"):
        if query.direction == "abs>=":
            up = halfspace_infimum(spec, comp, limit + a, ">=").rate
            down = halfspace_infimum(spec, comp, limit - a, "<=").rate
            return min(up, down)
        return halfspace_infimum(spec, comp, a, query.direction).rate

    def rate_at(u):
        return derived_rate(comp, u, spec, "ldp").rate

    # rates of scalar statistics are convex with zero at the limit
    if query.direction == ">=":
        return 0.0 if a <= limit else rate_at(a)
    if query.direction == "<=":
        return 0.0 if a >= limit else rate_at(a)
    if a == 0:
        return 0.0
    return min(rate_at(limit + a), rate_at(limit - a))


def _finish(query, spec, p_hat, std_err, ess, hits, method, tilt=(0.0, 0.0, 0.0), flags=()):
    flags = list(flags)
    if hits == 0:
        flags.append("no hits: increase paths or use tilted sampling")
        emp = math.inf
    else:
        emp = -math.log(p_hat) / query.speed if p_hat > 0 else math.inf
    try:
        predicted = float(predicted_rate(query, spec))
    except UnsupportedHypothesisError as exc:
        predicted = math.nan
        flags.append(f"no predicted rate: {exc}")
    return TailEstimate(
        p_hat=float(p_hat),
        std_err=float(std_err),
        effective_sample_size=float(ess),
        empirical_rate=float(emp) + 0.0,
        predicted_rate=predicted,
        speed=query.speed,
        hits=int(hits),
        paths=int(query.paths),
        method=method,
        tilt=tuple(float(v) for v in tilt),
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def estimate_tail_naive(query, spec, threads=None):
    """Fraction of simulated paths in the event, with binomial standard error."""
    n = int(query.n)
    indicator = _event(query, spec)
    moments = interval_moments(spec, n)

    def block(b, size):
        dx, _ = simulate_block(spec, n, make_rng(query.seed, b), size, moments=moments)
        return int(np.count_nonzero(indicator(realized_vectors(dx))))

    hits = sum(_run_blocks(block, n, query.paths, threads))
    p = hits / query.paths
    se = math.sqrt(p * (1.0 - p) / query.paths)
    return _finish(query, spec, p, se, float(query.paths), hits, "naive")


def dominating_tilt(query, spec):
    """Dual maximizer at the dominating point of a half-space LDP event."""
    if query.scale != "ldp" or query.component not in ("q1", "q2", "c") or query.direction == "abs>=":
        raise ContractError("tilted sampling needs a one-sided LDP event on q1, q2 or c")
    return halfspace_infimum(spec, query.component, query.threshold, query.direction).tilt


def estimate_tail_tilted(query, spec, threads=None, tilt=None):
    """Importance-sampling estimate under the exponentially tilted law.

    ``p_hat = mean(w_i 1_A(V_i))`` with ``w = exp(-n <lam, V> + n Lambda_n(lam))``
    and ``lam`` the dominating tilt (or the given ``tilt``).  The effective
    sample size ``(sum w 1_A)^2 / sum (w 1_A)^2`` is computed over the
    contributing weights.
    """
    if spec.drift is not None:
        raise ContractError("tilted sampling is only available without drift")
    lam = dominating_tilt(query, spec) if tilt is None else np.asarray(tilt, dtype=float)
    if not np.any(lam):
        est = estimate_tail_naive(query, spec, threads)
        return TailEstimate(**{**est.to_dict(), "tilt": (0.0, 0.0, 0.0), "flags": est.flags, "method": "tilted"})
    n = int(query.n)
    moments = interval_moments(spec, n)
    factors = tilted_factors(moments, lam)  # raises with the offending interval
    log_norm = n * CgfNodes.from_moments(moments).value(lam)
    if not math.isfinite(log_norm):
        raise DomainError("tilt lies outside the domain of the finite-n CGF")
    indicator = _event(query, spec)

    def block(b, size):
        v = realized_vectors(draw_increments(make_rng(query.seed, b), *factors, size))
        w = np.exp(-n * (v @ lam) + log_norm) * indicator(v)
        return int(np.count_nonzero(w)), float(w.sum()), float(w @ w)

    parts = _run_blocks(block, n, query.paths, threads)
    hits = sum(p[0] for p in parts)
    s1 = math.fsum(p[1] for p in parts)
    s2 = math.fsum(p[2] for p in parts)
    m = query.paths
    p_hat = s1 / m
    var = max(s2 / m - p_hat * p_hat, 0.0)
    se = math.sqrt(var / m)
    ess = s1 * s1 / s2 if s2 > 0 else 0.0
    flags = []
    if ess < MIN_ESS:
        flags.append(f"effective sample size {ess:.3g} below {MIN_ESS:g}")
    return _finish(query, spec, p_hat, se, ess, hits, "tilted", lam, flags)


def estimate_tail(query, spec, method="auto", threads=None):
    """Dispatch: ``auto`` tilts one-sided LDP events on q1, q2, c when the
    spec has no drift and samples naively otherwise."""
    if method not in ("auto", "naive", "tilted"):
        raise ContractError("method must be auto, naive or tilted")
    if method == "auto":
        tiltable = (
            query.scale == "ldp"
            and query.component in ("q1", "q2", "c")
            and query.direction != "abs>="
            and spec.drift is None
        )
        method = "tilted" if tiltable else "naive"
    if method == "tilted":
        return estimate_tail_tilted(query, spec, threads)
    return estimate_tail_naive(query, spec, threads)


# ---------------------------------------------------------------------------
# oracles and checks
# ---------------------------------------------------------------------------


def chi_square_oracle(q, n, sigma=1.0, direction=">="):
    """Exact tail of ``Q1^n``: ``n Q1^n / sigma^2`` is chi-square with n dof.

    >>> round(chi_square_oracle(1.0, 2), 6)
    0.367879
    """
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    if direction not in (">=", "<="):
        raise ContractError("direction must be '>=' or '<='")
    x = n * q / (2.0 * sigma * sigma)
    if x <= 0:
        return 1.0 if direction == ">=" else 0.0
    return float(gammaincc(0.5 * n, x) if direction == ">=" else gammainc(0.5 * n, x))


def chi_square_log_oracle(q, n, sigma=1.0, direction=">="):
    """``log`` of :func:`chi_square_oracle`, accurate deep in the tails."""
    if direction == ">=":
        return float(chi2.logsf(n * q / sigma**2, n))
    return float(chi2.logcdf(n * q / sigma**2, n))


@dataclass(frozen=True)
class CovarianceCheck:
    """Sample covariance of ``sqrt(n)(V_1^n - [V]_1)`` against the CLT matrix."""

    relative_error: np.ndarray
    sample_covariance: np.ndarray
    sigma1: np.ndarray
    std_err: np.ndarray
    n: int
    paths: int

    def to_dict(self):
        return {
            "relative_error": np.where(np.isnan(self.relative_error), None, self.relative_error).tolist(),
            "sample_covariance": self.sample_covariance.tolist(),
            "sigma1": self.sigma1.tolist(),
            "std_err": self.std_err.tolist(),
            "n": self.n,
            "paths": self.paths,
        }


def covariance_check(spec, n, paths, seed=0, threads=None):
    """Entrywise ``cov / Sigma - 1`` (nan where ``|Sigma| <= 1e-12``)."""
    n, paths = int(n), int(paths)
    if paths < 2:
        raise ContractError("a covariance needs at least two paths")
    truth = integrated_truth(spec, 1.0).as_array()
    root = math.sqrt(n)
    moments = interval_moments(spec, n)

    def block(b, size):
        dx, _ = simulate_block(spec, n, make_rng(seed, b), size, moments=moments)
        y = root * (realized_vectors(dx) - truth)
        outer = y[:, :, None] * y[:, None, :]
        return y.sum(axis=0), outer.sum(axis=0), (outer * outer).sum(axis=0)

    parts = _run_blocks(block, n, paths, threads)
    s1 = np.sum([p[0] for p in parts], axis=0)
    s2 = np.sum([p[1] for p in parts], axis=0)
    s4 = np.sum([p[2] for p in parts], axis=0)
    mean = s1 / paths
    cov = (s2 - paths * np.outer(mean, mean)) / (paths - 1)
    # standard error of each entry from the fourth moments of y_i y_j
    m2 = s2 / paths
    se = np.sqrt(np.maximum(s4 / paths - m2 * m2, 0.0) / paths)
    sig = np.array(mdp_sigma1(spec).sigma1_matrix)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(np.abs(sig) > 1e-12, cov / sig - 1.0, np.nan)
    return CovarianceCheck(rel, cov, sig, se, n, paths)


@dataclass(frozen=True)
class CurvePoint:
    n: int
    empirical_rate: float
    predicted_rate: float
    p_hat: float
    std_err: float


def empirical_rate_curve(query, spec, n_list, method="auto", threads=None):
    """Empirical rates of ``query`` for each ``n`` in an increasing ``n_list``."""
    n_list = [int(v) for v in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ContractError("n_list must be strictly increasing")
    out = []
    for n in n_list:
        q = TailQuery(**{**query.to_dict(), "n": n})
        est = estimate_tail(q, spec, method, threads)
        out.append(CurvePoint(n, est.empirical_rate, est.predicted_rate, est.p_hat, est.std_err))
    return out
