"""Acceptance battery: ten quantitative checks of the implementation.

Every check pairs a library computation with an independent route (Monte
Carlo, finite differences, dense linear algebra, exact distributions or a
separate optimizer) and compares them at a fixed tolerance.  ``level="full"``
uses the stated sample sizes; ``level="quick"`` shrinks the Monte Carlo
budgets so the whole battery runs in about a minute, at the price of a
larger sampling error against the same tolerances.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .coefficients import CoefficientSpec, LinearMeanRevertingDrift
from .estimators import RealizedCovolatility, integrated_truth
from .montecarlo import (
    TailQuery,
    chi_square_log_oracle,
    covariance_check,
    estimate_tail_naive,
    estimate_tail_tilted,
)
from .ratefn.derived import (
    beta_constraint,
    beta_mdp_rate,
    correlation_constraint,
    correlation_ldp_numeric,
    correlation_ldp_rate,
    correlation_mdp_rate,
)
from .ratefn.ldp import halfspace_infimum, ldp_rate, legendre_numeric
from .ratefn.mdp import MdpScale, mdp_rate, mdp_sigma1, sigma_t_det, sigma_t_inverse, sigma_t_matrix
from .ratefn.pointwise import cgf_pointwise, in_cone, in_domain, legendre_pointwise
from .simulate import make_rng, simulate_block

LEVELS = ("quick", "full")


@dataclass(frozen=True)
class CriterionResult:
    """Outcome of one acceptance check; ``value`` is compared with ``tolerance``."""

    number: int
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d} {self.name}: value={self.value:.6g} tolerance={self.tolerance:.6g}"

    def to_dict(self):
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "tolerance": self.tolerance,
            "detail": self.detail,
            "seconds": self.seconds,
        }


def _size(level, full, quick):
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    return full if level == "full" else quick


# 1 -------------------------------------------------------------------------


def check_conjugacy(level="full", seed=0, threads=None):
    """Newton conjugate of ``P_c`` against its closed form at random cone points."""
    m = _size(level, 1000, 200)
    rng = make_rng(seed, 1)
    worst = 0.0
    per_c = {}
    for c in (0.0, 0.5, -0.5, 0.9, -0.9):
        x1 = np.exp(rng.uniform(np.log(0.2), np.log(5.0), m))
        x2 = np.exp(rng.uniform(np.log(0.2), np.log(5.0), m))
        x3 = rng.uniform(-0.95, 0.95, m) * np.sqrt(x1 * x2)
        err = 0.0
        for x in np.column_stack([x1, x2, x3]):
            err = max(err, abs(legendre_numeric(x, c) - legendre_pointwise(x, c)))
        per_c[str(c)] = err
        worst = max(worst, err)
    return worst, 1e-5, {"points_per_c": m, "max_abs_error_per_c": per_c}


# 2 -------------------------------------------------------------------------


def _random_tilts(rng, count):
    out = []
    while len(out) < count:
        c = rng.uniform(-0.8, 0.8)
        lam = rng.uniform(-0.35, 0.35, 3) / (1.0 - c * c)
        # the estimator has finite variance only if 2 lam is in the domain too
        if in_domain(2.4 * lam, c):
            out.append((c, lam))
    return out


def check_mgf(level="full", seed=0, threads=None):
    """Closed-form ``P_c`` against Monte Carlo moment generating functions."""
    draws = _size(level, 10_000_000, 200_000)
    chunk = 1_000_000
    rng = make_rng(seed, 2)
    worst = 0.0
    rows = []
    for j, (c, lam) in enumerate(_random_tilts(rng, 20)):
        stream = make_rng(seed, 2, j + 1)
        s1 = s2 = 0.0
        done = 0
        while done < draws:
            k = min(chunk, draws - done)
            z = stream.standard_normal((k, 2))
            a = z[:, 0]
            b = c * z[:, 0] + math.sqrt(1.0 - c * c) * z[:, 1]
            y = np.exp(lam[0] * a * a + lam[1] * b * b + lam[2] * a * b)
            s1 += float(y.sum())
            s2 += float(y @ y)
            done += k
        mean = s1 / draws
        se = math.sqrt(max(s2 / draws - mean * mean, 0.0) / draws)
        exact = math.exp(cgf_pointwise(lam, c))
        z_score = abs(mean - exact) / se
        worst = max(worst, z_score)
        rows.append({"c": c, "lambda": lam.tolist(), "mc": mean, "exact": exact, "z": z_score})
    return worst, 3.0, {"draws": draws, "tilts": rows}


# 3 -------------------------------------------------------------------------


def check_derivatives_at_zero(level="full", seed=0, threads=None):
    """Finite differences of ``P_c`` at 0 against ``(1, 1, c)`` and the Hessian."""
    from .ratefn.pointwise import cgf_hessian_at_zero

    h1, h2 = 1e-6, 1e-4
    eye = np.eye(3)
    g_err = h_err = 0.0
    for c in np.linspace(-0.95, 0.95, 20):
        grad = np.array([(cgf_pointwise(h1 * e, c) - cgf_pointwise(-h1 * e, c)) / (2 * h1) for e in eye])
        g_err = max(g_err, float(np.max(np.abs(grad - [1.0, 1.0, c]))))
        hess = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                ei, ej = h2 * eye[i], h2 * eye[j]
                hess[i, j] = (
                    cgf_pointwise(ei + ej, c)
                    - cgf_pointwise(ei - ej, c)
                    - cgf_pointwise(-ei + ej, c)
                    + cgf_pointwise(-ei - ej, c)
                ) / (4 * h2 * h2)
        h_err = max(h_err, float(np.max(np.abs(hess - cgf_hessian_at_zero(c)))))
    passed = g_err <= 1e-6 and h_err <= 1e-5
    value = max(g_err / 1e-6, h_err / 1e-5)
    return value, 1.0, {"gradient_max_error": g_err, "hessian_max_error": h_err, "passed": passed}


# 4 -------------------------------------------------------------------------


def check_sigma_t(level="full", seed=0, threads=None):
    """Closed-form ``Sigma_t^{-1}`` and determinant against dense linear algebra."""
    rng = make_rng(seed, 4)
    inv_err = det_err = prod_err = 0.0
    for _ in range(100):
        s1, s2 = rng.uniform(0.5, 2.0, 2)
        r = rng.uniform(-0.9, 0.9)
        m = sigma_t_matrix(s1, s2, r)
        closed = sigma_t_inverse(s1, s2, r)
        dense = np.linalg.inv(m)
        inv_err = max(inv_err, float(np.max(np.abs(closed - dense)) / np.max(np.abs(dense))))
        prod_err = max(prod_err, float(np.max(np.abs(m @ closed - np.eye(3)))))
        det_err = max(det_err, abs(sigma_t_det(s1, s2, r) / np.linalg.det(m) - 1.0))
    value = max(inv_err, det_err, prod_err)
    return value, 1e-9, {
        "inverse_max_relative_error": inv_err,
        "product_identity_max_error": prod_err,
        "det_max_relative_error": det_err,
    }


# 5 -------------------------------------------------------------------------


def check_clt_covariance(level="full", seed=0, threads=None):
    """Sample covariance of ``sqrt(n)(V - [V])`` against the CLT matrix."""
    paths = _size(level, 100_000, 10_000)
    spec = CoefficientSpec.constant(1.0, 1.0, 0.5)
    res = covariance_check(spec, 1000, paths, seed=seed, threads=threads)
    worst = float(np.nanmax(np.abs(res.relative_error)))
    return worst, 0.05, {
        "paths": paths,
        "relative_error": res.relative_error.tolist(),
        "sample_covariance": res.sample_covariance.tolist(),
        "sigma1": res.sigma1.tolist(),
        "std_err": res.std_err.tolist(),
    }


# 6 -------------------------------------------------------------------------


def check_scalar_rate(level="full", seed=0, threads=None):
    """Exact chi-square tail rates converge to the scalar rate; the vector
    half-space infimum reproduces it."""
    target = 0.5 * (1.5 - 1.0 - math.log(1.5))
    rates = [-chi_square_log_oracle(1.5, n) / n for n in (500, 2000, 8000)]
    gaps = [r - target for r in rates]
    monotone = all(abs(b) < abs(a) for a, b in zip(gaps, gaps[1:]))
    spec = CoefficientSpec.constant(1.0, 1.0, 0.5)
    inf = halfspace_infimum(spec, "q1", 1.5, ">=")
    at_point = ldp_rate(inf.dominating_point, spec)
    lib_err = max(abs(inf.rate - target), abs(at_point - target))
    passed = monotone and abs(gaps[-1]) < 5e-3 and lib_err <= 1e-6
    return abs(gaps[-1]), 5e-3, {
        "oracle_rates": dict(zip(("500", "2000", "8000"), rates)),
        "target": target,
        "monotone": monotone,
        "library_infimum": inf.rate,
        "rate_at_dominating_point": at_point,
        "library_error": lib_err,
        "passed": passed,
    }


# 7 -------------------------------------------------------------------------


def check_tilted(level="full", seed=0, threads=None):
    """Tilted estimate of ``P(C >= 0.7)`` at n = 200 against the LDP infimum."""
    paths = _size(level, 100_000, 10_000)
    spec = CoefficientSpec.constant(1.0, 1.0, 0.5)
    est = estimate_tail_tilted(TailQuery("c", ">=", 0.7, 200, paths, seed), spec, threads)
    rel = abs(est.empirical_rate / est.predicted_rate - 1.0)
    passed = rel <= 0.10 and est.effective_sample_size >= 1e3
    return rel, 0.10, {
        "p_hat": est.p_hat,
        "std_err": est.std_err,
        "empirical_rate": est.empirical_rate,
        "predicted_rate": est.predicted_rate,
        "effective_sample_size": est.effective_sample_size,
        "tilt": list(est.tilt),
        "passed": passed,
    }


# 8 -------------------------------------------------------------------------


def _kkt_minimum(sigma, a, u):
    """Solve the KKT system of ``min 1/2 x' S^{-1} x  s.t.  a' x = u``."""
    prec = cho_solve(cho_factor(sigma), np.eye(3))
    kkt = np.zeros((4, 4))
    kkt[:3, :3] = prec
    kkt[:3, 3] = kkt[3, :3] = a
    sol = np.linalg.solve(kkt, np.array([0.0, 0.0, 0.0, u]))
    x = sol[:3]
    return 0.5 * x @ prec @ x


def check_derived_rates(level="full", seed=0, threads=None):
    """Closed-form derived-statistic rates against constrained minimization."""
    rng = make_rng(seed, 8)
    mdp_err = 0.0
    for _ in range(100):
        s1, s2 = rng.uniform(0.5, 2.0, 2)
        r = rng.uniform(-0.9, 0.9)
        u = rng.uniform(-1.0, 1.0)
        spec = CoefficientSpec.constant(s1, s2, r)
        sigma = np.array(mdp_sigma1(spec).sigma1_matrix)
        pairs = [(correlation_mdp_rate(u, spec), _kkt_minimum(sigma, correlation_constraint(spec), u))]
        for ell in (1, 2):
            pairs.append((beta_mdp_rate(u, ell, spec), _kkt_minimum(sigma, beta_constraint(ell, spec), u)))
        for closed, numeric in pairs:
            mdp_err = max(mdp_err, abs(closed - numeric) / max(1.0, abs(numeric)))
    ldp_err = 0.0
    for _ in range(20):
        s1, s2 = rng.uniform(0.5, 2.0, 2)
        r = rng.uniform(-0.8, 0.8)
        u = rng.uniform(-0.8, 0.8)
        spec = CoefficientSpec.constant(s1, s2, r)
        # start the search at the law-of-large-numbers point, not the answer
        num = correlation_ldp_numeric(u, spec, start=np.log([s1 * s1, s2 * s2])).rate
        ldp_err = max(ldp_err, abs(correlation_ldp_rate(u, spec) - num))
    passed = mdp_err <= 1e-10 and ldp_err <= 1e-5
    return max(mdp_err / 1e-10, ldp_err / 1e-5), 1.0, {
        "mdp_max_error": mdp_err,
        "ldp_max_error": ldp_err,
        "passed": passed,
    }


# 9 -------------------------------------------------------------------------


def check_mdp_correlation(level="full", seed=0, threads=None):
    """Naive estimate of a two-sided MDP correlation event against its rate."""
    paths = _size(level, 1_000_000, 100_000)
    n, gamma, rho = 400, 0.25, 0.5
    spec = CoefficientSpec.constant(1.0, 1.0, rho)
    speed = MdpScale(gamma).speed(n)
    k = correlation_mdp_rate(1.0, spec)
    # threshold (rescaled units) with predicted probability exp(-b_n^2 I) = 1e-3
    r = math.sqrt(math.log(1e3) / (speed * k))
    est = estimate_tail_naive(TailQuery("correlation", "abs>=", r, n, paths, seed, "mdp", gamma), spec, threads)
    rel = abs(est.empirical_rate / est.predicted_rate - 1.0)
    literal = 2.0 * r * r / (1.0 - rho * rho) ** 2
    return rel, 0.25, {
        "threshold_rescaled": r,
        "threshold_raw": r / MdpScale(gamma).normalization(n),
        "p_hat": est.p_hat,
        "std_err": est.std_err,
        "empirical_rate": est.empirical_rate,
        "predicted_rate": est.predicted_rate,
        "literal_closed_form_2r2_over_(1-rho2)2": literal,
        "literal_relative_gap": abs(est.empirical_rate / literal - 1.0),
    }


# 10 ------------------------------------------------------------------------


def check_drift(level="full", seed=0, threads=None):
    """Drift-corrected estimates converge; rates ignore the drift."""
    paths = _size(level, 2000, 400)
    drift = LinearMeanRevertingDrift((2.0, 3.0), (0.5, -0.5))
    spec = CoefficientSpec.constant(1.0, 1.0, 0.5, drift=drift)
    bare = spec.without_drift()
    truth = integrated_truth(spec).as_array()
    maes = {}
    for n in (100, 400, 1600):
        est = RealizedCovolatility(spec=spec, correction="tilde")
        errs = []
        block = 250
        for b, start in enumerate(range(0, paths, block)):
            size = min(block, paths - start)
            dx, _ = simulate_block(spec, n, make_rng(seed, 10, n, b), size)
            x = np.concatenate([np.zeros((size, 1, 2)), np.cumsum(dx, axis=1)], axis=1)
            errs.append(np.abs(est.fit_transform(x) - truth))
        maes[n] = float(np.mean(np.concatenate(errs)))
    decreasing = maes[100] > maes[400] > maes[1600]
    points = [truth * 1.2, np.array([1.5, 0.8, 0.3]), np.array([0.7, 1.1, 0.6])]
    diffs = [abs(ldp_rate(x, spec) - ldp_rate(x, bare)) for x in points]
    diffs += [abs(mdp_rate(x, spec) - mdp_rate(x, bare)) for x in points]
    diffs += [abs(correlation_ldp_rate(0.7, spec) - correlation_ldp_rate(0.7, bare))]
    unchanged = max(diffs) == 0.0
    passed = decreasing and unchanged
    return (0.0 if passed else 1.0), 0.0, {
        "mae": {str(k): v for k, v in maes.items()},
        "strictly_decreasing": decreasing,
        "rate_max_difference": max(diffs),
        "passed": passed,
    }


CRITERIA = (
    (1, "closed-form conjugacy", check_conjugacy),
    (2, "MGF correctness", check_mgf),
    (3, "gradient/Hessian anchors", check_derivatives_at_zero),
    (4, "Sigma_t inverse and determinant", check_sigma_t),
    (5, "CLT/MDP covariance", check_clt_covariance),
    (6, "scalar LDP rate via exact law", check_scalar_rate),
    (7, "tilted rare-event rate", check_tilted),
    (8, "derived-statistic rates", check_derived_rates),
    (9, "MDP empirical correlation rate", check_mdp_correlation),
    (10, "drift robustness", check_drift),
)


def run_criterion(number, level="full", seed=0, threads=None):
    for num, name, fn in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            value, tol, detail = fn(level, seed, threads)
            passed = detail.pop("passed", value <= tol)
            return CriterionResult(num, name, bool(passed), float(value), float(tol), detail, time.perf_counter() - t0)
    raise ValueError(f"no criterion {number}")


def run_battery(level="quick", seed=0, threads=None, only=None):
    numbers = [c[0] for c in CRITERIA] if only is None else list(only)
    return [run_criterion(k, level, seed, threads) for k in numbers]


# ---------------------------------------------------------------------------
# properties of a user-supplied spec
# ---------------------------------------------------------------------------


def spec_checks(spec):
    """Deterministic consistency checks of the rate functions for ``spec``."""
    from .ratefn.ldp import integrated_cgf_gradient

    out = {}
    truth = integrated_truth(spec).as_array()
    grad0 = integrated_cgf_gradient(np.zeros(3), spec)
    out["gradient_at_zero_matches_truth"] = bool(np.max(np.abs(grad0 - truth)) <= 1e-10)
    out["rate_zero_at_truth"] = bool(abs(ldp_rate(truth, spec)) <= 1e-9)
    sig = np.array(mdp_sigma1(spec).sigma1_matrix)
    out["sigma1_positive_definite"] = bool(np.all(np.linalg.eigvalsh(sig) > 0))
    v = np.array([0.3, -0.2, 0.1]) * np.abs(truth).max()
    h = 1e-3
    ratio = ldp_rate(truth + h * v, spec) / (h * h)
    quad = mdp_rate(v, spec)
    out["ldp_mdp_local_consistency"] = bool(abs(ratio / quad - 1.0) <= 0.01)
    out["truth_in_cone"] = bool(in_cone(truth))
    return out
