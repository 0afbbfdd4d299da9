import math

import numpy as np
import pytest
from sklearn.base import clone

from covol.coefficients import CoefficientSpec, LinearMeanRevertingDrift, Tabulated
from covol.errors import ContractError, DegeneratePathError, DomainError
from covol.estimators import (
    RealizedCovolatility,
    RealizedVector,
    drift_corrected_vector,
    integrated_truth,
    realized_beta,
    realized_correlation,
    realized_trajectory,
    realized_vector,
    tilde_vector,
)
from covol.simulate import SamplePath, simulate_block, simulate_path, make_rng


def test_hand_example():
    p = SamplePath(2, [0.0, 0.1, -0.1], [0.0, 0.3, 0.4])
    v = realized_vector(p)
    np.testing.assert_allclose(v.as_array(), [0.05, 0.1, 0.01], atol=1e-15)


def test_partial_horizon():
    p = SamplePath(4, [0.0, 1.0, 1.0, 3.0, 3.0], [0.0, 1.0, 2.0, 2.0, 0.0])
    np.testing.assert_array_equal(realized_vector(p, 0.5).as_array(), [1.0, 2.0, 1.0])
    np.testing.assert_array_equal(realized_vector(p, 0.0).as_array(), [0.0, 0.0, 0.0])
    # 0.3 * 10 is 2.9999999999999996 in floating point
    q = SamplePath(10, np.arange(11.0), np.zeros(11))
    assert realized_vector(q, 0.3).q1 == 3.0


def test_time_out_of_range():
    with pytest.raises(DomainError):
        realized_vector(SamplePath(1, [0, 1], [0, 1]), 1.5)


def test_trajectory_matches_vector(unit_half):
    p = simulate_path(unit_half, 30, seed=0)
    tr = realized_trajectory(p)
    for t in (0.0, 0.2, 0.5, 1.0):
        np.testing.assert_allclose(tr.at(t).as_array(), realized_vector(p, t).as_array(), rtol=1e-13)
    assert np.all(np.diff(tr.values[:, 0]) >= 0)


def test_ratios():
    v = RealizedVector(4.0, 1.0, 1.0)
    assert realized_correlation(v) == 0.5
    assert realized_beta(v, 1) == 0.25
    assert realized_beta(v, 2) == 1.0
    with pytest.raises(DegeneratePathError):
        realized_correlation(RealizedVector(0.0, 1.0, 0.0))
    with pytest.raises(ContractError):
        realized_beta(v, 3)


def test_cauchy_schwarz(unit_half):
    v = realized_vector(simulate_path(unit_half, 100, seed=1))
    assert v.c**2 <= v.q1 * v.q2


def test_integrated_truth(varying):
    t = integrated_truth(CoefficientSpec(Tabulated((1.0, 3.0)), 2.0, 0.5))
    assert t.q1 == pytest.approx(13 / 3)
    assert t.q2 == pytest.approx(4.0)
    assert t.c == pytest.approx(0.5 * 2 * 2.0)


def test_law_of_large_numbers(varying):
    v = realized_vector(simulate_path(varying, 20_000, seed=9)).as_array()
    truth = integrated_truth(varying).as_array()
    np.testing.assert_allclose(v, truth, atol=0.05)


def test_drift_free_correction_identical(unit_half):
    p = simulate_path(unit_half, 40, seed=3)
    assert drift_corrected_vector(p) == realized_vector(p)


def test_csv_path_has_no_martingale():
    with pytest.raises(ContractError):
        drift_corrected_vector(SamplePath(1, [0, 1], [0, 1]))


def test_tilde_needs_drift(unit_half):
    with pytest.raises(ContractError):
        tilde_vector(simulate_path(unit_half, 5, seed=0), unit_half)


def test_tilde_closer_than_raw():
    spec = CoefficientSpec.constant(1.0, 1.0, 0.0, drift=LinearMeanRevertingDrift((20.0, 20.0), (0.0, 0.0)))
    errs_raw, errs_tilde = [], []
    for s in range(40):
        p = simulate_path(spec, 200, seed=s, x0=(3.0, -3.0))
        exact = drift_corrected_vector(p).as_array()
        errs_raw.append(abs(realized_vector(p).q1 - exact[0]))
        errs_tilde.append(abs(tilde_vector(p, spec).q1 - exact[0]))
    assert np.mean(errs_tilde) < np.mean(errs_raw)


class TestTransformer:
    def _paths(self, spec, n=25, size=6):
        dx, _ = simulate_block(spec, n, make_rng(0), size)
        return np.concatenate([np.zeros((size, 1, 2)), np.cumsum(dx, axis=1)], axis=1)

    def test_matches_function(self, unit_half):
        X = self._paths(unit_half)
        out = RealizedCovolatility(statistics=("q1", "q2", "c", "correlation")).fit_transform(X)
        for row, path in zip(out, X):
            v = realized_vector(SamplePath(25, path[:, 0], path[:, 1]))
            np.testing.assert_allclose(row[:3], v.as_array(), rtol=1e-13)
            assert row[3] == pytest.approx(realized_correlation(v))

    def test_single_path(self, unit_half):
        X = self._paths(unit_half)[0]
        assert RealizedCovolatility().fit_transform(X).shape == (1, 3)

    def test_clone_and_params(self):
        est = RealizedCovolatility(t=0.5, statistics=("beta1",))
        assert clone(est).get_params()["t"] == 0.5
        np.testing.assert_array_equal(est.get_feature_names_out(), ["beta1"])

    def test_unfitted(self, unit_half):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            RealizedCovolatility().transform(self._paths(unit_half))

    def test_wrong_n(self, unit_half):
        est = RealizedCovolatility().fit(self._paths(unit_half, n=25))
        with pytest.raises(ContractError):
            est.transform(self._paths(unit_half, n=30))

    @pytest.mark.parametrize(
        "kwargs", [{"statistics": ("bogus",)}, {"correction": "other"}, {"correction": "tilde"}, {"t": 2.0}]
    )
    def test_bad_params(self, unit_half, kwargs):
        with pytest.raises((ContractError, DomainError)):
            RealizedCovolatility(**kwargs).fit(self._paths(unit_half))

    def test_nonfinite_rejected(self, unit_half):
        X = self._paths(unit_half)
        X[0, 3, 1] = math.nan
        with pytest.raises(ValueError):
            RealizedCovolatility().fit(X)

    def test_tilde_correction(self):
        spec = CoefficientSpec.constant(1.0, 1.0, 0.0, drift=LinearMeanRevertingDrift((2.0, 3.0), (0.5, -0.5)))
        p = simulate_path(spec, 50, seed=1, x0=(0.1, 0.2))
        X = np.column_stack([p.x1, p.x2])
        out = RealizedCovolatility(spec=spec, correction="tilde").fit_transform(X)[0]
        np.testing.assert_allclose(out, tilde_vector(p, spec).as_array(), rtol=1e-12)
