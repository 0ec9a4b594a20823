import warnings

import numpy as np
import pytest

from ivdag.config import Hyperparams, PIPELINE_DEFAULTS
from ivdag.precision import (
    estimate_precision,
    neighborhood_select,
    refit_precision,
)
from ivdag.simulate import gen_hub


def sample_residuals(rng, omega, n):
    sigma = np.linalg.inv(omega)
    return np.linalg.cholesky(sigma) @ rng.standard_normal((omega.shape[0], n))


def random_sparse_precision(rng, p, pairs):
    omega = np.eye(p) * rng.uniform(1.5, 2.5)
    chosen = rng.choice(p * (p - 1) // 2, size=pairs, replace=False)
    idx = [(i, j) for i in range(p) for j in range(i + 1, p)]
    for c in chosen:
        i, j = idx[c]
        v = rng.uniform(0.35, 0.6) * rng.choice([-1.0, 1.0])
        omega[i, j] = omega[j, i] = v
    # ensure diagonal dominance keeps it positive definite
    omega += np.eye(p) * max(0.0, 0.1 - np.linalg.eigvalsh(omega)[0])
    return omega


class TestNeighborhoodSelect:
    def test_independent_residuals_select_nothing(self):
        rng = np.random.default_rng(0)
        empties = 0
        for _ in range(100):
            resid = rng.standard_normal((10, 1000)) * rng.uniform(0.5, 1.5, (10, 1))
            if not neighborhood_select(resid):
                empties += 1
        assert empties >= 95

    def test_strong_pair_found(self):
        rng = np.random.default_rng(1)
        cov = np.array([[1.0, 0.9], [0.9, 1.0]])
        resid = np.linalg.cholesky(cov) @ rng.standard_normal((2, 500))
        assert neighborhood_select(resid) == {(1, 2), (2, 1)}

    def test_confounded_blocks_recall(self):
        # hub-style error structure: one latent factor per 10-node block.
        # A rank-one factor spread over ten nodes leaves each pair a small
        # conditional signal at n=500 (chi-square noncentrality about 5), so
        # recall is far from one there and climbs toward one as n grows.
        def mean_recall(n, reps):
            recalls = []
            for seed in range(reps):
                spec = gen_hub(seed)
                rng = np.random.default_rng(1000 + seed)
                sigma = spec.error_covariance()
                resid = np.linalg.cholesky(sigma) @ rng.standard_normal((spec.p, n))
                support = neighborhood_select(resid)
                truth = {(i + 1, j + 1) for i in range(spec.p) for j in range(spec.p)
                         if i != j and abs(sigma[i, j]) > 1e-12}
                recalls.append(len(support & truth) / len(truth))
            return float(np.mean(recalls))

        assert mean_recall(500, 8) >= 0.40
        assert mean_recall(8000, 3) >= 0.90

    def test_small_sample_cap_warns(self):
        # one node driven by eight independent factors, each observed noisily:
        # its selected neighborhood wants all eight, beyond the n/4 cap
        rng = np.random.default_rng(2)
        n = 20
        factors = rng.standard_normal((8, n))
        resid = np.vstack([factors + 0.05 * rng.standard_normal((8, n)),
                           factors.sum(axis=0) + 0.05 * rng.standard_normal((1, n))])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            support = neighborhood_select(resid, PIPELINE_DEFAULTS.with_overrides(dim_penalty=0.0))
        assert any("cap" in str(w.message) for w in caught)


class TestRefit:
    def test_empty_support_gives_diagonal(self):
        rng = np.random.default_rng(3)
        resid = rng.standard_normal((4, 300)) * np.array([[1.0], [2.0], [0.5], [1.5]])
        est = refit_precision(resid, frozenset())
        centered = resid - resid.mean(axis=1, keepdims=True)
        target = 1.0 / np.diag(centered @ centered.T / 300)
        assert np.allclose(np.diag(est.omega), target, rtol=1e-6)
        off = est.omega - np.diag(np.diag(est.omega))
        assert np.abs(off).max() == 0.0

    def test_full_support_matches_inverse_covariance(self):
        rng = np.random.default_rng(4)
        resid = rng.standard_normal((2, 400))
        est = refit_precision(resid, {(1, 2), (2, 1)})
        centered = resid - resid.mean(axis=1, keepdims=True)
        s = centered @ centered.T / 400
        assert np.allclose(est.omega, np.linalg.inv(s), atol=1e-8)

    def test_recovers_sparse_truth(self):
        rng = np.random.default_rng(5)
        omega = random_sparse_precision(rng, 10, 6)
        resid = sample_residuals(rng, omega, 5000)
        support = {(i + 1, j + 1) for i in range(10) for j in range(10)
                   if i != j and omega[i, j] != 0}
        est = refit_precision(resid, support)
        assert np.linalg.norm(est.omega - omega) <= 0.2

    def test_always_positive_definite(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            omega = random_sparse_precision(rng, 8, 5)
            resid = sample_residuals(rng, omega, 60)
            est = estimate_precision(resid)
            assert est.min_eigenvalue > 0
            assert np.allclose(est.omega, est.omega.T)

    def test_zero_pattern_respected(self):
        rng = np.random.default_rng(7)
        omega = random_sparse_precision(rng, 8, 4)
        resid = sample_residuals(rng, omega, 800)
        support = {(1, 2), (2, 1), (3, 4), (4, 3)}
        est = refit_precision(resid, support)
        floor = 1e-8 * np.trace(est.omega) / 8
        for i in range(8):
            for j in range(8):
                if i != j and (i + 1, j + 1) not in support:
                    assert abs(est.omega[i, j]) <= floor + 1e-12

    def test_objective_monotone(self):
        rng = np.random.default_rng(8)
        omega = random_sparse_precision(rng, 9, 6)
        resid = sample_residuals(rng, omega, 400)
        est = estimate_precision(resid)
        diffs = np.diff(est.objective_history)
        assert (diffs >= -1e-9).all()

    def test_asymmetric_support_rejected(self):
        resid = np.random.default_rng(9).standard_normal((3, 100))
        with pytest.raises(ValueError):
            refit_precision(resid, {(1, 2)})

    def test_singular_covariance_ridged(self):
        rng = np.random.default_rng(10)
        base = rng.standard_normal((2, 50))
        resid = np.vstack([base, base[0] + base[1]])  # rank 2 of 3
        est = refit_precision(resid, frozenset())
        assert est.ridged
        assert est.min_eigenvalue > 0

    def test_error_shrinks_with_sample_size(self):
        rng = np.random.default_rng(11)
        omega = random_sparse_precision(rng, 10, 6)
        support = {(i + 1, j + 1) for i in range(10) for j in range(10)
                   if i != j and omega[i, j] != 0}
        medians = []
        for n in (500, 2000, 8000):
            errs = []
            for rep in range(7):
                resid = sample_residuals(np.random.default_rng(100 * n + rep), omega, n)
                est = refit_precision(resid, support)
                errs.append(np.linalg.norm(est.omega - omega))
            medians.append(np.median(errs))
        assert medians[0] > medians[1] > medians[2]
