import numpy as np
import pytest
from scipy import stats
from scipy.optimize import minimize

from ivdag.graphs import BipartiteEdges, CycleError, Digraph, HypothesisSet
from ivdag.inference import (
    classify,
    constrained_mle,
    lr_statistic,
    p_value,
    sub_dag_reduce,
)
from ivdag.inference import test_edges as run_edge_test
from ivdag.effects import estimate_effects
from ivdag.peeling import peel
from ivdag.precision import estimate_precision
from ivdag.simulate import DagSpec, gen_hub, sample, true_ancestral_arg


def small_confounded_spec(seed=0):
    u = np.zeros((4, 4))
    u[0, 1] = 1.0
    u[1, 2] = -0.8
    phi = np.array([[0.5, 0.5, 0.0, 0.5]])
    return DagSpec(p=4, q=8, r=1, u=u, w=np.vstack([np.eye(4), np.eye(4)]),
                   phi=phi, sigmas=np.full(4, 0.5), seed=seed)


class TestClassify:
    def test_degenerate(self):
        d, degen, reg = classify(Digraph.from_edges(2, [(1, 2)]),
                                 HypothesisSet.from_edges([(2, 1)]))
        assert len(d) == 0 and degen and reg

    def test_irregular(self):
        d, degen, reg = classify(Digraph.from_edges(2, []),
                                 HypothesisSet.from_edges([(1, 2), (2, 1)]))
        assert d.edges == ((1, 2), (2, 1)) and not degen and not reg

    def test_regular(self):
        eplus = Digraph.from_edges(4, [(1, 2), (2, 3), (1, 3)])
        d, degen, reg = classify(eplus, HypothesisSet.from_edges([(1, 4)]))
        assert d.edges == ((1, 4),) and not degen and reg


class TestSubDagReduce:
    def test_chain_pulls_in_ancestors(self):
        spec = small_confounded_spec()
        arg = true_ancestral_arg(spec)
        sub = sub_dag_reduce(arg, HypothesisSet.from_edges([(2, 3)]))
        assert sub.y_nodes == (1, 2, 3)

    def test_isolated_pair(self):
        arg_like = true_ancestral_arg(
            DagSpec(p=100, q=200, r=1, u=np.zeros((100, 100)),
                    w=np.vstack([np.eye(100), np.eye(100)]),
                    phi=np.zeros((1, 100)), sigmas=np.ones(100), seed=0))
        sub = sub_dag_reduce(arg_like, HypothesisSet.from_edges([(1, 2)]))
        assert sub.y_nodes == (1, 2)
        assert sub.x_nodes == (1, 2, 101, 102)

    def test_hub_pair(self):
        arg = true_ancestral_arg(gen_hub(0))
        sub = sub_dag_reduce(arg, HypothesisSet.from_edges([(1, 2)]))
        assert sub.y_nodes == (1, 2)
        # interventions into nodes 1 and 2: their private pairs plus the
        # invalid row hitting node 2 and the propagated entries of node 1
        assert 1 in sub.x_nodes and 102 in sub.x_nodes and 203 in sub.x_nodes

    def test_cyclic_union_rejected(self):
        spec = small_confounded_spec()
        arg = true_ancestral_arg(spec)
        with pytest.raises(CycleError):
            sub_dag_reduce(arg, HypothesisSet.from_edges([(2, 1)]))


class TestConstrainedMle:
    def test_identity_precision_decouples_to_ols(self):
        spec = small_confounded_spec(seed=1)
        data = sample(spec, 300)
        u_support = [(1, 2)]
        i_support = [(1, 1), (5, 1), (2, 2), (6, 2)]
        fit = constrained_mle(data.y, data.x, u_support, i_support, np.eye(4))
        design = np.vstack([data.y[0], data.x[1], data.x[5]]).T
        ols, *_ = np.linalg.lstsq(design, data.y[1], rcond=None)
        assert fit.u[0, 1] == pytest.approx(ols[0], abs=1e-8)
        assert fit.w[1, 1] == pytest.approx(ols[1], abs=1e-8)

    def test_empty_supports_closed_form(self):
        spec = small_confounded_spec(seed=2)
        data = sample(spec, 200)
        omega = np.linalg.inv(spec.error_covariance())
        fit = constrained_mle(data.y, data.x, [], [], omega)
        quad = np.sum(data.y * (omega @ data.y))
        expect = -0.5 * quad + 0.5 * 200 * np.linalg.slogdet(omega)[1]
        assert fit.loglik == pytest.approx(expect, rel=1e-12)

    def test_matches_generic_optimizer(self):
        rng = np.random.default_rng(3)
        for rep in range(5):
            spec = small_confounded_spec(seed=10 + rep)
            data = sample(spec, 150)
            omega = np.linalg.inv(spec.error_covariance())
            u_support = [(1, 2), (2, 3)]
            i_support = [(l, j) for j in range(1, 5) for l in (j, j + 4)]
            fit = constrained_mle(data.y, data.x, u_support, i_support, omega)

            def negloglik(theta):
                u = np.zeros((4, 4))
                u[0, 1], u[1, 2] = theta[0], theta[1]
                w = np.zeros((8, 4))
                for pos, (l, j) in enumerate(i_support):
                    w[l - 1, j - 1] = theta[2 + pos]
                e = data.y - u.T @ data.y - w.T @ data.x
                return 0.5 * np.sum(e * (omega @ e))

            x0 = np.zeros(2 + len(i_support))
            res = minimize(negloglik, x0, method="BFGS",
                           options={"gtol": 1e-10, "maxiter": 2000})
            best = -res.fun + 0.5 * data.n * np.linalg.slogdet(omega)[1]
            assert fit.loglik == pytest.approx(best, abs=1e-6)
            assert fit.loglik >= best - 1e-6  # ours is the exact maximizer

    def test_cyclic_support_rejected(self):
        spec = small_confounded_spec(seed=4)
        data = sample(spec, 100)
        with pytest.raises(CycleError):
            constrained_mle(data.y, data.x, [(1, 2), (2, 1)], [], np.eye(4))


class TestStatistic:
    def test_small_set_doubling(self):
        assert lr_statistic(10.0, 6.4, 2) == pytest.approx(7.2)

    def test_large_set_standardized(self):
        assert lr_statistic(42.0, 0.0, 72) == pytest.approx(1.0)

    def test_zero_gap(self):
        assert lr_statistic(5.0, 5.0, 1) == 0.0

    def test_ordering_violation_raises(self):
        with pytest.raises(ValueError):
            lr_statistic(0.0, 1.0, 1)

    def test_tiny_negative_gap_clamped(self):
        assert lr_statistic(1.0, 1.0 + 4e-9, 1) == 0.0


class TestPValue:
    def test_chi2_quantile(self):
        assert p_value(3.84, 1) == pytest.approx(0.05, abs=5e-4)

    def test_zero_statistic(self):
        assert p_value(0.0, 3) == 1.0

    def test_normal_regime(self):
        assert p_value(1.0, 72) == pytest.approx(0.1587, abs=5e-4)

    def test_monotone_in_t(self):
        ts = np.linspace(0, 10, 25)
        for d in (1, 3, 60):
            ps = [p_value(t, d) for t in ts]
            assert (np.diff(ps) <= 0).all()


class TestTestEdges:
    def _pipeline(self, seed=0, n=600):
        spec = small_confounded_spec(seed=seed)
        data = sample(spec, n)
        arg = peel(data)
        fitted = estimate_effects(data, arg, "recovery")
        omega = estimate_precision(fitted.residuals)
        return spec, data, arg, fitted, omega

    def test_degenerate_hypothesis(self):
        spec, data, arg, fitted, omega = self._pipeline()
        report = run_edge_test(data, arg, fitted, omega, HypothesisSet.from_edges([(2, 1)]))
        assert report.degenerate and report.p_value == 1.0
        assert report.statistic is None and not report.reject

    def test_true_edge_rejected_strongly(self):
        spec, data, arg, fitted, omega = self._pipeline(seed=1)
        report = run_edge_test(data, arg, fitted, omega, HypothesisSet.from_edges([(1, 2)]))
        assert report.regular and report.reject
        assert report.p_value < 1e-6
        assert report.reference.kind == "chi_squared" and report.reference.df == 1

    def test_absent_edge_not_rejected(self):
        spec, data, arg, fitted, omega = self._pipeline(seed=2)
        report = run_edge_test(data, arg, fitted, omega, HypothesisSet.from_edges([(3, 4)]))
        assert report.p_value > 0.01

    def test_null_loglik_never_exceeds_alternative(self):
        for seed in range(5):
            spec, data, arg, fitted, omega = self._pipeline(seed=seed, n=300)
            report = run_edge_test(data, arg, fitted, omega,
                                HypothesisSet.from_edges([(1, 4), (3, 4)]))
            assert report.loglik_alt >= report.loglik_null - 1e-8

    def test_statistic_invariant_to_edge_order(self):
        spec, data, arg, fitted, omega = self._pipeline(seed=3)
        h1 = HypothesisSet.from_edges([(1, 4), (3, 4)])
        h2 = HypothesisSet.from_edges([(3, 4), (1, 4)])
        r1 = run_edge_test(data, arg, fitted, omega, h1)
        r2 = run_edge_test(data, arg, fitted, omega, h2)
        assert r1.statistic == pytest.approx(r2.statistic, rel=1e-9)

    def test_irregular_decomposition(self):
        spec, data, arg, fitted, omega = self._pipeline(seed=4)
        h = HypothesisSet.from_edges([(3, 4), (4, 3)])
        report = run_edge_test(data, arg, fitted, omega, h)
        assert not report.regular and not report.degenerate
        assert report.decomposition is not None and len(report.decomposition) == 2
        worst = min(r.p_value for r in report.decomposition)
        assert report.p_value == pytest.approx(min(1.0, 2 * worst))

    def test_none_omega_reestimates(self):
        spec, data, arg, fitted, omega = self._pipeline(seed=5)
        r1 = run_edge_test(data, arg, fitted, None, HypothesisSet.from_edges([(3, 4)]))
        assert 0.0 <= r1.p_value <= 1.0

    def test_alpha_validated(self):
        spec, data, arg, fitted, omega = self._pipeline(seed=6, n=300)
        with pytest.raises(ValueError):
            run_edge_test(data, arg, fitted, omega, HypothesisSet.from_edges([(3, 4)]), alpha=1.5)

    def test_report_serializes(self):
        import json
        spec, data, arg, fitted, omega = self._pipeline(seed=7, n=300)
        report = run_edge_test(data, arg, fitted, omega, HypothesisSet.from_edges([(3, 4)]))
        text = json.dumps(report.to_dict(), sort_keys=True)
        assert '"p_value"' in text


class TestCalibrationQuick:
    def test_null_statistic_roughly_chi_squared(self):
        # known graph and precision: T should track chi-squared(2)
        spec = small_confounded_spec(seed=8)
        arg = true_ancestral_arg(spec)
        omega = np.linalg.inv(spec.error_covariance())
        h = HypothesisSet.from_edges([(1, 4), (2, 4)])
        d, _, _ = classify(arg.eplus, h)
        sub = sub_dag_reduce(arg, d)
        y_idx = [v - 1 for v in sub.y_nodes]
        x_idx = [l - 1 for l in sub.x_nodes]
        om_sub = np.linalg.inv(spec.error_covariance()[np.ix_(y_idx, y_idx)])
        d_local = frozenset((sub.y_map[k], sub.y_map[j]) for k, j in d.edges)
        ts = []
        for rep in range(400):
            data = sample(spec, 250, seed=5000 + rep)
            ys, xs = data.y[y_idx], data.x[x_idx]
            m0 = constrained_mle(ys, xs, sub.eplus_sub.edges - d_local,
                                 sub.iplus_sub.edges, om_sub)
            m1 = constrained_mle(ys, xs, sub.eplus_sub.edges | d_local,
                                 sub.iplus_sub.edges, om_sub)
            ts.append(lr_statistic(m1.loglik, m0.loglik, len(d)))
        ks = stats.kstest(ts, stats.chi2(len(d)).cdf)
        assert ks.statistic <= 0.08
