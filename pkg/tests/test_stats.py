import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from hdbf.core import GroupedData
from hdbf.exceptions import DimensionMismatch, GroupTooSmall, NonPositiveVariance
from hdbf.stats import (
    ALL_METHODS,
    TestMethod,
    VarianceMethod,
    bs_from_moments,
    critical_value,
    cross_traces,
    decide,
    evaluate_methods,
    martingale_decompose,
    null_variance_T,
    oracle_expected_T,
    oracle_var_T,
    run_test,
    run_tests,
    sigma_hat,
    sigma_hat_H,
    statistic_T,
    statistic_TCH,
    statistic_TS,
    tr_sigma2_bs,
    tr_sigma2_split,
    trace_matrix,
)

import oracles
from conftest import rel_close


class TestHandValues:
    def test_statistics(self, hand_instance):
        assert statistic_T(hand_instance) == pytest.approx(4.0, abs=1e-14)
        assert statistic_TCH(hand_instance) == pytest.approx(4.0, abs=1e-14)
        assert statistic_TS(hand_instance) == pytest.approx(4.0, abs=1e-14)

    def test_zero_data(self):
        d = GroupedData([np.zeros((5, 3)), np.zeros((6, 3))])
        assert statistic_T(d) == 0 and statistic_TCH(d) == 0 and statistic_TS(d) == 0

    def test_identical_observations_give_zero_TS(self):
        d = GroupedData([np.ones((3, 2)), np.ones((4, 2)), np.ones((2, 2))])
        assert statistic_TS(d) == 0

    def test_null_variance_hand(self):
        assert null_variance_T([2, 2], [[1.0, 1.0], [1.0, 1.0]]) == pytest.approx(3.0, rel=1e-14)

    def test_expected_T_hand(self):
        assert oracle_expected_T([[0.0], [1.0]], [2, 2]) == pytest.approx(1.0, rel=1e-14)
        assert oracle_expected_T([[3.0, 1.0]] * 3, [4, 5, 6]) == 0.0

    def test_var_T_null_branch(self):
        covs = [np.eye(2), 2 * np.eye(2)]
        v = oracle_var_T([[1.0, 1.0], [1.0, 1.0]], [3, 5], covs)
        assert v == null_variance_T([3, 5], trace_matrix(covs))

    def test_bs_plug_in(self):
        assert bs_from_moments(10.0, 4.0, 5) == pytest.approx(16 / 3, rel=1e-14)

    def test_oracle_dimension_checks(self):
        with pytest.raises(DimensionMismatch):
            oracle_expected_T([[0.0], [1.0]], [2, 2, 2])
        with pytest.raises(DimensionMismatch):
            oracle_var_T([[0.0], [1.0]], [2, 2], [np.eye(2), np.eye(2)])


class TestAgainstNaiveLoops:
    @pytest.mark.parametrize("seed", range(15))
    def test_all_quantities(self, seed):
        rng = np.random.default_rng(seed)
        d = oracles.random_small(rng)
        assert rel_close(statistic_T(d), oracles.naive_T(d), 1e-10)
        assert rel_close(statistic_TCH(d), oracles.naive_TCH(d), 1e-10)
        assert rel_close(statistic_TS(d), oracles.naive_TS(d), 1e-10)
        for g in d.groups:
            assert rel_close(tr_sigma2_split(g), oracles.naive_split_trace(g.tolist()), 1e-10)
            assert rel_close(tr_sigma2_bs(g), oracles.naive_bs_trace(g.tolist()), 1e-10)
        assert rel_close(sigma_hat(d, "split").value, oracles.naive_sigma2_T(d, oracles.naive_split_trace), 1e-10)
        assert rel_close(sigma_hat(d, "bs").value, oracles.naive_sigma2_T(d, oracles.naive_bs_trace), 1e-10)
        assert rel_close(sigma_hat_H(d).value, oracles.naive_sigma2_H(d), 1e-10)

    def test_cross_traces_symmetric_zero_diagonal(self, rng):
        d = oracles.random_small(rng, kmax=4)
        c = cross_traces(d)
        assert np.all(np.diag(c) == 0)
        np.testing.assert_array_equal(c, c.T)

    def test_split_trace_direct(self, rng):
        g = rng.normal(size=(5, 2))
        s1 = np.cov(g[:3].T)
        s2 = np.cov(g[3:].T)
        assert rel_close(tr_sigma2_split(g), np.trace(s1 @ s2), 1e-12)

    def test_stubbed_trace_expansion(self):
        # k=2 balanced, hand expansion of the bracketed sums with given traces
        from hdbf.stats import _hu_variance, _proposed_variance

        sizes = [6, 6]
        tr = np.array([2.0, 3.0])
        cross = np.array([[0.0, 1.5], [1.5, 0.0]])
        n = 12
        by_hand = 2 / n**2 * (6 * 36 / 5 * 2 + 6 * 36 / 5 * 3 + 2 * 36 * 1.5)
        assert _proposed_variance(sizes, tr, cross) == pytest.approx(by_hand, rel=1e-14)
        by_hand_h = 2 * 1 * (2 / 30 + 3 / 30) + 2 * 2 * 1.5 / 36
        assert _hu_variance(sizes, tr, cross) == pytest.approx(by_hand_h, rel=1e-14)


class TestStructure:
    @pytest.mark.parametrize("seed", range(10))
    def test_two_group_proportionality(self, seed):
        rng = np.random.default_rng(100 + seed)
        d = oracles.random_small(rng, kmax=2, nmax=9)
        n1, n2 = d.sizes
        assert rel_close(statistic_T(d), n1 * n2 / (n1 + n2) * statistic_TCH(d), 1e-10)

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_balanced_t2_equals_th(self, rng, k):
        d = GroupedData([rng.normal(size=(7, 4)) + l for l in range(k)])
        res = run_tests(d)
        assert rel_close(statistic_T(d), 7 / k * statistic_TCH(d), 1e-10)
        assert rel_close(res[TestMethod.T2HAT].z, res[TestMethod.THHAT].z, 1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_scale_equivariance(self, seed, c):
        d = oracles.random_small(np.random.default_rng(seed))
        scaled = d.map(lambda g: c * g)
        assert rel_close(statistic_T(scaled), c**2 * statistic_T(d), 1e-8)
        assert rel_close(sigma_hat(scaled).value, c**4 * sigma_hat(d).value, 1e-8)
        r0, r1 = run_tests(d), run_tests(scaled)
        for m in ALL_METHODS:
            assert abs(r0[m].z - r1[m].z) <= 1e-8 * max(1.0, abs(r0[m].z))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        d = oracles.random_small(rng)
        q, _ = np.linalg.qr(rng.normal(size=(d.p, d.p)))
        rot = d.map(lambda g: g @ q)
        for f in (statistic_T, statistic_TCH):
            assert rel_close(f(rot), f(d), 1e-8)
        for g0, g1 in zip(d.groups, rot.groups):
            assert rel_close(tr_sigma2_split(g1), tr_sigma2_split(g0), 1e-8)
            assert rel_close(tr_sigma2_bs(g1), tr_sigma2_bs(g0), 1e-8)
        assert rel_close(sigma_hat(rot, "split").value, sigma_hat(d, "split").value, 1e-8)
        assert rel_close(sigma_hat(rot, "bs").value, sigma_hat(d, "bs").value, 1e-8)
        assert rel_close(sigma_hat_H(rot).value, sigma_hat_H(d).value, 1e-8)


class TestMartingale:
    def test_zero_data(self):
        m = martingale_decompose(GroupedData([np.zeros((3, 2)), np.zeros((4, 2))]))
        assert np.all(m.eta == 0) and m.total == 0

    def test_hand(self, hand_instance):
        assert martingale_decompose(hand_instance).total == pytest.approx(4.0, abs=1e-14)

    @pytest.mark.parametrize("seed", range(10))
    def test_identity(self, seed):
        d = oracles.random_small(np.random.default_rng(seed), nmin=2)
        m = martingale_decompose(d)
        t = statistic_T(d)
        assert abs(m.total - t) <= 1e-10 * (1 + abs(t))
        assert rel_close(m.total, oracles.naive_martingale_total(d), 1e-10)
        assert m.increments[0] == 0
        assert np.all(np.tril(m.eta) == 0)
        assert [len(b) for b in m.blocks] == d.sizes.tolist()


class TestDecisions:
    def test_boundary_inclusive(self):
        xi = critical_value(0.05)
        assert xi == pytest.approx(1.6448536269514722, abs=1e-12)
        res = decide(xi, 1.0, 0.05, "t1")
        assert res.z == xi and res.reject

    def test_just_below_boundary(self):
        xi = critical_value(0.05)
        assert not decide(np.nextafter(xi, 0), 1.0, 0.05, "t1").reject

    @pytest.mark.parametrize("alpha", [1e-6, 0.01, 0.05, 0.5, 0.9])
    def test_critical_value_matches_scipy(self, alpha):
        assert critical_value(alpha) == pytest.approx(sps.norm.isf(alpha), abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 2.0])
    def test_bad_alpha(self, alpha):
        with pytest.raises(ValueError):
            critical_value(alpha)

    def test_p_value(self, rng):
        d = oracles.random_small(rng)
        for m, r in run_tests(d).items():
            assert r.p_value == pytest.approx(sps.norm.sf(r.z), rel=1e-12, abs=1e-300)
            assert r.sigma > 0 and r.method is m
            assert r.as_dict()["method"] == m.value

    def test_identical_groups_do_not_reject(self, rng):
        g = rng.normal(size=(12, 6))
        res = run_test(GroupedData([g, g.copy()]), "t1")
        assert not res.reject

    def test_constant_groups(self):
        d = GroupedData([np.ones((6, 3)), 2 * np.ones((5, 3))])
        with pytest.raises(NonPositiveVariance):
            sigma_hat(d, VarianceMethod.SPLIT_HALF)
        with pytest.raises(NonPositiveVariance):
            sigma_hat(d, VarianceMethod.BAI_SARANADASA)
        with pytest.raises(NonPositiveVariance):
            sigma_hat_H(d)
        out = evaluate_methods(d)
        assert all(isinstance(v, NonPositiveVariance) for v in out.values())
        with pytest.raises(NonPositiveVariance):
            run_test(d, "t2")

    def test_group_size_minima(self, rng):
        d = GroupedData([rng.normal(size=(4, 2)), rng.normal(size=(6, 2))])
        with pytest.raises(GroupTooSmall):
            sigma_hat(d, "split")
        sigma_hat(d, "bs")
        out = evaluate_methods(d)
        assert isinstance(out[TestMethod.T1HAT], GroupTooSmall)
        assert not isinstance(out[TestMethod.T2HAT], Exception)
        with pytest.raises(GroupTooSmall):
            tr_sigma2_bs(np.zeros((2, 3)))


class TestEstimatorMoments:
    def test_split_unbiased_identity(self):
        rng = np.random.default_rng(7)
        vals = np.array([tr_sigma2_split(rng.standard_normal((200, 20))) for _ in range(2000)])
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - 20) <= 3 * se

    def test_bs_unbiased_gaussian(self):
        rng = np.random.default_rng(8)
        scale = np.sqrt([1.0, 2.0])
        vals = np.array([tr_sigma2_bs(rng.standard_normal((500, 2)) * scale) for _ in range(2000)])
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - 5) <= 3 * se

    def test_ratio_consistency_model1(self):
        from hdbf.sim import Model1Config, gen_model1, population_covariances, replication_rng

        cfg = Model1Config(200, (20, 30, 50), innovation="normal")
        target = null_variance_T(cfg.sizes, trace_matrix(population_covariances(cfg)))
        th, ratios = [], []
        for r in range(2000):
            d = gen_model1(cfg, replication_rng(11, r))
            ratios.append(sigma_hat(d).value / target)
            th.append(statistic_TCH(d) / np.sqrt(sigma_hat_H(d).value))
        assert 0.9 <= np.mean(ratios) <= 1.1
        assert 0.8 <= np.var(th, ddof=1) <= 1.2
