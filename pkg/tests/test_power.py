import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdbf.exceptions import DegenerateDenominator, DimensionMismatch, ZeroSignal
from hdbf.power import (
    DesignSpec,
    PopulationSpec,
    are,
    are_case_one,
    are_case_two,
    are_lower_bound,
    drift_hu,
    drift_proposed,
    power_homogeneous,
    power_hu,
    power_proposed,
    solve_are_roots,
)


def std_normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2))


def loop_power(lams, means, traces, n, alpha, which):
    """Second evaluation path: plain loops over groups and ordered pairs."""
    from statistics import NormalDist

    k = len(lams)
    p = len(means[0])
    xi = NormalDist().inv_cdf(1 - alpha)
    if which == "proposed":
        center = [sum(lams[l] * means[l][j] for l in range(k)) for j in range(p)]
        signal = sum(lams[l] * sum((means[l][j] - center[j]) ** 2 for j in range(p)) for l in range(k))
        noise = sum((1 - lams[l]) ** 2 * traces[l][l] for l in range(k))
        noise += sum(lams[l] * lams[s] * traces[l][s] for l, s in itertools.permutations(range(k), 2))
        drift = math.sqrt(2) / 2 * n * signal / math.sqrt(noise)
    else:
        center = [sum(means[l][j] for l in range(k)) / k for j in range(p)]
        signal = sum((means[l][j] - center[j]) ** 2 for l in range(k) for j in range(p))
        noise = (k - 1) ** 2 * sum(traces[l][l] / lams[l] ** 2 for l in range(k))
        noise += sum(traces[l][s] / (lams[l] * lams[s]) for l, s in itertools.permutations(range(k), 2))
        drift = math.sqrt(2) / 2 * k * n * signal / math.sqrt(noise)
    return std_normal_cdf(-xi + drift)


def random_spec(rng, k=None, p=None, homogeneous=False, balanced=False, n=None, scale=0.05):
    k = k or int(rng.integers(2, 6))
    p = p or int(rng.integers(1, 8))
    lam = np.full(k, 1 / k) if balanced else rng.dirichlet(np.ones(k) * 2)
    lam = np.clip(lam, 0.02, None)
    lam = lam / lam.sum()
    covs = []
    for _ in range(k):
        a = rng.normal(size=(p, p))
        covs.append(a @ a.T + 0.5 * np.eye(p))
    if homogeneous:
        covs = [covs[0]] * k
    means = rng.normal(scale=scale, size=(k, p))
    n = n or float(rng.integers(20, 200))
    return DesignSpec(lam), PopulationSpec.from_covariances(means, covs, n)


class TestSpecs:
    @pytest.mark.parametrize("lam", [[0.5], [0.5, 0.6], [0.0, 1.0], [1.2, -0.2]])
    def test_invalid_design(self, lam):
        with pytest.raises(ValueError):
            DesignSpec(lam)

    def test_from_sizes(self):
        assert DesignSpec.from_sizes([20, 30, 50]).lambdas.tolist() == [0.2, 0.3, 0.5]

    def test_population_checks(self):
        with pytest.raises(DimensionMismatch):
            PopulationSpec(np.zeros((2, 3)), np.ones((3, 3)), 10)
        with pytest.raises(ValueError):
            PopulationSpec(np.zeros((2, 3)), [[1.0, 0.0], [0.0, -1.0]], 10)
        with pytest.raises(ValueError):
            PopulationSpec(np.zeros((2, 3)), [[1.0, 0.5], [0.2, 1.0]], 10)
        with pytest.raises(DimensionMismatch):
            PopulationSpec.from_covariances(np.zeros((2, 3)), [np.eye(2), np.eye(2)], 10)

    def test_design_population_mismatch(self):
        with pytest.raises(DimensionMismatch):
            power_proposed(DesignSpec([0.5, 0.5]), PopulationSpec.homogeneous(np.zeros((3, 2)), 1.0, 10))

    def test_degenerate_denominator(self):
        pop = PopulationSpec(np.array([[0.0], [1.0]]), [[1.0, -10.0], [-10.0, 1.0]], 10)
        with pytest.raises(DegenerateDenominator):
            power_proposed(DesignSpec([0.5, 0.5]), pop)
        with pytest.raises(DegenerateDenominator):
            power_hu(DesignSpec([0.5, 0.5]), pop)


class TestPower:
    def test_null_gives_alpha(self, rng):
        design, pop = random_spec(rng)
        null = PopulationSpec(np.ones_like(pop.means), pop.traces, pop.n)
        for alpha in (0.01, 0.05, 0.1):
            assert power_proposed(design, null, alpha) == pytest.approx(alpha, abs=1e-15)
            assert power_hu(design, null, alpha) == pytest.approx(alpha, abs=1e-15)

    @pytest.mark.parametrize("seed", range(20))
    def test_dual_evaluation(self, seed):
        rng = np.random.default_rng(seed)
        design, pop = random_spec(rng)
        args = (design.lambdas.tolist(), pop.means.tolist(), pop.traces.tolist(), pop.n, 0.05)
        assert power_proposed(design, pop) == pytest.approx(loop_power(*args, "proposed"), abs=1e-12)
        assert power_hu(design, pop) == pytest.approx(loop_power(*args, "hu"), abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_homogeneous_reduction(self, seed):
        rng = np.random.default_rng(seed)
        design, pop = random_spec(rng, homogeneous=True)
        tr = pop.traces[0, 0]
        assert power_homogeneous(design, pop.means, tr, pop.n) == pytest.approx(
            power_proposed(design, pop), abs=1e-12
        )

    def test_balanced_homogeneous_equal(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            design, pop = random_spec(rng, homogeneous=True, balanced=True)
            assert abs(power_proposed(design, pop) - power_hu(design, pop)) <= 1e-12
            assert are(design, pop) == pytest.approx(1.0, abs=1e-12)

    def test_are_orders_power(self):
        rng = np.random.default_rng(4)
        checked = 0
        for _ in range(300):
            design, pop = random_spec(rng, homogeneous=True, n=30, scale=0.02)
            a = are(design, pop)
            pp, ph = power_proposed(design, pop), power_hu(design, pop)
            if abs(a - 1) < 1e-9 or max(pp, ph) > 1 - 1e-12:
                continue
            assert (a > 1) == (pp > ph)
            assert a == pytest.approx(drift_proposed(design, pop) / drift_hu(design, pop), rel=1e-10)
            checked += 1
        assert checked > 200

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.001, 0.5))
    def test_power_range(self, seed, alpha):
        design, pop = random_spec(np.random.default_rng(seed))
        for f in (power_proposed, power_hu):
            v = f(design, pop, alpha)
            assert alpha - 1e-15 <= v <= 1.0
            assert 0.0 < v


class TestAre:
    @pytest.mark.parametrize("k", [3, 4, 6, 10])
    def test_case_one_balanced(self, k):
        assert are_case_one(DesignSpec(np.full(k, 1 / k))) == pytest.approx(1.0, abs=1e-12)

    def test_case_one_small_lambda(self):
        assert are_case_one(DesignSpec([0.01, 0.495, 0.495])) > 1

    @pytest.mark.parametrize("seed", range(10))
    def test_case_one_matches_general(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(3, 7))
        design = DesignSpec(rng.dirichlet(np.ones(k) * 3))
        means = np.zeros((k, 4))
        means[-1] = rng.normal(size=4)
        pop = PopulationSpec.homogeneous(means, 2.5, 100)
        assert are(design, pop) == pytest.approx(are_case_one(design), abs=1e-12)

    def test_lower_bound_plug_in(self):
        assert are_lower_bound(DesignSpec([0.25, 0.25, 0.5])) == pytest.approx(1.125, abs=1e-15)

    @pytest.mark.parametrize("k", [3, 4, 5])
    def test_lower_bound_above_one_inside_interval(self, k):
        for lk in np.linspace(1 / k, (k - 1) / k, 50)[1:-1]:
            rest = np.full(k - 1, (1 - lk) / (k - 1))
            assert are_lower_bound(DesignSpec(np.append(rest, lk))) > 1

    def test_lower_bound_below_case_one(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            k = int(rng.integers(3, 7))
            lam = rng.dirichlet(np.ones(k))
            lam = np.clip(lam, 1e-6, None)
            design = DesignSpec(lam / lam.sum())
            assert are_lower_bound(design) <= are_case_one(design) * (1 + 1e-12)

    def test_scale_invariance(self, rng):
        design, pop = random_spec(rng, homogeneous=True)
        for c in (-3.0, 0.1, 1e4):
            scaled = PopulationSpec(c * pop.means, pop.traces, pop.n)
            assert are(design, scaled) == pytest.approx(are(design, pop), rel=1e-12)

    def test_zero_signal(self):
        with pytest.raises(ZeroSignal):
            are(DesignSpec([0.2, 0.8]), PopulationSpec.homogeneous(np.ones((2, 3)), 1.0, 10))

    def test_needs_homogeneous(self, rng):
        design, pop = random_spec(rng, k=3)
        with pytest.raises(ValueError):
            are(design, pop)

    def test_case_two_plug_in(self):
        assert are_case_two(2.0, 1 / 6) == pytest.approx(2 * math.sqrt(0.625), rel=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-1e3, 1e3).filter(lambda t: abs(t) > 1e-6))
    def test_case_two_fixed_point(self, tau):
        assert are_case_two(tau, 1 / 3) == pytest.approx(1.0, abs=1e-12)

    def test_case_two_tau2_above_one_below_third(self):
        grid = np.linspace(1e-3, 1 / 3 - 1e-3, 200)
        assert np.all(are_case_two(2.0, grid) > 1)

    @pytest.mark.parametrize("tau", [-25.0, -1.0, 0.2, 0.7, 2.0, 12.0])
    @pytest.mark.parametrize("lam3", [0.1, 0.3, 0.6, 0.9])
    def test_case_two_matches_general(self, tau, lam3):
        design = DesignSpec([(1 - lam3) / 2, (1 - lam3) / 2, lam3])
        mu3 = np.array([0.3, -1.2, 0.8])
        pop = PopulationSpec.homogeneous(np.vstack([0 * mu3, tau * mu3, mu3]), 7.0, 50)
        assert are(design, pop) == pytest.approx(are_case_two(tau, lam3), rel=1e-12)


class TestRoots:
    def test_regimes(self):
        r = solve_are_roots(0.2).roots
        assert len(r) == 2 and r[0] < 1 / 3 and r[1] == 1 / 3
        assert solve_are_roots(2.0).roots == (1 / 3,)
        r = solve_are_roots(-25.0).roots
        assert len(r) == 2 and r[0] == 1 / 3 and r[1] > 1 / 3

    def test_roots_are_roots(self):
        for tau in (0.2, 0.5, -25.0, -5.0, 20.0):
            for r in solve_are_roots(tau).roots:
                assert abs(are_case_two(tau, r) - 1) < 1e-6

    def test_root_agrees_with_fine_grid(self):
        # independent check of the lower root by a dense scan
        x = np.linspace(1e-4, 1 / 3 - 1e-3, 400001)
        g = are_case_two(0.2, x) - 1
        i = np.nonzero(np.diff(np.sign(g)))[0]
        assert len(i) == 1
        assert solve_are_roots(0.2).roots[0] == pytest.approx(x[i[0]], abs=2e-6)

    def test_never_misses_one_third(self):
        taus = np.logspace(-3, 3, 60)
        for tau in np.concatenate([taus, -taus]):
            roots = solve_are_roots(float(tau)).roots
            assert any(abs(r - 1 / 3) <= 1e-8 for r in roots), tau

    def test_curve_grid(self):
        c = solve_are_roots(0.7)
        assert np.all(np.diff(c.lambda3) > 0)
        assert c.lambda3[0] > 0 and c.lambda3[-1] < 1
        i = np.argmin(np.abs(c.lambda3 - 1 / 3))
        assert c.are[i] == pytest.approx(1.0, abs=1e-9)

    def test_tau_zero(self):
        with pytest.raises(ValueError):
            solve_are_roots(0.0)
