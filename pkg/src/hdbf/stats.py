"""k-sample mean tests for high-dimensional data with unequal covariances.

Three standardized statistics are provided:

``T1hat``
    ``T / sigma_hat`` with each ``tr(Sigma_l^2)`` estimated by the trace of the
    product of the two split-half covariances of group ``l``.
``T2hat``
    ``T / sigma_tilde`` with the Bai-Saranadasa type estimator of
    ``tr(Sigma_l^2)``.
``THhat``
    The competing ``T_CH / sigma_tilde_H`` statistic, which weights every group
    equally instead of by sample size.

All tests are one-sided: ``H0`` is rejected when the z-score is at least the
upper-``alpha`` standard normal quantile.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .core import MIN_SPLIT_SIZE, GroupedData, centered, gram_trace_product, scatter_matrices, split_sizes
from .exceptions import DimensionMismatch, GroupTooSmall, NonPositiveVariance


class VarianceMethod(str, enum.Enum):
    SPLIT_HALF = "split"
    BAI_SARANADASA = "bs"


class TestMethod(str, enum.Enum):
    T1HAT = "t1"
    T2HAT = "t2"
    THHAT = "th"

    __test__ = False  # not a pytest class


ALL_METHODS = (TestMethod.T1HAT, TestMethod.T2HAT, TestMethod.THHAT)


@dataclass(frozen=True, eq=False)
class VarianceEstimate:
    """Variance estimate of a raw statistic.

    ``group_traces[l]`` is the estimate of ``tr(Sigma_l^2)``; ``cross_traces``
    is a symmetric ``k x k`` array of ``tr(S_l S_s)`` with a zero diagonal.
    """

    value: float
    method: VarianceMethod
    group_traces: np.ndarray
    cross_traces: np.ndarray


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    statistic: float
    sigma: float
    z: float
    p_value: float
    reject: bool
    alpha: float
    method: TestMethod

    def as_dict(self) -> dict:
        return {
            "method": self.method.value,
            "statistic": self.statistic,
            "sigma": self.sigma,
            "z": self.z,
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
        }


@dataclass(frozen=True, eq=False)
class MartingaleDecomposition:
    """``T`` written as a sum over the concatenated sample sequence.

    ``eta`` is ``n x n`` and holds ``eta_ij`` on the strict upper triangle
    (``i < j``); ``increments[j]`` is ``D_j = sum_{i<j} eta_ij`` for the
    0-based position ``j`` (so ``increments[0] == 0``).
    """

    eta: np.ndarray
    increments: np.ndarray
    blocks: tuple
    total: float


# ---------------------------------------------------------------------------
# raw statistics


def _pair_sums(data: GroupedData):
    """Per group: ``sum_{i != j} X_li' X_lj`` and the group sum vector."""
    inner, sums = [], []
    for g in data.groups:
        s = g.sum(axis=0)
        sums.append(s)
        inner.append(float(s @ s) - float(np.sum(g * g)))
    return np.array(inner), np.array(sums)


def statistic_TS(data: GroupedData) -> float:
    """``tr(E2) - tr(E1)``, the MANOVA trace statistic."""
    e1, e2 = scatter_matrices(data)
    return float(np.trace(e2) - np.trace(e1))


def statistic_T(data: GroupedData) -> float:
    """Sample-size weighted statistic ``T`` with the diagonal ``X'X`` terms removed."""
    sizes = data.sizes.astype(float)
    n = sizes.sum()
    inner, sums = _pair_sums(data)
    within = np.sum((n - sizes) / (n * (sizes - 1)) * inner)
    total = sums.sum(axis=0)
    # sum over ordered pairs l != s of n_l n_s xbar_l' xbar_s = ||sum s_l||^2 - sum ||s_l||^2
    cross = (float(total @ total) - float(np.sum(sums * sums))) / n
    return float(within - cross)


def statistic_TCH(data: GroupedData) -> float:
    """Equal-weight statistic ``T_CH`` of the competing test."""
    sizes = data.sizes.astype(float)
    k = data.k
    inner, sums = _pair_sums(data)
    means = sums / sizes[:, None]
    within = (k - 1) * np.sum(inner / (sizes * (sizes - 1)))
    total = means.sum(axis=0)
    cross = float(total @ total) - float(np.sum(means * means))
    return float(within - cross)


# ---------------------------------------------------------------------------
# trace estimators


def tr_sigma2_split(group) -> float:
    """Estimate ``tr(Sigma^2)`` by ``tr(S_first S_second)`` over the two row halves.

    Unbiased because the halves are independent. Needs at least 5 rows so that the second half has two.
    """
    x = np.asarray(group, dtype=float)
    n_l = x.shape[0]
    if n_l < MIN_SPLIT_SIZE:
        raise GroupTooSmall(f"split-half trace estimator needs n_l >= {MIN_SPLIT_SIZE}, got {n_l}")
    n1, n2 = split_sizes(n_l)
    y1, y2 = centered(x[:n1]), centered(x[n1:])
    return gram_trace_product(y1, y2) / ((n1 - 1) * (n2 - 1))


def tr_sigma2_bs(group) -> float:
    """Bai-Saranadasa type estimate of ``tr(Sigma^2)`` from the full-sample covariance."""
    x = np.asarray(group, dtype=float)
    n_l = x.shape[0]
    if n_l < 3:
        raise GroupTooSmall(f"Bai-Saranadasa trace estimator needs n_l >= 3, got {n_l}")
    y = centered(x)
    tr_s2 = gram_trace_product(y, y) / (n_l - 1) ** 2
    tr_s = float(np.sum(y * y)) / (n_l - 1)
    return bs_from_moments(tr_s2, tr_s, n_l)


def bs_from_moments(tr_s2: float, tr_s: float, n_l: int) -> float:
    """The Bai-Saranadasa correction applied to ``tr(S^2)`` and ``tr(S)``."""
    c = (n_l - 1) ** 2 / ((n_l + 1) * (n_l - 2))
    return c * (tr_s2 - tr_s**2 / (n_l - 1))


def cross_traces(data: GroupedData) -> np.ndarray:
    """Symmetric matrix of ``tr(S_l S_s)`` for ``l != s`` (zero diagonal)."""
    ys = [centered(g) for g in data.groups]
    sizes = data.sizes
    k = data.k
    out = np.zeros((k, k))
    for l in range(k):
        for s in range(l + 1, k):
            v = gram_trace_product(ys[l], ys[s]) / ((sizes[l] - 1) * (sizes[s] - 1))
            out[l, s] = out[s, l] = v
    return out


def _proposed_variance(sizes, group_traces, cross) -> float:
    sizes = np.asarray(sizes, dtype=float)
    n = sizes.sum()
    own = np.sum(sizes * (n - sizes) ** 2 / (sizes - 1) * group_traces)
    pair = float(sizes @ cross @ sizes)  # ordered pairs, cross has zero diagonal
    return 2.0 / n**2 * (own + pair)


def _hu_variance(sizes, group_traces, cross) -> float:
    sizes = np.asarray(sizes, dtype=float)
    k = len(sizes)
    own = 2 * (k - 1) ** 2 * np.sum(group_traces / (sizes * (sizes - 1)))
    inv = 1.0 / sizes
    pair = 2 * float(inv @ cross @ inv)
    return own + pair


def _checked(value: float) -> float:
    if not value > 0:
        raise NonPositiveVariance(value)
    return float(value)


def _group_traces(data: GroupedData, method: VarianceMethod) -> np.ndarray:
    method = VarianceMethod(method)
    if method is VarianceMethod.SPLIT_HALF:
        data.require_sizes(MIN_SPLIT_SIZE, "split-half variance estimator")
        return np.array([tr_sigma2_split(g) for g in data.groups])
    data.require_sizes(3, "Bai-Saranadasa variance estimator")
    return np.array([tr_sigma2_bs(g) for g in data.groups])


def sigma_hat(data: GroupedData, method=VarianceMethod.SPLIT_HALF) -> VarianceEstimate:
    """Estimate the null variance ``sigma_T^2`` of :func:`statistic_T`.

    Raises
    ------
    NonPositiveVariance
        If the plug-in value is not strictly positive.
    """
    method = VarianceMethod(method)
    traces = _group_traces(data, method)
    cross = cross_traces(data)
    value = _checked(_proposed_variance(data.sizes, traces, cross))
    return VarianceEstimate(value, method, traces, cross)


def sigma_hat_H(data: GroupedData) -> VarianceEstimate:
    """Estimate the null variance of :func:`statistic_TCH`."""
    traces = _group_traces(data, VarianceMethod.BAI_SARANADASA)
    cross = cross_traces(data)
    value = _checked(_hu_variance(data.sizes, traces, cross))
    return VarianceEstimate(value, VarianceMethod.BAI_SARANADASA, traces, cross)


# ---------------------------------------------------------------------------
# standardized tests


def critical_value(alpha: float) -> float:
    """Upper-``alpha`` quantile of the standard normal distribution."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(-ndtri(alpha))


def decide(statistic: float, variance: float, alpha: float, method) -> TestResult:
    sigma = float(np.sqrt(_checked(variance)))
    z = statistic / sigma
    return TestResult(
        statistic=float(statistic),
        sigma=sigma,
        z=float(z),
        p_value=float(ndtr(-z)),
        reject=bool(z >= critical_value(alpha)),
        alpha=float(alpha),
        method=TestMethod(method),
    )


def run_test(data: GroupedData, method=TestMethod.T1HAT, alpha: float = 0.05) -> TestResult:
    """Run one of the three standardized tests on ``data``."""
    return run_tests(data, [method], alpha)[TestMethod(method)]


def run_tests(data: GroupedData, methods=ALL_METHODS, alpha: float = 0.05) -> dict:
    """Run several tests, sharing the trace computations between them.

    Returns a dict keyed by :class:`TestMethod`. Errors for any method
    propagate; use :func:`evaluate_methods` to collect them instead.
    """
    out = {}
    for m, res in evaluate_methods(data, methods, alpha).items():
        if isinstance(res, Exception):
            raise res
        out[m] = res
    return out


def evaluate_methods(data: GroupedData, methods=ALL_METHODS, alpha: float = 0.05) -> dict:
    """Like :func:`run_tests` but failed methods map to their exception."""
    critical_value(alpha)
    methods = [TestMethod(m) for m in methods]
    cache = {}

    def cross():
        if "cross" not in cache:
            cache["cross"] = cross_traces(data)
        return cache["cross"]

    def traces(kind):
        if kind not in cache:
            cache[kind] = _group_traces(data, kind)
        return cache[kind]

    out = {}
    for m in methods:
        try:
            if m is TestMethod.T1HAT:
                var = _proposed_variance(data.sizes, traces(VarianceMethod.SPLIT_HALF), cross())
                out[m] = decide(statistic_T(data), var, alpha, m)
            elif m is TestMethod.T2HAT:
                var = _proposed_variance(data.sizes, traces(VarianceMethod.BAI_SARANADASA), cross())
                out[m] = decide(statistic_T(data), var, alpha, m)
            else:
                var = _hu_variance(data.sizes, traces(VarianceMethod.BAI_SARANADASA), cross())
                out[m] = decide(statistic_TCH(data), var, alpha, m)
        except (NonPositiveVariance, GroupTooSmall) as exc:
            out[m] = exc
    return out


# ---------------------------------------------------------------------------
# population-side oracles


def _weighted_center(means, sizes):
    means = np.atleast_2d(np.asarray(means, dtype=float))
    sizes = np.asarray(sizes, dtype=float)
    if means.shape[0] != sizes.shape[0]:
        raise DimensionMismatch(f"{means.shape[0]} mean vectors but {sizes.shape[0]} sizes")
    return means, sizes, sizes @ means / sizes.sum()


def oracle_expected_T(means, sizes) -> float:
    """Exact ``E(T) = sum_l n_l ||mu_l - mu_tilde||^2`` with ``mu_tilde`` size-weighted."""
    means, sizes, center = _weighted_center(means, sizes)
    d = means - center
    return float(np.sum(sizes * np.sum(d * d, axis=1)))


def null_variance_T(sizes, trace_matrix) -> float:
    """``sigma_T^2`` from a ``k x k`` matrix of ``tr(Sigma_l Sigma_s)``."""
    tm = np.asarray(trace_matrix, dtype=float)
    off = tm - np.diag(np.diag(tm))
    return _proposed_variance(sizes, np.diag(tm), off)


def trace_matrix(covs) -> np.ndarray:
    """``k x k`` matrix with entries ``tr(Sigma_l Sigma_s)``."""
    covs = [np.asarray(c, dtype=float) for c in covs]
    k = len(covs)
    out = np.empty((k, k))
    for l in range(k):
        for s in range(l, k):
            if covs[l].shape != covs[s].shape:
                raise DimensionMismatch("covariance matrices differ in shape")
            out[l, s] = out[s, l] = np.sum(covs[l] * covs[s].T)
    return out


def oracle_var_T(means, sizes, covs) -> float:
    """Exact ``Var(T)`` under Gaussian data: ``sigma_T^2`` plus the mean-shift term."""
    means, sizes, center = _weighted_center(means, sizes)
    if len(covs) != len(sizes):
        raise DimensionMismatch("one covariance matrix per group is required")
    for c in covs:
        if np.shape(c) != (means.shape[1], means.shape[1]):
            raise DimensionMismatch(f"covariance of shape {np.shape(c)} does not match p={means.shape[1]}")
    shift = sum(
        n_l * float(d @ np.asarray(c) @ d) for n_l, d, c in zip(sizes, means - center, covs)
    )
    return null_variance_T(sizes, trace_matrix(covs)) + 4 * shift


def martingale_decompose(data: GroupedData) -> MartingaleDecomposition:
    """Write ``T`` as ``2 * sum_j sum_{i<j} eta_ij`` over the concatenated samples.

    Within a group block ``eta_ij = (n - n_l) / (n (n_l - 1)) C_i'C_j``; across
    blocks ``eta_ij = -C_i'C_j / n``. The explicit factor 2 makes ``total``
    equal :func:`statistic_T`.
    """
    sizes = data.sizes
    n = int(sizes.sum())
    c = np.vstack(data.groups)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    blocks = tuple(range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))
    weight = np.full((n, n), -1.0 / n)
    for n_l, blk in zip(sizes, blocks):
        weight[blk.start:blk.stop, blk.start:blk.stop] = (n - n_l) / (n * (n_l - 1))
    eta = np.triu(weight * (c @ c.T), k=1)
    increments = eta.sum(axis=0)
    return MartingaleDecomposition(eta, increments, blocks, float(2 * increments.sum()))
