"""Asymptotic power functions and asymptotic relative efficiency (ARE).

Population inputs are described by a :class:`DesignSpec` (limiting group
proportions) and a :class:`PopulationSpec` (mean vectors plus either explicit
covariance matrices or a ``k x k`` matrix of ``tr(Sigma_l Sigma_s)``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import DegenerateDenominator, DimensionMismatch, ZeroSignal
from .stats import critical_value, trace_matrix


@dataclass(frozen=True, eq=False)
class DesignSpec:
    lambdas: np.ndarray

    def __init__(self, lambdas):
        lam = np.asarray(lambdas, dtype=float).ravel()
        if lam.size < 2:
            raise ValueError("a design needs at least two groups")
        if np.any(lam <= 0) or np.any(lam >= 1):
            raise ValueError(f"group proportions must lie in (0, 1), got {lam}")
        if abs(lam.sum() - 1) > 1e-12:
            raise ValueError(f"group proportions must sum to 1, got {lam.sum()!r}")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def from_sizes(cls, sizes) -> "DesignSpec":
        sizes = np.asarray(sizes, dtype=float)
        return cls(sizes / sizes.sum())

    @property
    def k(self) -> int:
        return self.lambdas.size


@dataclass(frozen=True, eq=False)
class PopulationSpec:
    """Group means, covariance traces and the total sample size ``n``.

    ``traces[l, s] = tr(Sigma_l Sigma_s)``. Build with
    :meth:`from_covariances` when explicit matrices are at hand, or
    :meth:`homogeneous` for ``Sigma_1 = ... = Sigma_k``.
    """

    means: np.ndarray
    traces: np.ndarray
    n: float

    def __init__(self, means, traces, n):
        mu = np.atleast_2d(np.asarray(means, dtype=float))
        tm = np.asarray(traces, dtype=float)
        k = mu.shape[0]
        if tm.shape != (k, k):
            raise DimensionMismatch(f"trace summary must be {k}x{k}, got {tm.shape}")
        if not np.all(np.isfinite(tm)) or np.any(np.diag(tm) <= 0):
            raise ValueError("trace summary must be finite with tr(Sigma_l^2) > 0")
        if not np.allclose(tm, tm.T, rtol=1e-12, atol=0):
            raise ValueError("trace summary must be symmetric")
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "traces", tm)
        object.__setattr__(self, "n", float(n))

    @classmethod
    def from_covariances(cls, means, covs, n) -> "PopulationSpec":
        mu = np.atleast_2d(np.asarray(means, dtype=float))
        for c in covs:
            if np.shape(c) != (mu.shape[1], mu.shape[1]):
                raise DimensionMismatch(f"covariance shape {np.shape(c)} does not match p={mu.shape[1]}")
        return cls(mu, trace_matrix(covs), n)

    @classmethod
    def homogeneous(cls, means, tr_sigma2: float, n) -> "PopulationSpec":
        k = np.atleast_2d(means).shape[0]
        return cls(means, np.full((k, k), float(tr_sigma2)), n)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def is_homogeneous(self) -> bool:
        return bool(np.allclose(self.traces, self.traces[0, 0], rtol=1e-12, atol=0))


@dataclass(frozen=True, eq=False)
class AreCurve:
    tau: float
    lambda3: np.ndarray
    are: np.ndarray
    roots: tuple


def _check(design: DesignSpec, pop: PopulationSpec) -> None:
    if design.k != pop.k:
        raise DimensionMismatch(f"design has {design.k} groups, population has {pop.k}")


def signal_proposed(design: DesignSpec, means) -> float:
    """``sum_l lambda_l ||mu_l - mu_tilde||^2`` with ``mu_tilde = sum lambda_l mu_l``."""
    lam = design.lambdas
    mu = np.atleast_2d(means)
    d = mu - lam @ mu
    return float(lam @ np.sum(d * d, axis=1))


def signal_hu(means) -> float:
    """``sum_l ||mu_l - mu_bar||^2`` with the unweighted average ``mu_bar``."""
    mu = np.atleast_2d(means)
    d = mu - mu.mean(axis=0)
    return float(np.sum(d * d))


def _sqrt_positive(x: float) -> float:
    if not x > 0:
        raise DegenerateDenominator(f"noise term is not positive ({x!r})")
    return float(np.sqrt(x))


def drift_proposed(design: DesignSpec, pop: PopulationSpec) -> float:
    _check(design, pop)
    lam = design.lambdas
    tm = pop.traces
    off = tm - np.diag(np.diag(tm))
    noise = float(np.sum((1 - lam) ** 2 * np.diag(tm)) + lam @ off @ lam)
    return np.sqrt(2) / 2 * pop.n * signal_proposed(design, pop.means) / _sqrt_positive(noise)


def drift_hu(design: DesignSpec, pop: PopulationSpec) -> float:
    _check(design, pop)
    lam = design.lambdas
    k = design.k
    tm = pop.traces
    off = tm - np.diag(np.diag(tm))
    inv = 1 / lam
    noise = float((k - 1) ** 2 * np.sum(inv**2 * np.diag(tm)) + inv @ off @ inv)
    return np.sqrt(2) / 2 * k * pop.n * signal_hu(pop.means) / _sqrt_positive(noise)


def power_proposed(design: DesignSpec, pop: PopulationSpec, alpha: float = 0.05) -> float:
    """Asymptotic power of ``T1hat``/``T2hat``: ``Phi(-xi_alpha + drift)``."""
    return float(ndtr(-critical_value(alpha) + drift_proposed(design, pop)))


def power_hu(design: DesignSpec, pop: PopulationSpec, alpha: float = 0.05) -> float:
    """Asymptotic power of ``THhat``."""
    return float(ndtr(-critical_value(alpha) + drift_hu(design, pop)))


def power_homogeneous(design: DesignSpec, means, tr_sigma2: float, n, alpha: float = 0.05) -> float:
    """Power of the proposed tests when every group shares one covariance matrix."""
    k = design.k
    drift = n * signal_proposed(design, means) / _sqrt_positive(2 * (k - 1) * tr_sigma2)
    return float(ndtr(-critical_value(alpha) + drift))


def are(design: DesignSpec, pop: PopulationSpec) -> float:
    """ARE of the proposed test relative to ``THhat`` under homogeneous covariances.

    The common ``tr(Sigma^2)`` and ``n`` cancel, so only ``design`` and the
    mean vectors matter.
    """
    _check(design, pop)
    if not pop.is_homogeneous:
        raise ValueError("ARE is defined for homogeneous covariance matrices only")
    lam = design.lambdas
    k = design.k
    num_p = signal_proposed(design, pop.means)
    num_h = signal_hu(pop.means)
    if num_p == 0 and num_h == 0:
        raise ZeroSignal("all mean vectors coincide; ARE is undefined")
    inv = 1 / lam
    off = np.sum(inv) ** 2 - np.sum(inv**2)
    spread = np.sqrt((k - 1) ** 2 * np.sum(inv**2) + off)
    return float(num_p * spread / (np.sqrt(k - 1) * k * num_h))


def are_case_one(design: DesignSpec) -> float:
    """ARE when only the last group's mean differs from the others."""
    lam = design.lambdas
    k = design.k
    lk = lam[-1]
    inner = k * (k - 2) * np.sum(lam**-2.0) + np.sum(1 / lam) ** 2
    return float(lk * (1 - lk) / (k - 1) ** 1.5 * np.sqrt(inner))


def are_lower_bound(design: DesignSpec) -> float:
    """Jensen-type lower bound ``k^2 lambda_k (1 - lambda_k) / (k - 1)`` for :func:`are_case_one`."""
    lk = design.lambdas[-1]
    k = design.k
    return float(k**2 * lk * (1 - lk) / (k - 1))


def are_case_two(tau: float, lambda3):
    """ARE for ``k = 3``, ``mu_1 = 0``, ``mu_2 = tau mu_3`` and ``lambda_1 = lambda_2``.

    Vectorized over ``lambda3``.
    """
    lam3 = np.asarray(lambda3, dtype=float)
    val = (tau**2 / lam3 + (tau - 2) ** 2) * np.sqrt(9 * lam3**2 + 1) / (
        4 * np.sqrt(2) * (tau**2 - tau + 1)
    )
    return float(val) if val.ndim == 0 else val


def solve_are_roots(
    tau: float,
    num: int = 2000,
    lo: float = 1e-4,
    hi: float = 1 - 1e-4,
    xtol: float = 1e-8,
) -> AreCurve:
    """Find every ``lambda3`` in ``[lo, hi]`` where :func:`are_case_two` equals 1.

    The grid is scanned for sign changes of ``ARE - 1`` and each bracket is
    bisected to ``xtol``. ``1/3`` is inserted as a grid node because it is a
    root for every ``tau``.
    """
    if tau == 0:
        raise ValueError("tau must be nonzero")
    grid = np.union1d(np.linspace(lo, hi, num), [1 / 3])
    g = are_case_two(tau, grid) - 1
    roots = []
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        ga, gb = g[i], g[i + 1]
        if abs(ga) < 1e-12:
            roots.append(a)
        elif ga * gb < 0 and abs(gb) >= 1e-12:
            roots.append(_bisect(lambda x: are_case_two(tau, x) - 1, a, b, ga, xtol))
    if abs(g[-1]) < 1e-12:
        roots.append(grid[-1])
    roots = sorted(roots)
    merged = []
    for r in roots:
        if not merged or r - merged[-1] > 10 * xtol:
            merged.append(float(r))
    # the fixed root is exact; report it as such
    merged = [1 / 3 if abs(r - 1 / 3) <= 10 * xtol else r for r in merged]
    return AreCurve(float(tau), grid, g + 1, tuple(merged))


def _bisect(f, a, b, fa, xtol):
    while b - a > xtol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)
