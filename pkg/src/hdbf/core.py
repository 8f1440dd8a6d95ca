"""Grouped-sample data model and the linear-algebra kernels used by the tests.

Every test in :mod:`hdbf.stats` consumes a :class:`GroupedData`: an ordered
collection of ``k >= 2`` sample matrices (rows are observations) sharing the
same dimension ``p``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionMismatch, GroupTooSmall, MalformedCsv

SYMMETRY_RTOL = 1e-10
# the second split half has n_l - floor(n_l/2) - 1 rows and needs two for a covariance
MIN_SPLIT_SIZE = 5


def _as_sample_matrix(x) -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionMismatch(f"sample matrix must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionMismatch(f"sample matrix must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("sample matrix contains non-finite entries")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GroupedData:
    """``k`` groups of observations, each an ``n_l x p`` array.

    Group arrays are copied on construction and made read-only. ``labels``
    are only used for CSV round trips and reporting.
    """

    groups: tuple
    labels: tuple = field(default=None)

    def __init__(self, groups: Iterable, labels: Sequence[str] | None = None):
        mats = tuple(_as_sample_matrix(g) for g in groups)
        if len(mats) < 2:
            raise GroupTooSmall(f"need at least 2 groups, got {len(mats)}")
        widths = {m.shape[1] for m in mats}
        if len(widths) != 1:
            raise DimensionMismatch(f"groups have different dimensions: {sorted(widths)}")
        for l, m in enumerate(mats):
            if m.shape[0] < 2:
                raise GroupTooSmall(f"group {l + 1} has {m.shape[0]} observation(s); need >= 2")
        if labels is None:
            labels = tuple(str(l + 1) for l in range(len(mats)))
        else:
            labels = tuple(str(s) for s in labels)
            if len(labels) != len(mats):
                raise ValueError("one label per group is required")
        object.__setattr__(self, "groups", mats)
        object.__setattr__(self, "labels", labels)

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def p(self) -> int:
        return self.groups[0].shape[1]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.shape[0] for g in self.groups], dtype=int)

    @property
    def n(self) -> int:
        return int(self.sizes.sum())

    def require_sizes(self, minimum: int, what: str = "this operation") -> None:
        small = [l + 1 for l, m in enumerate(self.sizes) if m < minimum]
        if small:
            raise GroupTooSmall(
                f"{what} needs every group to have >= {minimum} observations; "
                f"group(s) {small} have sizes {[int(self.sizes[l - 1]) for l in small]}"
            )

    def map(self, fn) -> "GroupedData":
        """Apply ``fn`` to every group array and return new GroupedData."""
        return GroupedData([fn(g) for g in self.groups], labels=self.labels)


@dataclass(frozen=True, eq=False)
class GroupSummary:
    means: tuple
    covariances: tuple
    split_sizes: tuple
    split_covariances: tuple
    pooled_mean: np.ndarray


def split_sizes(n_l: int) -> tuple[int, int]:
    """Sizes of the two halves: ``floor(n_l/2) + 1`` first rows, remainder second."""
    first = n_l // 2 + 1
    return first, n_l - first


def _symmetrize(s: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.abs(s))), np.finfo(float).tiny)
    if np.max(np.abs(s - s.T)) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return 0.5 * (s + s.T)


def sample_mean_cov(x) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and covariance (divisor ``n - 1``) of the rows of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise GroupTooSmall("covariance needs at least 2 observations")
    mean = x.mean(axis=0)
    y = x - mean
    return mean, _symmetrize(y.T @ y / (x.shape[0] - 1))


def summarize(data: GroupedData) -> GroupSummary:
    """Per-group means, covariances and split-half covariances.

    The split keeps rows in the given order: the first ``floor(n_l/2) + 1``
    rows form the first half.
    """
    data.require_sizes(MIN_SPLIT_SIZE, "summarize")
    means, covs, halves, split_covs = [], [], [], []
    for g in data.groups:
        m, s = sample_mean_cov(g)
        n1, _ = split_sizes(g.shape[0])
        means.append(m)
        covs.append(s)
        halves.append(split_sizes(g.shape[0]))
        split_covs.append((sample_mean_cov(g[:n1])[1], sample_mean_cov(g[n1:])[1]))
    sizes = data.sizes
    pooled = sum(n_l * m for n_l, m in zip(sizes, means)) / sizes.sum()
    return GroupSummary(tuple(means), tuple(covs), tuple(halves), tuple(split_covs), pooled)


def scatter_matrices(data: GroupedData) -> tuple[np.ndarray, np.ndarray]:
    """Within-group (``E1``, divisor ``n-k``) and between-group (``E2``, divisor ``k-1``) scatter."""
    n, k = data.n, data.k
    if n <= k:
        raise GroupTooSmall(f"need n > k for the within-group scatter (n={n}, k={k})")
    means = [g.mean(axis=0) for g in data.groups]
    pooled = sum(g.shape[0] * m for g, m in zip(data.groups, means)) / n
    within = np.zeros((data.p, data.p))
    between = np.zeros((data.p, data.p))
    for g, m in zip(data.groups, means):
        y = g - m
        within += y.T @ y
        d = m - pooled
        between += g.shape[0] * np.outer(d, d)
    return within / (n - k), between / (k - 1)


def trace_product(a, b) -> float:
    """``tr(A @ B)`` as ``sum_ij A_ij B_ji``, without forming the product."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise DimensionMismatch(f"need conformable square matrices, got {a.shape} and {b.shape}")
    return float(np.einsum("ij,ji->", a, b))


# Gram-matrix kernels: for centered Ya (na x p), Yb (nb x p),
# tr(Ya'Ya Yb'Yb) = ||Ya Yb'||_F^2, which costs na*nb*p instead of p^3.

def centered(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=0)


def gram_trace_product(ya: np.ndarray, yb: np.ndarray) -> float:
    """``tr((ya' ya)(yb' yb))`` for row-sample matrices ``ya`` and ``yb``."""
    if ya is yb:
        g = ya @ ya.T
    else:
        g = ya @ yb.T
    return float(np.sum(g * g))


def read_csv(path) -> GroupedData:
    """Load long-format CSV with header ``group,x1,...,xp``.

    Group labels are arbitrary strings, numbered in order of first appearance.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "group":
            raise MalformedCsv(f"{path}: header must be 'group,x1,...,xp', got {header!r}")
        p = len(header) - 1
        rows: dict[str, list] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != p + 1:
                raise MalformedCsv(f"{path}:{lineno}: expected {p + 1} fields, got {len(row)}")
            label = row[0].strip()
            if not label:
                raise MalformedCsv(f"{path}:{lineno}: missing group label")
            try:
                values = [float(c) for c in row[1:]]
            except ValueError:
                raise MalformedCsv(f"{path}:{lineno}: non-numeric or missing value") from None
            if not all(np.isfinite(values)):
                raise MalformedCsv(f"{path}:{lineno}: non-finite value")
            rows.setdefault(label, []).append(values)
    if not rows:
        raise MalformedCsv(f"{path}: no data rows")
    return GroupedData([np.array(v) for v in rows.values()], labels=list(rows))


def write_csv(data: GroupedData, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group"] + [f"x{j + 1}" for j in range(data.p)])
        for label, g in zip(data.labels, data.groups):
            for row in g:
                w.writerow([label] + [repr(float(v)) for v in row])
