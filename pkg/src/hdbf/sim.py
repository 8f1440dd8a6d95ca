"""Data-generating models and the Monte Carlo size/power engine.

Two generators are provided, both for ``k = 3`` groups:

* **Model 1**, a two-dependent moving average across coordinates,
  ``X_lij = rho_l1 Z_lij + rho_l2 Z_l,i,j+1 + rho_l3 Z_l,i,j+2 + mu_lj``, with
  unit-variance innovations (standard normal or standardized chi-square(4)).
  The signal is calibrated by the standardized parameter ``theta``.
* **Model 2**, ``X_li = Gamma_l Z_li + mu_l`` with ``Gamma_l^2 = W_l Psi_l W_l``
  and a random sign-alternating mean vector of amplitude ``a``.

Replications draw from independent streams keyed by ``(seed, replication)``,
so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .core import MIN_SPLIT_SIZE, GroupedData
from .exceptions import ConfigError, GroupTooSmall, NotPositiveSemidefinite
from .stats import ALL_METHODS, TestMethod, evaluate_methods, tr_sigma2_bs, tr_sigma2_split

# MA coefficients of model 1, one row per group (drawn once from U(2, 3) and held fixed)
RHO = (
    (2.1984, 2.5743, 2.1316),
    (2.8147, 2.9058, 2.1270),
    (2.9134, 2.6324, 2.0975),
)
MODEL2_B = (2.0, 1.0, 3.0)
INNOVATIONS = ("normal", "chisq4")
PSD_TOL = 1e-8


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class Model1Config:
    p: int
    sizes: tuple
    theta: float = 0.0
    innovation: str = "chisq4"
    rho: tuple = RHO
    sparsity: float = 0.05
    delta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        object.__setattr__(self, "rho", tuple(tuple(float(v) for v in r) for r in self.rho))
        if len(self.sizes) != len(self.rho):
            raise ConfigError(f"model 1 needs {len(self.rho)} group sizes, got {len(self.sizes)}")
        if self.theta < 0:
            raise ConfigError("theta must be nonnegative")
        if self.innovation not in INNOVATIONS:
            raise ConfigError(f"innovation must be one of {INNOVATIONS}, got {self.innovation!r}")
        if self.n_signal < 1:
            raise ConfigError(f"p={self.p} is too small: floor({self.sparsity} p) must be >= 1")
        if not np.all(np.isfinite(self.rho)):
            raise ConfigError("rho must be finite")

    @property
    def n_signal(self) -> int:
        return int(np.floor(self.sparsity * self.p + 1e-9))

    name = "model1"


@dataclass(frozen=True)
class Model2Config:
    p: int
    sizes: tuple
    a: float = 0.0
    seed: int = 0
    b: tuple = MODEL2_B

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if len(self.sizes) != len(self.b):
            raise ConfigError(f"model 2 needs {len(self.b)} group sizes, got {len(self.sizes)}")
        if self.a < 0:
            raise ConfigError("a must be nonnegative")
        if self.p < 1:
            raise ConfigError("p must be positive")

    name = "model2"


@dataclass(frozen=True)
class SimConfig:
    model: Model1Config | Model2Config
    replications: int = 5000
    seed: int = 0
    alpha: float = 0.05
    methods: tuple = ALL_METHODS

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(TestMethod(m) for m in self.methods))
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if min(self.model.sizes) < MIN_SPLIT_SIZE:
            raise ConfigError(f"every group needs at least {MIN_SPLIT_SIZE} observations")

    def digest(self) -> str:
        payload = {
            "model": self.model.name,
            **asdict(self.model),
            "replications": self.replications,
            "seed": self.seed,
            "alpha": self.alpha,
            "methods": [m.value for m in self.methods],
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class MethodRate:
    method: TestMethod
    rate: float
    se: float
    rejections: int
    failures: int


@dataclass(frozen=True)
class MonteCarloResult:
    rates: dict
    replications: int
    seed: int
    config_digest: str
    config: SimConfig = field(repr=False)

    def rate(self, method) -> float:
        return self.rates[TestMethod(method)].rate

    def se(self, method) -> float:
        return self.rates[TestMethod(method)].se

    def rows(self) -> list[dict]:
        return [
            {
                "config_digest": self.config_digest,
                "method": m.value,
                "rate": r.rate,
                "se": r.se,
                "R": self.replications,
                "seed": self.seed,
            }
            for m, r in self.rates.items()
        ]


@dataclass(frozen=True)
class BiasStudyResult:
    p: int
    n1: int
    replications: int
    seed: int
    innovation: str
    true_trace: float
    denominator: float
    split_mean: float
    split_sd: float
    bs_mean: float
    bs_sd: float


# ---------------------------------------------------------------------------
# model 1


def _ma_bands(rho_row) -> tuple[float, float, float]:
    r1, r2, r3 = rho_row
    return r1 * r1 + r2 * r2 + r3 * r3, r1 * r2 + r2 * r3, r1 * r3


def build_sigma_model1(rho_row, p: int) -> np.ndarray:
    """Exact covariance of one model-1 row: a symmetric matrix with bandwidth 2."""
    if p < 1:
        raise ValueError("p must be positive")
    bands = _ma_bands(rho_row)
    sigma = np.zeros((p, p))
    for lag, v in enumerate(bands):
        if lag < p:
            idx = np.arange(p - lag)
            sigma[idx, idx + lag] = v
            sigma[idx + lag, idx] = v
    return sigma


def model1_traces(cfg: Model1Config) -> np.ndarray:
    """``tr(Sigma_l Sigma_s)`` for all group pairs, from the banded closed form."""
    bands = np.array([_ma_bands(r) for r in cfg.rho])
    p = cfg.p
    mult = np.array([p, 2 * max(p - 1, 0), 2 * max(p - 2, 0)], dtype=float)
    return (bands * mult) @ bands.T


def theta_denominator(sizes, traces) -> float:
    sizes = np.asarray(sizes, dtype=float)
    lam = sizes / sizes.sum()
    k = lam.size
    inv = 1 / lam
    tm = np.asarray(traces, dtype=float)
    off = tm - np.diag(np.diag(tm))
    return float(np.sqrt((k - 1) ** 2 * np.sum(inv**2 * np.diag(tm)) + inv @ off @ inv))


def theta_of(means, sizes, traces) -> float:
    """Standardized signal ``sum_l ||mu_l - mu_bar||^2`` over the equal-weight noise scale."""
    mu = np.atleast_2d(np.asarray(means, dtype=float))
    d = mu - mu.mean(axis=0)
    return float(np.sum(d * d)) / theta_denominator(sizes, traces)


def delta_from_theta(cfg: Model1Config) -> float:
    """Common value of the nonzero entries of ``mu_3`` that yields ``cfg.theta``.

    With ``mu_1 = mu_2 = 0`` and ``m`` entries equal to ``delta`` in ``mu_3`` the
    numerator of theta is ``(2/3) m delta^2``.
    """
    if cfg.theta < 0:
        raise ConfigError("theta must be nonnegative")
    k = len(cfg.sizes)
    denom = theta_denominator(cfg.sizes, model1_traces(cfg))
    return float(np.sqrt(k * cfg.theta * denom / ((k - 1) * cfg.n_signal)))


def model1_means(cfg: Model1Config) -> np.ndarray:
    """Zero means except ``floor(0.05 p)`` leading entries of the last group.

    Those entries equal ``cfg.delta`` when given, otherwise the value
    calibrated from ``cfg.theta``.
    """
    means = np.zeros((len(cfg.sizes), cfg.p))
    delta = delta_from_theta(cfg) if cfg.delta is None else cfg.delta
    means[-1, : cfg.n_signal] = delta
    return means


def draw_innovations(rng: np.random.Generator, shape, innovation: str) -> np.ndarray:
    """Unit-variance i.i.d. innovations: standard normal or ``(chi2(4) - 4) / sqrt(8)``."""
    if innovation == "normal":
        return rng.standard_normal(shape)
    if innovation == "chisq4":
        return (rng.chisquare(4, shape) - 4.0) / np.sqrt(8.0)
    raise ConfigError(f"unknown innovation {innovation!r}")


def ma2_rows(rho_row, n: int, p: int, rng, innovation: str) -> np.ndarray:
    z = draw_innovations(rng, (n, p + 2), innovation)
    r1, r2, r3 = rho_row
    return r1 * z[:, :p] + r2 * z[:, 1 : p + 1] + r3 * z[:, 2 : p + 2]


def gen_model1(cfg: Model1Config, rng: np.random.Generator, means=None) -> GroupedData:
    if means is None:
        means = model1_means(cfg)
    groups = [
        ma2_rows(rho, n_l, cfg.p, rng, cfg.innovation) + mu
        for rho, n_l, mu in zip(cfg.rho, cfg.sizes, means)
    ]
    return GroupedData(groups)


# ---------------------------------------------------------------------------
# model 2


def matrix_sqrt_psd(s) -> np.ndarray:
    """Symmetric square root of a PSD matrix via its eigendecomposition.

    Eigenvalues in ``[-1e-8 * ||S||, 0)`` are clipped to zero; anything more
    negative raises :class:`NotPositiveSemidefinite`.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"need a square matrix, got shape {s.shape}")
    scale = float(np.linalg.norm(s, 2)) if s.size else 0.0
    if not np.allclose(s, s.T, rtol=1e-10, atol=1e-10 * max(scale, 1.0)):
        raise ValueError("matrix is not symmetric")
    w, v = np.linalg.eigh(0.5 * (s + s.T))
    if w.size and w[0] < -PSD_TOL * max(scale, 1.0):
        raise NotPositiveSemidefinite(f"smallest eigenvalue {w[0]:.3e} is negative")
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.T
    return 0.5 * (root + root.T)


def psi_matrix(p: int, b: float) -> np.ndarray:
    j = np.arange(1, p + 1)
    lag = np.abs(j[:, None] - j[None, :]).astype(float)
    sign = np.where((j[:, None] + j[None, :]) % 2 == 0, 1.0, -1.0)
    psi = sign * (0.05 * b) ** (lag**0.1)
    np.fill_diagonal(psi, 1.0)
    return psi


def build_sigma_model2(cfg: Model2Config, l: int) -> np.ndarray:
    """``Sigma_l = W_l Psi_l W_l`` for group ``l`` in ``1..3``."""
    if l not in range(1, len(cfg.b) + 1):
        raise ValueError(f"group index must be in 1..{len(cfg.b)}, got {l}")
    return _sigma_model2(cfg.p, l, cfg.b[l - 1])


@lru_cache(maxsize=16)
def _sigma_model2(p: int, l: int, b: float) -> np.ndarray:
    psi = psi_matrix(p, b)
    wmin = np.linalg.eigvalsh(psi)[0]
    if wmin < -PSD_TOL:
        raise NotPositiveSemidefinite(f"Psi_{l} has eigenvalue {wmin:.3e}")
    w = l - np.arange(p) / p
    sigma = w[:, None] * psi * w[None, :]
    sigma.setflags(write=False)
    return sigma


@lru_cache(maxsize=16)
def _gamma_model2(p: int, l: int, b: float) -> np.ndarray:
    g = matrix_sqrt_psd(_sigma_model2(p, l, b))
    g.setflags(write=False)
    return g


def model2_means(cfg: Model2Config) -> np.ndarray:
    """``mu_1 = 0``, ``mu_2 = u``, ``mu_3 = -u`` with ``u_i = (-1)^i v_i``, ``v_i ~ U(0, a)``.

    ``u`` is a function of ``cfg.seed`` only, so every replication of a
    campaign shares the same mean vectors.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    v = rng.uniform(0.0, cfg.a, cfg.p) if cfg.a > 0 else np.zeros(cfg.p)
    u = np.where(np.arange(1, cfg.p + 1) % 2 == 0, v, -v)
    return np.vstack([np.zeros(cfg.p), u, -u])


def gen_model2(cfg: Model2Config, rng: np.random.Generator, means=None) -> GroupedData:
    if means is None:
        means = model2_means(cfg)
    groups = []
    for l, (n_l, mu) in enumerate(zip(cfg.sizes, means), start=1):
        gamma = _gamma_model2(cfg.p, l, cfg.b[l - 1])
        groups.append(rng.standard_normal((n_l, cfg.p)) @ gamma + mu)
    return GroupedData(groups)


def population_covariances(model) -> list[np.ndarray]:
    if isinstance(model, Model1Config):
        return [build_sigma_model1(r, model.p) for r in model.rho]
    return [build_sigma_model2(model, l) for l in range(1, len(model.b) + 1)]


def population_means(model) -> np.ndarray:
    if isinstance(model, Model1Config):
        return model1_means(model)
    return model2_means(model)


def generate(model, rng, means=None) -> GroupedData:
    if isinstance(model, Model1Config):
        return gen_model1(model, rng, means)
    return gen_model2(model, rng, means)


# ---------------------------------------------------------------------------
# Monte Carlo engine


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index``; the same in serial or parallel runs."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1, index))))


def default_threads() -> int:
    env = os.environ.get("HDBF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HDBF_THREADS must be an integer, got {env!r}") from None
    return max(1, min(4, os.cpu_count() or 1))


def _run_chunk(cfg: SimConfig, means, indices) -> np.ndarray:
    # 1 = reject, 0 = accept, -1 = method failed on this replication
    out = np.zeros((len(indices), len(cfg.methods)), dtype=np.int8)
    for row, r in enumerate(indices):
        data = generate(cfg.model, replication_rng(cfg.seed, r), means)
        results = evaluate_methods(data, cfg.methods, cfg.alpha)
        for col, m in enumerate(cfg.methods):
            res = results[m]
            out[row, col] = -1 if isinstance(res, Exception) else int(res.reject)
    return out


def run_monte_carlo(cfg: SimConfig, threads: int | None = None) -> MonteCarloResult:
    """Empirical rejection rate of every requested method over ``cfg.replications`` draws.

    Replications where a method cannot be evaluated (for example a
    non-positive variance estimate) are counted in ``failures`` and excluded
    from that method's rate.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    means = population_means(cfg.model)
    if isinstance(cfg.model, Model2Config):
        for l in range(1, 4):
            _gamma_model2(cfg.model.p, l, cfg.model.b[l - 1])
    R = cfg.replications
    chunks = np.array_split(np.arange(R), min(R, threads * 8))
    if threads == 1:
        parts = [_run_chunk(cfg, means, c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _run_chunk(cfg, means, c), chunks))
    outcomes = np.vstack(parts)
    rates = {}
    for col, m in enumerate(cfg.methods):
        ok = outcomes[:, col] >= 0
        n_ok = int(ok.sum())
        hits = int((outcomes[:, col] == 1).sum())
        rate = hits / n_ok if n_ok else float("nan")
        se = float(np.sqrt(rate * (1 - rate) / n_ok)) if n_ok else float("nan")
        rates[m] = MethodRate(m, rate, se, hits, R - n_ok)
    return MonteCarloResult(rates, R, cfg.seed, cfg.digest(), cfg)


# ---------------------------------------------------------------------------
# trace-estimator bias study


def estimator_bias_study(
    p: int,
    n1: int,
    replications: int,
    seed: int = 0,
    innovation: str = "chisq4",
    denominator: float | None = None,
    rho_row=RHO[0],
) -> BiasStudyResult:
    """Ratios of the two ``tr(Sigma_1^2)`` estimators to a reference trace.

    Data are group-1 rows of model 1. The reference is the exact
    ``tr(Sigma_1^2)`` unless ``denominator`` overrides it.
    """
    if n1 < MIN_SPLIT_SIZE:
        raise GroupTooSmall(f"bias study needs n1 >= {MIN_SPLIT_SIZE}, got {n1}")
    d0, d1, d2 = _ma_bands(rho_row)
    true_trace = p * d0**2 + 2 * max(p - 1, 0) * d1**2 + 2 * max(p - 2, 0) * d2**2
    ref = true_trace if denominator is None else float(denominator)
    split = np.empty(replications)
    bs = np.empty(replications)
    for r in range(replications):
        x = ma2_rows(rho_row, n1, p, replication_rng(seed, r), innovation)
        split[r] = tr_sigma2_split(x)
        bs[r] = tr_sigma2_bs(x)
    split /= ref
    bs /= ref
    ddof = 1 if replications > 1 else 0
    return BiasStudyResult(
        p, n1, replications, seed, innovation, float(true_trace), ref,
        float(split.mean()), float(split.std(ddof=ddof)),
        float(bs.mean()), float(bs.std(ddof=ddof)),
    )


# ---------------------------------------------------------------------------
# campaign config files
#
# One ``key = value`` pair per line; ``#`` starts a comment. Keys:
#   model         1 or 2 (required)
#   p             dimension (required)
#   sizes         comma-separated group sizes (required)
#   theta, delta, innovation   model 1 only
#   a, u_seed                  model 2 only (u_seed defaults to seed)
#   replications, seed, alpha, methods (t1, t2, th)

_MODEL1_KEYS = {"theta", "delta", "innovation"}
_MODEL2_KEYS = {"a", "u_seed"}
_COMMON_KEYS = {"model", "p", "sizes", "replications", "seed", "alpha", "methods"}


def parse_config(text: str, source: str = "<config>") -> SimConfig:
    entries: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in _COMMON_KEYS | _MODEL1_KEYS | _MODEL2_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        entries[key] = (lineno, value)

    def get(key, conv, default=None):
        if key not in entries:
            if default is None:
                raise ConfigError(f"{source}: missing required key {key!r}")
            return default
        lineno, value = entries[key]
        try:
            return conv(value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {value!r} ({exc})") from None

    def int_list(v):
        items = [s for s in v.replace(",", " ").split()]
        return tuple(int(s) for s in items)

    def methods(v):
        return tuple(TestMethod(s.strip().lower()) for s in v.replace(",", " ").split())

    model_id = get("model", lambda v: v.strip().lower().removeprefix("model"))
    if model_id not in ("1", "2"):
        raise ConfigError(f"{source}:{entries['model'][0]}: model must be 1 or 2")
    foreign = _MODEL2_KEYS if model_id == "1" else _MODEL1_KEYS
    for key in foreign & entries.keys():
        raise ConfigError(f"{source}:{entries[key][0]}: key {key!r} does not apply to model {model_id}")

    seed = get("seed", int, 0)
    try:
        if model_id == "1":
            delta = get("delta", float, -1.0)
            model = Model1Config(
                p=get("p", int),
                sizes=get("sizes", int_list),
                theta=get("theta", float, 0.0),
                innovation=get("innovation", str, "chisq4"),
                delta=None if delta == -1.0 else delta,
            )
        else:
            model = Model2Config(
                p=get("p", int),
                sizes=get("sizes", int_list),
                a=get("a", float, 0.0),
                seed=get("u_seed", int, seed),
            )
        return SimConfig(
            model,
            replications=get("replications", int, 5000),
            seed=seed,
            alpha=get("alpha", float, 0.05),
            methods=get("methods", methods, ALL_METHODS),
        )
    except ConfigError as exc:
        if str(exc).startswith(source):
            raise
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> SimConfig:
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


def dump_config(cfg: SimConfig) -> str:
    m = cfg.model
    lines = [f"model = {1 if isinstance(m, Model1Config) else 2}", f"p = {m.p}",
             "sizes = " + ", ".join(str(s) for s in m.sizes)]
    if isinstance(m, Model1Config):
        lines += [f"theta = {m.theta!r}", f"innovation = {m.innovation}"]
        if m.delta is not None:
            lines.append(f"delta = {m.delta!r}")
    else:
        lines += [f"a = {m.a!r}", f"u_seed = {m.seed}"]
    lines += [f"replications = {cfg.replications}", f"seed = {cfg.seed}", f"alpha = {cfg.alpha!r}",
              "methods = " + ", ".join(x.value for x in cfg.methods)]
    return "\n".join(lines) + "\n"
