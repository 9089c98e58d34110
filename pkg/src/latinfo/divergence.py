"""Tsallis-alpha and KL divergences.

Closed forms for zero-mean Gaussians, and a k-nearest-neighbour estimator of
the Tsallis-alpha divergence between two sample sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln

from . import rng

PD_TOL = 1e-10
TIE_POLICIES = ("error", "jitter")
# Threads for neighbour queries; results do not depend on it.
QUERY_WORKERS = 1


class EstimatorError(ValueError):
    """An estimator precondition failed (sample counts, ties, non-finite data)."""

    def __init__(self, message: str, term=None):
        super().__init__(message)
        self.term = term

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{msg} [term {self.term}]" if self.term is not None else msg


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Zero-mean Gaussian given by its covariance matrix."""

    covariance: np.ndarray

    def __post_init__(self):
        cov = np.array(self.covariance, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] == 0:
            raise ValueError(f"covariance must be a non-empty square matrix, got shape {cov.shape}")
        if not np.all(np.isfinite(cov)):
            raise ValueError("covariance has non-finite entries")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise ValueError("covariance is not symmetric")
        cov = (cov + cov.T) / 2
        smallest = np.linalg.eigvalsh(cov)[0]
        if smallest <= PD_TOL:
            raise ValueError(f"covariance is not positive definite (min eigenvalue {smallest:.3g})")
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def marginal(self, idx) -> "GaussianSpec":
        idx = list(idx)
        return GaussianSpec(self.covariance[np.ix_(idx, idx)])

    def block_diagonal(self, blocks) -> "GaussianSpec":
        """Covariance of the product of the marginals on ``blocks`` (blocks index into this spec)."""
        order = [i for b in blocks for i in b]
        out = np.zeros((len(order), len(order)))
        pos = 0
        for b in blocks:
            b = list(b)
            out[pos:pos + len(b), pos:pos + len(b)] = self.covariance[np.ix_(b, b)]
            pos += len(b)
        return GaussianSpec(out)


@dataclass(frozen=True)
class EstimatorConfig:
    alpha: float = 0.5
    k: int = 30
    seed: int = 0
    tie_policy: str = "error"
    jitter_scale: float = 1e-10
    permutations: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1) for estimation, got {self.alpha}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if self.tie_policy not in TIE_POLICIES:
            raise ValueError(f"tie_policy must be one of {TIE_POLICIES}")
        if self.tie_policy == "jitter" and not self.jitter_scale > 0:
            raise ValueError("jitter_scale must be positive when tie_policy='jitter'")
        if self.permutations < 0:
            raise ValueError("permutations must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "k": self.k,
            "seed": self.seed,
            "tie_policy": self.tie_policy,
            "jitter_scale": self.jitter_scale,
            "permutations": self.permutations,
        }


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    alpha: float
    k: int
    n_p: int
    n_q: int
    dim: int

    def __float__(self) -> float:
        return self.value


def _logdet(cov: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise ValueError("matrix is not positive definite")
    return float(logdet)


def _check_pair(f: GaussianSpec, g: GaussianSpec) -> None:
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")


def kl_gaussian(f: GaussianSpec, g: GaussianSpec) -> float:
    """KL divergence ``KL(N(0, Sf) || N(0, Sg))``."""
    _check_pair(f, g)
    if np.array_equal(f.covariance, g.covariance):
        return 0.0
    trace = float(np.trace(np.linalg.solve(g.covariance, f.covariance)))
    return 0.5 * (trace - f.dim + _logdet(g.covariance) - _logdet(f.covariance))


def tsallis_gaussian(f: GaussianSpec, g: GaussianSpec, alpha: float) -> float:
    """Tsallis-alpha divergence between two zero-mean Gaussians, ``alpha`` in (0, 1].

    Uses ``int f^a g^(1-a) = |Sf|^((1-a)/2) |Sg|^(a/2) / |a Sg + (1-a) Sf|^(1/2)``,
    which equals the usual inverse-covariance form without inverting anything.
    """
    _check_pair(f, g)
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1:
        return kl_gaussian(f, g)
    if np.array_equal(f.covariance, g.covariance):
        return 0.0
    blend = alpha * g.covariance + (1 - alpha) * f.covariance
    try:
        np.linalg.cholesky(blend)
    except np.linalg.LinAlgError as exc:
        raise ValueError("blended precision matrix is not positive definite") from exc
    log_t = (
        0.5 * (1 - alpha) * _logdet(f.covariance)
        + 0.5 * alpha * _logdet(g.covariance)
        - 0.5 * _logdet(blend)
    )
    return math.expm1(log_t) / (alpha - 1)


def _as_array(samples) -> np.ndarray:
    values = getattr(samples, "values", samples)
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise EstimatorError(f"samples must be 2-D, got shape {arr.shape}")
    return arr


def knn_distances(points, queries, k: int, exclude_self: bool = False) -> np.ndarray:
    """Exact distance from each query to its k-th nearest neighbour among ``points``.

    With ``exclude_self`` the queries must be the points themselves and each
    point's own zero distance is not counted.
    """
    pts = _as_array(points)
    qs = _as_array(queries)
    n = pts.shape[0]
    if n == 0:
        raise EstimatorError("empty point set")
    if pts.shape[1] != qs.shape[1]:
        raise EstimatorError(f"dimension mismatch: {pts.shape[1]} vs {qs.shape[1]}")
    if exclude_self:
        if qs.shape != pts.shape:
            raise EstimatorError("exclude_self needs queries identical to points")
        if not 1 <= k < n:
            raise EstimatorError(f"k={k} out of range for {n} points (need k < n)")
        kk = k + 1
    else:
        if not 1 <= k <= n:
            raise EstimatorError(f"k={k} out of range for {n} points (need k <= n)")
        kk = k
    dist, _ = cKDTree(pts).query(qs, k=[kk], workers=QUERY_WORKERS)
    return dist[:, 0]


def bias_constant(k: int, alpha: float) -> float:
    """``Gamma(k)^2 / (Gamma(k - a + 1) Gamma(k + a - 1))``."""
    return math.exp(2 * gammaln(k) - gammaln(k - alpha + 1) - gammaln(k + alpha - 1))


def _jitter(arr: np.ndarray, scale_ref: np.ndarray, cfg: EstimatorConfig, label: str) -> np.ndarray:
    scale = cfg.jitter_scale * np.where(scale_ref > 0, scale_ref, 1.0)
    noise = rng.stream(cfg.seed, "jitter", label, arr.shape).standard_normal(arr.shape)
    return arr + noise * scale


def estimate_tsallis_knn(x_samples, y_samples, cfg: EstimatorConfig) -> DivergenceEstimate:
    """kNN estimate of ``D_alpha(p || q)`` from samples ``x ~ p`` and ``y ~ q``.

    Each sample ``x_i`` contributes ``((n_p - 1) rho_i^dim / (n_q nu_i^dim))^(1 - alpha)``
    where ``rho_i`` is its k-th neighbour distance within ``x`` (itself
    excluded) and ``nu_i`` its k-th neighbour distance within ``y``. The mean
    is scaled by :func:`bias_constant` and mapped through
    ``(. - 1) / (alpha - 1)``.
    """
    x = _as_array(x_samples)
    y = _as_array(y_samples)
    if x.shape[1] != y.shape[1]:
        raise EstimatorError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise EstimatorError("non-finite sample values")
    n_p, dim = x.shape
    n_q = y.shape[0]
    k, alpha = cfg.k, cfg.alpha
    if n_p <= k or n_q < k:
        raise EstimatorError(f"k={k} too large for sample counts n_p={n_p}, n_q={n_q}")

    if cfg.tie_policy == "jitter":
        ref = np.concatenate([x, y]).std(axis=0)
        x = _jitter(x, ref, cfg, "p")
        y = _jitter(y, ref, cfg, "q")

    rho = knn_distances(x, x, k, exclude_self=True)
    nu = knn_distances(y, x, k)
    if np.any(rho == 0) or np.any(nu == 0):
        raise EstimatorError(
            "zero k-th neighbour distance (duplicate points); use tie_policy='jitter'"
        )
    log_ratio = math.log(n_p - 1) - math.log(n_q) + dim * (np.log(rho) - np.log(nu))
    terms = np.exp((1 - alpha) * log_ratio)
    mean = math.fsum(terms.tolist()) / n_p
    value = (mean * bias_constant(k, alpha) - 1) / (alpha - 1)
    return DivergenceEstimate(value=value, alpha=alpha, k=k, n_p=n_p, n_q=n_q, dim=dim)
