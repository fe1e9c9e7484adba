"""The alpha-entmax family of sparse probability mappings.

For scores s and alpha > 1 the mapping is

    p_i = [(alpha - 1) * s_i - tau]_+ ** (1 / (alpha - 1))

with tau the threshold at which f(tau) = sum_i [(alpha - 1) * s_i - tau]_+ ** (1/(alpha-1))
equals 1. alpha = 1 is the softmax limit (dense), alpha = 2 is sparsemax and
admits an exact sort-based solution. Other alphas solve f(tau) = 1 by bisection
on the bracket [(alpha-1) * max(s) - 1, (alpha-1) * max(s)], where f is >= 1 at
the lower end and 0 at the upper end.

The bisection always runs its full iteration budget, so a row's result never
depends on which other rows share a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError, ValidationError


@dataclass(frozen=True)
class EntmaxConfig:
    alpha: float = 4.0
    bisection_tol: float = 1e-9
    max_iters: int = 100

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 1.0:
            raise ValidationError(f"alpha must be finite and >= 1, got {self.alpha}")
        if self.bisection_tol <= 0.0:
            raise ValidationError(f"bisection_tol must be positive, got {self.bisection_tol}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class SparseWeightVector:
    """A point on the probability simplex stored as (index, weight) pairs.

    Indices are ascending and weights strictly positive, summing to 1 within
    float tolerance.
    """

    dim: int
    indices: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_dense(cls, p: np.ndarray) -> "SparseWeightVector":
        p = np.asarray(p, dtype=np.float64).ravel()
        idx = np.flatnonzero(p > 0.0)
        return cls(dim=p.size, indices=idx.astype(np.int64), weights=p[idx])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        out[self.indices] = self.weights
        return out

    def support(self) -> np.ndarray:
        return self.indices

    @property
    def support_size(self) -> int:
        return int(self.indices.size)


def _check_scores(s) -> np.ndarray:
    a = np.asarray(s, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ValidationError(f"scores must be a non-empty 1-D vector, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValidationError("scores must be finite")
    return a


def softmax_batch(scores: np.ndarray) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def sparsemax_batch(scores: np.ndarray) -> np.ndarray:
    """Exact Euclidean projection onto the simplex, row-wise.

    With u the scores sorted descending, the support size is the largest k
    with 1 + k * u_k > cumsum(u)_k and tau = (cumsum(u)_k - 1) / k.
    """
    s = np.asarray(scores, dtype=np.float64)
    u = -np.sort(-s, axis=-1)
    css = np.cumsum(u, axis=-1)
    ks = np.arange(1, s.shape[-1] + 1, dtype=np.float64)
    feasible = 1.0 + ks * u > css
    k = feasible.sum(axis=-1)
    idx = (k - 1).astype(np.intp)
    css_k = np.take_along_axis(css, idx[..., None], axis=-1)[..., 0]
    tau = (css_k - 1.0) / k
    return np.maximum(s - tau[..., None], 0.0)


def entmax_bisect_batch(
    scores: np.ndarray, alpha: float, tol: float = 1e-9, max_iters: int = 100
) -> np.ndarray:
    """Row-wise bisection solver for alpha > 1.

    Runs exactly ``max_iters`` halvings and renormalizes once by the final
    sum. A row converges when its pre-normalization sum is within ``tol`` of
    1, or when its bracket has collapsed to float resolution: a score sitting
    on the support boundary makes the objective arbitrarily steep there, so
    no representable tau can do better and the tau at termination stands.
    Raises :class:`SolverError` when a row misses ``tol`` with a bracket
    still wider than that (``max_iters`` too small for the tolerance);
    partial results are never returned.
    """
    if alpha <= 1.0:
        raise ValidationError(f"bisection requires alpha > 1, got {alpha}")
    s = np.asarray(scores, dtype=np.float64)
    squeeze = s.ndim == 1
    if squeeze:
        s = s[None, :]
    q = 1.0 / (alpha - 1.0)
    scaled = (alpha - 1.0) * s
    mx = scaled.max(axis=1, keepdims=True)
    lo = mx - 1.0
    hi = mx.copy()
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        f = (np.maximum(scaled - mid, 0.0) ** q).sum(axis=1, keepdims=True)
        above = f >= 1.0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    tau = 0.5 * (lo + hi)
    p = np.maximum(scaled - tau, 0.0) ** q
    sums = p.sum(axis=1)
    if not (sums > 0.0).all():
        worst = int(np.argmin(sums))
        raise SolverError(
            f"entmax bisection lost all support for alpha={alpha}: row {worst}"
        )
    residual = np.abs(sums - 1.0)
    # Bracket collapsed to a few ulps means tau is as sharp as float64 allows.
    exhausted = (hi - lo) <= 4.0 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
    bad = (residual > tol) & ~exhausted[:, 0]
    if bad.any():
        worst = int(np.argmax(np.where(bad, residual, -1.0)))
        raise SolverError(
            f"entmax bisection did not converge for alpha={alpha}: row {worst}"
            f" residual {residual[worst]:.3e} after {max_iters} iterations"
        )
    p /= sums[:, None]
    return p[0] if squeeze else p


def entmax_batch(scores: np.ndarray, cfg: EntmaxConfig) -> np.ndarray:
    """Dense row-wise probabilities for any alpha >= 1."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.isfinite(s).all():
        raise ValidationError("scores must be finite")
    if s.shape[-1] == 0:
        raise ValidationError("scores must have at least one column")
    if cfg.alpha == 1.0:
        return softmax_batch(s)
    if cfg.alpha == 2.0:
        return sparsemax_batch(s)
    return entmax_bisect_batch(s, cfg.alpha, cfg.bisection_tol, cfg.max_iters)


def softmax(s) -> SparseWeightVector:
    """Softmax with max-subtraction. Full support for any finite input."""
    return SparseWeightVector.from_dense(softmax_batch(_check_scores(s)))


def sparsemax(s) -> SparseWeightVector:
    return SparseWeightVector.from_dense(sparsemax_batch(_check_scores(s)))


def entmax_bisect(s, alpha: float, tol: float = 1e-9, max_iters: int = 100) -> SparseWeightVector:
    """General solver entry point, usable as an oracle path for alpha = 2."""
    return SparseWeightVector.from_dense(entmax_bisect_batch(_check_scores(s), alpha, tol, max_iters))


def entmax(s, cfg: EntmaxConfig | None = None) -> SparseWeightVector:
    """alpha-entmax of a score vector. alpha = 1 and alpha = 2 use closed forms."""
    cfg = cfg or EntmaxConfig()
    return SparseWeightVector.from_dense(entmax_batch(_check_scores(s), cfg))


def support(p: SparseWeightVector) -> np.ndarray:
    """Indices carrying strictly positive weight."""
    return p.support()
