"""Diagonal-Gaussian embeddings, analytic KL divergence, and the asymmetric similarity.

Every sentence is represented by a mean vector and a strictly positive
per-dimension variance vector (the diagonal of the covariance). Because the
covariance is diagonal, the KL divergence between two embeddings reduces to a
sum over dimensions and costs O(d). All math here runs in float64; values are
immutable after construction and every function is pure, so concurrent reads
are safe.
"""

from __future__ import annotations

import numpy as np

# Variance components at or below this are degenerate: 1/v and log v blow up.
MIN_VARIANCE = 1e-12

# Raw KL this far below zero is rounding noise and is clamped; anything more
# negative indicates a bug upstream and is an error.
KL_NEGATIVE_TOLERANCE = 1e-9

_F64_MAX = np.finfo(np.float64).max


class GaussianEmbedding:
    """A diagonal Gaussian over embedding space: mean vector plus variance vector.

    Both vectors must share the same dimension d >= 1, every component must be
    finite, and every variance component must exceed ``MIN_VARIANCE``. The
    arrays are copied to float64 and frozen.
    """

    __slots__ = ("mean", "variance")

    def __init__(self, mean, variance):
        mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        variance = np.asarray(variance, dtype=np.float64).reshape(-1)
        if mean.size == 0:
            raise ValueError("embedding dimension must be >= 1")
        if mean.shape != variance.shape:
            raise ValueError(
                f"mean and variance dimensions differ: {mean.size} vs {variance.size}"
            )
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean has non-finite components")
        if not np.all(np.isfinite(variance)):
            raise ValueError("variance has non-finite components")
        if np.any(variance <= MIN_VARIANCE):
            raise ValueError(
                f"variance components must be > {MIN_VARIANCE} (degenerate covariance)"
            )
        mean = mean.copy()
        variance = variance.copy()
        mean.flags.writeable = False
        variance.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    def __setattr__(self, name, value):
        raise AttributeError("GaussianEmbedding is immutable")

    @property
    def dim(self) -> int:
        return self.mean.size

    def __eq__(self, other):
        if not isinstance(other, GaussianEmbedding):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(
            self.variance, other.variance
        )

    def __repr__(self):
        return f"GaussianEmbedding(d={self.dim})"


def _check_pair(a: GaussianEmbedding, b: GaussianEmbedding) -> None:
    if not isinstance(a, GaussianEmbedding) or not isinstance(b, GaussianEmbedding):
        raise TypeError("expected GaussianEmbedding arguments")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def _finalize_kl(raw: float) -> float:
    """Clamp rounding-level negatives to zero; reject anything clearly negative."""
    if raw >= 0.0:
        return raw
    if raw >= -KL_NEGATIVE_TOLERANCE:
        return 0.0
    raise ArithmeticError(f"KL divergence evaluated to {raw}, below rounding tolerance")


def _kl_raw(a: GaussianEmbedding, b: GaussianEmbedding) -> float:
    diff = a.mean - b.mean
    # Overflow to inf on extreme-but-valid inputs is handled by the callers.
    with np.errstate(over="ignore"):
        return 0.5 * float(
            np.sum(np.log(b.variance) - np.log(a.variance))
            + np.sum(a.variance / b.variance)
            + np.sum(diff * diff / b.variance)
            - a.dim
        )


def kl_divergence(a: GaussianEmbedding, b: GaussianEmbedding) -> float:
    """KL divergence KL(a || b) between two diagonal Gaussians, in O(d).

    With diagonal covariance the determinant is the product of the variances
    and the inverse is componentwise, so the closed form collapses to

        1/2 * sum_i [ log(vb_i / va_i) + va_i / vb_i + (ma_i - mb_i)^2 / vb_i - 1 ]

    The result is non-negative up to rounding; tiny negative round-off is
    clamped to exactly 0.
    """
    _check_pair(a, b)
    return _finalize_kl(_kl_raw(a, b))


def similarity(query: GaussianEmbedding, reference: GaussianEmbedding) -> float:
    """Asymmetric similarity of ``query`` with respect to ``reference``.

    Defined as 1 / (1 + KL(query || reference)), which maps [0, inf) onto
    (0, 1]. The value is exactly 1 iff the two embeddings coincide. When the
    query's variance widens relative to the reference, the KL grows faster in
    this argument order than in the reverse one, so the measure orders
    broad-versus-narrow pairs asymmetrically.
    """
    kl = kl_divergence(query, reference)
    # Guard a non-finite KL from pathological-but-valid float inputs so the
    # result stays inside the open interval.
    if kl > _F64_MAX:
        kl = _F64_MAX
    return 1.0 / (1.0 + kl)


def kl_gradients(a: GaussianEmbedding, b: GaussianEmbedding):
    """Partial derivatives of kl_divergence(a, b) w.r.t. both embeddings.

    Returns ``(d_mean_a, d_var_a, d_mean_b, d_var_b)`` as float64 vectors:

        dKL/dma =  (ma - mb) / vb
        dKL/dva =  (1/vb - 1/va) / 2
        dKL/dmb = -(ma - mb) / vb
        dKL/dvb =  (1/vb - va/vb^2 - (ma - mb)^2 / vb^2) / 2
    """
    _check_pair(a, b)
    diff = a.mean - b.mean
    inv_vb = 1.0 / b.variance
    d_mean_a = diff * inv_vb
    d_var_a = 0.5 * (inv_vb - 1.0 / a.variance)
    d_mean_b = -d_mean_a
    d_var_b = 0.5 * (inv_vb - (a.variance + diff * diff) * inv_vb * inv_vb)
    return d_mean_a, d_var_a, d_mean_b, d_var_b


def kl_matrix(mean_q, var_q, mean_r, var_r) -> np.ndarray:
    """KL(q_i || r_j) for all rows i of the query block and j of the reference block.

    Inputs are (n_q, d) and (n_r, d) float arrays with strictly positive
    variances; the output is an (n_q, n_r) matrix. Negative round-off is
    clamped to 0. This is the batched kernel behind scoring and training.
    """
    mean_q = np.asarray(mean_q, dtype=np.float64)
    var_q = np.asarray(var_q, dtype=np.float64)
    mean_r = np.asarray(mean_r, dtype=np.float64)
    var_r = np.asarray(var_r, dtype=np.float64)
    if mean_q.shape[1] != mean_r.shape[1]:
        raise ValueError(
            f"dimension mismatch: {mean_q.shape[1]} vs {mean_r.shape[1]}"
        )
    d = mean_q.shape[1]
    log_det_q = np.sum(np.log(var_q), axis=1)  # (n_q,)
    log_det_r = np.sum(np.log(var_r), axis=1)  # (n_r,)
    inv_var_r = 1.0 / var_r  # (n_r, d)
    trace = var_q @ inv_var_r.T  # (n_q, n_r)
    diff = mean_q[:, None, :] - mean_r[None, :, :]  # (n_q, n_r, d)
    quad = np.einsum("qrk,rk->qr", diff * diff, inv_var_r)
    kl = 0.5 * (log_det_r[None, :] - log_det_q[:, None] + trace + quad - d)
    return np.maximum(kl, 0.0)


def similarity_matrix(mean_q, var_q, mean_r, var_r) -> np.ndarray:
    """Batched counterpart of similarity(): 1 / (1 + kl_matrix(...))."""
    kl = kl_matrix(mean_q, var_q, mean_r, var_r)
    return 1.0 / (1.0 + np.minimum(kl, _F64_MAX))


def kl_pairs(mean_q, var_q, mean_r, var_r) -> np.ndarray:
    """KL(q_i || r_i) row by row for two aligned (n, d) blocks."""
    mean_q = np.asarray(mean_q, dtype=np.float64)
    var_q = np.asarray(var_q, dtype=np.float64)
    mean_r = np.asarray(mean_r, dtype=np.float64)
    var_r = np.asarray(var_r, dtype=np.float64)
    if mean_q.shape != mean_r.shape:
        raise ValueError(f"shape mismatch: {mean_q.shape} vs {mean_r.shape}")
    d = mean_q.shape[1]
    diff = mean_q - mean_r
    kl = 0.5 * (
        np.sum(np.log(var_r) - np.log(var_q), axis=1)
        + np.sum(var_q / var_r, axis=1)
        + np.sum(diff * diff / var_r, axis=1)
        - d
    )
    return np.maximum(kl, 0.0)


def similarity_pairs(mean_q, var_q, mean_r, var_r) -> np.ndarray:
    """Row-by-row counterpart of similarity()."""
    kl = kl_pairs(mean_q, var_q, mean_r, var_r)
    return 1.0 / (1.0 + np.minimum(kl, _F64_MAX))
