"""Plain-array probability helpers (no tape involvement)."""

from __future__ import annotations

import numpy as np

from ..exceptions import ContractViolation

__all__ = ["softmax", "one_hot", "categorical_sample", "kl_categorical_to_uniform"]

_LOG_CLAMP = 1e-12


def softmax(x: np.ndarray, row_wise: bool = True) -> np.ndarray:
    """Numerically stable softmax; row_wise=False treats x as one vector."""
    arr = np.asarray(x, dtype=np.float64)
    if not row_wise:
        arr = arr.reshape(1, -1)
    shifted = arr - arr.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)
    return p if row_wise else p.ravel()


def one_hot(indices, n: int) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    out = np.zeros((idx.shape[0], n))
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out


def categorical_sample(rng: np.random.Generator, probs: np.ndarray) -> int:
    """Inverse-CDF draw from one probability vector; validates normalization."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    total = p.sum()
    if not np.isfinite(total) or abs(total - 1.0) > 1e-9 or (p < 0).any():
        raise ContractViolation(f"probabilities sum to {total!r}, expected 1 within 1e-9")
    u = rng.random()
    acc = 0.0
    for i in range(p.shape[0] - 1):
        acc += p[i]
        if u < acc:
            return i
    return p.shape[0] - 1


def kl_categorical_to_uniform(probs: np.ndarray) -> float:
    """D_KL(p || uniform) = log K - H(p), with probabilities clamped at 1e-12."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    k = p.shape[0]
    q = np.clip(p, _LOG_CLAMP, None)
    return float(np.log(k) + np.sum(p * np.log(q)))
