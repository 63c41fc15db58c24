"""Hilbert-Schmidt independence criterion between two code matrices.

RBF kernels over rows (samples as rows here), projector centering, the
biased trace estimator (n-1)^(-2) tr(Kx A Ky A), and its analytic gradient
with the bandwidths treated as constants during differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BANDWIDTH_FLOOR = 1e-8


@dataclass
class KernelMatrix:
    K: np.ndarray
    sigma: float


def pairwise_sq_dists(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    sq = np.sum(P * P, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (P @ P.T)
    return np.maximum(d2, 0.0)


def bandwidth(P: np.ndarray) -> float:
    """Mean off-diagonal pairwise squared distance, floored."""
    d2 = pairwise_sq_dists(P)
    n = d2.shape[0]
    off = d2[~np.eye(n, dtype=bool)]
    return max(float(off.mean()) if off.size else 0.0, BANDWIDTH_FLOOR)


def rbf_kernel(P: np.ndarray, sigma: float) -> KernelMatrix:
    """K_ab = exp(-||P_a - P_b||^2 / sigma) over rows of P."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return KernelMatrix(np.exp(-pairwise_sq_dists(P) / sigma), float(sigma))


def _as_kernel(K) -> np.ndarray:
    return K.K if isinstance(K, KernelMatrix) else np.asarray(K, dtype=np.float64)


def hsic_value(Kx, Ky, n: int | None = None) -> float:
    """(n-1)^(-2) tr(Kx A Ky A) with A = I - ee^T/n."""
    Kx = _as_kernel(Kx)
    Ky = _as_kernel(Ky)
    m = Kx.shape[0]
    if n is None:
        n = m
    if n < 2:
        raise ValueError("need at least 2 samples")
    KxC = Kx - Kx.mean(axis=1, keepdims=True)       # Kx A
    KyC = Ky - Ky.mean(axis=1, keepdims=True)       # Ky A
    return float(np.sum(KxC * KyC.T) / (n - 1) ** 2)


def hsic_grad(Px: np.ndarray, Py: np.ndarray,
              sigmas: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of hsic_value through the RBF kernels, wrt rows of Px and Py.

    Bandwidths are fixed constants here (no gradient through sigma).
    """
    Px = np.asarray(Px, dtype=np.float64)
    Py = np.asarray(Py, dtype=np.float64)
    if Px.shape[0] != Py.shape[0]:
        raise ValueError("row counts must match")
    sx, sy = sigmas
    if sx <= 0 or sy <= 0:
        raise ValueError("degenerate bandwidth")
    n = Px.shape[0]
    Kx = rbf_kernel(Px, sx).K
    Ky = rbf_kernel(Py, sy).K
    A = np.eye(n) - np.ones((n, n)) / n
    scale = 1.0 / (n - 1) ** 2
    Wx = scale * (A @ Ky @ A)     # d hsic / d Kx, symmetric
    Wy = scale * (A @ Kx @ A)

    def kernel_chain(W, K, P, sigma):
        T = W * K
        row = T.sum(axis=1)
        return (-4.0 / sigma) * (row[:, None] * P - T @ P)

    return kernel_chain(Wx, Kx, Px, sx), kernel_chain(Wy, Ky, Py, sy)
