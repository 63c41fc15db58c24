"""Label- and sample-level similarity structures.

Pairwise sample similarity S (share at least one label), per-modality label
affinity built from average Hausdorff distances between per-label sample
sets, and the graph-Laplacian regularizer on commonality label prototypes
with its gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

SIGMA_FLOOR = 1e-8


@dataclass
class LabelAffinity:
    H: np.ndarray       # (c, c) average Hausdorff distances, zero diagonal
    R: np.ndarray       # (c, c) similarities exp(-H / sigma^2), in (0, 1]
    D: np.ndarray       # (c,) degree vector, row sums of R
    sigma: float

    @property
    def laplacian(self) -> np.ndarray:
        return np.diag(self.D) - self.R

    def restrict(self, labels: np.ndarray) -> "LabelAffinity":
        """Affinity over a label subset; degrees recomputed on the sub-block."""
        H = self.H[np.ix_(labels, labels)]
        R = self.R[np.ix_(labels, labels)]
        return LabelAffinity(H, R, R.sum(axis=1), self.sigma)


def pair_similarity(L: np.ndarray) -> np.ndarray:
    """S_ij = 1 iff samples i and j share at least one label."""
    L = np.asarray(L)
    if np.any(L.sum(axis=1) == 0):
        raise ValueError("every sample must carry at least one label")
    return (L.astype(np.int64) @ L.T.astype(np.int64) > 0).astype(np.uint8)


def avg_hausdorff(set_a: np.ndarray, set_b: np.ndarray) -> float:
    """Average Hausdorff distance between two point sets (Euclidean).

    Sum of nearest-neighbor distances in both directions, divided by the
    total number of points |A| + |B|.
    """
    A = np.atleast_2d(np.asarray(set_a, dtype=np.float64))
    B = np.atleast_2d(np.asarray(set_b, dtype=np.float64))
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("point sets must be non-empty")
    d = cdist(A, B)
    return float((d.min(axis=1).sum() + d.min(axis=0).sum())
                 / (A.shape[0] + B.shape[0]))


def label_affinity(features: np.ndarray, L: np.ndarray) -> LabelAffinity:
    """Label similarity R_ab = exp(-H_ab / sigma^2) from per-label sets.

    sigma is the mean of the off-diagonal H entries (floored to avoid
    blow-up on degenerate all-identical data).
    """
    features = np.asarray(features, dtype=np.float64)
    L = np.asarray(L)
    c = L.shape[1]
    sets = [features[L[:, a] > 0] for a in range(c)]
    for a, s in enumerate(sets):
        if s.shape[0] == 0:
            raise ValueError(f"label {a} has no samples")
    H = np.zeros((c, c))
    for a in range(c):
        for b in range(a + 1, c):
            H[a, b] = H[b, a] = avg_hausdorff(sets[a], sets[b])
    off = H[~np.eye(c, dtype=bool)]
    sigma = max(float(off.mean()) if off.size else 0.0, SIGMA_FLOOR)
    R = np.exp(-H / sigma ** 2)
    return LabelAffinity(H, R, R.sum(axis=1), sigma)


def pooling_matrix(L: np.ndarray) -> np.ndarray:
    """(n, c) mean-pooling map: W[i, a] = 1/n_a if sample i carries label a."""
    L = np.asarray(L, dtype=np.float64)
    counts = L.sum(axis=0)
    if np.any(counts == 0):
        raise ValueError("every label must have at least one sample")
    return L / counts[None, :]


def label_prototypes(codes: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Mean commonality code per label; columns are labels, (k, c)."""
    W = pooling_matrix(L)
    return np.asarray(codes, dtype=np.float64).T @ W


def j1_loss_and_grad(prototypes: np.ndarray, aff_x: LabelAffinity,
                     aff_y: LabelAffinity) -> tuple[float, np.ndarray]:
    """Cross-modal commonality regularizer tr(C (Lx + Ly) C^T).

    Returns the value and its gradient 2 C (Lx + Ly) with respect to the
    (k, c) prototype matrix.
    """
    C = np.asarray(prototypes, dtype=np.float64)
    lap = aff_x.laplacian + aff_y.laplacian
    if C.shape[1] != lap.shape[0]:
        raise ValueError("prototype columns must match label count")
    CL = C @ lap
    return float(np.sum(CL * C)), 2.0 * CL


def j1_pairwise(prototypes: np.ndarray, aff_x: LabelAffinity,
                aff_y: LabelAffinity) -> float:
    """Pairwise-sum form 1/2 sum_ab ||C_a - C_b||^2 (Rx_ab + Ry_ab).

    Independent of the trace form above; the two must agree to rounding.
    """
    C = np.asarray(prototypes, dtype=np.float64)
    R = aff_x.R + aff_y.R
    c = C.shape[1]
    total = 0.0
    for a in range(c):
        for b in range(c):
            total += 0.5 * float(np.sum((C[:, a] - C[:, b]) ** 2)) * R[a, b]
    return total
