"""Hash-code learning: pairwise likelihood loss, analytic meta-feature
gradients, closed-form sign update of the unified codes, and the phase-2
alternating trainer.

Meta features are (k, n) with samples as columns. The unified code matrix B
is (k, n) with entries exactly +/-1 and is refreshed once per epoch by
B = sign(Mx + My) over the full base set.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import affinity, autoencoder, meta, nn
from .datagen import Dataset


@dataclass
class HashHyper:
    gamma: float = 1.0
    eta: float = 1.0
    lr: float = 10.0 ** (-1.5)
    batch_size: int = 128
    max_epochs: int = 500

    def __post_init__(self):
        if self.gamma < 0 or self.eta < 0:
            raise ValueError("gamma and eta must be non-negative")


@dataclass(frozen=True)
class Variant:
    """Which meta-feature terms are active; implements the ablations."""
    name: str
    use_common: bool = True
    use_individual: bool = True
    use_meta_x: bool = True     # False: M^x := F^x
    use_meta_y: bool = True     # False: M^y := F^y

    def flags(self, modality: str) -> tuple[bool, bool]:
        use_meta = self.use_meta_x if modality == "x" else self.use_meta_y
        return (self.use_common and use_meta,
                self.use_individual and use_meta)


VARIANTS: dict[str, Variant] = {
    "full": Variant("full"),
    "wo_c": Variant("wo_c", use_common=False),
    "wo_i": Variant("wo_i", use_individual=False),
    "wo_ic": Variant("wo_ic", use_common=False, use_individual=False),
    "wo_meta_i": Variant("wo_meta_i", use_meta_x=False),
    "wo_meta_t": Variant("wo_meta_t", use_meta_y=False),
}


def phi(Mx: np.ndarray, My: np.ndarray) -> np.ndarray:
    """phi_ij = 1/2 <Mx_col_i, My_col_j>, an (n, n) matrix."""
    Mx = np.asarray(Mx, dtype=np.float64)
    My = np.asarray(My, dtype=np.float64)
    if Mx.shape != My.shape:
        raise ValueError("meta feature shapes must match")
    return 0.5 * Mx.T @ My


def loss2(Mx: np.ndarray, My: np.ndarray, S: np.ndarray, B: np.ndarray,
          hyper: HashHyper) -> tuple[float, dict]:
    """Negative log likelihood + quantization + bit-balance terms."""
    S = np.asarray(S, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    ph = phi(Mx, My)
    nll = -float(np.sum(S * ph - nn.softplus(ph)))
    quant = float(np.sum((B - Mx) ** 2) + np.sum((B - My) ** 2))
    bal = float(np.sum(Mx.sum(axis=1) ** 2) + np.sum(My.sum(axis=1) ** 2))
    total = nll + hyper.gamma * quant + hyper.eta * bal
    if not np.isfinite(total):
        raise nn.NumericsError(
            f"non-finite Loss2 (nll={nll}, quant={quant}, bal={bal})")
    return total, {"nll": nll, "quantization": quant, "balance": bal}


def grad_meta_x(Mx, My, S, B, hyper: HashHyper) -> np.ndarray:
    """d Loss2 / d Mx, column i:
    1/2 sum_j (sigma(phi_ij) - S_ij) My_j + 2 gamma (Mx_i - B_i) + 2 eta Mx 1.
    """
    Mx = np.asarray(Mx, dtype=np.float64)
    My = np.asarray(My, dtype=np.float64)
    A = nn.sigmoid(phi(Mx, My)) - np.asarray(S, dtype=np.float64)
    g = 0.5 * My @ A.T
    g += 2.0 * hyper.gamma * (Mx - np.asarray(B, dtype=np.float64))
    g += 2.0 * hyper.eta * Mx.sum(axis=1)[:, None]
    return g


def grad_meta_y(Mx, My, S, B, hyper: HashHyper) -> np.ndarray:
    """Symmetric counterpart of grad_meta_x for the second modality."""
    Mx = np.asarray(Mx, dtype=np.float64)
    My = np.asarray(My, dtype=np.float64)
    A = nn.sigmoid(phi(Mx, My)) - np.asarray(S, dtype=np.float64)
    g = 0.5 * Mx @ A
    g += 2.0 * hyper.gamma * (My - np.asarray(B, dtype=np.float64))
    g += 2.0 * hyper.eta * My.sum(axis=1)[:, None]
    return g


def update_B(Mx: np.ndarray, My: np.ndarray) -> np.ndarray:
    """Closed-form code update B = sign(Mx + My); sign(0) -> +1."""
    Mx = np.asarray(Mx, dtype=np.float64)
    My = np.asarray(My, dtype=np.float64)
    if Mx.shape != My.shape:
        raise ValueError("meta feature shapes must match")
    return np.where(Mx + My >= 0.0, 1.0, -1.0)


def base_code_sets(icae: autoencoder.IcaeParams, Xb: np.ndarray,
                   Yb: np.ndarray
                   ) -> tuple[autoencoder.Codes, autoencoder.Codes]:
    """Per-side autoencoder codes with the other modality zero-imputed.

    Each modality's meta features are enriched only with codes that the
    per-modality hash function can reproduce at query time, so the codes a
    sample receives during training and the codes its modality's hash
    function produces for it as a query are identical.
    """
    codes_x = autoencoder.encode_raw(icae, Xb, np.zeros_like(Yb), drop="y")
    codes_y = autoencoder.encode_raw(icae, np.zeros_like(Xb), Yb, drop="x")
    return codes_x, codes_y


def _modality_pass(side: meta.HashSideParams, X: np.ndarray, Y: np.ndarray,
                   codes_x: autoencoder.Codes, codes_y: autoencoder.Codes,
                   variant: Variant
                   ) -> tuple[meta.MetaForward, meta.MetaForward]:
    """Forward both modalities with precomputed (constant) autoencoder codes."""
    cx, ix = variant.flags("x")
    cy, iy = variant.flags("y")
    fwd_x = meta.meta_forward(side.x, X, codes_x.Cstar, codes_x.Px, cx, ix)
    fwd_y = meta.meta_forward(side.y, Y, codes_y.Cstar, codes_y.Py, cy, iy)
    return fwd_x, fwd_y


def full_base_codes(dataset: Dataset, icae: autoencoder.IcaeParams,
                    side: meta.HashSideParams,
                    variant: Variant = VARIANTS["full"],
                    codes: tuple[autoencoder.Codes, autoencoder.Codes] | None = None
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Mx, My, B) over the whole base split with the current parameters."""
    Xb, Yb, _ = dataset.base()
    if codes is None:
        codes = base_code_sets(icae, Xb, Yb)
    fwd_x, fwd_y = _modality_pass(side, Xb, Yb, codes[0], codes[1], variant)
    return fwd_x.M, fwd_y.M, update_B(fwd_x.M, fwd_y.M)


def _step_side(side_v: meta.ModalitySide, fwd: meta.MetaForward,
               g_meta: np.ndarray, lr: float) -> None:
    grads = meta.meta_backward(side_v, fwd, g_meta)
    nn.sgd_step(side_v.projector, grads["projector"], lr)
    nn.sgd_step(side_v.selector1, grads["selector1"], lr)
    nn.sgd_step(side_v.selector2, grads["selector2"], lr)


def train_hash(dataset: Dataset, icae: autoencoder.IcaeParams,
               side: meta.HashSideParams, hyper: HashHyper, seed: int = 0,
               variant: Variant = VARIANTS["full"]
               ) -> tuple[meta.HashSideParams, np.ndarray, list[float]]:
    """Phase-2 alternating optimization of the hash-side parameters and B.

    Per minibatch the image-side parameters are updated first, the text side
    second (with the image side's fresh forward); B is recomputed over the
    full base set at the end of each epoch. The autoencoder is frozen and
    its codes enter as constants.
    """
    Xb, Yb, Lb = dataset.base()
    n = Xb.shape[0]
    if n == 0:
        raise ValueError("empty base split")
    rng = np.random.default_rng(seed)
    t = int(np.ceil(n / hyper.batch_size))

    # the autoencoder and its feature maps are frozen, so every sample's
    # codes are constant through phase 2; compute them once
    base_codes = base_code_sets(icae, Xb, Yb)

    def batch_codes(idx):
        return tuple(autoencoder.Codes(c.Px[idx], c.Py[idx], c.Cstar[idx])
                     for c in base_codes)

    _, _, B = full_base_codes(dataset, icae, side, variant, codes=base_codes)
    trace: list[float] = []
    for _ in range(hyper.max_epochs):
        batch_losses = []
        for _ in range(t):
            idx = rng.choice(n, size=min(hyper.batch_size, n), replace=False)
            S = affinity.pair_similarity(Lb[idx]).astype(np.float64)
            B_batch = B[:, idx]
            codes = batch_codes(idx)

            fwd_x, fwd_y = _modality_pass(side, Xb[idx], Yb[idx], codes[0],
                                          codes[1], variant)
            value, _ = loss2(fwd_x.M, fwd_y.M, S, B_batch, hyper)
            batch_losses.append(value)

            # the pairwise loss gradient grows with the batch size, and
            # backprop sums over the batch again; normalize by nb^2 so the
            # parameter step size is batch-size independent
            nb = idx.size
            gx = grad_meta_x(fwd_x.M, fwd_y.M, S, B_batch, hyper) / nb ** 2
            _step_side(side.x, fwd_x, gx, hyper.lr)

            # image side moved: re-run its forward before the text-side step
            fwd_x2, fwd_y2 = _modality_pass(side, Xb[idx], Yb[idx], codes[0],
                                            codes[1], variant)
            gy = grad_meta_y(fwd_x2.M, fwd_y2.M, S, B_batch, hyper) / nb ** 2
            _step_side(side.y, fwd_y2, gy, hyper.lr)

        _, _, B = full_base_codes(dataset, icae, side, variant,
                                  codes=base_codes)
        trace.append(float(np.mean(batch_losses)))
    return side, B, trace
