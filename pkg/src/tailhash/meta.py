"""Dynamic meta features: per-modality projectors, Tanh+FC selectors, fusion.

Meta features combine the direct features with selector-gated commonality and
individuality codes: M = F + E1 * C + E2 * P (elementwise), where both
selectors are computed from F itself. Features arrive as (n, k) rows; the
fused result is returned with samples as columns, (k, n), for the hash side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn

# initial selector gate opening, tanh(bias) ~ 0.15
SELECTOR_BIAS_INIT = 0.15


@dataclass
class ModalitySide:
    projector: nn.Mlp     # raw_dim -> k
    selector1: nn.Mlp     # k -> k, tanh (gates the commonality)
    selector2: nn.Mlp     # k -> k, tanh (gates the individuality)


@dataclass
class HashSideParams:
    x: ModalitySide
    y: ModalitySide

    @property
    def k(self) -> int:
        return self.x.projector.out_dim


def init_side_params(raw_dim_x: int, raw_dim_y: int, k: int,
                     rng: np.random.Generator) -> HashSideParams:
    hidden = max(2 * k, 64)

    def one(raw_dim):
        proj = nn.init_mlp([raw_dim, hidden, k], rng)
        # selector weights start at zero with a small positive bias: the
        # gates begin slightly open so the commonality/individuality codes
        # shape the binary codes of every sample from the first epoch
        # (including rare-label samples that supervised pair gradients
        # seldom reach), while training remains free to close them
        sel1 = nn.Mlp([nn.init_dense(k, k, "tanh", rng)])
        sel2 = nn.Mlp([nn.init_dense(k, k, "tanh", rng)])
        for sel in (sel1, sel2):
            for layer in sel.layers:
                layer.weight[:] = 0.0
                layer.bias[:] = SELECTOR_BIAS_INIT
        return ModalitySide(proj, sel1, sel2)

    return HashSideParams(one(raw_dim_x), one(raw_dim_y))


def direct_features(projector: nn.Mlp, raw: np.ndarray) -> np.ndarray:
    """Project raw (n, raw_dim) features to (n, k) direct features."""
    out, _ = nn.forward(projector, np.asarray(raw, dtype=np.float64).T)
    return out.T


def selectors(side: ModalitySide, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive selection factors E1, E2 = tanh(FC(F)), entries in (-1, 1)."""
    Ft = np.asarray(F, dtype=np.float64).T
    e1, _ = nn.forward(side.selector1, Ft)
    e2, _ = nn.forward(side.selector2, Ft)
    return e1.T, e2.T


def meta_features(F: np.ndarray, Cstar: np.ndarray, Pv: np.ndarray,
                  E1: np.ndarray, E2: np.ndarray,
                  use_common: bool = True,
                  use_individual: bool = True) -> np.ndarray:
    """Fuse (n, k) inputs into (k, n) meta features.

    The use_* switches implement the ablations that drop the commonality
    and/or individuality term (bit-exactly equal to zeroing that term).
    """
    F = np.asarray(F, dtype=np.float64)
    for name, arr in (("Cstar", Cstar), ("Pv", Pv), ("E1", E1), ("E2", E2)):
        if np.shape(arr) != F.shape:
            raise ValueError(f"{name} shape {np.shape(arr)} != F shape {F.shape}")
    M = F.copy()
    if use_common:
        M += np.asarray(E1) * np.asarray(Cstar)
    if use_individual:
        M += np.asarray(E2) * np.asarray(Pv)
    return M.T


@dataclass
class MetaForward:
    """Tapes and intermediates of one meta-feature forward pass."""
    F: np.ndarray                 # (n, k)
    E1: np.ndarray
    E2: np.ndarray
    M: np.ndarray                 # (k, n)
    proj_tape: list
    sel1_tape: list
    sel2_tape: list
    Cstar: np.ndarray             # (n, k), treated as constant inputs
    Pv: np.ndarray
    use_common: bool
    use_individual: bool


def meta_forward(side: ModalitySide, raw: np.ndarray, Cstar: np.ndarray,
                 Pv: np.ndarray, use_common: bool = True,
                 use_individual: bool = True) -> MetaForward:
    """Forward pass through projector, selectors and fusion, keeping tapes."""
    raw_t = np.asarray(raw, dtype=np.float64).T
    F_cols, proj_tape = nn.forward(side.projector, raw_t)
    e1_cols, sel1_tape = nn.forward(side.selector1, F_cols)
    e2_cols, sel2_tape = nn.forward(side.selector2, F_cols)
    M = meta_features(F_cols.T, Cstar, Pv, e1_cols.T, e2_cols.T,
                      use_common, use_individual)
    return MetaForward(F_cols.T, e1_cols.T, e2_cols.T, M,
                       proj_tape, sel1_tape, sel2_tape,
                       np.asarray(Cstar, dtype=np.float64),
                       np.asarray(Pv, dtype=np.float64),
                       use_common, use_individual)


def meta_backward(side: ModalitySide, fwd: MetaForward, dM: np.ndarray) -> dict:
    """Backprop d(loss)/dM (k, n) into projector and selector gradients.

    The commonality/individuality codes are constants (frozen encoders), so
    gradient reaches the parameters only through F and the selectors.
    """
    dM_rows = np.asarray(dM, dtype=np.float64).T        # (n, k)
    dF = dM_rows.copy()
    sel1_grads = nn.zero_grads(side.selector1)
    sel2_grads = nn.zero_grads(side.selector2)
    if fwd.use_common:
        dE1 = dM_rows * fwd.Cstar
        sel1_grads, dF_sel1 = nn.backward(side.selector1, fwd.sel1_tape, dE1.T)
        dF += dF_sel1.T
    if fwd.use_individual:
        dE2 = dM_rows * fwd.Pv
        sel2_grads, dF_sel2 = nn.backward(side.selector2, fwd.sel2_tape, dE2.T)
        dF += dF_sel2.T
    proj_grads, _ = nn.backward(side.projector, fwd.proj_tape, dF.T)
    return {"projector": proj_grads, "selector1": sel1_grads,
            "selector2": sel2_grads}
