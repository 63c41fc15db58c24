"""Individuality-commonality autoencoder and its phase-1 trainer.

Per-modality individuality encoders, a joint commonality encoder over the
concatenated direct features, and per-modality decoders that reconstruct a
modality from [commonality, individuality]. The training objective is

    Loss1 = alpha * J1 + beta * J2 + J3

where J1 is the label-affinity Laplacian regularizer on commonality
prototypes, J2 the HSIC between the two individuality codes and J3 the
normalized reconstruction error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import affinity, hsic, nn
from .datagen import Dataset


@dataclass
class IcaeParams:
    feat_x: nn.Mlp         # raw_dim_x -> d_x, frozen direct-feature map
    feat_y: nn.Mlp         # raw_dim_y -> d_y, frozen direct-feature map
    enc_ind_x: nn.Mlp      # d_x -> k
    enc_ind_y: nn.Mlp      # d_y -> k
    enc_common: nn.Mlp     # d_x + d_y -> k
    dec_x: nn.Mlp          # 2k -> d_x
    dec_y: nn.Mlp          # 2k -> d_y
    alpha: float = 0.05
    beta: float = 0.05
    # per-dimension RMS of each code stream over the base split, measured
    # once after phase 1; downstream consumers divide by these so the code
    # terms enter the meta fusion at unit scale (the raw commonality output
    # can be orders of magnitude smaller than the direct features)
    code_scales: Optional[dict[str, np.ndarray]] = None

    @property
    def k(self) -> int:
        return self.enc_ind_x.out_dim

    def trainable_nets(self) -> dict[str, nn.Mlp]:
        return {"enc_ind_x": self.enc_ind_x, "enc_ind_y": self.enc_ind_y,
                "enc_common": self.enc_common, "dec_x": self.dec_x,
                "dec_y": self.dec_y}

    def nets(self) -> dict[str, nn.Mlp]:
        # feat_x / feat_y are part of the persisted state but never trained:
        # the codes must stay a fixed function of the raw inputs once the
        # autoencoder is frozen
        return dict(self.trainable_nets(), feat_x=self.feat_x,
                    feat_y=self.feat_y)


@dataclass
class Codes:
    Px: np.ndarray        # (n, k)
    Py: np.ndarray        # (n, k)
    Cstar: np.ndarray     # (n, k)


def init_icae(raw_dim_x: int, raw_dim_y: int, k: int,
              rng: np.random.Generator, alpha: float = 0.05,
              beta: float = 0.05) -> IcaeParams:
    """Initialize the autoencoder over k-dim direct features of each modality.

    The direct-feature maps feat_x / feat_y are identity layers fixed at
    initialization and never trained, so the codes remain a stable function
    of the raw inputs while the hash-side projectors train in phase 2.
    """
    hidden = max(2 * k, 64)
    d_x, d_y = raw_dim_x, raw_dim_y

    def identity_map(dim):
        return nn.Mlp([nn.DenseLayer(np.eye(dim), np.zeros(dim), "identity")])

    return IcaeParams(
        feat_x=identity_map(raw_dim_x),
        feat_y=identity_map(raw_dim_y),
        enc_ind_x=nn.init_mlp([d_x, hidden, k], rng),
        enc_ind_y=nn.init_mlp([d_y, hidden, k], rng),
        enc_common=nn.init_mlp([d_x + d_y, hidden, k], rng),
        dec_x=nn.init_mlp([2 * k, hidden, d_x], rng),
        dec_y=nn.init_mlp([2 * k, hidden, d_y], rng),
        alpha=alpha, beta=beta)


def direct_features(params: IcaeParams, modality: str,
                    raw: np.ndarray) -> np.ndarray:
    """Frozen direct-feature map of one modality, (n, raw_dim) -> (n, d_v)."""
    if modality not in ("x", "y"):
        raise ValueError("modality must be 'x' or 'y'")
    net = params.feat_x if modality == "x" else params.feat_y
    out, _ = nn.forward(net, np.asarray(raw, dtype=np.float64).T)
    return out.T


def encode_raw(params: IcaeParams, Xraw: np.ndarray, Yraw: np.ndarray,
               drop: Optional[str] = None) -> Codes:
    """Codes of a batch straight from raw inputs, via the frozen feature maps.

    With drop='x' or 'y' that modality's feature block of the commonality
    input is zeroed and its raw features are ignored entirely, so the other
    modality can be encoded alone (pass zeros for the dropped side).
    """
    Fx = direct_features(params, "x", Xraw)
    Fy = direct_features(params, "y", Yraw)
    return encode(params, Fx, Fy, drop=drop)


def _common_input(Fx: np.ndarray, Fy: np.ndarray,
                  drop: Optional[str]) -> np.ndarray:
    """Concatenated (d_x + d_y, n) input with one modality optionally zeroed."""
    Fx_t = np.asarray(Fx, dtype=np.float64).T
    Fy_t = np.asarray(Fy, dtype=np.float64).T
    if drop == "x":
        Fx_t = np.zeros_like(Fx_t)
    elif drop == "y":
        Fy_t = np.zeros_like(Fy_t)
    elif drop is not None:
        raise ValueError("drop must be None, 'x' or 'y'")
    return np.vstack([Fx_t, Fy_t])


def encode(params: IcaeParams, Fx: np.ndarray, Fy: np.ndarray,
           drop: Optional[str] = None) -> Codes:
    """Individuality and commonality codes of a batch, (n, k) each.

    Once calibration scales exist (after phase 1) each code dimension is
    standardized by its base-split RMS; the commonality stream has separate
    scales for the full, x-only and y-only input variants.
    """
    if np.shape(Fx)[0] != np.shape(Fy)[0]:
        raise ValueError("modalities must have the same sample count")
    Px, _ = nn.forward(params.enc_ind_x, np.asarray(Fx, dtype=np.float64).T)
    Py, _ = nn.forward(params.enc_ind_y, np.asarray(Fy, dtype=np.float64).T)
    Cs, _ = nn.forward(params.enc_common, _common_input(Fx, Fy, drop))
    codes = Codes(Px.T, Py.T, Cs.T)
    if params.code_scales is not None:
        s = params.code_scales
        c_key = {"x": "cy", "y": "cx", None: "c"}[drop]
        codes = Codes(codes.Px / s["px"], codes.Py / s["py"],
                      codes.Cstar / s[c_key])
    return codes


SCALE_FLOOR = 1e-8


def calibrate_code_scales(params: IcaeParams, Xb: np.ndarray,
                          Yb: np.ndarray) -> None:
    """Measure per-dimension code RMS over the base split and store it.

    "cx" / "cy" are the commonality scales when only that modality is
    present (the query-time regime); "c" is the both-modality scale.
    """
    params.code_scales = None
    rms = lambda a: np.maximum(np.sqrt(np.mean(a ** 2, axis=0)), SCALE_FLOOR)
    both = encode_raw(params, Xb, Yb)
    only_x = encode_raw(params, Xb, np.zeros_like(Yb), drop="y")
    only_y = encode_raw(params, np.zeros_like(Xb), Yb, drop="x")
    params.code_scales = {"px": rms(both.Px), "py": rms(both.Py),
                          "c": rms(both.Cstar), "cx": rms(only_x.Cstar),
                          "cy": rms(only_y.Cstar)}


def reconstruction_loss(params: IcaeParams, Fx: np.ndarray, Fy: np.ndarray,
                        codes: Codes) -> tuple[float, dict]:
    """J3 = sum_v ||F^v - dec_v([C*, P^v])||_F^2 / (n d_v), with decoder grads.

    Returned dict has per-decoder parameter grads and the gradient wrt the
    (n, k) Cstar / Px / Py inputs.
    """
    n = np.shape(Fx)[0]
    k = params.k
    value = 0.0
    out = {"dCstar": np.zeros((n, k)), "dPx": None, "dPy": None}
    for v, (F, P, dec) in {"x": (Fx, codes.Px, params.dec_x),
                           "y": (Fy, codes.Py, params.dec_y)}.items():
        F_t = np.asarray(F, dtype=np.float64).T
        U = np.vstack([np.asarray(codes.Cstar).T, np.asarray(P).T])
        recon, tape = nn.forward(dec, U)
        resid = recon - F_t
        d_v = F_t.shape[0]
        value += float(np.sum(resid ** 2)) / (n * d_v)
        grads, dU = nn.backward(dec, tape, 2.0 * resid / (n * d_v))
        out[f"dec_{v}"] = grads
        out["dCstar"] += dU[:k].T
        out[f"dP{v}"] = dU[k:].T
    return value, out


def loss1(params: IcaeParams, Fx: np.ndarray, Fy: np.ndarray, L: np.ndarray,
          aff_x: affinity.LabelAffinity, aff_y: affinity.LabelAffinity,
          drop: Optional[str] = None) -> tuple[float, dict, dict]:
    """Full phase-1 loss with analytic gradients for all five nets.

    Returns (value, parts, grads) where parts has the raw J1/J2/J3 values and
    grads maps net name -> per-layer (dW, db) list.
    """
    Fx = np.asarray(Fx, dtype=np.float64)
    Fy = np.asarray(Fy, dtype=np.float64)
    n = Fx.shape[0]
    k = params.k

    Px_cols, tape_ix = nn.forward(params.enc_ind_x, Fx.T)
    Py_cols, tape_iy = nn.forward(params.enc_ind_y, Fy.T)
    Cs_cols, tape_c = nn.forward(params.enc_common, _common_input(Fx, Fy, drop))
    codes = Codes(Px_cols.T, Py_cols.T, Cs_cols.T)

    # J1 on mean-pooled prototypes of the labels present in the batch
    present = np.flatnonzero(np.asarray(L).sum(axis=0) > 0)
    L_sub = np.asarray(L)[:, present]
    W = affinity.pooling_matrix(L_sub)                       # (n, cp)
    prototypes = Cs_cols @ W                                 # (k, cp)
    j1, g_prot = affinity.j1_loss_and_grad(
        prototypes, aff_x.restrict(present), aff_y.restrict(present))
    dCs_j1 = g_prot @ W.T                                    # (k, n)

    # J2 between individuality codes, batch bandwidths held constant
    if n >= 2:
        sx = hsic.bandwidth(codes.Px)
        sy = hsic.bandwidth(codes.Py)
        j2 = hsic.hsic_value(hsic.rbf_kernel(codes.Px, sx),
                             hsic.rbf_kernel(codes.Py, sy))
        gPx_rows, gPy_rows = hsic.hsic_grad(codes.Px, codes.Py, (sx, sy))
    else:
        j2, gPx_rows, gPy_rows = 0.0, np.zeros((n, k)), np.zeros((n, k))

    j3, rec = reconstruction_loss(params, Fx, Fy, codes)

    dCs = params.alpha * dCs_j1 + rec["dCstar"].T
    dPx = params.beta * gPx_rows.T + rec["dPx"].T
    dPy = params.beta * gPy_rows.T + rec["dPy"].T

    grads = {
        "enc_ind_x": nn.backward(params.enc_ind_x, tape_ix, dPx)[0],
        "enc_ind_y": nn.backward(params.enc_ind_y, tape_iy, dPy)[0],
        "enc_common": nn.backward(params.enc_common, tape_c, dCs)[0],
        "dec_x": rec["dec_x"],
        "dec_y": rec["dec_y"],
    }
    value = params.alpha * j1 + params.beta * j2 + j3
    if not np.isfinite(value):
        raise nn.NumericsError(
            f"non-finite Loss1 (j1={j1}, j2={j2}, j3={j3})")
    return value, {"j1": j1, "j2": j2, "j3": j3}, grads


@dataclass
class AeTrainConfig:
    batch_size: int = 128
    lr: float = 1e-2
    max_epochs: int = 500
    seed: int = 0
    modality_dropout: bool = True


def train_ae(dataset: Dataset, params: IcaeParams, cfg: AeTrainConfig
             ) -> tuple[IcaeParams, list[float]]:
    """Phase-1 minibatch SGD over the base split; returns per-epoch mean Loss1.

    The autoencoder consumes direct features produced by its own frozen
    feature maps; with probability 1/2 per batch one modality's block of the
    commonality-encoder input is zeroed so that single-modality query
    encoding stays well defined.
    """
    Xb, Yb, Lb = dataset.base()
    if Xb.shape[0] == 0:
        raise ValueError("empty base split")
    n = Xb.shape[0]
    rng = np.random.default_rng(cfg.seed)

    Fx = direct_features(params, "x", Xb)
    Fy = direct_features(params, "y", Yb)
    # the feature maps are frozen, so the per-epoch affinity refresh
    # reproduces the same H/R; compute them once up front
    aff_x = affinity.label_affinity(Fx, Lb)
    aff_y = affinity.label_affinity(Fy, Lb)

    trace: list[float] = []
    t = int(np.ceil(n / cfg.batch_size))
    for _ in range(cfg.max_epochs):
        epoch_losses = []
        for _ in range(t):
            idx = rng.choice(n, size=min(cfg.batch_size, n), replace=False)
            drop = None
            if cfg.modality_dropout:
                r = rng.random()
                drop = "x" if r < 0.25 else ("y" if r < 0.5 else None)
            value, _, grads = loss1(params, Fx[idx], Fy[idx], Lb[idx],
                                    aff_x, aff_y, drop=drop)
            for name, net in params.trainable_nets().items():
                nn.sgd_step(net, grads[name], cfg.lr)
            epoch_losses.append(value)
        trace.append(float(np.mean(epoch_losses)))
    calibrate_code_scales(params, Xb, Yb)
    return params, trace
