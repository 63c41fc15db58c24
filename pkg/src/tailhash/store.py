"""Bit-exact on-disk formats for datasets, checkpoints, codes and reports.

Each container is a directory holding a ``manifest.json`` plus one raw binary
file per matrix: little-endian float64 row-major for real arrays, one byte
per cell (0/1) for label matrices, packed bits for hash codes (-1 stored as
0). Every array carries a CRC-32 in the manifest. All formats are versioned
with ``format_version`` starting at 1.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import zlib
from pathlib import Path
from typing import Optional

import numpy as np

from . import autoencoder, meta, nn
from .datagen import Dataset
from .retrieval import EvalReport

FORMAT_VERSION = 1

CSV_HEADER = ["direction", "variant", "map", "head_map", "tail_map",
              "head_tail_split_index", "n_queries", "n_excluded",
              "precision_at", "runtime"]


class StoreError(Exception):
    """Base class for container format errors."""


class ChecksumError(StoreError):
    pass


class FormatVersionError(StoreError):
    pass


class TruncatedFileError(StoreError):
    pass


class PhaseMismatchError(StoreError):
    pass


_DTYPES = {"float64": "<f8", "uint8": "u1"}


def _write_array(root: Path, name: str, arr: np.ndarray) -> dict:
    if arr.dtype == np.uint8:
        dtype = "uint8"
        data = np.ascontiguousarray(arr).tobytes()
    else:
        dtype = "float64"
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    fname = name + ".bin"
    (root / fname).write_bytes(data)
    return {"file": fname, "dtype": dtype, "shape": list(arr.shape),
            "crc32": zlib.crc32(data)}


def _read_array(root: Path, entry: dict) -> np.ndarray:
    path = root / entry["file"]
    try:
        data = path.read_bytes()
    except OSError as e:
        raise StoreError(f"cannot read {path}: {e}") from e
    shape = tuple(entry["shape"])
    dtype = np.dtype(_DTYPES[entry["dtype"]])
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(data) != expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} bytes, found {len(data)}")
    if zlib.crc32(data) != entry["crc32"]:
        raise ChecksumError(f"{path}: CRC-32 mismatch")
    return np.frombuffer(data, dtype=dtype).reshape(shape).copy()


def _write_manifest(root: Path, manifest: dict) -> None:
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))


def _read_manifest(root: Path) -> dict:
    path = Path(root) / "manifest.json"
    if not path.is_file():
        raise StoreError(f"no manifest at {path}")
    manifest = json.loads(path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FormatVersionError(
            f"{path}: format_version {manifest.get('format_version')}, "
            f"expected {FORMAT_VERSION}")
    return manifest


# ---------------------------------------------------------------- datasets

def save_dataset(dataset: Dataset, path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    arrays = {
        "features_x": _write_array(root, "features_x", dataset.Fx_raw),
        "features_y": _write_array(root, "features_y", dataset.Fy_raw),
        "labels": _write_array(root, "labels",
                               dataset.L.astype(np.uint8)),
    }
    for name, arr in dataset.meta.get("arrays", {}).items():
        arrays["meta." + name] = _write_array(root, "meta." + name, arr)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "dataset",
        "n": int(dataset.n),
        "c": int(dataset.c),
        "raw_dim_x": int(dataset.Fx_raw.shape[1]),
        "raw_dim_y": int(dataset.Fy_raw.shape[1]),
        "label_counts": [int(v) for v in dataset.meta.get(
            "label_counts", dataset.L.sum(axis=0))],
        "realized_label_counts": [int(v) for v in dataset.meta.get(
            "realized_label_counts", dataset.L.sum(axis=0))],
        "exclusive_labels": [int(v) for v in
                             dataset.meta.get("exclusive_labels", [])],
        "spec": dataset.meta.get("spec", {}),
        "base_indices": [int(i) for i in dataset.base_indices],
        "query_indices": [int(i) for i in dataset.query_indices],
        "arrays": arrays,
    }
    _write_manifest(root, manifest)


def load_dataset(path) -> Dataset:
    root = Path(path)
    m = _read_manifest(root)
    if m.get("kind") != "dataset":
        raise StoreError(f"{root} is not a dataset container")
    meta_arrays = {}
    for name, entry in m["arrays"].items():
        if name.startswith("meta."):
            meta_arrays[name[len("meta."):]] = _read_array(root, entry)
    return Dataset(
        Fx_raw=_read_array(root, m["arrays"]["features_x"]),
        Fy_raw=_read_array(root, m["arrays"]["features_y"]),
        L=_read_array(root, m["arrays"]["labels"]),
        base_indices=np.asarray(m["base_indices"], dtype=np.int64),
        query_indices=np.asarray(m["query_indices"], dtype=np.int64),
        meta={
            "spec": m["spec"],
            "label_counts": np.asarray(m["label_counts"], dtype=np.int64),
            "realized_label_counts": np.asarray(
                m["realized_label_counts"], dtype=np.int64),
            "exclusive_labels": np.asarray(m["exclusive_labels"],
                                           dtype=np.int64),
            "arrays": meta_arrays,
        })


# ------------------------------------------------------------------- codes

def pack_codes(B: np.ndarray) -> bytes:
    """Bit-pack a +/-1 matrix (-1 stored as 0)."""
    return np.packbits(np.asarray(B) > 0).tobytes()


def unpack_codes(data: bytes, shape: tuple[int, int]) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8),
                         count=int(np.prod(shape)))
    return np.where(bits.reshape(shape) > 0, 1.0, -1.0)


def save_codes(path, B: np.ndarray, info: Optional[dict] = None) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    data = pack_codes(B)
    (root / "codes.bin").write_bytes(data)
    _write_manifest(root, {
        "format_version": FORMAT_VERSION,
        "kind": "codes",
        "shape": list(np.shape(B)),
        "crc32": zlib.crc32(data),
        "info": info or {},
    })


def load_codes(path) -> tuple[np.ndarray, dict]:
    root = Path(path)
    m = _read_manifest(root)
    if m.get("kind") != "codes":
        raise StoreError(f"{root} is not a codes container")
    data = (root / "codes.bin").read_bytes()
    if zlib.crc32(data) != m["crc32"]:
        raise ChecksumError(f"{root}/codes.bin: CRC-32 mismatch")
    return unpack_codes(data, tuple(m["shape"])), m["info"]


# ------------------------------------------------------------- checkpoints

def _net_manifest(net: nn.Mlp) -> list[dict]:
    return [{"in": l.in_dim, "out": l.out_dim, "activation": l.activation}
            for l in net.layers]


def _save_net(root: Path, name: str, net: nn.Mlp, arrays: dict) -> list[dict]:
    for i, layer in enumerate(net.layers):
        arrays[f"{name}.l{i}.weight"] = _write_array(
            root, f"{name}.l{i}.weight", layer.weight)
        arrays[f"{name}.l{i}.bias"] = _write_array(
            root, f"{name}.l{i}.bias", layer.bias)
    return _net_manifest(net)


def _load_net(root: Path, name: str, spec: list[dict], arrays: dict) -> nn.Mlp:
    layers = []
    for i, ls in enumerate(spec):
        w = _read_array(root, arrays[f"{name}.l{i}.weight"])
        b = _read_array(root, arrays[f"{name}.l{i}.bias"])
        layers.append(nn.DenseLayer(w, b, ls["activation"]))
    return nn.Mlp(layers)


@dataclasses.dataclass
class Checkpoint:
    phase: str                    # "ae" or "hash"
    icae: autoencoder.IcaeParams
    side: meta.HashSideParams
    hyper: dict
    epoch: int
    seed: int
    loss_trace: list[float]
    B: Optional[np.ndarray] = None


def save_checkpoint(path, phase: str, icae: autoencoder.IcaeParams,
                    side: meta.HashSideParams, hyper: dict, epoch: int,
                    seed: int, loss_trace: list[float],
                    B: Optional[np.ndarray] = None) -> None:
    if phase not in ("ae", "hash"):
        raise ValueError("phase must be 'ae' or 'hash'")
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    arrays: dict = {}
    nets = {}
    for name, net in icae.nets().items():
        nets["icae." + name] = _save_net(root, "icae." + name, net, arrays)
    if icae.code_scales is not None:
        for name, arr in icae.code_scales.items():
            key = "icae.code_scale." + name
            arrays[key] = _write_array(root, key, np.asarray(arr))
    for mod in ("x", "y"):
        sv = getattr(side, mod)
        for part in ("projector", "selector1", "selector2"):
            key = f"side.{mod}.{part}"
            nets[key] = _save_net(root, key, getattr(sv, part), arrays)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "checkpoint",
        "phase": phase,
        "hyper": dict(hyper, alpha=icae.alpha, beta=icae.beta),
        "epoch": int(epoch),
        "seed": int(seed),
        "loss_trace": [float(v) for v in loss_trace],
        "nets": nets,
        "arrays": arrays,
    }
    if B is not None:
        data = pack_codes(B)
        (root / "codes.bin").write_bytes(data)
        manifest["codes"] = {"shape": list(np.shape(B)),
                             "crc32": zlib.crc32(data)}
    _write_manifest(root, manifest)


def load_checkpoint(path, expect_phase: Optional[str] = None) -> Checkpoint:
    root = Path(path)
    m = _read_manifest(root)
    if m.get("kind") != "checkpoint":
        raise StoreError(f"{root} is not a checkpoint container")
    if expect_phase is not None and m["phase"] != expect_phase:
        raise PhaseMismatchError(
            f"{root}: phase {m['phase']!r}, expected {expect_phase!r}")
    nets = {name: _load_net(root, name, spec, m["arrays"])
            for name, spec in m["nets"].items()}
    icae = autoencoder.IcaeParams(
        feat_x=nets["icae.feat_x"], feat_y=nets["icae.feat_y"],
        enc_ind_x=nets["icae.enc_ind_x"], enc_ind_y=nets["icae.enc_ind_y"],
        enc_common=nets["icae.enc_common"],
        dec_x=nets["icae.dec_x"], dec_y=nets["icae.dec_y"],
        alpha=m["hyper"].get("alpha", 0.05),
        beta=m["hyper"].get("beta", 0.05))
    prefix = "icae.code_scale."
    scales = {key[len(prefix):]: _read_array(root, entry)
              for key, entry in m["arrays"].items() if key.startswith(prefix)}
    if scales:
        icae.code_scales = scales
    side = meta.HashSideParams(
        x=meta.ModalitySide(nets["side.x.projector"], nets["side.x.selector1"],
                            nets["side.x.selector2"]),
        y=meta.ModalitySide(nets["side.y.projector"], nets["side.y.selector1"],
                            nets["side.y.selector2"]))
    B = None
    if "codes" in m:
        data = (root / "codes.bin").read_bytes()
        if zlib.crc32(data) != m["codes"]["crc32"]:
            raise ChecksumError(f"{root}/codes.bin: CRC-32 mismatch")
        B = unpack_codes(data, tuple(m["codes"]["shape"]))
    return Checkpoint(phase=m["phase"], icae=icae, side=side,
                      hyper=m["hyper"], epoch=m["epoch"], seed=m["seed"],
                      loss_trace=m["loss_trace"], B=B)


# ----------------------------------------------------------------- reports

def emit_report(report: EvalReport, fmt: str, path) -> None:
    """Serialize an evaluation report as JSON or a flat one-row CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        doc = dataclasses.asdict(report)
        doc["format_version"] = FORMAT_VERSION
        path.write_text(json.dumps(doc, indent=1))
    elif fmt == "csv":
        prec = ";".join(f"{k}:{v:.6f}" for k, v in report.precision_at)
        row = [report.direction, report.variant, f"{report.map:.6f}",
               "" if report.head_map is None else f"{report.head_map:.6f}",
               "" if report.tail_map is None else f"{report.tail_map:.6f}",
               report.head_tail_split_index, report.n_queries,
               report.n_excluded, prec, f"{report.runtime:.3f}"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            w.writerow(row)
    else:
        raise ValueError("format must be 'json' or 'csv'")


def load_report_json(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatVersionError(f"{path}: unexpected format_version")
    return doc
