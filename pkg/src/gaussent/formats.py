"""Binary file formats: precomputed base vectors (GVEC) and model checkpoints (GCKP).

Both formats are little-endian throughout. Vectors and parameters are stored
as float32 on disk and widened to float64 on load.

GVEC  magic "GVEC", u32 version=1, u32 count, u32 d_base, then per record:
      u32 byte length of the UTF-8 sentence text, the text bytes, d_base f32.

GCKP  magic "GCKP", u32 version=1, u32 d_base, u32 d, u32 encoder kind
      (0=precomputed, 1=bag), u32 vocab_buckets (0 if precomputed), then f32
      arrays in fixed order: bag table (bag only), W_mean, b_mean, W_var, b_var.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .encoder import BagEncoder, PrecomputedProvider, ProjectionHeads, SentenceModel

GVEC_MAGIC = b"GVEC"
GCKP_MAGIC = b"GCKP"
ENCODER_KIND_PRECOMPUTED = 0
ENCODER_KIND_BAG = 1

_U32 = struct.Struct("<I")


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError(f"truncated file while reading {what}")
    return data


def _read_u32(fh, what: str) -> int:
    return _U32.unpack(_read_exact(fh, 4, what))[0]


def _read_f32_array(fh, count: int, what: str) -> np.ndarray:
    raw = _read_exact(fh, 4 * count, what)
    return np.frombuffer(raw, dtype="<f4").astype(np.float64)


def _write_f32_array(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def write_gvec(path, vectors: dict[str, np.ndarray], d_base: int) -> None:
    """Write sentence -> vector records in insertion order."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(GVEC_MAGIC)
        fh.write(_U32.pack(1))
        fh.write(_U32.pack(len(vectors)))
        fh.write(_U32.pack(d_base))
        for text, vec in vectors.items():
            vec = np.asarray(vec).reshape(-1)
            if vec.size != d_base:
                raise ValueError(
                    f"vector for {text!r} has dimension {vec.size}, expected {d_base}"
                )
            encoded = text.encode("utf-8")
            fh.write(_U32.pack(len(encoded)))
            fh.write(encoded)
            _write_f32_array(fh, vec)


def read_gvec(path) -> tuple[dict[str, np.ndarray], int]:
    """Read a GVEC file; returns (sentence -> float64 vector, d_base)."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != GVEC_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected GVEC")
        version = _read_u32(fh, "version")
        if version != 1:
            raise ValueError(f"{path}: unsupported GVEC version {version}")
        count = _read_u32(fh, "count")
        d_base = _read_u32(fh, "d_base")
        vectors: dict[str, np.ndarray] = {}
        for i in range(count):
            text_len = _read_u32(fh, f"record {i} text length")
            text = _read_exact(fh, text_len, f"record {i} text").decode("utf-8")
            vectors[text] = _read_f32_array(fh, d_base, f"record {i} vector")
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after {count} records")
    return vectors, d_base


def load_provider(path) -> PrecomputedProvider:
    vectors, d_base = read_gvec(path)
    return PrecomputedProvider(vectors, d_base)


def save_checkpoint(path, model: SentenceModel) -> None:
    heads = model.heads
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(GCKP_MAGIC)
        fh.write(_U32.pack(1))
        fh.write(_U32.pack(heads.d_base))
        fh.write(_U32.pack(heads.dim))
        if model.base.kind == "bag":
            fh.write(_U32.pack(ENCODER_KIND_BAG))
            fh.write(_U32.pack(model.base.vocab_buckets))
            _write_f32_array(fh, model.base.table)
        else:
            fh.write(_U32.pack(ENCODER_KIND_PRECOMPUTED))
            fh.write(_U32.pack(0))
        for arr in (heads.w_mean, heads.b_mean, heads.w_var, heads.b_var):
            _write_f32_array(fh, arr)


def load_checkpoint(path, provider: PrecomputedProvider | None = None) -> SentenceModel:
    """Load a checkpoint. Precomputed-kind checkpoints need their vector provider."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != GCKP_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected GCKP")
        version = _read_u32(fh, "version")
        if version != 1:
            raise ValueError(f"{path}: unsupported GCKP version {version}")
        d_base = _read_u32(fh, "d_base")
        dim = _read_u32(fh, "dim")
        kind = _read_u32(fh, "encoder kind")
        vocab_buckets = _read_u32(fh, "vocab_buckets")
        if kind == ENCODER_KIND_BAG:
            table = _read_f32_array(fh, vocab_buckets * d_base, "bag table")
            base = BagEncoder(table.reshape(vocab_buckets, d_base))
        elif kind == ENCODER_KIND_PRECOMPUTED:
            if provider is None:
                raise ValueError(
                    f"{path}: checkpoint uses precomputed vectors; a GVEC provider is required"
                )
            if provider.d_base != d_base:
                raise ValueError(
                    f"{path}: provider d_base {provider.d_base} != checkpoint d_base {d_base}"
                )
            base = provider
        else:
            raise ValueError(f"{path}: unknown encoder kind {kind}")
        heads = ProjectionHeads(
            w_mean=_read_f32_array(fh, d_base * dim, "w_mean").reshape(d_base, dim),
            b_mean=_read_f32_array(fh, dim, "b_mean"),
            w_var=_read_f32_array(fh, d_base * dim, "w_var").reshape(d_base, dim),
            b_var=_read_f32_array(fh, dim, "b_var"),
        )
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after checkpoint payload")
    return SentenceModel(base=base, heads=heads)
