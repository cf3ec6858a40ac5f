"""``ZQFS`` quantized feature store.

Layout, little-endian throughout the header::

    "ZQFS" | u16 version | u16 flags (bit0 passthrough)
    f64 window_s | f64 duration_s
    u16 n_features | u8 code_bits | u8 quant_bits
    n_features x (u8 len, utf-8 name, f64 min, f64 max)
    u16 n_labels x (u8 len label, u8 len category, u8 len topology, utf-8 strings)
    u32 n_groups x (u16 label index, f64 first t_start, u32 n_rows, n_rows varint window-index deltas)
    u64 payload bit length | payload bytes
    u32 row count (trailer)

Payload rows are row-major, ``n_features * code_bits`` bits each, every code
most-significant bit first, zero padded to a byte boundary only at the end.
"""

from __future__ import annotations

import bz2
import gzip
import lzma
import struct
from dataclasses import dataclass, field
from itertools import groupby
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import StoreError
from ..features import FeatureVector
from .quantizer import QuantizerSpec, quantize

MAGIC = b"ZQFS"
VERSION = 1


def _gzip(data: bytes) -> bytes:
    return gzip.compress(data, compresslevel=6, mtime=0)


def _lzma(data: bytes) -> bytes:
    return lzma.compress(data, format=lzma.FORMAT_XZ, preset=9)


CODECS: dict[str, tuple[Callable[[bytes], bytes], Callable[[bytes], bytes]]] = {
    "gzip": (_gzip, gzip.decompress),
    "bzip2": (lambda d: bz2.compress(d, 9), bz2.decompress),
    "lzma": (_lzma, lzma.decompress),
}


def compress(data: bytes, codec: str) -> bytes:
    try:
        return CODECS[codec][0](data)
    except KeyError:
        raise StoreError(f"unknown codec {codec!r}") from None


def _unwrap(blob: bytes) -> bytes:
    if blob[:4] == MAGIC:
        return blob
    if blob[:2] == b"\x1f\x8b":
        return gzip.decompress(blob)
    if blob[:3] == b"BZh":
        return bz2.decompress(blob)
    if blob[:6] == b"\xfd7zXZ\x00":
        return lzma.decompress(blob)
    raise StoreError("not a ZQFS container (unknown magic)")


def pack_codes(codes: np.ndarray, bits: int) -> bytes:
    codes = np.asarray(codes, dtype=np.uint64)
    shifts = np.arange(bits - 1, -1, -1, dtype=np.uint64)
    bitmat = ((codes[..., None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bitmat.ravel(), bitorder="big").tobytes()


def unpack_codes(payload: bytes, n_rows: int, n_features: int, bits: int) -> np.ndarray:
    total = n_rows * n_features * bits
    flat = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="big", count=total)
    bitmat = flat.reshape(n_rows, n_features, bits).astype(np.uint64)
    shifts = np.arange(bits - 1, -1, -1, dtype=np.uint64)
    return np.bitwise_or.reduce(bitmat << shifts, axis=2) if bits else np.zeros((n_rows, n_features), np.uint64)


def _varint(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _short_str(s: str) -> bytes:
    raw = s.encode()
    if len(raw) > 255:
        raise StoreError(f"string too long for the container header: {s[:20]}...")
    return struct.pack("<B", len(raw)) + raw


@dataclass
class RowMeta:
    device_label: str
    category: str
    topology: str
    t_start: float


@dataclass
class QuantizedStore:
    spec: QuantizerSpec
    window_s: float
    duration_s: float
    codes: np.ndarray
    rows: list[RowMeta] = field(default_factory=list)
    payload_bits: int = 0


def encode_container(vectors: Sequence[FeatureVector], spec: QuantizerSpec, duration_s: float,
                     window_s: Optional[float] = None) -> tuple[bytes, int]:
    """Serialize quantized vectors; returns ``(container, payload_bits)``."""
    if duration_s <= 0:
        raise StoreError("capture duration must be positive")
    if window_s is None:
        window_s = vectors[0].window_s if vectors else 0.0
    vecs = sorted(vectors, key=lambda v: (v.topology, v.device_label, v.t_start))
    dictionary = sorted({(v.device_label, v.category, v.topology) for v in vecs})
    label_idx = {k: i for i, k in enumerate(dictionary)}

    out = bytearray(MAGIC)
    out += struct.pack("<HHddHBB", VERSION, int(spec.passthrough), float(window_s), float(duration_s),
                       len(spec.feature_order), spec.code_bits, spec.bits)
    for name, lo, hi in zip(spec.feature_order, spec.mins, spec.maxs):
        out += _short_str(name) + struct.pack("<dd", lo, hi)
    out += struct.pack("<H", len(dictionary))
    for label, cat, topo in dictionary:
        out += _short_str(label) + _short_str(cat) + _short_str(topo)

    groups = [(k, list(g)) for k, g in groupby(vecs, key=lambda v: (v.device_label, v.category, v.topology))]
    out += struct.pack("<I", len(groups))
    for key, rows in groups:
        first = rows[0].t_start
        out += struct.pack("<HdI", label_idx[key], first, len(rows))
        prev = 0
        for v in rows:
            k = int(round((v.t_start - first) / window_s)) if window_s > 0 else 0
            out += _varint(k - prev)
            prev = k

    X = np.vstack([v.values for v in vecs]) if vecs else np.zeros((0, len(spec.feature_order)))
    codes = quantize(X, spec)
    payload_bits = codes.size * spec.code_bits
    out += struct.pack("<Q", payload_bits)
    out += pack_codes(codes, spec.code_bits)
    out += struct.pack("<I", len(vecs))
    return bytes(out), payload_bits


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise StoreError("truncated ZQFS container")
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return vals

    def string(self) -> str:
        (n,) = self.unpack("<B")
        s = self.buf[self.pos:self.pos + n].decode()
        self.pos += n
        return s

    def varint(self) -> int:
        shift = value = 0
        while True:
            (b,) = self.unpack("<B")
            value |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                return value


def decode_container(blob: bytes) -> QuantizedStore:
    buf = _unwrap(blob)
    r = _Reader(buf)
    if r.unpack("<4s")[0] != MAGIC:
        raise StoreError("bad ZQFS magic")
    version, _flags, window_s, duration_s, n_feat, code_bits, quant_bits = r.unpack("<HHddHBB")
    if version != VERSION:
        raise StoreError(f"unsupported ZQFS version {version}")
    names, mins, maxs = [], [], []
    for _ in range(n_feat):
        names.append(r.string())
        lo, hi = r.unpack("<dd")
        mins.append(lo)
        maxs.append(hi)
    spec = QuantizerSpec(np.array(mins), np.array(maxs), quant_bits, tuple(names))
    (n_labels,) = r.unpack("<H")
    dictionary = [(r.string(), r.string(), r.string()) for _ in range(n_labels)]
    (n_groups,) = r.unpack("<I")
    rows = []
    for _ in range(n_groups):
        idx, first, n_rows = r.unpack("<HdI")
        label, cat, topo = dictionary[idx]
        k = 0
        for _ in range(n_rows):
            k += r.varint()
            rows.append(RowMeta(label, cat, topo, first + k * window_s))
    (payload_bits,) = r.unpack("<Q")
    n_bytes = (payload_bits + 7) // 8
    payload = buf[r.pos:r.pos + n_bytes]
    r.pos += n_bytes
    (count,) = r.unpack("<I")
    if count != len(rows) or payload_bits != count * n_feat * code_bits:
        raise StoreError("ZQFS trailer row count disagrees with the row index or payload")
    codes = unpack_codes(payload, count, n_feat, code_bits)
    return QuantizedStore(spec, window_s, duration_s, codes, rows, payload_bits)
