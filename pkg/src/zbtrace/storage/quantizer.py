"""Per-feature uniform mid-tread scalar quantization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import StoreError
from ..features import FEATURE_NAMES

PASSTHROUGH_BITS = 53  # float64 mantissa; from here on codes are the raw doubles


@dataclass
class QuantizerSpec:
    mins: np.ndarray
    maxs: np.ndarray
    bits: int
    feature_order: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)
        if not 1 <= self.bits <= 64:
            raise StoreError(f"bit depth must be in 1..64, got {self.bits}")
        if self.mins.shape != (len(self.feature_order),) or self.maxs.shape != self.mins.shape:
            raise StoreError("quantizer ranges do not match the feature order")
        if np.any(self.maxs < self.mins):
            raise StoreError("quantizer range has max < min")

    @property
    def passthrough(self) -> bool:
        return self.bits >= PASSTHROUGH_BITS

    @property
    def code_bits(self) -> int:
        """Bits actually spent per stored value."""
        return 64 if self.passthrough else self.bits

    @property
    def top_code(self) -> int:
        return (1 << self.bits) - 1

    def step(self) -> np.ndarray:
        return (self.maxs - self.mins) / float(self.top_code)


def fit_quantizer(X: np.ndarray, bits: int, feature_order: Sequence[str] = FEATURE_NAMES) -> QuantizerSpec:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise StoreError("cannot fit a quantizer on an empty training set")
    return QuantizerSpec(X.min(axis=0), X.max(axis=0), bits, tuple(feature_order))


def quantize(X: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    """Codes in ``[0, 2**bits - 1]``; out-of-range inputs clamp to the end codes."""
    X = np.asarray(X, dtype=np.float64)
    if spec.passthrough:
        return np.ascontiguousarray(X).view(np.uint64).copy()
    top = float(spec.top_code)
    span = spec.maxs - spec.mins
    scale = np.divide(top, span, out=np.zeros_like(span), where=span > 0)
    v = np.clip((X - spec.mins) * scale, 0.0, top)
    # v >= 0, so floor(v + 0.5) rounds half away from zero
    return np.floor(v + 0.5).astype(np.uint64)


def dequantize(codes: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.uint64)
    if spec.passthrough:
        return np.ascontiguousarray(codes).view(np.float64).copy()
    top = spec.top_code
    span = spec.maxs - spec.mins
    out = spec.mins + (codes.astype(np.float64) / float(top)) * span
    out = np.where(codes == top, spec.maxs, out)
    return np.where((codes == 0) | (span == 0), spec.mins, out)


def roundtrip(X: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    return dequantize(quantize(X, spec), spec)


def storage_rate(n_devices: int, n_features: int, bits: int, window_s: float) -> float:
    """Average feature storage rate in bit/s when every device stores one row per window."""
    return n_devices * n_features * bits / window_s
