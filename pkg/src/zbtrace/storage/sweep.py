"""Feature-store encoding with rate accounting, and rate/accuracy sweeps."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..classify import TrainConfig, classification_report, labels_for_task, stratified_kfold, train
from ..classify.metrics import fold_statistics
from ..errors import StoreError
from ..features import FEATURE_NAMES, FeatureVector, feature_matrix
from .container import compress, encode_container
from .quantizer import QuantizerSpec, fit_quantizer, roundtrip, storage_rate
from .report import StorageReport

log = logging.getLogger(__name__)

REGIME_QUANTIZED_TEST = "i"   # train on raw features, test on quantized ones
REGIME_QUANTIZED_BOTH = "ii"  # train and test on quantized features
REGIMES = (REGIME_QUANTIZED_TEST, REGIME_QUANTIZED_BOTH)


def monitored_devices(vectors: Iterable[FeatureVector]) -> int:
    return len({(v.topology, v.device_label) for v in vectors})


def encode_store(vectors: Sequence[FeatureVector], spec: QuantizerSpec, duration_s: float,
                 wrap_codec: Optional[str] = "lzma", n_devices: Optional[int] = None,
                 window_s: Optional[float] = None) -> tuple[bytes, StorageReport]:
    if tuple(spec.feature_order) != FEATURE_NAMES:
        raise StoreError("quantizer feature order does not match the feature vectors")
    if not vectors and window_s is None:
        raise StoreError("window length unknown for an empty feature set")
    T = window_s if window_s is not None else vectors[0].window_s
    container, payload_bits = encode_container(vectors, spec, duration_s, T)
    blob = compress(container, wrap_codec) if wrap_codec and wrap_codec != "none" else container

    report = StorageReport(capture_duration=duration_s)
    report.add("payload", (payload_bits + 7) // 8)
    report.add("container", len(container))
    if blob is not container:
        report.add(wrap_codec, len(blob))
    n = n_devices if n_devices is not None else monitored_devices(vectors)
    report.nominal_rate = storage_rate(n, len(spec.feature_order), spec.code_bits, T)
    report.effective_rate = len(blob) * 8 / duration_s
    report.notes.update(rows=len(vectors), payload_bits=payload_bits, bits=spec.bits,
                        code_bits=spec.code_bits, n_devices=n, window_s=T, wrap=wrap_codec or "none")
    return blob, report


@dataclass
class SweepPoint:
    bits: Optional[int]
    regime: str
    nominal_rate: Optional[float]
    effective_rate: Optional[float]
    macro_f1: float
    macro_f1_std: float
    weighted_f1: float
    weighted_f1_std: float
    accuracy: float

    @classmethod
    def from_folds(cls, bits, regime, nominal, effective, reports) -> "SweepPoint":
        st = fold_statistics(reports)
        return cls(bits, regime, nominal, effective, st["macro_f1"][0], st["macro_f1"][1],
                   st["weighted_f1"][0], st["weighted_f1"][1], st["accuracy"][0])


SWEEP_COLUMNS = [f for f in SweepPoint.__dataclass_fields__]


def write_sweep_csv(points: Iterable[SweepPoint], fp) -> None:
    w = csv.DictWriter(fp, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for p in points:
        w.writerow({k: ("" if v is None else v) for k, v in asdict(p).items()})


def capture_span(vectors: Sequence[FeatureVector]) -> float:
    """Fallback duration: per-topology span of the window grid, summed."""
    spans: dict[str, tuple[float, float]] = {}
    for v in vectors:
        lo, hi = spans.get(v.topology, (v.t_start, v.t_start + v.window_s))
        spans[v.topology] = (min(lo, v.t_start), max(hi, v.t_start + v.window_s))
    return sum(hi - lo for lo, hi in spans.values())


def rate_accuracy_sweep(vectors: Sequence[FeatureVector], config: TrainConfig, bit_list: Sequence[int],
                        regimes: Sequence[str] = REGIMES, k: int = 5, duration_s: Optional[float] = None,
                        n_devices: Optional[int] = None, wrap_codec: str = "lzma") -> list[SweepPoint]:
    """Macro F1 against storage rate for each bit depth and regime.

    Quantizer ranges are fit on each fold's training split. The first point
    (``bits=None``, regime ``baseline``) is the unquantized reference on the same
    folds. Rates come from encoding the whole set with a full-range quantizer.
    """
    for r in regimes:
        if r not in REGIMES:
            raise StoreError(f"unknown regime {r!r}")
    for b in bit_list:
        if not 1 <= b <= 64:
            raise StoreError(f"bit depth {b} outside 1..64")
    X = feature_matrix(vectors)
    y = labels_for_task(vectors, config.task).astype(str)
    duration = duration_s if duration_s is not None else capture_span(vectors)
    folds = stratified_kfold(y, k, config.seed)
    splits = [(np.concatenate([f for j, f in enumerate(folds) if j != i]), test) for i, test in enumerate(folds)]

    raw_models = []
    base_reports = []
    for tr, te in splits:
        model = train(X[tr], y[tr], config)
        raw_models.append(model)
        base_reports.append(classification_report(y[te], model.predict(X[te]), known=model.classes))
    points = [SweepPoint.from_folds(None, "baseline", None, None, base_reports)]

    for b in bit_list:
        _, rep = encode_store(vectors, fit_quantizer(X, b), duration, wrap_codec, n_devices)
        nominal, effective = rep.nominal_rate, rep.effective_rate
        per_regime: dict[str, list] = {r: [] for r in regimes}
        for (tr, te), raw_model in zip(splits, raw_models):
            spec = fit_quantizer(X[tr], b)
            Xte = roundtrip(X[te], spec)
            if REGIME_QUANTIZED_TEST in per_regime:
                per_regime[REGIME_QUANTIZED_TEST].append(
                    classification_report(y[te], raw_model.predict(Xte), known=raw_model.classes))
            if REGIME_QUANTIZED_BOTH in per_regime:
                model = train(roundtrip(X[tr], spec), y[tr], config)
                per_regime[REGIME_QUANTIZED_BOTH].append(
                    classification_report(y[te], model.predict(Xte), known=model.classes))
        for r in regimes:
            points.append(SweepPoint.from_folds(b, r, nominal, effective, per_regime[r]))
            log.info("bits=%d regime=%s nominal=%.1f effective=%.1f macroF1=%.4f",
                     b, r, nominal, effective, points[-1].macro_f1)
    return points
