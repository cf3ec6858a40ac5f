"""Raw-capture compression baselines and quantized feature storage."""

from .baseline import DEFAULT_CODECS, lossless_baseline
from .container import CODECS, QuantizedStore, RowMeta, decode_container, pack_codes, unpack_codes
from .quantizer import QuantizerSpec, dequantize, fit_quantizer, quantize, roundtrip, storage_rate
from .report import MethodSize, StorageReport
from .sweep import REGIMES, SweepPoint, encode_store, rate_accuracy_sweep, write_sweep_csv

decode_store = decode_container

__all__ = [
    "CODECS", "DEFAULT_CODECS", "MethodSize", "QuantizedStore", "QuantizerSpec", "REGIMES", "RowMeta",
    "StorageReport", "SweepPoint", "decode_store", "dequantize", "encode_store", "fit_quantizer",
    "lossless_baseline", "pack_codes", "quantize", "rate_accuracy_sweep", "roundtrip", "storage_rate",
    "unpack_codes", "write_sweep_csv",
]
