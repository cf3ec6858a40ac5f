"""Lossless compression of raw captures (the storage reference point)."""

from __future__ import annotations

import logging
import os
import warnings
from typing import Sequence

from ..errors import StoreError
from ..pcap import read_pcap
from .container import CODECS
from .report import StorageReport

log = logging.getLogger(__name__)

DEFAULT_CODECS = ("gzip", "bzip2", "lzma")


def lossless_baseline(pcap_path: str | os.PathLike, codecs: Sequence[str] = DEFAULT_CODECS) -> StorageReport:
    """Raw and compressed pcap sizes with bitrates over the capture duration."""
    _, meta = read_pcap(pcap_path)
    if meta.duration <= 0:
        raise StoreError(f"{pcap_path}: zero-duration capture")
    with open(pcap_path, "rb") as fp:
        raw = fp.read()
    report = StorageReport(capture_duration=meta.duration)
    report.add("raw", len(raw))
    for name in codecs:
        if name not in CODECS:
            warnings.warn(f"codec {name!r} unavailable; skipped", stacklevel=2)
            continue
        report.add(name, len(CODECS[name][0](raw)))
        log.info("%s: %d -> %d bytes", name, len(raw), report.methods[name].size_bytes)
    report.notes.update(frame_count=meta.frame_count, link_type=meta.link_type,
                        t_start=meta.t_start, t_end=meta.t_end)
    return report
