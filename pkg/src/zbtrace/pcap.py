"""Classic libpcap reading and writing for IEEE 802.15.4 captures."""

from __future__ import annotations

import logging
import os
import struct
import warnings
from dataclasses import dataclass
from typing import BinaryIO, Iterator

from .errors import PcapError

log = logging.getLogger(__name__)

# https://www.tcpdump.org/linktypes.html
LINKTYPE_IEEE802_15_4_WITHFCS = 195
LINKTYPE_IEEE802_15_4_NOFCS = 230

SUPPORTED_LINKTYPES = {
    LINKTYPE_IEEE802_15_4_WITHFCS: True,
    LINKTYPE_IEEE802_15_4_NOFCS: False,
}

_MAGIC_USEC = 0xA1B2C3D4
_MAGIC_NSEC = 0xA1B23C4D
_GLOBAL_HDR_LEN = 24
_RECORD_HDR_LEN = 16


@dataclass
class CaptureMeta:
    link_type: int
    t_start: float = 0.0
    t_end: float = 0.0
    frame_count: int = 0
    byte_count: int = 0
    nanosecond: bool = False

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def fcs_present(self) -> bool:
        return SUPPORTED_LINKTYPES[self.link_type]


def _parse_global_header(hdr: bytes) -> tuple[str, bool, int, int]:
    if len(hdr) < _GLOBAL_HDR_LEN:
        raise PcapError("file too short for a pcap global header")
    for endian in ("<", ">"):
        (magic,) = struct.unpack(endian + "I", hdr[:4])
        if magic in (_MAGIC_USEC, _MAGIC_NSEC):
            _, _, _, _, snaplen, network = struct.unpack(endian + "HHiIII", hdr[4:24])
            return endian, magic == _MAGIC_NSEC, snaplen, network
    raise PcapError(f"unknown pcap magic 0x{hdr[:4].hex()}")


class PcapReader:
    """Sequential reader yielding ``(timestamp_seconds, frame_bytes)``.

    ``meta`` is complete once iteration finishes.
    """

    def __init__(self, fp: BinaryIO):
        self._fp = fp
        self._endian, nsec, self.snaplen, link_type = _parse_global_header(fp.read(_GLOBAL_HDR_LEN))
        if link_type not in SUPPORTED_LINKTYPES:
            raise PcapError(f"unsupported pcap link type {link_type}")
        self.meta = CaptureMeta(link_type=link_type, nanosecond=nsec)
        self._scale = 1e-9 if nsec else 1e-6

    def __iter__(self) -> Iterator[tuple[float, bytes]]:
        rec_fmt = self._endian + "IIII"
        meta = self.meta
        last_ts = None
        index = 0
        while True:
            hdr = self._fp.read(_RECORD_HDR_LEN)
            if not hdr:
                break
            if len(hdr) < _RECORD_HDR_LEN:
                raise PcapError(f"record {index}: truncated record header")
            sec, frac, incl_len, _orig_len = struct.unpack(rec_fmt, hdr)
            data = self._fp.read(incl_len)
            if len(data) < incl_len:
                raise PcapError(
                    f"record {index}: captured length {incl_len} exceeds remaining {len(data)} bytes"
                )
            ts = sec + frac * self._scale
            if last_ts is not None and ts < last_ts:
                warnings.warn(f"record {index}: timestamp goes backwards ({ts} < {last_ts})", stacklevel=2)
            if meta.frame_count == 0:
                meta.t_start = meta.t_end = ts
            else:
                meta.t_start = min(meta.t_start, ts)
                meta.t_end = max(meta.t_end, ts)
            meta.frame_count += 1
            meta.byte_count += incl_len
            last_ts = ts
            index += 1
            yield ts, data


def read_pcap(path: str | os.PathLike) -> tuple[list[tuple[float, bytes]], CaptureMeta]:
    """Read a whole capture into memory."""
    try:
        fp = open(path, "rb")
    except OSError as exc:
        raise PcapError(f"cannot read {path}: {exc}") from exc
    with fp:
        reader = PcapReader(fp)
        frames = list(reader)
    return frames, reader.meta


class PcapWriter:
    """Little-endian microsecond pcap writer (used by the synthetic generator)."""

    def __init__(self, fp: BinaryIO, link_type: int = LINKTYPE_IEEE802_15_4_WITHFCS, snaplen: int = 65535):
        self._fp = fp
        fp.write(struct.pack("<IHHiIII", _MAGIC_USEC, 2, 4, 0, 0, snaplen, link_type))

    def write(self, sec: int, usec: int, data: bytes) -> None:
        self._fp.write(struct.pack("<IIII", sec, usec, len(data), len(data)))
        self._fp.write(data)
