"""IEEE 802.15.4 MAC and Zigbee NWK header decoding (and encoding, for tests)."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .errors import DecodeError
from .fcs import fcs16

BROADCAST_MIN = 0xFFF8


class FrameType(Enum):
    BEACON = 0
    DATA = 1
    ACK = 2
    MAC_COMMAND = 3
    RESERVED = 4

    @classmethod
    def from_bits(cls, bits: int) -> "FrameType":
        return cls(bits) if bits < 4 else cls.RESERVED


class NwkFrameType(Enum):
    DATA = 0
    COMMAND = 1


@dataclass(frozen=True)
class Short:
    value: int

    def __str__(self):
        return f"0x{self.value:04x}"


@dataclass(frozen=True)
class Extended:
    value: int

    def __str__(self):
        return ":".join(f"{b:02x}" for b in self.value.to_bytes(8, "big"))


Address = Union[Short, Extended]

_ADDR_NONE, _ADDR_RESERVED, _ADDR_SHORT, _ADDR_EXT = 0, 1, 2, 3


@dataclass
class Mac154Frame:
    timestamp: float
    frame_type: FrameType
    seq: int
    security_enabled: bool = False
    frame_pending: bool = False
    ack_request: bool = False
    panid_compression: bool = False
    frame_version: int = 0
    dst_pan: Optional[int] = None
    src_pan: Optional[int] = None
    dst_addr: Optional[Address] = None
    src_addr: Optional[Address] = None
    payload: bytes = b""
    captured_len: int = 0
    fcs_present: bool = False
    fcs_ok: bool = True
    # raw frame type bits, kept so reserved types (4-7) round-trip
    frame_type_bits: Optional[int] = None

    @property
    def nonstandard_version(self) -> bool:
        return self.frame_version not in (0, 1)

    @property
    def header_len(self) -> int:
        return self.captured_len - len(self.payload) - (2 if self.fcs_present else 0)

    @property
    def src_short(self) -> Optional[int]:
        return self.src_addr.value if isinstance(self.src_addr, Short) else None

    @property
    def dst_short(self) -> Optional[int]:
        return self.dst_addr.value if isinstance(self.dst_addr, Short) else None


@dataclass
class NwkFrame:
    nwk_frame_type: NwkFrameType
    protocol_version: int
    dst_short: int
    src_short: int
    radius: int
    nwk_seq: int
    discover_route: int = 0
    multicast: bool = False
    security: bool = False
    source_route: bool = False
    end_device_initiator: bool = False
    dst_ext: Optional[int] = None
    src_ext: Optional[int] = None
    multicast_control: Optional[int] = None
    relay_index: Optional[int] = None
    relays: list[int] = field(default_factory=list)
    payload: bytes = b""

    @property
    def is_broadcast(self) -> bool:
        return self.dst_short >= BROADCAST_MIN


def _mode_of(addr: Optional[Address]) -> int:
    if addr is None:
        return _ADDR_NONE
    return _ADDR_SHORT if isinstance(addr, Short) else _ADDR_EXT


class _Cursor:
    __slots__ = ("buf", "pos", "what")

    def __init__(self, buf: bytes, pos: int, what: str):
        self.buf = buf
        self.pos = pos
        self.what = what

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise DecodeError(f"truncated {self.what}: need {end} bytes, have {len(self.buf)}")
        chunk = self.buf[self.pos:end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "little")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "little")

    def addr(self, mode: int) -> Address:
        return Short(self.u16()) if mode == _ADDR_SHORT else Extended(self.u64())


def parse_mac154(timestamp: float, data: bytes, fcs_present: bool = False) -> Mac154Frame:
    """Decode one MAC frame; ``data`` includes the 2 FCS bytes iff ``fcs_present``."""
    data = bytes(data)
    body = data[:-2] if fcs_present else data
    if len(body) < 3:
        raise DecodeError(f"truncated MAC header: {len(body)} bytes, need at least 3")
    fc = body[0] | body[1] << 8
    dst_mode = (fc >> 10) & 3
    src_mode = (fc >> 14) & 3
    if dst_mode == _ADDR_RESERVED or src_mode == _ADDR_RESERVED:
        raise DecodeError("reserved addressing mode 1")
    frame = Mac154Frame(
        timestamp=timestamp,
        frame_type=FrameType.from_bits(fc & 7),
        frame_type_bits=fc & 7,
        security_enabled=bool(fc & 0x08),
        frame_pending=bool(fc & 0x10),
        ack_request=bool(fc & 0x20),
        panid_compression=bool(fc & 0x40),
        frame_version=(fc >> 12) & 3,
        seq=body[2],
        captured_len=len(data),
        fcs_present=fcs_present,
    )
    cur = _Cursor(body, 3, "MAC header")
    if dst_mode:
        frame.dst_pan = cur.u16()
        frame.dst_addr = cur.addr(dst_mode)
    if src_mode:
        if frame.panid_compression:
            frame.src_pan = frame.dst_pan
        else:
            frame.src_pan = cur.u16()
        frame.src_addr = cur.addr(src_mode)
    frame.payload = body[cur.pos:]
    if fcs_present:
        frame.fcs_ok = fcs16(body) == int.from_bytes(data[-2:], "little")
    return frame


def serialize_mac154(frame: Mac154Frame) -> bytes:
    bits = frame.frame_type_bits if frame.frame_type_bits is not None else frame.frame_type.value
    fc = bits & 7
    fc |= frame.security_enabled << 3
    fc |= frame.frame_pending << 4
    fc |= frame.ack_request << 5
    fc |= frame.panid_compression << 6
    fc |= _mode_of(frame.dst_addr) << 10
    fc |= (frame.frame_version & 3) << 12
    fc |= _mode_of(frame.src_addr) << 14
    out = bytearray(struct.pack("<HB", fc, frame.seq))
    for addr, pan, is_src in ((frame.dst_addr, frame.dst_pan, False), (frame.src_addr, frame.src_pan, True)):
        if addr is None:
            continue
        if not (is_src and frame.panid_compression):
            out += struct.pack("<H", pan or 0)
        if isinstance(addr, Short):
            out += struct.pack("<H", addr.value)
        else:
            out += struct.pack("<Q", addr.value)
    out += frame.payload
    if frame.fcs_present:
        out += struct.pack("<H", fcs16(out))
    return bytes(out)


_ZIGBEE_VERSIONS = (1, 2)


def parse_nwk(frame: Mac154Frame) -> Optional[NwkFrame]:
    """Decode the Zigbee NWK header carried by a MAC data frame.

    Returns None for non-data frames and for payloads that do not start with a
    Zigbee NWK frame control (bare 802.15.4 payloads, inter-PAN, Green Power).
    """
    if frame.frame_type is not FrameType.DATA:
        return None
    p = frame.payload
    if len(p) < 2:
        return None
    fc = p[0] | p[1] << 8
    ftype = fc & 3
    version = (fc >> 2) & 0xF
    if ftype not in (0, 1) or version not in _ZIGBEE_VERSIONS:
        return None
    cur = _Cursor(p, 2, "NWK header")
    nwk = NwkFrame(
        nwk_frame_type=NwkFrameType(ftype),
        protocol_version=version,
        discover_route=(fc >> 6) & 3,
        multicast=bool(fc & (1 << 8)),
        security=bool(fc & (1 << 9)),
        source_route=bool(fc & (1 << 10)),
        end_device_initiator=bool(fc & (1 << 13)),
        dst_short=cur.u16(),
        src_short=cur.u16(),
        radius=cur.u8(),
        nwk_seq=cur.u8(),
    )
    if fc & (1 << 11):
        nwk.dst_ext = cur.u64()
    if fc & (1 << 12):
        nwk.src_ext = cur.u64()
    if nwk.multicast:
        nwk.multicast_control = cur.u8()
    if nwk.source_route:
        count = cur.u8()
        nwk.relay_index = cur.u8()
        nwk.relays = [cur.u16() for _ in range(count)]
    nwk.payload = p[cur.pos:]
    return nwk


def serialize_nwk(nwk: NwkFrame) -> bytes:
    fc = nwk.nwk_frame_type.value
    fc |= (nwk.protocol_version & 0xF) << 2
    fc |= (nwk.discover_route & 3) << 6
    fc |= nwk.multicast << 8
    fc |= nwk.security << 9
    fc |= nwk.source_route << 10
    fc |= (nwk.dst_ext is not None) << 11
    fc |= (nwk.src_ext is not None) << 12
    fc |= nwk.end_device_initiator << 13
    out = bytearray(struct.pack("<HHHBB", fc, nwk.dst_short, nwk.src_short, nwk.radius, nwk.nwk_seq))
    if nwk.dst_ext is not None:
        out += struct.pack("<Q", nwk.dst_ext)
    if nwk.src_ext is not None:
        out += struct.pack("<Q", nwk.src_ext)
    if nwk.multicast:
        out.append(nwk.multicast_control or 0)
    if nwk.source_route:
        out += struct.pack("<BB", len(nwk.relays), nwk.relay_index or 0)
        for r in nwk.relays:
            out += struct.pack("<H", r)
    out += nwk.payload
    return bytes(out)


def dissect(timestamp: float, data: bytes, fcs_present: bool) -> tuple[Mac154Frame, Optional[NwkFrame]]:
    """MAC + NWK decode of one captured frame.

    A NWK header that fails to decode is treated as absent, so one malformed
    frame does not abort a whole capture.
    """
    mac = parse_mac154(timestamp, data, fcs_present)
    try:
        nwk = parse_nwk(mac)
    except DecodeError:
        nwk = None
    return mac, nwk


@dataclass
class DecodeStats:
    frames: int = 0
    malformed: int = 0
    fcs_failed: int = 0
    nwk_frames: int = 0
    nwk_frames_fcs_ok: int = 0
    nonstandard_version: int = 0


def decode_capture(frames, fcs_present: bool) -> tuple[list[tuple[Mac154Frame, Optional[NwkFrame]]], DecodeStats]:
    """Decode ``(timestamp, bytes)`` pairs, counting rather than raising on bad frames."""
    out = []
    stats = DecodeStats()
    for ts, data in frames:
        stats.frames += 1
        try:
            mac, nwk = dissect(ts, data, fcs_present)
        except DecodeError:
            stats.malformed += 1
            continue
        if not mac.fcs_ok:
            stats.fcs_failed += 1
        if mac.nonstandard_version:
            stats.nonstandard_version += 1
        if nwk is not None:
            stats.nwk_frames += 1
            stats.nwk_frames_fcs_ok += mac.fcs_ok
        out.append((mac, nwk))
    return out, stats
