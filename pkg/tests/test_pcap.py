import io
import struct

import pytest

from zbtrace.errors import PcapError
from zbtrace.pcap import (LINKTYPE_IEEE802_15_4_NOFCS, LINKTYPE_IEEE802_15_4_WITHFCS, PcapReader, PcapWriter,
                          read_pcap)


def _capture(records, link_type=LINKTYPE_IEEE802_15_4_WITHFCS):
    buf = io.BytesIO()
    w = PcapWriter(buf, link_type)
    for sec, usec, data in records:
        w.write(sec, usec, data)
    return buf.getvalue()


def test_header_only_capture_is_empty(tmp_path):
    p = tmp_path / "empty.pcap"
    p.write_bytes(_capture([]))
    frames, meta = read_pcap(p)
    assert frames == []
    assert meta.frame_count == 0
    assert meta.duration == 0.0


def test_roundtrip_and_meta():
    raw = _capture([(10, 500000, b"\x01\x02\x03"), (12, 0, b"\xaa" * 10)])
    reader = PcapReader(io.BytesIO(raw))
    frames = list(reader)
    assert frames == [(10.5, b"\x01\x02\x03"), (12.0, b"\xaa" * 10)]
    m = reader.meta
    assert (m.frame_count, m.byte_count, m.t_start, m.t_end) == (2, 13, 10.5, 12.0)
    assert m.duration == pytest.approx(1.5)
    assert m.fcs_present


def test_nofcs_link_type():
    reader = PcapReader(io.BytesIO(_capture([(1, 0, b"\x02\x00\x7b")], LINKTYPE_IEEE802_15_4_NOFCS)))
    list(reader)
    assert not reader.meta.fcs_present


@pytest.mark.parametrize("endian", ["<", ">"])
@pytest.mark.parametrize("nsec", [False, True])
def test_both_endians_and_resolutions(endian, nsec):
    magic = 0xA1B23C4D if nsec else 0xA1B2C3D4
    hdr = struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, 195)
    frac = 250_000_000 if nsec else 250_000
    rec = struct.pack(endian + "IIII", 7, frac, 3, 3) + b"abc"
    reader = PcapReader(io.BytesIO(hdr + rec))
    assert list(reader) == [(7.25, b"abc")]
    assert reader.meta.nanosecond is nsec


def test_truncated_record_names_index():
    raw = _capture([(1, 0, b"abcd"), (2, 0, b"efghij")])
    with pytest.raises(PcapError, match="record 1"):
        list(PcapReader(io.BytesIO(raw[:-3])))


def test_bad_magic_and_link_type():
    with pytest.raises(PcapError, match="magic"):
        PcapReader(io.BytesIO(b"\x00" * 24))
    hdr = struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1)
    with pytest.raises(PcapError, match="link type"):
        PcapReader(io.BytesIO(hdr))


def test_backwards_timestamp_warns():
    raw = _capture([(5, 0, b"a"), (4, 0, b"b")])
    with pytest.warns(UserWarning, match="backwards"):
        frames = list(PcapReader(io.BytesIO(raw)))
    assert len(frames) == 2


def test_missing_file(tmp_path):
    with pytest.raises(PcapError):
        read_pcap(tmp_path / "nope.pcap")
