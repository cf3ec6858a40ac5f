import io

import pytest
from hypothesis import given, strategies as st

from zbtrace.dissect import FrameType, Mac154Frame, NwkFrame, NwkFrameType, Short
from zbtrace.errors import DeviceMapError, ZbTraceError
from zbtrace.labeling import (Direction, PacketRecord, build_records, filter_first_hop, identity_of,
                              load_device_map, parse_device_rows, read_records_csv, write_records_csv)

MAP_CSV = """label,category,role,short_addr,ext_addr,topology
PANC,Coordinator,PANC,0x0000,,A
H1,Socket,FFD,0x1234,0x00124b0000001234,A
R1,Bulb,FFD,0x5678,,A
B2,Motion,RFD,0x1111,,A
C1,Door,RFD,0x2222,,A
"""


@pytest.fixture
def dmap(tmp_path):
    p = tmp_path / "devices.csv"
    p.write_text(MAP_CSV)
    return load_device_map(p)


def frame(nwk_src, nwk_dst, mac_src, ts=0.0, length=40, fcs_ok=True, ftype=FrameType.DATA):
    mac = Mac154Frame(timestamp=ts, frame_type=ftype, seq=1, dst_pan=0x1A62, src_pan=0x1A62,
                      dst_addr=Short(0), src_addr=Short(mac_src), captured_len=length,
                      fcs_present=True, fcs_ok=fcs_ok)
    nwk = NwkFrame(NwkFrameType.DATA, 2, nwk_dst, nwk_src, 30, 1) if ftype is FrameType.DATA else None
    return mac, nwk


def test_coordinator_row(dmap):
    panc = dmap.panc("A")
    assert (panc.label, panc.category, panc.role, panc.short_addr, panc.ext_addr) == (
        "PANC", "Coordinator", "PANC", 0x0000, None)
    assert dmap.lookup("A", 0x1234).label == "H1"
    assert dmap.lookup_ext("A", 0x00124B0000001234).label == "H1"


def test_duplicate_short_address():
    rows = [
        dict(label="PANC", category="Coordinator", role="PANC", short_addr="0x0000", ext_addr="", topology="A"),
        dict(label="X", category="Socket", role="FFD", short_addr="0x1234", ext_addr="", topology="A"),
        dict(label="Y", category="Bulb", role="FFD", short_addr="0x1234", ext_addr="", topology="A"),
    ]
    with pytest.raises(DeviceMapError, match="duplicate"):
        parse_device_rows(rows)


def test_same_short_in_other_topology_ok():
    rows = [
        dict(label="PANC", category="Coordinator", role="PANC", short_addr="0x0000", ext_addr="", topology="A"),
        dict(label="PANC", category="Coordinator", role="PANC", short_addr="0x0000", ext_addr="", topology="B"),
    ]
    assert parse_device_rows(rows).topologies == ["A", "B"]


@pytest.mark.parametrize("bad", [
    "PANC,Coordinator,PANC,1234,,A",          # hex without 0x
    "PANC,Coordinator,PANC,0xzz,,A",
    "PANC,Fridge,PANC,0x0000,,A",
    "PANC,Coordinator,Boss,0x0000,,A",
    "PANC,Coordinator,PANC,0x10000,,A",
])
def test_malformed_rows(tmp_path, bad):
    p = tmp_path / "m.csv"
    p.write_text("label,category,role,short_addr,ext_addr,topology\n" + bad + "\n")
    with pytest.raises(DeviceMapError):
        load_device_map(p)


def test_missing_panc_and_header(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("label,category,role,short_addr,ext_addr,topology\nH,Socket,FFD,0x0001,,A\n")
    with pytest.raises(DeviceMapError, match="PANC"):
        load_device_map(p)
    p.write_text("name,cat\nx,y\n")
    with pytest.raises(DeviceMapError, match="header"):
        load_device_map(p)


def test_identity_strips_unit_suffix():
    assert identity_of("B2") == "B"
    assert identity_of("E") == "E"
    assert identity_of("PANC") == "PANC"


def test_first_hop_uplink(dmap):
    (r,), s = build_records([frame(0x1234, 0x0000, 0x1234)], dmap, "A")
    assert r.direction is Direction.UPLINK and r.first_hop and r.device_label == "H1"


def test_relayed_uplink(dmap):
    (r,), s = build_records([frame(0x1234, 0x0000, 0x5678)], dmap, "A")
    assert r.direction is Direction.UPLINK and not r.first_hop
    assert r.mac_src_short == 0x5678 and s.relayed == 1


def test_downlink_first_hop_and_relayed(dmap):
    recs, _ = build_records([frame(0x0000, 0x1111, 0x0000), frame(0x0000, 0x1111, 0x5678)], dmap, "A")
    assert [r.direction for r in recs] == [Direction.DOWNLINK] * 2
    assert [r.first_hop for r in recs] == [True, False]
    assert recs[0].device_label == "B2"


def test_device_to_device_skipped(dmap):
    recs, s = build_records([frame(0x1111, 0x2222, 0x1111)], dmap, "A")
    assert recs == [] and s.skipped["no_panc_endpoint"] == 1


def test_device_broadcast_is_uplink(dmap):
    (r,), _ = build_records([frame(0x5678, 0xFFFC, 0x5678), ], dmap, "A")
    assert r.direction is Direction.UPLINK and r.first_hop and r.device_label == "R1"
    (r,), _ = build_records([frame(0x1111, 0xFFFD, 0x5678)], dmap, "A")
    assert not r.first_hop


def test_panc_broadcast_skipped(dmap):
    recs, s = build_records([frame(0x0000, 0xFFFC, 0x0000)], dmap, "A")
    assert recs == [] and s.skipped["no_panc_endpoint"] == 1


def test_unknown_address_and_fcs(dmap):
    recs, s = build_records([frame(0x9999, 0x0000, 0x9999), frame(0x1234, 0, 0x1234, fcs_ok=False)], dmap, "A")
    assert recs == []
    assert s.skipped == {"unknown_address": 1, "fcs_failed": 1}
    recs, _ = build_records([frame(0x1234, 0, 0x1234, fcs_ok=False)], dmap, "A", include_bad_fcs=True)
    assert len(recs) == 1


def test_mac_commands_optional(dmap):
    mac, _ = frame(0, 0, 0x1111, ftype=FrameType.MAC_COMMAND)
    recs, s = build_records([(mac, None)], dmap, "A")
    assert recs == [] and s.non_nwk["mac_command"] == 1
    recs, s = build_records([(mac, None)], dmap, "A", include_mac_commands=True)
    assert len(recs) == 1 and recs[0].direction is Direction.UPLINK and s.mac_commands == 1


def test_extended_mac_source_resolved(dmap):
    from zbtrace.dissect import Extended
    mac, nwk = frame(0x1234, 0x0000, 0x1234)
    mac.src_addr = Extended(0x00124B0000001234)
    (r,), _ = build_records([(mac, nwk)], dmap, "A")
    assert r.first_hop and r.mac_src_short == 0x1234


addr = st.sampled_from([0x0000, 0x1234, 0x5678, 0x1111, 0x2222, 0x9999, 0xFFFC, 0xFFFF])


@given(st.lists(st.tuples(addr, addr, addr, st.booleans()), max_size=60))
def test_partition_and_direction_invariants(triples):
    dmap = parse_device_rows([
        dict(label="PANC", category="Coordinator", role="PANC", short_addr="0x0000", ext_addr="", topology="A"),
        dict(label="H1", category="Socket", role="FFD", short_addr="0x1234", ext_addr="", topology="A"),
        dict(label="R1", category="Bulb", role="FFD", short_addr="0x5678", ext_addr="", topology="A"),
        dict(label="B2", category="Motion", role="RFD", short_addr="0x1111", ext_addr="", topology="A"),
    ])
    frames = [frame(s, d, m, float(i), fcs_ok=ok) for i, (s, d, m, ok) in enumerate(triples)]
    recs, summary = build_records(frames, dmap, "A")
    assert summary.nwk_frames == summary.emitted + sum(summary.skipped.values())
    assert summary.emitted == len(recs)
    for r in recs:
        up = r.nwk_dst in (0x0000,) or r.nwk_dst >= 0xFFF8
        down = r.nwk_src == 0x0000
        assert up != down
        assert (r.direction is Direction.UPLINK) == up
    once = filter_first_hop(recs)
    assert filter_first_hop(once) == once
    assert len(recs) - len(once) == sum(not r.first_hop for r in recs)


def test_filter_examples():
    recs = [PacketRecord(float(i), "H1", "Socket", Direction.UPLINK, 40, 0x1234, 0, 0x1234, True, "A")
            for i in range(5)]
    assert filter_first_hop(recs) == recs
    recs[1].first_hop = recs[3].first_hop = False
    out = filter_first_hop(recs)
    assert len(out) == 3 and [r.timestamp for r in out] == [0.0, 2.0, 4.0]


def test_records_csv_roundtrip():
    recs = [
        PacketRecord(1700000000.123456, "H1", "Socket", Direction.UPLINK, 45, 0x1234, 0x0000, 0x5678, False, "A"),
        PacketRecord(0.1 + 0.2, "B2", "Motion", Direction.DOWNLINK, 19, 0x0000, 0x1111, None, True, "B"),
    ]
    buf = io.StringIO()
    write_records_csv(recs, buf)
    assert read_records_csv(io.StringIO(buf.getvalue())) == recs
    with pytest.raises(ZbTraceError):
        read_records_csv(io.StringIO("a,b\n1,2\n"))
