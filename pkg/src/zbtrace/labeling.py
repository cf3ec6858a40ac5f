"""Device attribution, traffic direction and first-hop flagging."""

from __future__ import annotations

import csv
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .dissect import BROADCAST_MIN, FrameType, Mac154Frame, NwkFrame
from .errors import DeviceMapError, ZbTraceError

CATEGORIES = ("Bulb", "Button", "Coordinator", "Door", "Motion", "Socket", "Temperature")
ROLES = ("PANC", "FFD", "RFD")

DEVICE_MAP_HEADER = ["label", "category", "role", "short_addr", "ext_addr", "topology"]
RECORDS_HEADER = [
    "timestamp", "device_label", "category", "direction", "length",
    "nwk_src", "nwk_dst", "mac_src", "first_hop", "topology",
]


class Direction(str, Enum):
    UPLINK = "Uplink"
    DOWNLINK = "Downlink"


@dataclass(frozen=True)
class DeviceEntry:
    label: str
    category: str
    role: str
    short_addr: int
    ext_addr: Optional[int]
    topology: str

    @property
    def identity(self) -> str:
        """Model-level identity: the label without its unit suffix (``B2`` -> ``B``)."""
        return identity_of(self.label)


def identity_of(label: str) -> str:
    stripped = re.sub(r"\d+$", "", label)
    return stripped or label


class DeviceMap:
    def __init__(self, entries: Iterable[DeviceEntry]):
        self.entries = list(entries)
        self._by_short: dict[tuple[str, int], DeviceEntry] = {}
        self._by_ext: dict[tuple[str, int], DeviceEntry] = {}
        self._panc: dict[str, DeviceEntry] = {}
        for e in self.entries:
            key = (e.topology, e.short_addr)
            if key in self._by_short:
                raise DeviceMapError(
                    f"duplicate short address 0x{e.short_addr:04x} in topology {e.topology}"
                    f" ({self._by_short[key].label}, {e.label})"
                )
            self._by_short[key] = e
            if e.ext_addr is not None:
                self._by_ext[(e.topology, e.ext_addr)] = e
            if e.role == "PANC":
                if e.topology in self._panc:
                    raise DeviceMapError(f"multiple PANC entries in topology {e.topology}")
                self._panc[e.topology] = e
        for topo in self.topologies:
            if topo not in self._panc:
                raise DeviceMapError(f"no PANC entry in topology {topo}")

    @property
    def topologies(self) -> list[str]:
        return sorted({e.topology for e in self.entries})

    def panc(self, topology: str) -> DeviceEntry:
        try:
            return self._panc[topology]
        except KeyError:
            raise DeviceMapError(f"topology {topology!r} not in device map") from None

    def lookup(self, topology: str, short: int) -> Optional[DeviceEntry]:
        return self._by_short.get((topology, short))

    def lookup_ext(self, topology: str, ext: int) -> Optional[DeviceEntry]:
        return self._by_ext.get((topology, ext))

    def devices(self, topology: str) -> list[DeviceEntry]:
        return [e for e in self.entries if e.topology == topology]


def _parse_hex(text: str, bits: int, what: str) -> int:
    try:
        value = int(text, 16)
    except ValueError:
        raise DeviceMapError(f"malformed hex in {what}: {text!r}") from None
    if not text.lower().startswith("0x") or value >> bits:
        raise DeviceMapError(f"malformed hex in {what}: {text!r}")
    return value


def parse_device_rows(rows: Iterable[dict]) -> DeviceMap:
    entries = []
    for i, row in enumerate(rows):
        where = f"row {i + 1}"
        category, role = row["category"].strip(), row["role"].strip()
        if category not in CATEGORIES:
            raise DeviceMapError(f"{where}: unknown category {category!r}")
        if role not in ROLES:
            raise DeviceMapError(f"{where}: unknown role {role!r}")
        ext = (row.get("ext_addr") or "").strip()
        entries.append(DeviceEntry(
            label=row["label"].strip(),
            category=category,
            role=role,
            short_addr=_parse_hex(row["short_addr"].strip(), 16, f"{where} short_addr"),
            ext_addr=_parse_hex(ext, 64, f"{where} ext_addr") if ext else None,
            topology=row["topology"].strip(),
        ))
    return DeviceMap(entries)


def load_device_map(path: str | os.PathLike) -> DeviceMap:
    """Load the ``label,category,role,short_addr,ext_addr,topology`` CSV."""
    try:
        with open(path, newline="") as fp:
            reader = csv.DictReader(fp)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != DEVICE_MAP_HEADER:
                raise DeviceMapError(f"{path}: expected header {','.join(DEVICE_MAP_HEADER)}")
            return parse_device_rows(reader)
    except OSError as exc:
        raise DeviceMapError(f"cannot read {path}: {exc}") from exc


@dataclass
class PacketRecord:
    timestamp: float
    device_label: str
    category: str
    direction: Direction
    length: int
    nwk_src: int
    nwk_dst: int
    mac_src_short: Optional[int]
    first_hop: bool
    topology: str


@dataclass
class BuildSummary:
    """Frame accounting for one ``build_records`` call.

    ``nwk_frames == emitted + sum(skipped.values())``.
    """

    frames: int = 0
    nwk_frames: int = 0
    emitted: int = 0
    relayed: int = 0
    mac_commands: int = 0
    skipped: Counter = field(default_factory=Counter)
    non_nwk: Counter = field(default_factory=Counter)


def _mac_source_short(mac: Mac154Frame, dmap: DeviceMap, topology: str) -> Optional[int]:
    short = mac.src_short
    if short is None and mac.src_addr is not None:
        entry = dmap.lookup_ext(topology, mac.src_addr.value)
        short = entry.short_addr if entry else None
    return short


def build_records(
    frames: Iterable[tuple[Mac154Frame, Optional[NwkFrame]]],
    dmap: DeviceMap,
    topology: str,
    include_bad_fcs: bool = False,
    include_mac_commands: bool = False,
) -> tuple[list[PacketRecord], BuildSummary]:
    """Attribute NWK frames exchanged with the PAN coordinator to devices.

    Uplink frames are first-hop when the MAC transmitter is the NWK originator;
    downlink frames when the MAC transmitter is the coordinator itself. NWK
    broadcasts sourced by a device count as that device's uplink.
    """
    panc = dmap.panc(topology)
    pan_short = panc.short_addr
    records: list[PacketRecord] = []
    summary = BuildSummary()

    for mac, nwk in frames:
        summary.frames += 1
        if nwk is None:
            if include_mac_commands and mac.frame_type is FrameType.MAC_COMMAND and (include_bad_fcs or mac.fcs_ok):
                rec = _mac_command_record(mac, dmap, topology, pan_short)
                if rec is not None:
                    summary.mac_commands += 1
                    records.append(rec)
                    continue
            summary.non_nwk[mac.frame_type.name.lower()] += 1
            continue
        summary.nwk_frames += 1
        if not mac.fcs_ok and not include_bad_fcs:
            summary.skipped["fcs_failed"] += 1
            continue

        src, dst = nwk.src_short, nwk.dst_short
        mac_src = _mac_source_short(mac, dmap, topology)
        if dst == pan_short and src != pan_short:
            direction, device = Direction.UPLINK, dmap.lookup(topology, src)
            first_hop = mac_src == src
        elif src == pan_short and dst != pan_short and dst < BROADCAST_MIN:
            direction, device = Direction.DOWNLINK, dmap.lookup(topology, dst)
            first_hop = mac_src == pan_short
        elif dst >= BROADCAST_MIN and src != pan_short:
            direction, device = Direction.UPLINK, dmap.lookup(topology, src)
            first_hop = mac_src == src
        else:
            summary.skipped["no_panc_endpoint"] += 1
            continue
        if device is None:
            summary.skipped["unknown_address"] += 1
            continue

        summary.emitted += 1
        summary.relayed += not first_hop
        records.append(PacketRecord(
            timestamp=mac.timestamp,
            device_label=device.label,
            category=device.category,
            direction=direction,
            length=mac.captured_len,
            nwk_src=src,
            nwk_dst=dst,
            mac_src_short=mac_src,
            first_hop=first_hop,
            topology=topology,
        ))
    return records, summary


def _mac_command_record(mac: Mac154Frame, dmap: DeviceMap, topology: str, pan_short: int) -> Optional[PacketRecord]:
    src, dst = mac.src_short, mac.dst_short
    if src is None or dst is None:
        return None
    if dst == pan_short and src != pan_short:
        direction, device = Direction.UPLINK, dmap.lookup(topology, src)
    elif src == pan_short and dst != pan_short:
        direction, device = Direction.DOWNLINK, dmap.lookup(topology, dst)
    else:
        return None
    if device is None:
        return None
    return PacketRecord(mac.timestamp, device.label, device.category, direction, mac.captured_len,
                        src, dst, src, True, topology)


def filter_first_hop(records: Iterable[PacketRecord]) -> list[PacketRecord]:
    return [r for r in records if r.first_hop]


def _hex16(v: Optional[int]) -> str:
    return "" if v is None else f"0x{v:04x}"


def write_records_csv(records: Iterable[PacketRecord], fp) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(RECORDS_HEADER)
    for r in records:
        w.writerow([
            repr(float(r.timestamp)), r.device_label, r.category, r.direction.value, r.length,
            _hex16(r.nwk_src), _hex16(r.nwk_dst), _hex16(r.mac_src_short),
            int(r.first_hop), r.topology,
        ])


def read_records_csv(fp) -> list[PacketRecord]:
    reader = csv.DictReader(fp)
    if reader.fieldnames != RECORDS_HEADER:
        raise ZbTraceError(f"records CSV: expected header {','.join(RECORDS_HEADER)}")
    out = []
    for row in reader:
        out.append(PacketRecord(
            timestamp=float(row["timestamp"]),
            device_label=row["device_label"],
            category=row["category"],
            direction=Direction(row["direction"]),
            length=int(row["length"]),
            nwk_src=int(row["nwk_src"], 16),
            nwk_dst=int(row["nwk_dst"], 16),
            mac_src_short=int(row["mac_src"], 16) if row["mac_src"] else None,
            first_hop=row["first_hop"] in ("1", "true", "True"),
            topology=row["topology"],
        ))
    return out
