"""Deterministic synthetic Zigbee captures with known ground truth.

Frames are packed here directly with ``struct`` rather than through the
dissector's serializer, and the expected records and window features are
computed from the generator's own bookkeeping with plain Python arithmetic.
That keeps the oracle independent of the code it checks.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .dissect import Extended, FrameType, Mac154Frame, NwkFrame, NwkFrameType, Short, serialize_mac154, serialize_nwk
from .errors import ScenarioError
from .fcs import fcs16
from .labeling import CATEGORIES, DEVICE_MAP_HEADER, Direction, PacketRecord
from .pcap import LINKTYPE_IEEE802_15_4_WITHFCS, PcapWriter

MAC_HDR_LEN = 9  # fc, seq, dst pan, dst short, src short (PAN-ID compressed)
NWK_HDR_LEN = 8
MIN_FRAME_LEN = MAC_HDR_LEN + NWK_HDR_LEN + 2
MAX_FRAME_LEN = 127

BROADCAST_MAC = 0xFFFF
BROADCAST_NWK = 0xFFFC  # all routers and coordinator

ACK_DELAY_US = 600
DATA_REQUEST = 0x04


@dataclass
class TrafficModel:
    kind: str                               # "periodic" | "poisson"
    interval: float = 0.0                   # periodic, seconds
    rate: float = 0.0                       # poisson, packets per second
    length: Union[int, tuple[int, int]] = 40  # fixed, or inclusive uniform range
    phase: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "TrafficModel":
        length = d.get("length", 40)
        if isinstance(length, (list, tuple)):
            length = (int(length[0]), int(length[1]))
        return cls(kind=d.get("kind", "periodic"), interval=float(d.get("interval", 0.0)),
                   rate=float(d.get("rate", 0.0)), length=length, phase=float(d.get("phase", 0.0)))

    def to_dict(self) -> dict:
        length = list(self.length) if isinstance(self.length, tuple) else self.length
        return {"kind": self.kind, "interval": self.interval, "rate": self.rate, "length": length, "phase": self.phase}

    def validate(self, where: str) -> None:
        if self.kind == "periodic":
            if not self.interval > 0:
                raise ScenarioError(f"{where}: periodic interval must be positive")
        elif self.kind == "poisson":
            if not self.rate > 0:
                raise ScenarioError(f"{where}: poisson rate must be positive")
        else:
            raise ScenarioError(f"{where}: unknown traffic kind {self.kind!r}")
        lo, hi = self.length if isinstance(self.length, tuple) else (self.length, self.length)
        if not MIN_FRAME_LEN <= lo <= hi <= MAX_FRAME_LEN:
            raise ScenarioError(f"{where}: frame length must lie in [{MIN_FRAME_LEN}, {MAX_FRAME_LEN}]")


@dataclass
class DeviceSpec:
    label: str
    role: str
    short_addr: int
    category: str = "Socket"
    ext_addr: Optional[int] = None
    uplink: Optional[TrafficModel] = None
    downlink: Optional[TrafficModel] = None
    broadcast: Optional[TrafficModel] = None
    poll_interval: Optional[float] = None   # RFD data requests

    @property
    def ext(self) -> int:
        return self.ext_addr if self.ext_addr is not None else 0x00124B0000000000 | self.short_addr


@dataclass
class RelaySpec:
    origin: str
    router: int
    probability: float


@dataclass
class PeerSpec:
    src: str
    dst: str
    traffic: TrafficModel


def _addr(v) -> int:
    return int(v, 16) if isinstance(v, str) else int(v)


def _model(d) -> Optional[TrafficModel]:
    return TrafficModel.from_dict(d) if d else None


@dataclass
class ScenarioSpec:
    seed: int
    duration: float
    devices: list[DeviceSpec]
    relays: list[RelaySpec] = field(default_factory=list)
    peers: list[PeerSpec] = field(default_factory=list)
    topology: str = "A"
    pan_id: int = 0x1A62
    start_time: float = 0.0
    relay_delay: tuple[float, float] = (0.002, 0.008)
    fcs_error_rate: float = 0.0
    mac_acks: bool = True

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        try:
            devices = [DeviceSpec(
                label=x["label"], role=x["role"], short_addr=_addr(x["short_addr"]),
                category=x.get("category", "Coordinator" if x["role"] == "PANC" else "Socket"),
                ext_addr=_addr(x["ext_addr"]) if x.get("ext_addr") is not None else None,
                uplink=_model(x.get("uplink")), downlink=_model(x.get("downlink")),
                broadcast=_model(x.get("broadcast")), poll_interval=x.get("poll_interval"),
            ) for x in d["devices"]]
            relays = [RelaySpec(r["origin"], _addr(r["router"]), float(r["probability"])) for r in d.get("relays", [])]
            peers = [PeerSpec(p["src"], p["dst"], TrafficModel.from_dict(p["traffic"])) for p in d.get("peers", [])]
            return cls(
                seed=int(d["seed"]), duration=float(d["duration"]), devices=devices, relays=relays, peers=peers,
                topology=str(d.get("topology", "A")), pan_id=_addr(d.get("pan_id", 0x1A62)),
                start_time=float(d.get("start_time", 0.0)),
                relay_delay=tuple(d.get("relay_delay", (0.002, 0.008))),
                fcs_error_rate=float(d.get("fcs_error_rate", 0.0)), mac_acks=bool(d.get("mac_acks", True)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"malformed scenario: {exc!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc

    def to_dict(self) -> dict:
        def dev(x: DeviceSpec) -> dict:
            out = {"label": x.label, "role": x.role, "short_addr": f"0x{x.short_addr:04x}", "category": x.category}
            if x.ext_addr is not None:
                out["ext_addr"] = f"0x{x.ext_addr:016x}"
            for k in ("uplink", "downlink", "broadcast"):
                if getattr(x, k) is not None:
                    out[k] = getattr(x, k).to_dict()
            if x.poll_interval is not None:
                out["poll_interval"] = x.poll_interval
            return out
        return {
            "seed": self.seed, "duration": self.duration, "topology": self.topology,
            "pan_id": f"0x{self.pan_id:04x}", "start_time": self.start_time,
            "relay_delay": list(self.relay_delay), "fcs_error_rate": self.fcs_error_rate, "mac_acks": self.mac_acks,
            "devices": [dev(x) for x in self.devices],
            "relays": [{"origin": r.origin, "router": f"0x{r.router:04x}", "probability": r.probability} for r in self.relays],
            "peers": [{"src": p.src, "dst": p.dst, "traffic": p.traffic.to_dict()} for p in self.peers],
        }

    def validate(self) -> None:
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        if self.start_time < 0:
            raise ScenarioError("start_time must be non-negative")
        labels = [d.label for d in self.devices]
        if len(set(labels)) != len(labels):
            raise ScenarioError("device labels must be unique")
        shorts = [d.short_addr for d in self.devices]
        if len(set(shorts)) != len(shorts):
            raise ScenarioError("device short addresses must be unique")
        if any(not 0 <= s < 0xFFF8 for s in shorts):
            raise ScenarioError("device short addresses must be unicast (< 0xfff8)")
        if [d.role for d in self.devices].count("PANC") != 1:
            raise ScenarioError("scenario needs exactly one PANC")
        for d in self.devices:
            if d.role not in ("PANC", "FFD", "RFD"):
                raise ScenarioError(f"{d.label}: unknown role {d.role!r}")
            if d.category not in CATEGORIES:
                raise ScenarioError(f"{d.label}: unknown category {d.category!r}")
            for k in ("uplink", "downlink", "broadcast"):
                m = getattr(d, k)
                if m is not None:
                    if d.role == "PANC":
                        raise ScenarioError(f"{d.label}: the PANC takes no traffic model")
                    m.validate(f"{d.label}.{k}")
            if d.poll_interval is not None and not d.poll_interval > 0:
                raise ScenarioError(f"{d.label}: poll_interval must be positive")
        by_label = {d.label: d for d in self.devices}
        panc = self.panc
        for r in self.relays:
            if r.origin not in by_label or by_label[r.origin].role == "PANC":
                raise ScenarioError(f"relay origin {r.origin!r} is not a non-PANC device")
            if r.router in (panc.short_addr, by_label[r.origin].short_addr) or not 0 <= r.router < 0xFFF8:
                raise ScenarioError(f"relay router 0x{r.router:04x} must differ from origin and PANC")
            if not 0.0 <= r.probability <= 1.0:
                raise ScenarioError(f"relay probability {r.probability} outside [0, 1]")
        if len({r.origin for r in self.relays}) != len(self.relays):
            raise ScenarioError("at most one relay route per origin")
        for p in self.peers:
            if p.src not in by_label or p.dst not in by_label or p.src == p.dst:
                raise ScenarioError(f"peer flow {p.src}->{p.dst} needs two distinct known devices")
            if panc.label in (p.src, p.dst):
                raise ScenarioError("peer flows must not involve the PANC")
            p.traffic.validate(f"peer {p.src}->{p.dst}")
        if not 0.0 <= self.fcs_error_rate <= 1.0:
            raise ScenarioError("fcs_error_rate outside [0, 1]")
        lo, hi = self.relay_delay
        if not 0 < lo <= hi:
            raise ScenarioError("relay_delay must be 0 < lo <= hi")

    @property
    def panc(self) -> DeviceSpec:
        return next(d for d in self.devices if d.role == "PANC")

    def device_rows(self) -> list[dict]:
        """Rows of the device-map CSV describing this scenario."""
        return [{
            "label": d.label, "category": d.category, "role": d.role, "short_addr": f"0x{d.short_addr:04x}",
            "ext_addr": f"0x{d.ext:016x}", "topology": self.topology,
        } for d in self.devices]

    def device_map_csv(self) -> str:
        lines = [",".join(DEVICE_MAP_HEADER)]
        for row in self.device_rows():
            lines.append(",".join(row[k] for k in DEVICE_MAP_HEADER))
        return "\n".join(lines) + "\n"


# -- ground truth ------------------------------------------------------------

def _naive_stats(xs: list[float]) -> list[float]:
    """mean, std, min, max, median, skewness, excess kurtosis, mean absolute deviation.

    Moments are exact rationals, so near-constant inputs do not lose digits.
    """
    n = len(xs)
    if n == 0:
        return [0.0] * 8
    q = [Fraction(x) for x in xs]
    mean = sum(q) / n
    s = sorted(xs)
    median = s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2
    m2 = sum((x - mean) ** 2 for x in q) / n
    std = math.sqrt(m2)
    if std <= 1e-9 * max(abs(x) for x in xs):
        return [float(mean), 0.0, s[0], s[-1], median, 0.0, 0.0, 0.0]
    m3 = sum((x - mean) ** 3 for x in q) / n
    m4 = sum((x - mean) ** 4 for x in q) / n
    mad = sum(abs(x - mean) for x in q) / n
    skew = math.copysign(math.sqrt(m3 * m3 / m2 ** 3), m3)
    return [float(mean), std, s[0], s[-1], median, skew, float(m4 / (m2 * m2) - 3), float(mad)]


def naive_window_features(packets: list[tuple[float, int, str]]) -> list[float]:
    """The 51 window features from ``(timestamp, length, "Uplink"|"Downlink")`` tuples."""
    packets = sorted(packets)
    out: list[float] = []
    subsets = [packets, [p for p in packets if p[2] == "Uplink"], [p for p in packets if p[2] == "Downlink"]]
    for sub in subsets:
        out += _naive_stats([float(p[1]) for p in sub])
        out += _naive_stats([sub[i + 1][0] - sub[i][0] for i in range(len(sub) - 1)])
    out += [float(len(sub)) for sub in subsets]
    return out


@dataclass
class TruthWindow:
    device_label: str
    category: str
    topology: str
    t_start: float
    window_s: float
    values: list[float]


@dataclass
class GroundTruth:
    records: list[PacketRecord]
    relay_count: int
    frame_count: int
    nwk_frame_count: int
    fcs_failed: int
    skipped_no_panc: int
    t0: float
    window_s: Optional[float] = None
    windows: list[TruthWindow] = field(default_factory=list)

    def relays_by_device(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            if not r.first_hop:
                out[r.device_label] = out.get(r.device_label, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "frame_count": self.frame_count,
            "nwk_frame_count": self.nwk_frame_count,
            "relay_count": self.relay_count,
            "fcs_failed": self.fcs_failed,
            "skipped_no_panc": self.skipped_no_panc,
            "t0": self.t0,
            "records": [{
                "timestamp": r.timestamp, "device_label": r.device_label, "category": r.category,
                "direction": r.direction.value, "length": r.length, "nwk_src": f"0x{r.nwk_src:04x}",
                "nwk_dst": f"0x{r.nwk_dst:04x}", "mac_src": f"0x{r.mac_src_short:04x}",
                "first_hop": r.first_hop, "topology": r.topology,
            } for r in self.records],
            "window_s": self.window_s,
            "windows": [{
                "device_label": w.device_label, "category": w.category, "topology": w.topology,
                "t_start": w.t_start, "window_s": w.window_s, "values": w.values,
            } for w in self.windows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def truth_windows(records: list[PacketRecord], T: float, t0: float) -> list[TruthWindow]:
    """Expected feature windows over the first-hop records, computed naively."""
    if not T > 0:
        raise ScenarioError("window length must be positive")
    buckets: dict[tuple[str, str, int], list[PacketRecord]] = {}
    for r in records:
        if r.first_hop:
            k = math.floor((r.timestamp - t0) / T)
            buckets.setdefault((r.topology, r.device_label, k), []).append(r)
    out = []
    for (topo, label, k) in sorted(buckets):
        recs = buckets[(topo, label, k)]
        if len(recs) < 2:
            continue
        pk = [(r.timestamp, r.length, r.direction.value) for r in recs]
        out.append(TruthWindow(label, recs[0].category, topo, t0 + k * T, T, naive_window_features(pk)))
    return out


# -- frame construction ------------------------------------------------------

@dataclass
class _Tx:
    time_us: int
    order: int
    data: bytes
    record: Optional[PacketRecord] = None
    nwk: bool = False
    fcs_bad: bool = False
    no_panc: bool = False


class _Builder:
    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.txs: list[_Tx] = []
        self.mac_seq: dict[int, int] = {}
        self.nwk_seq: dict[int, int] = {}
        self.panc = spec.panc.short_addr
        self.start_us = int(round(spec.start_time * 1e6))

    def _next(self, table: dict[int, int], addr: int) -> int:
        v = table.get(addr, int(self.rng.integers(256)))
        table[addr] = (v + 1) & 0xFF
        return v

    def _emit(self, time_us: int, body: bytes, **kw) -> _Tx:
        data = body + struct.pack("<H", fcs16(body))
        if kw.pop("corrupt", False):
            data = data[:-2] + struct.pack("<H", fcs16(body) ^ 0xFFFF)
            kw["fcs_bad"] = True
        tx = _Tx(time_us, len(self.txs), data, **kw)
        self.txs.append(tx)
        return tx

    def ack(self, time_us: int, seq: int) -> None:
        if self.spec.mac_acks:
            self._emit(time_us + ACK_DELAY_US, struct.pack("<HB", 0x0002, seq))

    def data_frame(self, time_us: int, mac_src: int, mac_dst: int, nwk_src: int, nwk_dst: int,
                   radius: int, nwk_seq: int, length: int, record: Optional[PacketRecord]) -> None:
        ack_req = mac_dst != BROADCAST_MAC
        # data frame, PAN-ID compression, short dst/src addressing, 2003 frame version
        fc = 0x0001 | 0x0040 | (2 << 10) | (2 << 14) | (ack_req << 5)
        seq = self._next(self.mac_seq, mac_src)
        # NWK data frame, protocol version 2, security enabled
        nwk_fc = 0x0000 | (2 << 2) | (1 << 9)
        head = struct.pack("<HBHHH", fc, seq, self.spec.pan_id, mac_dst, mac_src)
        head += struct.pack("<HHHBB", nwk_fc, nwk_dst, nwk_src, radius, nwk_seq)
        pad = length - len(head) - 2
        body = head + self.rng.integers(0, 256, pad, dtype=np.uint8).tobytes()
        corrupt = bool(self.spec.fcs_error_rate and self.rng.random() < self.spec.fcs_error_rate)
        tx = self._emit(time_us, body, record=None if corrupt else record, nwk=True, corrupt=corrupt,
                        no_panc=record is None)
        if record is not None and not corrupt:
            record.timestamp = self.timestamp(tx.time_us)
        if ack_req:
            self.ack(time_us, seq)

    def data_request(self, time_us: int, src: int, parent: int) -> None:
        fc = 0x0003 | 0x0020 | 0x0040 | (2 << 10) | (2 << 14)
        seq = self._next(self.mac_seq, src)
        self._emit(time_us, struct.pack("<HBHHHB", fc, seq, self.spec.pan_id, parent, src, DATA_REQUEST))
        self.ack(time_us, seq)

    def timestamp(self, time_us: int) -> float:
        t = self.start_us + time_us
        return t // 1_000_000 + (t % 1_000_000) * 1e-6

    def times(self, model: TrafficModel) -> list[int]:
        end = self.spec.duration
        ts: list[float] = []
        if model.kind == "periodic":
            k = 0
            while model.phase + k * model.interval < end:
                ts.append(model.phase + k * model.interval)
                k += 1
        else:
            t = model.phase + self.rng.exponential(1.0 / model.rate)
            while t < end:
                ts.append(t)
                t += self.rng.exponential(1.0 / model.rate)
        return [int(round(t * 1e6)) for t in ts]

    def length(self, model: TrafficModel) -> int:
        if isinstance(model.length, tuple):
            return int(self.rng.integers(model.length[0], model.length[1] + 1))
        return int(model.length)


def generate(spec: ScenarioSpec, window: Optional[float] = None) -> tuple[bytes, GroundTruth]:
    """Synthesize a capture; returns ``(pcap_bytes, ground_truth)``.

    Ground-truth records follow capture order and cover every FCS-valid NWK
    frame with a PANC endpoint or a device-originated broadcast. ``window``
    additionally fills in the expected first-hop feature windows.
    """
    spec.validate()
    b = _Builder(spec)
    panc = spec.panc
    relays = {r.origin: r for r in spec.relays}
    by_label = {d.label: d for d in spec.devices}
    lo_us, hi_us = (int(round(x * 1e6)) for x in spec.relay_delay)

    def rec(dev: DeviceSpec, direction: Direction, length: int, nwk_src: int, nwk_dst: int,
            mac_src: int, first_hop: bool) -> PacketRecord:
        return PacketRecord(0.0, dev.label, dev.category, direction, length, nwk_src, nwk_dst,
                            mac_src, first_hop, spec.topology)

    def send(dev: DeviceSpec, t: int, direction: Optional[Direction], length: int, nwk_src: int, nwk_dst: int) -> None:
        """One NWK frame, possibly carried over the device's relay router."""
        seq = b._next(b.nwk_seq, nwk_src)
        radius = 30
        route = relays.get(dev.label)
        relayed = route is not None and b.rng.random() < route.probability
        broadcast = nwk_dst >= 0xFFF8
        tx_src = nwk_src
        first_dst = BROADCAST_MAC if broadcast else (route.router if relayed else nwk_dst)
        mk = (lambda mac_src, fh: rec(dev, direction, length, nwk_src, nwk_dst, mac_src, fh)) if direction else (lambda *_: None)
        b.data_frame(t, tx_src, first_dst, nwk_src, nwk_dst, radius, seq, length, mk(tx_src, True))
        if relayed:
            t2 = t + int(b.rng.integers(lo_us, hi_us + 1))
            second_dst = BROADCAST_MAC if broadcast else nwk_dst
            b.data_frame(t2, route.router, second_dst, nwk_src, nwk_dst, radius - 1, seq, length,
                         mk(route.router, False))

    for dev in spec.devices:
        if dev.role == "PANC":
            continue
        if dev.uplink:
            for t in b.times(dev.uplink):
                send(dev, t, Direction.UPLINK, b.length(dev.uplink), dev.short_addr, panc.short_addr)
        if dev.downlink:
            for t in b.times(dev.downlink):
                send(dev, t, Direction.DOWNLINK, b.length(dev.downlink), panc.short_addr, dev.short_addr)
        if dev.broadcast:
            for t in b.times(dev.broadcast):
                send(dev, t, Direction.UPLINK, b.length(dev.broadcast), dev.short_addr, BROADCAST_NWK)
        if dev.poll_interval:
            route = relays.get(dev.label)
            parent = route.router if route else panc.short_addr
            for t in b.times(TrafficModel("periodic", interval=dev.poll_interval, phase=dev.poll_interval / 2)):
                b.data_request(t, dev.short_addr, parent)
    for p in spec.peers:
        src, dst = by_label[p.src], by_label[p.dst]
        for t in b.times(p.traffic):
            length = b.length(p.traffic)
            seq = b._next(b.nwk_seq, src.short_addr)
            b.data_frame(t, src.short_addr, dst.short_addr, src.short_addr, dst.short_addr, 30, seq, length, None)

    txs = sorted(b.txs, key=lambda x: (x.time_us, x.order))
    buf = io.BytesIO()
    writer = PcapWriter(buf, LINKTYPE_IEEE802_15_4_WITHFCS)
    for tx in txs:
        t = b.start_us + tx.time_us
        writer.write(t // 1_000_000, t % 1_000_000, tx.data)

    records = [tx.record for tx in txs if tx.record is not None]
    truth = GroundTruth(
        records=records,
        relay_count=sum(not r.first_hop for r in records),
        frame_count=len(txs),
        nwk_frame_count=sum(tx.nwk for tx in txs),
        fcs_failed=sum(tx.fcs_bad for tx in txs),
        skipped_no_panc=sum(tx.no_panc and not tx.fcs_bad for tx in txs),
        t0=b.timestamp(txs[0].time_us) if txs else spec.start_time,
    )
    if window is not None:
        truth.window_s = float(window)
        truth.windows = truth_windows(records, float(window), truth.t0)
    return buf.getvalue(), truth


# -- randomized frames for codec round-trip checks ---------------------------

def random_nwk(rng: np.random.Generator) -> NwkFrame:
    multicast = bool(rng.random() < 0.2)
    source_route = bool(rng.random() < 0.2)
    relays = [int(x) for x in rng.integers(0, 0x10000, int(rng.integers(0, 4)))] if source_route else []
    return NwkFrame(
        nwk_frame_type=NwkFrameType(int(rng.integers(2))),
        protocol_version=int(rng.choice([1, 2])),
        dst_short=int(rng.integers(0x10000)),
        src_short=int(rng.integers(0x10000)),
        radius=int(rng.integers(256)),
        nwk_seq=int(rng.integers(256)),
        discover_route=int(rng.integers(4)),
        multicast=multicast,
        security=bool(rng.random() < 0.5),
        source_route=source_route,
        end_device_initiator=bool(rng.random() < 0.3),
        dst_ext=int(rng.integers(0, 2**63)) * 2 + 1 if rng.random() < 0.3 else None,
        src_ext=int(rng.integers(0, 2**63)) * 2 if rng.random() < 0.3 else None,
        multicast_control=int(rng.integers(256)) if multicast else None,
        relay_index=int(rng.integers(256)) if source_route else None,
        relays=relays,
        payload=rng.integers(0, 256, int(rng.integers(0, 40)), dtype=np.uint8).tobytes(),
    )


def _random_addr(rng: np.random.Generator):
    mode = int(rng.choice([0, 2, 3]))
    if mode == 0:
        return None
    if mode == 2:
        return Short(int(rng.integers(0x10000)))
    return Extended(int(rng.integers(0, 2**63)) << 1 | int(rng.integers(2)))


def random_frame(rng: np.random.Generator, timestamp: float = 0.0) -> tuple[Mac154Frame, Optional[NwkFrame]]:
    """A random, serializable MAC frame (with FCS); DATA frames usually carry a NWK header."""
    bits = int(rng.integers(8))
    dst, src = _random_addr(rng), _random_addr(rng)
    compress = dst is not None and src is not None and bool(rng.random() < 0.7)
    dst_pan = int(rng.integers(0x10000)) if dst is not None else None
    if src is None:
        src_pan = None
    elif compress:
        src_pan = dst_pan
    else:
        src_pan = int(rng.integers(0x10000))
    nwk = random_nwk(rng) if bits == 1 and rng.random() < 0.8 else None
    payload = serialize_nwk(nwk) if nwk else rng.integers(0, 256, int(rng.integers(0, 30)), dtype=np.uint8).tobytes()
    frame = Mac154Frame(
        timestamp=timestamp,
        frame_type=FrameType.from_bits(bits),
        frame_type_bits=bits,
        seq=int(rng.integers(256)),
        security_enabled=bool(rng.random() < 0.3),
        frame_pending=bool(rng.random() < 0.3),
        ack_request=bool(rng.random() < 0.5),
        panid_compression=compress,
        frame_version=int(rng.integers(4)),
        dst_pan=dst_pan,
        src_pan=src_pan,
        dst_addr=dst,
        src_addr=src,
        payload=payload,
        fcs_present=True,
        fcs_ok=True,
    )
    frame.captured_len = len(serialize_mac154(frame))
    return frame, nwk


def load_scenario(path) -> ScenarioSpec:
    try:
        with open(path) as fp:
            return ScenarioSpec.from_json(fp.read())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
