"""Fixed-grid windowing and per-window statistical features."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import WindowError
from .labeling import Direction, PacketRecord

DIRECTIONS = ("all", "up", "down")
SIGNALS = ("len", "iat")
STATS = ("mean", "std", "min", "max", "median", "skew", "kurt", "mad")

FEATURE_NAMES: tuple[str, ...] = tuple(
    f"{d}_{s}_{st}" for d in DIRECTIONS for s in SIGNALS for st in STATS
) + tuple(f"{d}_count" for d in DIRECTIONS)
N_FEATURES = len(FEATURE_NAMES)  # 51

# Spread below this fraction of max|x| is summation noise and is treated as zero,
# otherwise skewness/kurtosis of near-constant inputs are arbitrary.
ZERO_SPREAD_RTOL = 1e-9

META_COLUMNS = ("device_label", "category", "topology", "t_start", "window_s")

# Recorded alongside feature files so a reader knows how the numbers were made.
FEATURE_CONVENTIONS = {
    "moments": "population",
    "kurtosis": "excess",
    "undefined_stats": "zero",
    "iat_scope": "within-window",
    "window_grid": "anchored at capture start",
    "length": "captured MAC frame length incl. FCS when present",
}


@dataclass
class StatSummary:
    mean: float = 0.0
    std: float = 0.0
    min: float = 0.0
    max: float = 0.0
    median: float = 0.0
    skewness: float = 0.0
    kurtosis: float = 0.0
    mad: float = 0.0
    count: int = 0

    def as_tuple(self) -> tuple[float, ...]:
        return (self.mean, self.std, self.min, self.max, self.median, self.skewness, self.kurtosis, self.mad)


def stat_summary(values: Sequence[float]) -> StatSummary:
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if n == 0:
        return StatSummary()
    s = StatSummary(mean=float(x.mean()), min=float(x.min()), max=float(x.max()),
                    median=float(np.median(x)), count=n)
    scale = float(np.abs(x).max())
    if scale == 0.0:
        return s
    # moments of x / max|x|: same skew/kurtosis, no under/overflow in the powers
    d = x / scale
    d -= d.mean()
    m2 = float(np.mean(d * d))
    if math.sqrt(m2) > ZERO_SPREAD_RTOL:
        s.std = math.sqrt(m2) * scale
        s.skewness = float(np.mean(d ** 3)) / m2 ** 1.5
        s.kurtosis = float(np.mean(d ** 4)) / (m2 * m2) - 3.0
        s.mad = float(np.mean(np.abs(d))) * scale
    return s


@dataclass
class Window:
    device_label: str
    category: str
    topology: str
    t_start: float
    duration: float
    # (timestamp, length, direction) sorted by timestamp
    packets: list[tuple[float, int, Direction]] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return len(self.packets) >= 2


@dataclass
class FeatureVector:
    values: np.ndarray
    device_label: str
    category: str
    topology: str
    t_start: float
    window_s: float

    def __post_init__(self):
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} values, got {self.values.shape}")


def _check_window(T: float) -> None:
    if not T > 0 or not math.isfinite(T):
        raise WindowError(f"window length must be positive, got {T}")


def segment_windows(records: Sequence[PacketRecord], T: float, t0: float, min_packets: int = 2) -> list[Window]:
    """Cut one device's records into grid windows ``[t0 + kT, t0 + (k+1)T)``.

    Windows holding fewer than ``min_packets`` records are dropped.
    """
    _check_window(T)
    buckets: dict[int, list[PacketRecord]] = defaultdict(list)
    for r in records:
        buckets[math.floor((r.timestamp - t0) / T)].append(r)
    windows = []
    for k in sorted(buckets):
        recs = buckets[k]
        if len(recs) < min_packets:
            continue
        first = recs[0]
        pkts = sorted((r.timestamp, r.length, r.direction) for r in recs)
        windows.append(Window(first.device_label, first.category, first.topology, t0 + k * T, T, pkts))
    return windows


def extract_features(window: Window) -> FeatureVector:
    if not window.valid:
        raise WindowError(f"window at {window.t_start} has {len(window.packets)} packets; need >= 2")
    pkts = sorted(window.packets)
    subsets = {
        "all": pkts,
        "up": [p for p in pkts if p[2] is Direction.UPLINK],
        "down": [p for p in pkts if p[2] is Direction.DOWNLINK],
    }
    values = []
    for d in DIRECTIONS:
        sub = subsets[d]
        times = np.array([p[0] for p in sub], dtype=np.float64)
        # empty subsets give all zeros; a single packet has length stats but no IATs
        values.extend(stat_summary([p[1] for p in sub]).as_tuple())
        values.extend(stat_summary(np.diff(times)).as_tuple())
    values.extend(float(len(subsets[d])) for d in DIRECTIONS)
    return FeatureVector(np.array(values, dtype=np.float64), window.device_label, window.category,
                         window.topology, window.t_start, window.duration)


def group_by_device(records: Iterable[PacketRecord]) -> dict[tuple[str, str], list[PacketRecord]]:
    groups: dict[tuple[str, str], list[PacketRecord]] = defaultdict(list)
    for r in records:
        groups[(r.topology, r.device_label)].append(r)
    for recs in groups.values():
        recs.sort(key=lambda r: r.timestamp)
    return dict(sorted(groups.items()))


def build_features(records: Sequence[PacketRecord], T: float, t0: Optional[dict[str, float] | float] = None) -> list[FeatureVector]:
    """Window and featurize all devices of one or more topologies.

    ``t0`` is the capture start, either one value or a per-topology mapping;
    it defaults to the earliest record of each topology.
    """
    _check_window(T)
    starts: dict[str, float] = {}
    for r in records:
        starts[r.topology] = min(starts.get(r.topology, r.timestamp), r.timestamp)
    if isinstance(t0, dict):
        starts.update(t0)
    elif t0 is not None:
        starts = {k: float(t0) for k in starts}
    out = []
    for (topo, _label), recs in group_by_device(records).items():
        for w in segment_windows(recs, T, starts[topo]):
            out.append(extract_features(w))
    out.sort(key=lambda v: (v.topology, v.device_label, v.t_start))
    return out


def sweep_windows(records: Sequence[PacketRecord], T_list: Iterable[float], t0=None) -> dict[float, list[FeatureVector]]:
    return {T: build_features(records, T, t0) for T in T_list}


def window_counts(vectors: Iterable[FeatureVector]) -> dict[str, int]:
    counts: dict[str, int] = defaultdict(int)
    for v in vectors:
        counts[v.device_label] += 1
    return dict(counts)


def exclude_sparse(vectors: Sequence[FeatureVector], min_windows: int = 10, key=lambda v: v.device_label) -> tuple[list[FeatureVector], list[str]]:
    """Drop devices with fewer than ``min_windows`` valid windows (pooled over topologies)."""
    counts: dict[str, int] = defaultdict(int)
    for v in vectors:
        counts[key(v)] += 1
    dropped = sorted(k for k, c in counts.items() if c < min_windows)
    kept = [v for v in vectors if counts[key(v)] >= min_windows]
    return kept, dropped


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, N_FEATURES))
    return np.vstack([v.values for v in vectors])


def write_features_csv(vectors: Iterable[FeatureVector], fp) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(list(META_COLUMNS) + list(FEATURE_NAMES))
    for v in vectors:
        w.writerow([v.device_label, v.category, v.topology, repr(float(v.t_start)), repr(float(v.window_s))]
                   + [repr(float(x)) for x in v.values])


def read_features_csv(fp) -> list[FeatureVector]:
    reader = csv.reader(fp)
    header = next(reader, None)
    expected = list(META_COLUMNS) + list(FEATURE_NAMES)
    if header != expected:
        raise WindowError("features CSV header does not match the 51-feature contract")
    out = []
    for row in reader:
        out.append(FeatureVector(np.array([float(x) for x in row[5:]]), row[0], row[1], row[2],
                                 float(row[3]), float(row[4])))
    return out
