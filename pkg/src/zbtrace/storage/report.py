from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class MethodSize:
    size_bytes: int
    bits_per_second: float

    @property
    def size_mb(self) -> float:
        return self.size_bytes / 1e6


@dataclass
class StorageReport:
    capture_duration: float
    methods: dict[str, MethodSize] = field(default_factory=dict)
    nominal_rate: Optional[float] = None
    effective_rate: Optional[float] = None
    notes: dict = field(default_factory=dict)

    def add(self, name: str, size_bytes: int) -> MethodSize:
        m = MethodSize(size_bytes, size_bytes * 8 / self.capture_duration)
        self.methods[name] = m
        return m

    def ratio(self, method: str, reference: str = "raw") -> float:
        return self.methods[reference].size_bytes / self.methods[method].size_bytes

    def to_dict(self) -> dict:
        return {
            "capture_duration": self.capture_duration,
            "methods": {
                k: {"size_bytes": m.size_bytes, "size_mb": m.size_mb, "bits_per_second": m.bits_per_second}
                for k, m in self.methods.items()
            },
            "nominal_rate": self.nominal_rate,
            "effective_rate": self.effective_rate,
            "notes": self.notes,
        }

    def to_json(self, fp) -> None:
        json.dump(self.to_dict(), fp, indent=2, sort_keys=True)
        fp.write("\n")

    def to_csv(self, fp) -> None:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["method", "size_bytes", "size_mb", "bits_per_second"])
        for k, m in self.methods.items():
            w.writerow([k, m.size_bytes, f"{m.size_mb:.6f}", f"{m.bits_per_second:.6f}"])
