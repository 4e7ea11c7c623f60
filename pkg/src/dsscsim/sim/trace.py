"""Time-indexed simulation record with CSV/JSON persistence."""

from __future__ import annotations

import csv
import json
from array import array

import numpy as np


class TraceRecorder:
    """Column-wise append buffer backed by ``array('d')``."""

    def __init__(self, names):
        self.names = list(names)
        self._cols = [array("d") for _ in self.names]

    def append(self, row):
        for c, v in zip(self._cols, row):
            c.append(v)

    def finish(self) -> dict:
        return {n: np.frombuffer(c, dtype=float).copy() for n, c in zip(self.names, self._cols)}


class SimTrace:
    """Columns on a uniform grid plus an event log and run metadata.

    Column names are ``t`` and ``<channel>.<signal>`` (for example ``x.sigma``),
    plus ``uav.<signal>`` for the full quadrotor model.
    """

    def __init__(self, columns: dict, meta: dict | None = None, events: dict | None = None):
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise ValueError("trace columns have different lengths")
        self.data = columns
        self.meta = meta or {}
        self.events = events or {}

    def __getitem__(self, key) -> np.ndarray:
        return self.data[key]

    def __contains__(self, key):
        return key in self.data

    def __len__(self):
        return len(self.data["t"])

    @property
    def columns(self) -> list[str]:
        return list(self.data)

    @property
    def t(self) -> np.ndarray:
        return self.data["t"]

    @property
    def channels(self) -> list[str]:
        return list(self.meta.get("channels", []))

    def window(self, t0: float, t1: float) -> np.ndarray:
        t = self.t
        return (t >= t0 - 1e-12) & (t <= t1 + 1e-12)

    def to_csv(self, path, float_format: str = "%.10g"):
        names = self.columns
        cols = [self.data[n] for n in names]
        with open(path, "w", newline="") as fh:
            fh.write(f"# config_hash={self.meta.get('config_hash', '')}\n")
            w = csv.writer(fh)
            w.writerow(names)
            for i in range(len(self)):
                w.writerow([float_format % c[i] for c in cols])

    @classmethod
    def from_csv(cls, path) -> "SimTrace":
        with open(path) as fh:
            first = fh.readline()
            meta = {}
            if first.startswith("# config_hash="):
                meta["config_hash"] = first.strip().split("=", 1)[1]
            else:
                fh.seek(0)
            r = csv.reader(fh)
            names = next(r)
            rows = np.array([[float(v) for v in row] for row in r])
        cols = {n: rows[:, i] for i, n in enumerate(names)} if rows.size else {n: np.zeros(0) for n in names}
        return cls(cols, meta)

    def meta_json(self) -> str:
        return json.dumps({"meta": self.meta, "events": self.events}, sort_keys=True, indent=2, default=float)

    def identical_to(self, other: "SimTrace") -> bool:
        if self.columns != other.columns:
            return False
        return all(np.array_equal(self.data[k], other.data[k], equal_nan=True) for k in self.columns)
