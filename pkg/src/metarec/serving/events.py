"""Append-only impression/click event log and CTR accounting."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from metarec.metrics import chi2_2x2

ARMS = ("meta", "random")


@dataclass
class ImpressionRecord:
    request_id: str
    timestamp: float
    arm: str
    algorithm: str
    used_algorithm: str
    fallback: bool
    delivered: int
    title: str = ""
    doc_id: str | None = None
    items: list[str] = field(default_factory=list)
    clicks: set[int] = field(default_factory=set)

    def impression_event(self) -> dict:
        return {
            "type": "impression",
            "request_id": self.request_id,
            "ts": self.timestamp,
            "arm": self.arm,
            "algorithm": self.algorithm,
            "used_algorithm": self.used_algorithm,
            "fallback": self.fallback,
            "delivered": self.delivered,
            "title": self.title,
            "doc_id": self.doc_id,
            "items": self.items,
        }

    @classmethod
    def from_event(cls, ev: dict) -> "ImpressionRecord":
        return cls(ev["request_id"], ev["ts"], ev["arm"], ev["algorithm"],
                   ev.get("used_algorithm", ev["algorithm"]), ev["fallback"], ev["delivered"],
                   ev.get("title", ""), ev.get("doc_id"), list(ev.get("items", [])))


class ClickRejected(ValueError):
    pass


class EventLog:
    """Single-writer NDJSON event stream plus its in-memory replay.

    Writes are serialised by a lock and flushed per event. Passing ``path=None``
    keeps the log in memory only.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self.records: dict[str, ImpressionRecord] = {}
        self.order: list[str] = []
        self.click_events = 0
        self.rejects = 0
        self._fh = None
        if self.path is not None:
            if self.path.exists():
                for ev in read_events(self.path):
                    self._apply(ev)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("a", encoding="utf-8")

    def _apply(self, ev: dict) -> None:
        if ev["type"] == "impression":
            rec = ImpressionRecord.from_event(ev)
            self.records[rec.request_id] = rec
            self.order.append(rec.request_id)
        elif ev["type"] == "click":
            rec = self.records.get(ev["request_id"])
            if rec is not None and 1 <= ev["position"] <= rec.delivered:
                self.click_events += 1
                rec.clicks.add(ev["position"])

    def _write(self, ev: dict) -> None:
        if self._fh is not None:
            self._fh.write(json.dumps(ev, ensure_ascii=False, separators=(",", ":")) + "\n")
            self._fh.flush()

    def __len__(self) -> int:
        return len(self.order)

    def append_impression(self, rec: ImpressionRecord) -> None:
        with self._lock:
            if rec.request_id in self.records:
                raise ValueError(f"duplicate request_id {rec.request_id!r}")
            self._write(rec.impression_event())
            self.records[rec.request_id] = rec
            self.order.append(rec.request_id)

    def record_click(self, request_id: str, position: int) -> bool:
        """Add a click; returns False when the position was already clicked."""
        with self._lock:
            rec = self.records.get(request_id)
            if rec is None:
                self.rejects += 1
                raise ClickRejected(f"unknown request_id {request_id!r}")
            if not isinstance(position, int) or not 1 <= position <= rec.delivered:
                self.rejects += 1
                raise ClickRejected(f"position {position!r} outside 1..{rec.delivered}")
            if position in rec.clicks:
                return False
            self._write({"type": "click", "request_id": request_id, "position": position})
            self.click_events += 1
            rec.clicks.add(position)
            return True

    def snapshot(self) -> list[ImpressionRecord]:
        with self._lock:
            return [self.records[r] for r in self.order]

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_events(path):
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def replay(path) -> list[ImpressionRecord]:
    log = EventLog()
    for ev in read_events(path):
        log._apply(ev)
    return log.snapshot()


@dataclass
class Cell:
    delivered: int = 0
    clicks: int = 0

    @property
    def ctr(self) -> float | None:
        return self.clicks / self.delivered if self.delivered else None


@dataclass
class CtrReport:
    cells: dict[tuple[str, str, bool], Cell]
    arms: dict[str, Cell]
    chi2: float | None
    p_value: float | None
    test_skipped: bool
    requests: int

    @property
    def total(self) -> Cell:
        return Cell(sum(c.delivered for c in self.arms.values()),
                    sum(c.clicks for c in self.arms.values()))

    def uplift(self) -> float | None:
        m, r = self.arms["meta"].ctr, self.arms["random"].ctr
        if m is None or not r:
            return None
        return m / r - 1.0

    def to_dict(self) -> dict:
        return {
            "requests": self.requests,
            "cells": [
                {"arm": arm, "algorithm": alg, "fallback": fb, "delivered": c.delivered,
                 "clicks": c.clicks, "ctr": c.ctr}
                for (arm, alg, fb), c in sorted(self.cells.items())
            ],
            "arms": {a: {"delivered": c.delivered, "clicks": c.clicks, "ctr": c.ctr}
                     for a, c in self.arms.items()},
            "total": {"delivered": self.total.delivered, "clicks": self.total.clicks,
                      "ctr": self.total.ctr},
            "chi_squared": self.chi2,
            "p_value": self.p_value,
            "test_skipped": self.test_skipped,
            "relative_uplift": self.uplift(),
        }

    def to_csv_rows(self) -> list[list]:
        rows = [["arm", "algorithm", "fallback", "delivered", "clicks", "ctr"]]
        for (arm, alg, fb), c in sorted(self.cells.items()):
            rows.append([arm, alg, str(fb).lower(), c.delivered, c.clicks,
                         "" if c.ctr is None else repr(c.ctr)])
        for arm, c in self.arms.items():
            rows.append([arm, "ALL", "", c.delivered, c.clicks, "" if c.ctr is None else repr(c.ctr)])
        return rows


def _parse_since(since) -> float | None:
    if since is None or since == "":
        return None
    if isinstance(since, (int, float)):
        return float(since)
    try:
        return float(since)
    except ValueError:
        dt = datetime.fromisoformat(since)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.timestamp()


def ctr_report(records, since=None) -> CtrReport:
    """Per-item CTR by (arm, algorithm, fallback) and a 2x2 arm test over
    clicked vs. not-clicked recommendations."""
    if isinstance(records, EventLog):
        records = records.snapshot()
    elif isinstance(records, (str, Path)):
        records = replay(records)
    cutoff = _parse_since(since)
    cells: dict[tuple[str, str, bool], Cell] = {}
    arms = {a: Cell() for a in ARMS}
    n = 0
    for rec in records:
        if cutoff is not None and rec.timestamp < cutoff:
            continue
        n += 1
        cell = cells.setdefault((rec.arm, rec.algorithm, bool(rec.fallback)), Cell())
        cell.delivered += rec.delivered
        cell.clicks += len(rec.clicks)
        arm = arms.setdefault(rec.arm, Cell())
        arm.delivered += rec.delivered
        arm.clicks += len(rec.clicks)
    m, r = arms["meta"], arms["random"]
    if m.delivered == 0 or r.delivered == 0:
        return CtrReport(cells, arms, None, None, True, n)
    stat, p = chi2_2x2(m.clicks, m.delivered - m.clicks, r.clicks, r.delivered - r.clicks)
    return CtrReport(cells, arms, stat, p, False, n)
