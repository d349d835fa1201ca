"""Append-only archive of tag changes for trends, replay, and analysis.

In-memory per-tag indexes back the range queries; an optional
newline-delimited log file per run carries the same records in arrival
order: ``<timestamp_ms> <tag> <value> <quality>``.
"""

from __future__ import annotations

import bisect
import threading
from pathlib import Path
from typing import NamedTuple, Optional, Union

from gtcusim.tagbus.protocol import Quality, format_value, parse_value

__all__ = ["HistorianRecord", "Historian", "load_history"]

Value = Union[int, float, str]


class HistorianRecord(NamedTuple):
    tag: str
    timestamp_ms: int
    value: Value
    quality: Quality


class Historian:
    def __init__(self, log_path: Optional[Path] = None):
        self._lock = threading.Lock()
        self._by_tag: dict[str, tuple[list[int], list[HistorianRecord]]] = {}
        self._file = None
        if log_path is not None:
            log_path = Path(log_path)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(log_path, "w", encoding="utf-8", newline="\n")

    def append(self, tag: str, timestamp_ms: int, value: Value, quality: Quality) -> None:
        """Archive one sample; per-tag timestamps must not decrease."""
        if isinstance(value, bool):
            value = int(value)
        record = HistorianRecord(tag, int(timestamp_ms), value, quality)
        with self._lock:
            stamps, records = self._by_tag.setdefault(tag, ([], []))
            if stamps and timestamp_ms < stamps[-1]:
                raise ValueError(
                    f"out-of-order append for {tag}: {timestamp_ms} after {stamps[-1]}"
                )
            stamps.append(record.timestamp_ms)
            records.append(record)
            if self._file is not None:
                self._file.write(
                    f"{record.timestamp_ms} {tag} {format_value(value)} {quality.value}\n"
                )

    def query(self, tag: str, t_from: int, t_to: int) -> list[HistorianRecord]:
        """Records with t_from <= timestamp < t_to, in append order."""
        if t_from > t_to:
            raise ValueError("t_from must be <= t_to")
        with self._lock:
            entry = self._by_tag.get(tag)
            if entry is None:
                return []
            stamps, records = entry
            lo = bisect.bisect_left(stamps, t_from)
            hi = bisect.bisect_left(stamps, t_to)
            return records[lo:hi]

    def tags(self) -> list[str]:
        with self._lock:
            return sorted(self._by_tag)

    def count(self, tag: str) -> int:
        with self._lock:
            entry = self._by_tag.get(tag)
            return len(entry[0]) if entry else 0

    def flush(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.flush()

    def close(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None

    def __enter__(self) -> "Historian":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def load_history(path: Path) -> list[HistorianRecord]:
    """Read a run's history log back into records, in file order."""
    out: list[HistorianRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(" ")
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            ts, tag, value_token, quality_token = fields
            out.append(
                HistorianRecord(
                    tag=tag,
                    timestamp_ms=int(ts),
                    value=parse_value(value_token),
                    quality=Quality(quality_token),
                )
            )
    return out
