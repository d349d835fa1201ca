"""Tag database: declared tags, atomic commits, subscriptions, staleness.

Namespaces enforce the direction of flow between the levels: the plant
loop writes ``plant.*``, the control loop writes ``ctl.*``, and protocol
clients may poke only ``cmd.*``.  One writer per namespace; any number
of readers.  Commits are atomic per tag — a snapshot never mixes value,
quality and timestamp from different commits.

Subscribers receive every committed change in commit order through a
bounded queue; a subscriber that cannot keep up is marked overrun and
dropped by its session rather than ever blocking a producer.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Union

from gtcusim.tagbus.protocol import Quality, TAG_PATTERN

__all__ = [
    "TagRecord",
    "TagStore",
    "Subscriber",
    "UnknownTagError",
    "ReadOnlyError",
    "ValueTypeError",
    "CLIENT_WRITABLE_PREFIX",
    "STALE_FACTOR",
]

Value = Union[int, float, str]

CLIENT_WRITABLE_PREFIX = "cmd."
STALE_FACTOR = 5  # periods without an update before a tag goes stale


class UnknownTagError(KeyError):
    pass


class ReadOnlyError(PermissionError):
    pass


class ValueTypeError(TypeError):
    pass


@dataclass(frozen=True)
class TagRecord:
    name: str
    value: Value
    quality: Quality
    timestamp_ms: int
    units: str = ""


class Subscriber:
    """Receives committed changes; ``push`` must never block.

    ``push`` returns False when the subscriber cannot accept the record;
    the store then marks it dead and stops delivering.
    """

    def push(self, record: TagRecord) -> bool:  # pragma: no cover - interface
        raise NotImplementedError


class TagStore:
    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._tags: dict[str, TagRecord] = {}
        self._periods_ms: dict[str, int] = {}
        self._subscribers: dict[str, list[Subscriber]] = {}
        self._on_change: list[Callable[[TagRecord], None]] = []

    # declaration -----------------------------------------------------------

    def declare(
        self,
        name: str,
        initial: Value,
        units: str = "",
        quality: Quality = Quality.GOOD,
        timestamp_ms: int = 0,
        period_ms: Optional[int] = None,
    ) -> None:
        """Register a tag before anyone reads or writes it."""
        if not TAG_PATTERN.match(name):
            raise ValueError(f"tag name {name!r} violates the grammar")
        if isinstance(initial, bool):
            initial = int(initial)
        with self._lock:
            if name in self._tags:
                raise ValueError(f"tag {name!r} already declared")
            self._tags[name] = TagRecord(name, initial, quality, timestamp_ms, units)
            if period_ms is not None:
                self._periods_ms[name] = int(period_ms)

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._tags)

    def client_writable(self, name: str) -> bool:
        return name.startswith(CLIENT_WRITABLE_PREFIX)

    # change notification ----------------------------------------------------

    def add_change_listener(self, hook: Callable[[TagRecord], None]) -> None:
        """Called under the store lock for every committed change."""
        with self._lock:
            self._on_change.append(hook)

    def subscribe(self, name: str, subscriber: Subscriber) -> None:
        with self._lock:
            if name not in self._tags:
                raise UnknownTagError(name)
            self._subscribers.setdefault(name, []).append(subscriber)

    def unsubscribe(self, name: str, subscriber: Subscriber) -> None:
        with self._lock:
            subs = self._subscribers.get(name, [])
            if subscriber in subs:
                subs.remove(subscriber)

    def drop_subscriber(self, subscriber: Subscriber) -> None:
        with self._lock:
            for subs in self._subscribers.values():
                while subscriber in subs:
                    subs.remove(subscriber)

    # reads and writes -------------------------------------------------------

    def snapshot(self, name: str) -> TagRecord:
        with self._lock:
            try:
                return self._tags[name]
            except KeyError:
                raise UnknownTagError(name) from None

    def snapshot_all(self, prefix: str = "") -> dict[str, TagRecord]:
        with self._lock:
            return {n: r for n, r in self._tags.items() if n.startswith(prefix)}

    def commit(
        self,
        name: str,
        value: Value,
        quality: Quality = Quality.GOOD,
        timestamp_ms: int = 0,
    ) -> TagRecord:
        """Atomically update one tag; notifies subscribers on change.

        Timestamps never move backwards: a commit older than the last
        one is clamped to it.
        """
        if isinstance(value, bool):
            value = int(value)
        with self._lock:
            try:
                old = self._tags[name]
            except KeyError:
                raise UnknownTagError(name) from None
            ts = max(int(timestamp_ms), old.timestamp_ms)
            record = TagRecord(name, value, quality, ts, old.units)
            self._tags[name] = record
            if value != old.value or quality != old.quality:
                self._notify(record)
            return record

    def poke(self, name: str, value: Value, timestamp_ms: int) -> TagRecord:
        """A client write: only cmd.* tags, value type must match."""
        with self._lock:
            try:
                old = self._tags[name]
            except KeyError:
                raise UnknownTagError(name) from None
            if not self.client_writable(name):
                raise ReadOnlyError(name)
            if isinstance(value, bool):
                value = int(value)
            numeric_tag = isinstance(old.value, (int, float))
            if numeric_tag != isinstance(value, (int, float)):
                raise ValueTypeError(
                    f"tag {name} holds {type(old.value).__name__}, poked {type(value).__name__}"
                )
            ts = max(int(timestamp_ms), old.timestamp_ms)
            # a poke always refreshes the timestamp, even with an equal
            # value: command consumers watch for fresh pokes
            record = TagRecord(name, value, Quality.GOOD, ts, old.units)
            self._tags[name] = record
            if value != old.value or old.quality != Quality.GOOD:
                self._notify(record)
            return record

    def sweep_stale(self, now_ms: int) -> list[str]:
        """Mark tags whose producer has gone quiet for 5x their period."""
        flagged = []
        with self._lock:
            for name, period in self._periods_ms.items():
                rec = self._tags[name]
                if rec.quality is Quality.GOOD and now_ms - rec.timestamp_ms > STALE_FACTOR * period:
                    stale = replace(rec, quality=Quality.STALE)
                    self._tags[name] = stale
                    self._notify(stale)
                    flagged.append(name)
        return flagged

    def _notify(self, record: TagRecord) -> None:
        for hook in self._on_change:
            hook(record)
        dead: list[Subscriber] = []
        for sub in self._subscribers.get(record.name, ()):
            if not sub.push(record):
                dead.append(sub)
        for sub in dead:
            self.drop_subscriber(sub)
