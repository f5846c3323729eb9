"""Crash-safe persistence: per-instance append-only JSONL event log + snapshot.

The event log is the source of truth. Every append is flushed and fsync'd
before the caller acknowledges anything to a client, so a kill -9 can lose at
most an unacknowledged tail. Snapshots only speed up recovery: state is
rebuilt from the latest snapshot plus the events logged after it.
"""

from __future__ import annotations

import json
import os
import threading
from datetime import datetime, timezone
from pathlib import Path

from nirhub.errors import NirhubError

EVENTS_FILE = "events.jsonl"
SNAPSHOT_FILE = "snapshot.json"
SNAPSHOT_INTERVAL = 50  # events between automatic snapshots


class StorageError(NirhubError):
    error_code = "storage"


class EventLog:
    """Append-only event log for one instance directory.

    Events are ``{"seq": int, "ts": iso-utc, "type": str, "data": {...}}``.
    A truncated final line (interrupted append) is dropped on load and the
    file is cut back to the last complete event; any earlier undecodable
    line raises :class:`StorageError`.
    """

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.events_path = self.directory / EVENTS_FILE
        self.snapshot_path = self.directory / SNAPSHOT_FILE
        self._fh = None
        self._lock = threading.Lock()
        self._next_seq = 1

    # -- loading ---------------------------------------------------------

    def load(self) -> tuple[dict | None, list[dict]]:
        """Return (snapshot_doc_or_None, events_after_snapshot).

        The snapshot doc is ``{"last_seq": int, "state": {...}}``. Also
        repairs a torn tail and opens the log for appending.
        """
        self.directory.mkdir(parents=True, exist_ok=True)
        snapshot = self._read_snapshot()
        snap_seq = snapshot["last_seq"] if snapshot else 0

        events, valid_end = self._scan_events()
        if self.events_path.exists():
            size = self.events_path.stat().st_size
            if valid_end < size:
                with open(self.events_path, "r+b") as fh:
                    fh.truncate(valid_end)

        last_seq = events[-1]["seq"] if events else snap_seq
        self._next_seq = max(last_seq, snap_seq) + 1
        self._open_for_append()
        tail = [e for e in events if e["seq"] > snap_seq]
        return snapshot, tail

    def _read_snapshot(self) -> dict | None:
        if not self.snapshot_path.exists():
            return None
        try:
            with open(self.snapshot_path, encoding="utf-8") as fh:
                doc = json.load(fh)
            if not isinstance(doc, dict) or "last_seq" not in doc or "state" not in doc:
                return None
            return doc
        except (json.JSONDecodeError, OSError):
            # snapshot writes are atomic (tmp+rename); a bad file is stale
            # garbage we can ignore because the log has everything
            return None

    def _scan_events(self) -> tuple[list[dict], int]:
        if not self.events_path.exists():
            return [], 0
        raw = self.events_path.read_bytes()
        events: list[dict] = []
        pos = 0
        valid_end = 0
        while pos < len(raw):
            nl = raw.find(b"\n", pos)
            if nl == -1:
                break  # torn final line, never acknowledged
            line = raw[pos:nl]
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                if raw.find(b"\n", nl + 1) == -1:
                    break  # torn final line that happened to contain a newline
                raise StorageError(
                    f"corrupt event at byte {pos} of {self.events_path}"
                )
            events.append(event)
            pos = nl + 1
            valid_end = pos
        return events, valid_end

    def _open_for_append(self) -> None:
        self._fh = open(self.events_path, "ab")

    # -- writing ---------------------------------------------------------

    def append(self, etype: str, data: dict) -> dict:
        return self.append_batch([(etype, data)])[0]

    def append_batch(self, items: list[tuple[str, dict]]) -> list[dict]:
        """Write events in order with a single fsync; returns them with seq."""
        if self._fh is None:
            raise StorageError("event log is not open")
        now = datetime.now(timezone.utc).isoformat()
        with self._lock:
            events = []
            chunks = []
            for etype, data in items:
                event = {"seq": self._next_seq, "ts": now, "type": etype, "data": data}
                self._next_seq += 1
                events.append(event)
                chunks.append(json.dumps(event, separators=(",", ":")) + "\n")
            self._fh.write("".join(chunks).encode("utf-8"))
            self._fh.flush()
            os.fsync(self._fh.fileno())
        return events

    @property
    def last_seq(self) -> int:
        return self._next_seq - 1

    def write_snapshot(self, state: dict) -> None:
        """Atomically persist a state snapshot covering everything logged so far."""
        doc = {"last_seq": self.last_seq, "state": state}
        tmp = self.snapshot_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.snapshot_path)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class InstanceStore:
    """Lays out one EventLog per instance under ``<root>/instances/<slug>/``."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.instances_dir = self.root / "instances"
        self.instances_dir.mkdir(parents=True, exist_ok=True)

    def slugs(self) -> list[str]:
        return sorted(
            p.name
            for p in self.instances_dir.iterdir()
            if p.is_dir() and (p / EVENTS_FILE).exists()
        )

    def log_for(self, slug: str) -> EventLog:
        return EventLog(self.instances_dir / slug)
