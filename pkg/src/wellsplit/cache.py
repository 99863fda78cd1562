"""Content-addressed result records with atomic writes."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .config import SCHEMA_VERSION
from .errors import CacheCorruption

log = logging.getLogger(__name__)


def payload_digest(payload: str) -> str:
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class ResultRecord:
    command: str
    config_digest: str
    payload: str                     # CSV text or a JSON document
    payload_digest: str = ""
    upstream: dict = field(default_factory=dict)
    timestamp: float = 0.0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not self.payload_digest:
            self.payload_digest = payload_digest(self.payload)
        if not self.timestamp:
            self.timestamp = time.time()

    @property
    def key(self) -> str:
        return record_key(self.command, self.config_digest)


def record_key(command: str, config_digest: str) -> str:
    return f"{command}-{config_digest[:32]}"


def atomic_write(path: Path, data: bytes):
    """Write to a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


class ResultCache:
    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        if not os.access(self.dir, os.W_OK):
            raise PermissionError(f"cache directory {self.dir} is not writable")

    def path(self, command: str, config_digest: str) -> Path:
        return self.dir / f"{record_key(command, config_digest)}.json"

    def get(self, command: str, config_digest: str) -> ResultRecord | None:
        p = self.path(command, config_digest)
        try:
            raw = p.read_text()
        except FileNotFoundError:
            return None
        try:
            rec = ResultRecord(**json.loads(raw))
        except (json.JSONDecodeError, TypeError) as exc:
            raise CacheCorruption(f"{p.name}: unreadable record ({exc})") from None
        if rec.config_digest != config_digest or rec.command != command:
            raise CacheCorruption(f"{p.name}: stored digest does not match its key")
        if payload_digest(rec.payload) != rec.payload_digest:
            raise CacheCorruption(f"{p.name}: payload digest mismatch")
        log.info("cache hit %s", p.name)
        return rec

    def put(self, rec: ResultRecord) -> Path:
        p = self.path(rec.command, rec.config_digest)
        atomic_write(p, json.dumps(asdict(rec), sort_keys=True, indent=1).encode())
        return p

    def records(self) -> list[Path]:
        return sorted(q for q in self.dir.glob("*.json") if not q.name.startswith(".tmp-"))


def cache_gc(directory, keep_latest: int = 1) -> int:
    """Delete all but the ``keep_latest`` most recently written records; returns the count removed.

    Stale temp files from interrupted writers are left alone (their writer may
    still be running); entries that cannot be removed are logged and skipped.
    """
    d = Path(directory)
    if not d.is_dir():
        return 0
    entries = []
    for p in d.glob("*.json"):
        if p.name.startswith(".tmp-"):
            continue
        try:
            entries.append((p.stat().st_mtime_ns, p.name, p))
        except FileNotFoundError:
            continue
    entries.sort(reverse=True)
    removed = 0
    for _, _, p in entries[max(keep_latest, 0):]:
        try:
            p.unlink()
            removed += 1
        except FileNotFoundError:
            pass
        except OSError as exc:
            log.warning("could not remove %s: %s", p, exc)
    return removed
