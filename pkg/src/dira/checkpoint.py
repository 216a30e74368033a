"""Master-state checkpoints and shadow stores.

File layout (UTF-8 text)::

    DIRA-CHECKPOINT
    version 1
    sha256 <hex digest of everything after this line>
    iteration <i>
    config <canonical JSON>
    assignments <N>
    assign <j> <var> <var> ...
    automaton 1
    ...                       (canonical automaton serialization)
    end
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from pathlib import Path

from .automata import AutomatonFormatError, FiniteAbstraction
from .runtime import MasterState

MAGIC = "DIRA-CHECKPOINT"
VERSION = 1


class ChecksumError(ValueError):
    """Checkpoint or trace content is corrupted or truncated."""


def checkpoint(state: MasterState) -> bytes:
    lines = [f"iteration {state.iteration}",
             "config " + json.dumps(state.config, sort_keys=True, separators=(",", ":")),
             f"assignments {len(state.assignments)}"]
    for j, a in enumerate(state.assignments):
        lines.append(" ".join(["assign", str(j), *sorted(a)]))
    payload = "\n".join(lines) + "\n" + state.global_abstraction.serialize()
    digest = hashlib.sha256(payload.encode()).hexdigest()
    return f"{MAGIC}\nversion {VERSION}\nsha256 {digest}\n{payload}".encode()


def restore(data: bytes) -> MasterState:
    try:
        text = data.decode()
    except UnicodeDecodeError:
        raise ChecksumError("checkpoint is not valid UTF-8") from None
    head = text.split("\n", 3)
    if len(head) < 4 or head[0] != MAGIC:
        raise ChecksumError("checksum failure: missing checkpoint header")
    if head[1] != f"version {VERSION}":
        raise ChecksumError(f"checksum failure: unsupported {head[1]!r}")
    if not head[2].startswith("sha256 "):
        raise ChecksumError("checksum failure: missing digest")
    payload = head[3]
    if hashlib.sha256(payload.encode()).hexdigest() != head[2][len("sha256 "):]:
        raise ChecksumError("checksum failure: checkpoint corrupted or truncated")
    lines = payload.split("\n")
    iteration = int(lines[0].split()[1])
    config = json.loads(lines[1][len("config "):])
    n = int(lines[2].split()[1])
    assignments = []
    for j in range(n):
        parts = lines[3 + j].split()
        if parts[:2] != ["assign", str(j)]:
            raise ChecksumError(f"malformed assignment line {lines[3 + j]!r}")
        assignments.append(frozenset(parts[2:]))
    try:
        automaton = FiniteAbstraction.deserialize("\n".join(lines[3 + n:]))
    except AutomatonFormatError as exc:
        raise ChecksumError(str(exc)) from None
    return MasterState(iteration, automaton, tuple(assignments), config)


class MemoryStore:
    """An in-process shadow replica keeping the newest checkpoint it has seen."""

    def __init__(self, name: str = "memory"):
        self.name = name
        self.data: bytes | None = None
        self.iteration = -1

    def put(self, iteration: int, data: bytes):
        if iteration >= self.iteration:
            self.iteration, self.data = iteration, data

    def latest(self) -> bytes | None:
        return self.data


class DirectoryStore:
    """Shadow store backed by a directory; writes are atomic renames."""

    FILENAME = "master.ckpt"

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self.name = str(path)
        self.path.mkdir(parents=True, exist_ok=True)

    def put(self, iteration: int, data: bytes):
        fd, tmp = tempfile.mkstemp(dir=self.path, prefix=".ckpt-")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, self.path / self.FILENAME)

    def latest(self) -> bytes | None:
        p = self.path / self.FILENAME
        return p.read_bytes() if p.exists() else None


class CheckpointWriter:
    """Write-behind fan-out of checkpoints to shadow stores on a background thread."""

    def __init__(self, stores):
        self.stores = list(stores)
        self._pool = ThreadPoolExecutor(max_workers=1, thread_name_prefix="ckpt") if self.stores else None
        self._pending: list[Future] = []
        self._lock = threading.Lock()

    def submit(self, state: MasterState):
        if not self._pool:
            return
        data = checkpoint(state)
        fut = self._pool.submit(self._write, state.iteration, data)
        with self._lock:
            self._pending = [f for f in self._pending if not f.done()] + [fut]

    def _write(self, iteration: int, data: bytes):
        for s in self.stores:
            s.put(iteration, data)

    def flush(self):
        with self._lock:
            pending, self._pending = self._pending, []
        for f in pending:
            f.result()

    def close(self):
        self.flush()
        if self._pool:
            self._pool.shutdown()


def latest_state(stores) -> MasterState | None:
    """Newest restorable state across stores; corrupt replicas are skipped."""
    best = None
    for s in stores:
        data = s.latest()
        if data is None:
            continue
        try:
            st = restore(data)
        except ChecksumError:
            continue
        if best is None or st.iteration > best.iteration:
            best = st
    return best
