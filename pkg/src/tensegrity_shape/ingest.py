"""Frame ingestion over TCP and the latest-value hand-off to the solver.

The server speaks newline-delimited inclination frames over a byte stream
and serves one client per session.  A connection attempt while a client is
active is answered with :data:`BUSY_MESSAGE` and closed.  When the client
disconnects, any unterminated trailing line is discarded and the session
ends.

:class:`LatestSlot` joins an ingestion thread to a solver thread.  The
writer overwrites a single slot; the reader always receives the newest
complete frame.  Frames are immutable objects exchanged by reference under
a lock, so a reader can never observe a half-written frame.
"""

from __future__ import annotations

import logging
import selectors
import socket
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from .estimator import ShapeEstimate, Tracker
from .frames import FrameFormatError, InclinationFrame, parse_frame

__all__ = [
    "BUSY_MESSAGE",
    "IngestStats",
    "IngestServer",
    "serve_ingest",
    "LatestSlot",
    "run_live",
]

log = logging.getLogger(__name__)

BUSY_MESSAGE = b"BUSY single-session\n"
_CHUNK = 4096
_MAX_LINE = 1 << 16


@dataclass
class IngestStats:
    accepted: int = 0
    rejected: int = 0
    refused_clients: int = 0
    partial_discarded: int = 0
    errors: list = field(default_factory=list)


class IngestServer:
    """Single-session line server.

    Binding happens in the constructor (``port=0`` picks a free port, see
    :attr:`address`), so bind failures surface immediately as ``OSError``.
    """

    def __init__(self, host: str, port: int, expected_arity: int | None = None, accept_timeout: float | None = None):
        self.expected_arity = expected_arity
        self.accept_timeout = accept_timeout
        self.stats = IngestStats()
        self._stop = threading.Event()
        self._sock = socket.create_server((host, port))
        self._sock.setblocking(False)

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()[:2]

    def close(self):
        self._stop.set()
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _refuse(self, conn: socket.socket):
        self.stats.refused_clients += 1
        try:
            conn.sendall(BUSY_MESSAGE)
        except OSError:
            pass
        conn.close()

    def _parse(self, line_number: int, data: bytes) -> InclinationFrame | FrameFormatError:
        try:
            frame = parse_frame(data.decode("ascii"), self.expected_arity, line_number)
        except UnicodeDecodeError:
            return self._rejected(FrameFormatError("non-ASCII bytes", line_number))
        except FrameFormatError as err:
            return self._rejected(err)
        self.stats.accepted += 1
        return frame

    def _rejected(self, err: FrameFormatError) -> FrameFormatError:
        self.stats.rejected += 1
        self.stats.errors.append(err)
        return err

    def frames(self) -> Iterator[InclinationFrame | FrameFormatError]:
        """Serve one session; yield each parsed frame or the error for a bad line.

        Blank lines are ignored.  Returns when the client disconnects, when
        :meth:`close` is called, or when no client connects within
        ``accept_timeout`` seconds.
        """
        sel = selectors.DefaultSelector()
        sel.register(self._sock, selectors.EVENT_READ, "listen")
        client = None
        buffer = b""
        line_number = 0
        waited = 0.0
        overlong = False
        try:
            while not self._stop.is_set():
                events = sel.select(timeout=0.05)
                if not events and client is None:
                    waited += 0.05
                    if self.accept_timeout is not None and waited >= self.accept_timeout:
                        return
                for key, _ in events:
                    if key.data == "listen":
                        conn, addr = self._sock.accept()
                        if client is not None:
                            log.info("refusing second client %s", addr)
                            self._refuse(conn)
                            continue
                        log.info("client connected from %s", addr)
                        conn.setblocking(False)
                        client = conn
                        sel.register(client, selectors.EVENT_READ, "client")
                        continue
                    try:
                        chunk = client.recv(_CHUNK)
                    except (BlockingIOError, InterruptedError):
                        continue
                    except ConnectionError:
                        chunk = b""
                    if not chunk:
                        if buffer.strip():
                            self.stats.partial_discarded += 1
                            log.info("discarding unterminated line at disconnect")
                        return
                    if overlong:
                        _, newline, chunk = chunk.partition(b"\n")
                        if not newline:
                            continue
                        overlong = False
                    buffer += chunk
                    *complete, buffer = buffer.split(b"\n")
                    for raw in complete:
                        line_number += 1
                        if raw.strip():
                            yield self._parse(line_number, raw)
                    if len(buffer) > _MAX_LINE:
                        line_number += 1
                        buffer = b""
                        overlong = True  # drop the rest of this line
                        yield self._rejected(FrameFormatError("line too long", line_number))
        finally:
            sel.close()
            if client is not None:
                client.close()


def serve_ingest(endpoint: str, expected_arity: int | None = None, accept_timeout: float | None = None) -> IngestServer:
    """Bind ``host:port`` and return the server; iterate ``server.frames()``."""
    host, sep, port = endpoint.rpartition(":")
    if not sep:
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return IngestServer(host or "127.0.0.1", int(port), expected_arity, accept_timeout)


class LatestSlot:
    """One-frame mailbox with overwrite semantics.

    ``put`` never blocks on the reader.  Every frame overwritten before it
    was taken counts as skipped.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._item = None
        self._closed = False
        self.skipped = 0
        self.written = 0

    def put(self, item):
        with self._cond:
            if self._item is not None:
                self.skipped += 1
            self._item = item
            self.written += 1
            self._cond.notify()

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def take(self, timeout: float | None = None):
        """Newest item, waiting if the slot is empty; ``None`` once closed and drained."""
        with self._cond:
            if not self._cond.wait_for(lambda: self._item is not None or self._closed, timeout):
                return None
            item, self._item = self._item, None
            return item


def run_live(
    source: Iterable[InclinationFrame | Exception],
    tracker: Tracker,
    emit: Callable[[ShapeEstimate], None],
    slot: LatestSlot | None = None,
) -> LatestSlot:
    """Ingest ``source`` on a background thread and solve the newest frame on this one.

    Errors from the source are counted as rejections on ``tracker`` once
    the source is exhausted.  Frames
    overwritten while the solver was busy are counted in
    ``tracker.skipped``.  Returns the slot (for its counters).
    """
    slot = LatestSlot() if slot is None else slot
    failures: list[BaseException] = []
    source_errors: list[Exception] = []  # owned by the ingest thread until join

    def ingest():
        try:
            for item in source:
                if isinstance(item, Exception):
                    source_errors.append(item)
                else:
                    slot.put(item)
        except BaseException as exc:  # surfaced to the caller below
            failures.append(exc)
        finally:
            slot.close()

    worker = threading.Thread(target=ingest, name="ingest", daemon=True)
    worker.start()
    while True:
        frame = slot.take()
        if frame is None:
            break
        est = tracker.process(frame)
        if est is not None:
            emit(est)
    worker.join()
    for err in source_errors:
        tracker.reject(err)
    tracker.skipped += slot.skipped
    if failures:
        raise failures[0]
    return slot
