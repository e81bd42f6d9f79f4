import socket
import threading
import time

import numpy as np
import pytest

from tensegrity_shape.estimator import Tracker, preset
from tensegrity_shape.frames import FrameFormatError, InclinationFrame, render_frame
from tensegrity_shape.ingest import BUSY_MESSAGE, IngestServer, LatestSlot, run_live, serve_ingest


def frame_line(i):
    return render_frame(InclinationFrame(i * 0.02, (0.9, 0.9, 0.9, 0.9))).encode()


def serve(server):
    """Collect server.frames() on a thread; returns (thread, items)."""
    items = []
    thread = threading.Thread(target=lambda: items.extend(server.frames()), daemon=True)
    thread.start()
    return thread, items


def send(address, payload, chunk=None):
    with socket.create_connection(address) as conn:
        if chunk is None:
            conn.sendall(payload)
        else:
            for k in range(0, len(payload), chunk):
                conn.sendall(payload[k : k + chunk])


def test_hundred_frames():
    with IngestServer("127.0.0.1", 0, expected_arity=4, accept_timeout=5) as server:
        thread, items = serve(server)
        send(server.address, b"".join(frame_line(i) for i in range(100)), chunk=37)
        thread.join(5)
    assert len(items) == 100
    assert [f.timestamp for f in items] == [i * 0.02 for i in range(100)]
    assert server.stats.accepted == 100 and server.stats.rejected == 0


def test_malformed_line_rejected():
    lines = [frame_line(i) for i in range(100)]
    lines[40] = b"0.8 0.9 oops 0.9 0.9\n"
    with IngestServer("127.0.0.1", 0, expected_arity=4, accept_timeout=5) as server:
        thread, items = serve(server)
        send(server.address, b"".join(lines))
        thread.join(5)
    frames = [x for x in items if isinstance(x, InclinationFrame)]
    errors = [x for x in items if isinstance(x, FrameFormatError)]
    assert len(frames) == 99 and len(errors) == 1
    assert errors[0].line_number == 41
    assert server.stats.rejected == 1


def test_second_client_gets_busy():
    with IngestServer("127.0.0.1", 0, expected_arity=4, accept_timeout=5) as server:
        thread, items = serve(server)
        first = socket.create_connection(server.address)
        first.sendall(frame_line(0))
        time.sleep(0.2)
        with socket.create_connection(server.address) as second:
            second.settimeout(2)
            assert second.recv(100) == BUSY_MESSAGE
        first.sendall(frame_line(1))
        first.close()
        thread.join(5)
    assert len(items) == 2
    assert server.stats.refused_clients == 1


def test_partial_line_discarded():
    with IngestServer("127.0.0.1", 0, expected_arity=4, accept_timeout=5) as server:
        thread, items = serve(server)
        send(server.address, frame_line(0) + b"0.02 0.9 0.9")
        thread.join(5)
    assert len(items) == 1
    assert server.stats.partial_discarded == 1


def test_overlong_line_rejected():
    with IngestServer("127.0.0.1", 0, expected_arity=4, accept_timeout=5) as server:
        thread, items = serve(server)
        send(server.address, b"1" * 200_000 + b"\n" + frame_line(1))
        thread.join(5)
    assert isinstance(items[0], FrameFormatError)
    assert isinstance(items[1], InclinationFrame) and items[1].timestamp == 0.02
    assert len(items) == 2


def test_accept_timeout_and_endpoint():
    server = serve_ingest("127.0.0.1:0", 4, accept_timeout=0.2)
    start = time.perf_counter()
    assert list(server.frames()) == []
    assert time.perf_counter() - start < 2
    server.close()
    with pytest.raises(ValueError):
        serve_ingest("nowhere")


def test_latest_slot_overwrites():
    slot = LatestSlot()
    for i in range(5):
        slot.put(i)
    assert slot.take() == 4
    assert slot.skipped == 4
    slot.close()
    assert slot.take() is None


def test_latest_slot_no_torn_frames():
    slot = LatestSlot()
    n = 20_000

    def writer():
        for i in range(n):
            slot.put(InclinationFrame(i, (i * 1e-5,) * 4))
        slot.close()

    thread = threading.Thread(target=writer)
    thread.start()
    seen = []
    while (item := slot.take()) is not None:
        seen.append(item)
    thread.join()
    for f in seen:
        assert all(p == f.timestamp * 1e-5 for p in f.phis)
    stamps = [f.timestamp for f in seen]
    assert stamps == sorted(stamps) and len(set(stamps)) == len(stamps)
    assert stamps[-1] == n - 1
    assert len(seen) + slot.skipped == n


def test_run_live_counts(taut_prism, equilibrium):
    phis = tuple(equilibrium.phis)
    source = [InclinationFrame(i * 0.02, phis) for i in range(30)]
    source.insert(10, FrameFormatError("bad", 11))
    tracker = Tracker(taut_prism, preset("fast"), init=equilibrium)
    out = []
    slot = run_live(iter(source), tracker, out.append)
    assert tracker.rejected == 1
    assert len(out) + tracker.skipped == 30
    assert slot.written == 30
    stamps = [e.timestamp for e in out]
    assert stamps == sorted(stamps) and stamps[-1] == pytest.approx(29 * 0.02)


def test_run_live_reraises_source_failure(taut_prism, equilibrium):
    def broken():
        yield InclinationFrame(0.0, tuple(equilibrium.phis))
        raise OSError("link down")

    tracker = Tracker(taut_prism, preset("fast"), init=equilibrium)
    with pytest.raises(OSError):
        run_live(broken(), tracker, lambda e: None)
