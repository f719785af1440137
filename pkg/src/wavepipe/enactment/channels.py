"""Order-preserving bounded channels with blocking backpressure.

One channel per stream connection, single producer, single consumer.
When a channel is full the producer blocks; with spilling enabled the
overflow goes to a local spill file instead, preserving FIFO order
(memory portion first, then the spill tail). Cross-process channels
carry canonical binary frames over multiprocessing queues.
"""

from __future__ import annotations

import os
import queue
import struct
import threading
from collections import deque
from pathlib import Path

from ..dataflow.units import DataUnit, decode_unit, encode_unit
from ..errors import WavepipeError, error_code

POLL_INTERVAL = 0.05


@error_code("SpillExhausted")
class SpillExhausted(WavepipeError):
    pass


@error_code("Cancelled")
class CancelledRun(WavepipeError):
    pass


class EndOfStream:
    __slots__ = ()

    def __repr__(self):
        return "<end-of-stream>"


EOS = EndOfStream()

_LEN = struct.Struct("<I")


class SpillManager:
    """Creates spill files for a run and counts them for the
    no-disk-fast-path assertion."""

    def __init__(self, root: str | os.PathLike, max_bytes: int | None = None):
        self.root = Path(root)
        self._lock = threading.Lock()
        self._counter = 0
        self.files_created = 0
        self.bytes_written = 0
        self.max_bytes = max_bytes

    def new_file(self, tag: str) -> "SpillFile":
        with self._lock:
            self._counter += 1
            n = self._counter
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / f"spill-{n:05d}-{tag}.bin"
        with self._lock:
            self.files_created += 1
        return SpillFile(path, self)

    def charge(self, nbytes: int) -> None:
        with self._lock:
            self.bytes_written += nbytes
            if self.max_bytes is not None and self.bytes_written > self.max_bytes:
                raise SpillExhausted(f"spill storage exceeded {self.max_bytes} bytes")


class SpillFile:
    """Append-only frame file read back in FIFO order."""

    def __init__(self, path: Path, manager: SpillManager):
        self.path = path
        self._manager = manager
        self._write = open(path, "ab")
        self._read_offset = 0
        self.pending = 0

    def append(self, frame: bytes) -> None:
        self._manager.charge(len(frame) + _LEN.size)
        try:
            self._write.write(_LEN.pack(len(frame)))
            self._write.write(frame)
            self._write.flush()
        except OSError as exc:
            raise SpillExhausted(f"spill write failed: {exc}") from exc
        self.pending += 1

    def pop(self) -> bytes:
        with open(self.path, "rb") as fh:
            fh.seek(self._read_offset)
            header = fh.read(_LEN.size)
            (length,) = _LEN.unpack(header)
            frame = fh.read(length)
            self._read_offset = fh.tell()
        self.pending -= 1
        return frame

    def close(self) -> None:
        self._write.close()


class BoundedChannel:
    """In-memory FIFO with capacity, optional spill, and EOS."""

    def __init__(self, capacity: int, spill: SpillManager | None = None, tag: str = "chan"):
        self.capacity = capacity
        self._items: deque = deque()
        self._lock = threading.Lock()
        self._not_full = threading.Condition(self._lock)
        self._not_empty = threading.Condition(self._lock)
        self._closed = False
        self._spill_manager = spill
        self._spill_file: SpillFile | None = None
        self._tag = tag

    def put(self, unit: DataUnit, cancelled=None) -> None:
        with self._lock:
            if self._closed:
                raise RuntimeError("put on closed channel")
            spilling = self._spill_file is not None and self._spill_file.pending > 0
            if spilling or len(self._items) >= self.capacity:
                if self._spill_manager is not None:
                    if self._spill_file is None:
                        self._spill_file = self._spill_manager.new_file(self._tag)
                    self._spill_file.append(encode_unit(unit))
                    self._not_empty.notify()
                    return
                while len(self._items) >= self.capacity:
                    if cancelled is not None and cancelled():
                        raise CancelledRun("cancelled while blocked on full channel")
                    self._not_full.wait(timeout=POLL_INTERVAL)
            self._items.append(unit)
            self._not_empty.notify()

    def close(self) -> None:
        with self._lock:
            self._closed = True
            self._not_empty.notify_all()

    def get(self, cancelled=None):
        """Next unit, or EOS once closed and drained."""
        with self._lock:
            while True:
                if self._items:
                    unit = self._items.popleft()
                    self._not_full.notify()
                    return unit
                if self._spill_file is not None and self._spill_file.pending > 0:
                    return decode_unit(self._spill_file.pop())
                if self._closed:
                    return EOS
                if cancelled is not None and cancelled():
                    return EOS
                self._not_empty.wait(timeout=POLL_INTERVAL)

    def poll(self):
        """Non-blocking get; returns None when nothing is ready."""
        with self._lock:
            if self._items:
                unit = self._items.popleft()
                self._not_full.notify()
                return unit
            if self._spill_file is not None and self._spill_file.pending > 0:
                return decode_unit(self._spill_file.pop())
            if self._closed:
                return EOS
            return None


class ListChannel:
    """Unbounded pre-filled channel for the sequential backend."""

    def __init__(self, units: list[DataUnit] | None = None):
        self._items = deque(units or ())
        self._closed = units is not None

    def put(self, unit: DataUnit, cancelled=None) -> None:
        self._items.append(unit)

    def close(self) -> None:
        self._closed = True

    def get(self, cancelled=None):
        if self._items:
            return self._items.popleft()
        return EOS if self._closed else None

    def poll(self):
        return self.get()


class MpSenderChannel:
    """Producer end of a cross-process connection."""

    def __init__(self, mp_queue, spill: SpillManager | None = None, tag: str = "xchan"):
        self._queue = mp_queue
        self._spill_manager = spill
        self._spill_file: SpillFile | None = None
        self._tag = tag

    def put(self, unit: DataUnit, cancelled=None) -> None:
        frame = encode_unit(unit)
        if self._spill_file is not None and self._spill_file.pending > 0:
            self._spill_file.append(frame)
            return
        while True:
            try:
                self._queue.put(frame, timeout=POLL_INTERVAL)
                return
            except queue.Full:
                if self._spill_manager is not None:
                    if self._spill_file is None:
                        self._spill_file = self._spill_manager.new_file(self._tag)
                    self._spill_file.append(frame)
                    return
                if cancelled is not None and cancelled():
                    raise CancelledRun("cancelled while blocked on full channel")

    def close(self) -> None:
        tail = None
        if self._spill_file is not None and self._spill_file.pending > 0:
            self._spill_file.close()
            tail = (str(self._spill_file.path), self._spill_file.pending)
        self._queue.put(("eos", tail))


class MpReceiverChannel:
    """Consumer end of a cross-process connection."""

    def __init__(self, mp_queue):
        self._queue = mp_queue
        self._tail_file: SpillFile | None = None
        self._done = False

    def get(self, cancelled=None):
        if self._done:
            return EOS
        if self._tail_file is not None:
            if self._tail_file.pending > 0:
                return decode_unit(self._tail_file.pop())
            self._done = True
            return EOS
        while True:
            try:
                item = self._queue.get(timeout=POLL_INTERVAL)
            except queue.Empty:
                if cancelled is not None and cancelled():
                    return EOS
                continue
            if isinstance(item, tuple) and item and item[0] == "eos":
                tail = item[1]
                if tail is None:
                    self._done = True
                    return EOS
                path, pending = tail
                self._tail_file = SpillFile.__new__(SpillFile)
                self._tail_file.path = Path(path)
                self._tail_file._read_offset = 0
                self._tail_file.pending = pending
                return self.get(cancelled)
            return decode_unit(item)

    def poll(self):
        if self._done:
            return EOS
        if self._tail_file is not None:
            if self._tail_file.pending > 0:
                return decode_unit(self._tail_file.pop())
            self._done = True
            return EOS
        try:
            item = self._queue.get_nowait()
        except queue.Empty:
            return None
        if isinstance(item, tuple) and item and item[0] == "eos":
            tail = item[1]
            if tail is None:
                self._done = True
                return EOS
            path, pending = tail
            self._tail_file = SpillFile.__new__(SpillFile)
            self._tail_file.path = Path(path)
            self._tail_file._read_offset = 0
            self._tail_file.pending = pending
            return self.poll()
        return decode_unit(item)
