"""Message exchange between the master and the k workers.

Endpoints ``0..k-1`` are workers, endpoint ``k`` is the master.  A stream is
identified by (query id, channel, sender, receiver); each stream carries any
number of batches followed by exactly one end-of-stream marker, and is
delivered in send order.  Different streams may interleave arbitrarily.

Three implementations share the contract:

* :class:`InProcTransport`  - thread-safe queues inside one process
* :class:`DelayTransport`   - in-process, with seeded random per-message delays
  that reorder different streams but never one stream
* :class:`SocketEndpoint`   - one per process, full mesh of stream sockets

Socket frames are ``[u32 len][u8 kind][u64 qid][u32 channel][u16 sender][payload]``
where ``len`` counts every byte after itself.  Tuple payloads are
``[u16 width][u32 nrows][nrows*width u64]``; frontier payloads append
``[u32 npairs][npairs*2 u64]`` of (source, entry) pairs.  Control and error
payloads are pickled.  Each connection starts with a one-byte version
handshake.
"""

from __future__ import annotations

import heapq
import itertools
import pickle
import queue
import socket
import struct
import threading
import time
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import IntEnum
from typing import Any

import numpy as np

WIRE_VERSION = 1
CONTROL_CHANNEL = 0xFFFFFFFF


class MessageKind(IntEnum):
    TUPLES = 1
    FRONTIER = 2
    EOS = 3
    CONTROL = 4
    ERROR = 5


class QueryAborted(RuntimeError):
    pass


class TransportError(RuntimeError):
    pass


@dataclass
class Message:
    kind: MessageKind
    qid: int
    channel: int
    sender: int
    payload: Any = None


# --------------------------------------------------------------------------
# frame codec

_HEAD = struct.Struct("<BQIH")


def _rows_bytes(rows: np.ndarray) -> bytes:
    rows = np.ascontiguousarray(np.asarray(rows, dtype="<u8"))
    n, w = rows.shape
    return struct.pack("<HI", w, n) + rows.tobytes()


def _rows_from(buf: memoryview, off: int) -> tuple[np.ndarray, int]:
    w, n = struct.unpack_from("<HI", buf, off)
    off += 6
    size = 8 * n * w
    arr = np.frombuffer(buf[off:off + size], dtype="<u8").astype(np.int64).reshape(n, w)
    return arr, off + size


def encode_frame(msg: Message) -> bytes:
    if msg.kind is MessageKind.TUPLES:
        payload = _rows_bytes(msg.payload)
    elif msg.kind is MessageKind.FRONTIER:
        rows, pairs = msg.payload
        pairs = np.ascontiguousarray(np.asarray(pairs, dtype="<u8").reshape(-1, 2))
        payload = _rows_bytes(rows) + struct.pack("<I", len(pairs)) + pairs.tobytes()
    elif msg.kind is MessageKind.EOS:
        payload = b""
    else:
        payload = pickle.dumps(msg.payload, protocol=pickle.HIGHEST_PROTOCOL)
    body = _HEAD.pack(int(msg.kind), msg.qid, msg.channel, msg.sender) + payload
    return struct.pack("<I", len(body)) + body


def decode_frame(body: bytes) -> Message:
    buf = memoryview(body)
    kind, qid, channel, sender = _HEAD.unpack_from(buf, 0)
    kind = MessageKind(kind)
    off = _HEAD.size
    if kind is MessageKind.TUPLES:
        payload, _ = _rows_from(buf, off)
    elif kind is MessageKind.FRONTIER:
        rows, off = _rows_from(buf, off)
        (npairs,) = struct.unpack_from("<I", buf, off)
        off += 4
        pairs = np.frombuffer(buf[off:off + 16 * npairs], dtype="<u8").astype(np.int64).reshape(npairs, 2)
        payload = (rows, pairs)
    elif kind is MessageKind.EOS:
        payload = None
    else:
        payload = pickle.loads(bytes(buf[off:]))
    return Message(kind, qid, channel, sender, payload)


# --------------------------------------------------------------------------
# mailbox

class Mailbox:
    """Demultiplexes incoming messages by (qid, channel); collects until every sender closed."""

    def __init__(self) -> None:
        self._cv = threading.Condition()
        self._msgs: dict[tuple[int, int], list[Message]] = defaultdict(list)
        self._eos: dict[tuple[int, int], set[int]] = defaultdict(set)
        self._aborted: dict[int, str] = {}
        self.control: queue.Queue[Message] = queue.Queue()

    def deliver(self, msg: Message) -> None:
        if msg.kind is MessageKind.CONTROL and msg.channel == CONTROL_CHANNEL:
            self.control.put(msg)
            return
        with self._cv:
            if msg.kind is MessageKind.ERROR:
                self._aborted.setdefault(msg.qid, str(msg.payload))
            elif msg.kind is MessageKind.EOS:
                self._eos[(msg.qid, msg.channel)].add(msg.sender)
            else:
                self._msgs[(msg.qid, msg.channel)].append(msg)
            self._cv.notify_all()

    def abort(self, qid: int, reason: str) -> None:
        with self._cv:
            self._aborted.setdefault(qid, reason)
            self._cv.notify_all()

    def aborted(self, qid: int) -> str | None:
        with self._cv:
            return self._aborted.get(qid)

    def collect(self, qid: int, channel: int, n_senders: int, timeout: float | None = None) -> list[Message]:
        key = (qid, channel)
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cv:
            while len(self._eos[key]) < n_senders:
                if qid in self._aborted:
                    raise QueryAborted(self._aborted[qid])
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    raise TransportError(f"timeout waiting on channel {channel:#x} of query {qid}")
                self._cv.wait(remaining if remaining is not None else 0.5)
            self._eos.pop(key, None)
            return self._msgs.pop(key, [])

    def forget(self, qid: int) -> None:
        with self._cv:
            for key in [k for k in self._msgs if k[0] == qid]:
                del self._msgs[key]
            for key in [k for k in self._eos if k[0] == qid]:
                del self._eos[key]


class _Audit:
    """End-of-stream counts per (qid, channel, sender, receiver)."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.eos: dict[tuple[int, int], Counter] = defaultdict(Counter)
        self.messages: Counter = Counter()

    def record(self, dest: int, msg: Message) -> None:
        with self._lock:
            self.messages[msg.qid] += 1
            if msg.kind is MessageKind.EOS:
                self.eos[(msg.qid, msg.channel)][(msg.sender, dest)] += 1

    def snapshot(self, qid: int) -> dict[int, dict[tuple[int, int], int]]:
        with self._lock:
            return {ch: dict(c) for (q, ch), c in self.eos.items() if q == qid}

    def message_count(self, qid: int) -> int:
        with self._lock:
            return self.messages[qid]


class Transport:
    """Interface shared by all transports."""

    k: int

    def __init__(self, k: int):
        self.k = k
        self.audit = _Audit()

    @property
    def master(self) -> int:
        return self.k

    def mailbox(self, endpoint: int) -> Mailbox:
        raise NotImplementedError

    def send(self, dest: int, msg: Message) -> None:
        raise NotImplementedError

    def abort(self, qid: int, reason: str) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InProcTransport(Transport):
    def __init__(self, k: int):
        super().__init__(k)
        self._boxes = [Mailbox() for _ in range(k + 1)]

    def mailbox(self, endpoint: int) -> Mailbox:
        return self._boxes[endpoint]

    def send(self, dest: int, msg: Message) -> None:
        self.audit.record(dest, msg)
        self._boxes[dest].deliver(msg)

    def abort(self, qid: int, reason: str) -> None:
        for box in self._boxes:
            box.abort(qid, reason)


class DelayTransport(InProcTransport):
    """Delivers each message after a seeded random delay, FIFO within a stream."""

    def __init__(self, k: int, seed: int = 0, max_delay: float = 0.002):
        super().__init__(k)
        self._rng = np.random.default_rng(seed)
        self._max_delay = max_delay
        self._heap: list[tuple[float, int, int, Message]] = []
        self._last: dict[tuple, float] = {}
        self._seq = itertools.count()
        self._cv = threading.Condition()
        self._closed = False
        self._thread = threading.Thread(target=self._pump, name="delay-transport", daemon=True)
        self._thread.start()

    def send(self, dest: int, msg: Message) -> None:
        self.audit.record(dest, msg)
        with self._cv:
            stream = (msg.qid, msg.channel, msg.sender, dest)
            due = time.monotonic() + float(self._rng.uniform(0.0, self._max_delay))
            due = max(due, self._last.get(stream, 0.0))
            self._last[stream] = due
            heapq.heappush(self._heap, (due, next(self._seq), dest, msg))
            self._cv.notify()

    def _pump(self) -> None:
        while True:
            with self._cv:
                while not self._heap and not self._closed:
                    self._cv.wait()
                if self._closed and not self._heap:
                    return
                due, _, dest, msg = self._heap[0]
                wait = due - time.monotonic()
                if wait > 0:
                    self._cv.wait(wait)
                    continue
                heapq.heappop(self._heap)
            self._boxes[dest].deliver(msg)

    def close(self) -> None:
        with self._cv:
            self._closed = True
            self._cv.notify()
        self._thread.join(timeout=5)


# --------------------------------------------------------------------------
# sockets

def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    while n:
        try:
            b = sock.recv(min(n, 1 << 20))
        except OSError:
            return None
        if not b:
            return None
        chunks.append(b)
        n -= len(b)
    return b"".join(chunks)


def socket_mesh(n_endpoints: int) -> list[dict[int, socket.socket]]:
    """socketpair for every endpoint pair; element i maps peer -> i's end."""
    ends: list[dict[int, socket.socket]] = [dict() for _ in range(n_endpoints)]
    for a, b in itertools.combinations(range(n_endpoints), 2):
        sa, sb = socket.socketpair()
        ends[a][b] = sa
        ends[b][a] = sb
    return ends


class SocketEndpoint(Transport):
    """This process's endpoint of the mesh; local sends bypass the sockets."""

    def __init__(self, k: int, me: int, peers: dict[int, socket.socket]):
        super().__init__(k)
        self.me = me
        self._box = Mailbox()
        self._peers = peers
        self._locks = {p: threading.Lock() for p in peers}
        self._readers: list[threading.Thread] = []
        self._handshake()
        for peer, sock in peers.items():
            t = threading.Thread(target=self._reader, args=(peer, sock), daemon=True,
                                 name=f"reader-{me}-{peer}")
            t.start()
            self._readers.append(t)

    def _handshake(self) -> None:
        for sock in self._peers.values():
            sock.sendall(bytes([WIRE_VERSION]))
        for peer, sock in self._peers.items():
            got = _recv_exact(sock, 1)
            if got is None or got[0] != WIRE_VERSION:
                raise TransportError(f"wire version mismatch with endpoint {peer}")

    def _reader(self, peer: int, sock: socket.socket) -> None:
        while True:
            head = _recv_exact(sock, 4)
            if head is None:
                return
            (length,) = struct.unpack("<I", head)
            body = _recv_exact(sock, length)
            if body is None:
                return
            self._box.deliver(decode_frame(body))

    def mailbox(self, endpoint: int) -> Mailbox:
        if endpoint != self.me:
            raise TransportError("only the local mailbox is reachable in socket mode")
        return self._box

    def send(self, dest: int, msg: Message) -> None:
        self.audit.record(dest, msg)
        if dest == self.me:
            self._box.deliver(msg)
            return
        frame = encode_frame(msg)
        with self._locks[dest]:
            self._peers[dest].sendall(frame)

    def abort(self, qid: int, reason: str) -> None:
        self._box.abort(qid, reason)
        for dest in self._peers:
            try:
                self.send(dest, Message(MessageKind.ERROR, qid, 0, self.me, reason))
            except OSError:
                pass

    def close(self) -> None:
        for sock in self._peers.values():
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            sock.close()
