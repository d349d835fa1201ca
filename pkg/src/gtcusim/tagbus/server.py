"""Stream servers speaking the tag line protocol.

A TCP listener (default port 7117) and a WebSocket bridge (default
7118) share one TagStore.  Each session owns a bounded outbound queue
drained by a writer thread; REQUEST/POKE replies and subscription DATA
frames share that queue, so every session sees its traffic in a single
consistent order.  A session that stops draining overruns its buffer
and gets dropped with a final NAK rather than ever stalling the
simulation loop.
"""

from __future__ import annotations

import queue
import socket
import threading
import time
from typing import Callable, Optional

from websockets.sync.server import serve as ws_serve

from gtcusim.tagbus.protocol import (
    Message,
    ProtocolError,
    Quality,
    Verb,
    decode,
    encode,
)
from gtcusim.tagbus.store import (
    ReadOnlyError,
    Subscriber,
    TagRecord,
    TagStore,
    UnknownTagError,
    ValueTypeError,
)

__all__ = ["TagBusServer", "TagBusClient", "SESSION_BUFFER"]

SESSION_BUFFER = 4096


def _wall_clock_ms() -> int:
    return int(time.time() * 1000)


class _Session(Subscriber):
    def __init__(self, name: str):
        self.name = name
        self.outbound: queue.Queue = queue.Queue(maxsize=SESSION_BUFFER)
        self.subscriptions: set[str] = set()
        self.overrun = False
        self.closed = False

    def push(self, record: TagRecord) -> bool:
        if self.overrun or self.closed:
            return False
        try:
            self.outbound.put_nowait(record)
            return True
        except queue.Full:
            self.overrun = True
            return False

    def enqueue_message(self, msg: Message) -> None:
        if self.overrun or self.closed:
            return
        try:
            self.outbound.put_nowait(msg)
        except queue.Full:
            self.overrun = True


class TagBusServer:
    """Serves one TagStore over TCP and a WebSocket bridge."""

    def __init__(
        self,
        store: TagStore,
        host: str = "127.0.0.1",
        port: int = 7117,
        ws_port: Optional[int] = 7118,
        clock_ms: Callable[[], int] = _wall_clock_ms,
    ):
        self.store = store
        self.host = host
        self.port = port
        self.ws_port = ws_port
        self.clock_ms = clock_ms
        self._listener: Optional[socket.socket] = None
        self._ws_server = None
        self._threads: list[threading.Thread] = []
        self._sessions: list[_Session] = []
        self._sessions_lock = threading.Lock()
        self._stopping = threading.Event()

    # lifecycle ---------------------------------------------------------------

    def start(self) -> None:
        self._listener = socket.create_server((self.host, self.port))
        self._listener.settimeout(0.25)
        accept = threading.Thread(target=self._accept_loop, name="tagbus-accept", daemon=True)
        accept.start()
        self._threads.append(accept)
        if self.ws_port is not None:
            self._ws_server = ws_serve(self._ws_handler, self.host, self.ws_port)
            ws_thread = threading.Thread(
                target=self._ws_server.serve_forever, name="tagbus-ws", daemon=True
            )
            ws_thread.start()
            self._threads.append(ws_thread)

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            self._listener.close()
        if self._ws_server is not None:
            self._ws_server.shutdown()
        with self._sessions_lock:
            sessions = list(self._sessions)
        for session in sessions:
            session.closed = True
            self.store.drop_subscriber(session)
        for t in self._threads:
            t.join(timeout=2.0)

    # frame handling ----------------------------------------------------------

    def handle_frame(self, session: _Session, raw) -> list[Message]:
        try:
            msg = decode(raw)
        except ProtocolError as exc:
            return [Message.nak(exc.tag, exc.reason)]

        tag = msg.tag
        if msg.verb is Verb.REQUEST:
            try:
                rec = self.store.snapshot(tag)
            except UnknownTagError:
                return [Message.nak(tag, "no-such-tag")]
            return [Message.data(tag, rec.value, rec.quality, rec.timestamp_ms)]

        if msg.verb is Verb.ADVISE:
            if tag in session.subscriptions:
                return [Message.ack(tag)]
            try:
                self.store.subscribe(tag, session)
            except UnknownTagError:
                return [Message.nak(tag, "no-such-tag")]
            session.subscriptions.add(tag)
            return [Message.ack(tag)]

        if msg.verb is Verb.UNADVISE:
            self.store.unsubscribe(tag, session)
            session.subscriptions.discard(tag)
            return [Message.ack(tag)]

        if msg.verb is Verb.POKE:
            try:
                self.store.poke(tag, msg.value, self.clock_ms())
            except UnknownTagError:
                return [Message.nak(tag, "no-such-tag")]
            except ReadOnlyError:
                return [Message.nak(tag, "read-only")]
            except ValueTypeError:
                return [Message.nak(tag, "bad-value")]
            return [Message.ack(tag)]

        # DATA/ACK/NAK have no business arriving from a client
        return [Message.nak(tag, "bad-verb")]

    def _register(self, session: _Session) -> None:
        with self._sessions_lock:
            self._sessions.append(session)

    def _unregister(self, session: _Session) -> None:
        session.closed = True
        self.store.drop_subscriber(session)
        with self._sessions_lock:
            if session in self._sessions:
                self._sessions.remove(session)

    @staticmethod
    def _to_wire(item) -> bytes:
        if isinstance(item, TagRecord):
            item = Message.data(item.name, item.value, item.quality, item.timestamp_ms)
        return encode(item)

    # TCP ----------------------------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            session = _Session(f"tcp:{addr[0]}:{addr[1]}")
            self._register(session)
            threading.Thread(
                target=self._tcp_reader, args=(session, conn), daemon=True
            ).start()
            threading.Thread(
                target=self._tcp_writer, args=(session, conn), daemon=True
            ).start()

    def _tcp_reader(self, session: _Session, conn: socket.socket) -> None:
        try:
            with conn.makefile("rb") as reader:
                for raw in reader:
                    if session.closed or self._stopping.is_set():
                        break
                    for response in self.handle_frame(session, raw):
                        session.enqueue_message(response)
        except OSError:
            pass
        finally:
            session.closed = True

    def _tcp_writer(self, session: _Session, conn: socket.socket) -> None:
        try:
            while not session.closed and not self._stopping.is_set():
                if session.overrun:
                    conn.sendall(encode(Message.nak("-", "overrun")))
                    break
                try:
                    item = session.outbound.get(timeout=0.1)
                except queue.Empty:
                    continue
                conn.sendall(self._to_wire(item))
        except OSError:
            pass
        finally:
            self._unregister(session)
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()

    # WebSocket ------------------------------------------------------------------

    def _ws_handler(self, conn) -> None:
        session = _Session(f"ws:{conn.remote_address}")
        self._register(session)
        stop = threading.Event()

        def writer():
            try:
                while not stop.is_set() and not session.closed:
                    if session.overrun:
                        conn.send(encode(Message.nak("-", "overrun")).decode("utf-8"))
                        conn.close()
                        break
                    try:
                        item = session.outbound.get(timeout=0.1)
                    except queue.Empty:
                        continue
                    conn.send(self._to_wire(item).decode("utf-8"))
            except Exception:
                pass
            finally:
                session.closed = True

        writer_thread = threading.Thread(target=writer, daemon=True)
        writer_thread.start()
        try:
            for raw in conn:
                if session.closed:
                    break
                for response in self.handle_frame(session, raw):
                    session.enqueue_message(response)
        except Exception:
            pass
        finally:
            stop.set()
            self._unregister(session)
            writer_thread.join(timeout=1.0)


class TagBusClient:
    """Minimal blocking client for tests, scripts, and replay checks."""

    def __init__(self, host: str = "127.0.0.1", port: int = 7117, timeout: float = 5.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._reader = self._sock.makefile("rb")

    def close(self) -> None:
        try:
            self._sock.close()
        finally:
            self._reader.close()

    def __enter__(self) -> "TagBusClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def send(self, msg: Message) -> None:
        self._sock.sendall(encode(msg))

    def recv(self) -> Message:
        raw = self._reader.readline()
        if not raw:
            raise ConnectionError("server closed the connection")
        return decode(raw)

    def request(self, tag: str) -> Message:
        self.send(Message.request(tag))
        return self.recv()

    def poke(self, tag: str, value) -> Message:
        self.send(Message.poke(tag, value))
        return self.recv()

    def advise(self, tag: str) -> Message:
        self.send(Message.advise(tag))
        return self.recv()

    def unadvise(self, tag: str) -> Message:
        self.send(Message.unadvise(tag))
        return self.recv()
