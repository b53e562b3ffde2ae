"""The real-time avatar service.

One authoritative Session owned by the tick loop; per-connection reader and
writer tasks talk to it only through bounded queues.  Commands from all
clients are drained in arrival order at the start of each tick, responses
are flushed, then the composed frame is broadcast to subscribers.  A slow
subscriber is disconnected with a goodbye once its queue bound is exceeded
rather than stalling the loop.

Transports: newline-delimited JSON over TCP (default port 4618) and the
same payloads over WebSocket at /ws on the adjacent HTTP port (4619).
"""

from __future__ import annotations

import asyncio
import logging
from typing import Awaitable, Callable

from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from rigserve import lipsync, protocol, retarget, rig
from rigserve.clock import SystemClock
from rigserve.config import ServerConfig
from rigserve.session import Session

logger = logging.getLogger(__name__)

_MAX_LINE = 1 << 20

# rig/session exceptions worth an error response instead of a log entry
_ERROR_CODES: list[tuple[type[Exception], str]] = [
    (rig.UnknownBoneError, "unknown_bone"),
    (rig.UnknownPresetError, "unknown_preset"),
    (rig.UnknownEmotionError, "unknown_emotion"),
    (lipsync.UnknownPhonemeError, "unknown_phoneme"),
    (lipsync.TrackParseError, "track_error"),
]


class _Conn:
    """One client connection: outbound queue plus a transport pump.

    The backpressure bound applies to queued *frames*; responses are 1:1
    with the client's own lines (already bounded by the command backlog), so
    a burst of commands can never evict its own replies.  A hard cap on the
    whole queue guards against clients that flood without ever reading.
    """

    def __init__(self, cid: int, frame_backlog: int, hard_cap: int,
                 close_cb: Callable[[str], Awaitable[None]]):
        self.cid = cid
        self.outq: asyncio.Queue[tuple[bool, str] | None] = asyncio.Queue()
        self.frame_backlog = frame_backlog
        self.hard_cap = hard_cap
        self.queued_frames = 0
        self.subscribed = False
        self.alive = True
        self._close_cb = close_cb

    def try_send(self, line: str) -> bool:
        if not self.alive or self.outq.qsize() >= self.hard_cap:
            return False
        self.outq.put_nowait((False, line))
        return True

    def try_send_frame(self, line: str) -> bool:
        if (not self.alive or self.queued_frames >= self.frame_backlog
                or self.outq.qsize() >= self.hard_cap):
            return False
        self.queued_frames += 1
        self.outq.put_nowait((True, line))
        return True


class RigServer:
    def __init__(
        self,
        config: ServerConfig,
        defs: rig.RigDefinition | None = None,
        clock: SystemClock | None = None,
    ):
        if defs is None:
            defs = rig.load_rig_file(config.rig_path) if config.rig_path else rig.load_default_rig()
        self.config = config
        self.defs = defs
        self.clock = clock or SystemClock()
        self.session = Session(defs, config)
        self.inbox: asyncio.Queue[tuple[_Conn, str]] = asyncio.Queue(maxsize=config.command_backlog)
        self.conns: dict[int, _Conn] = {}
        self._next_cid = 0
        self.ticks = 0
        self.deadline_misses = 0
        self._stop = asyncio.Event()
        self._tcp_server: asyncio.AbstractServer | None = None
        self._ws_server = None
        self._tick_task: asyncio.Task | None = None
        self.tcp_port = config.port
        self.ws_port = config.ws_port

    # ------------------------------------------------------------ lifecycle

    async def start(self) -> None:
        """Bind both transports and start ticking; raises OSError on bind failure."""
        self._tcp_server = await asyncio.start_server(
            self._handle_tcp, self.config.host, self.config.port, limit=_MAX_LINE
        )
        self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        self._ws_server = await ws_serve(
            self._handle_ws, self.config.host, self.config.ws_port, max_size=_MAX_LINE
        )
        self.ws_port = self._ws_server.sockets[0].getsockname()[1]
        self._tick_task = asyncio.create_task(self._tick_loop())
        logger.info("listening on tcp://%s:%d and ws://%s:%d/ws",
                    self.config.host, self.tcp_port, self.config.host, self.ws_port)

    def request_stop(self) -> None:
        self._stop.set()

    async def serve_forever(self) -> None:
        await self._stop.wait()
        await self.shutdown()

    async def shutdown(self) -> None:
        self._stop.set()
        if self._tick_task is not None:
            self._tick_task.cancel()
            try:
                await self._tick_task
            except asyncio.CancelledError:
                pass
        for conn in list(self.conns.values()):
            await self._disconnect(conn, "server_shutdown")
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()

    # ------------------------------------------------------------- tick loop

    async def _tick_loop(self) -> None:
        period = self.config.tick_period_ms
        next_deadline = self.clock.now_ms()
        while not self._stop.is_set():
            now = self.clock.now_ms()
            if now < next_deadline:
                await asyncio.sleep((next_deadline - now) / 1000.0)
                now = self.clock.now_ms()
            lateness = now - next_deadline
            # a miss means the frame slot was overrun entirely
            if lateness >= period:
                self.deadline_misses += 1
            self._drain_inbox(now)
            try:
                frame = self.session.tick(now)
                line = protocol.serialize_frame(frame, self.defs)
            except Exception:  # keep ticking from the last good state
                logger.exception("tick %d failed; re-broadcasting last frame", self.session.tick_no)
                frame = self.session.query_frame(now)
                line = protocol.serialize_frame(frame, self.defs)
            self._broadcast(line)
            self.ticks += 1
            next_deadline += period
            if lateness > 1000.0:  # fell far behind; resynchronize the cadence
                next_deadline = self.clock.now_ms() + period

    def _drain_inbox(self, now_ms: float) -> None:
        while True:
            try:
                conn, raw = self.inbox.get_nowait()
            except asyncio.QueueEmpty:
                return
            if conn.alive:
                self._handle_line(conn, raw, now_ms)

    def _handle_line(self, conn: _Conn, raw: str, now_ms: float) -> None:
        try:
            cmd, clamped = protocol.parse_message(raw, self.defs)
        except protocol.ProtocolError as e:
            resp = protocol.Response.error(e.request_id, e.code, e.message)
        else:
            if isinstance(cmd, protocol.Subscribe):
                conn.subscribed = True
            elif isinstance(cmd, protocol.Unsubscribe):
                conn.subscribed = False
            resp = self._apply(cmd, now_ms, clamped)
        if not conn.try_send(protocol.serialize_response(resp)):
            asyncio.get_running_loop().create_task(self._disconnect(conn, "backlog"))

    def _apply(self, cmd: protocol.Command, now_ms: float, clamped: tuple[str, ...]) -> protocol.Response:
        try:
            return self.session.handle_command(cmd, now_ms, clamped)
        except Exception as e:
            for exc_type, code in _ERROR_CODES:
                if isinstance(e, exc_type):
                    return protocol.Response.error(cmd.id, code, str(e))
            logger.exception("command %s failed", type(cmd).__name__)
            return protocol.Response.error(cmd.id, "internal", str(e))

    def _broadcast(self, line: str) -> None:
        for conn in list(self.conns.values()):
            if conn.subscribed and not conn.try_send_frame(line):
                asyncio.get_running_loop().create_task(self._disconnect(conn, "backlog"))

    # ----------------------------------------------------------- connections

    def _register(self, close_cb: Callable[[str], Awaitable[None]]) -> _Conn | None:
        if len(self.conns) >= self.config.max_clients:
            return None
        self._next_cid += 1
        hard_cap = self.config.command_backlog + self.config.subscriber_backlog + 64
        conn = _Conn(self._next_cid, self.config.subscriber_backlog, hard_cap, close_cb)
        self.conns[conn.cid] = conn
        return conn

    async def _disconnect(self, conn: _Conn, reason: str) -> None:
        if not conn.alive:
            return
        conn.alive = False
        self.conns.pop(conn.cid, None)
        try:
            await conn._close_cb(reason)
        except Exception:
            pass

    def _enqueue_line(self, conn: _Conn, text: str) -> None:
        try:
            self.inbox.put_nowait((conn, text))
        except asyncio.QueueFull:
            resp = protocol.Response.error(None, "queue_full", "server command backlog exceeded")
            conn.try_send(protocol.serialize_response(resp))

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        conn = self._register(self._tcp_closer(writer))
        if conn is None:
            writer.write((protocol.goodbye_line("server_full") + "\n").encode())
            writer.close()
            return
        pump = asyncio.create_task(self._pump_tcp(conn, writer))
        try:
            while conn.alive:
                try:
                    line = await reader.readline()
                except (ValueError, ConnectionError):
                    await self._disconnect(conn, "line_too_long")
                    break
                if not line:
                    break
                text = line.decode("utf-8", errors="replace").strip()
                if text:
                    self._enqueue_line(conn, text)
        finally:
            conn.alive = False
            self.conns.pop(conn.cid, None)
            conn.outq.put_nowait(None)
            try:
                await pump
            except asyncio.CancelledError:
                pass
            writer.close()

    def _tcp_closer(self, writer: asyncio.StreamWriter) -> Callable[[str], Awaitable[None]]:
        async def close(reason: str) -> None:
            try:
                writer.write((protocol.goodbye_line(reason) + "\n").encode())
                writer.close()
            except Exception:
                pass

        return close

    async def _pump_tcp(self, conn: _Conn, writer: asyncio.StreamWriter) -> None:
        while True:
            item = await conn.outq.get()
            if item is None or not conn.alive:
                break
            is_frame, line = item
            if is_frame:
                conn.queued_frames -= 1
            writer.write((line + "\n").encode())
            try:
                await writer.drain()
            except ConnectionError:
                break

    async def _handle_ws(self, websocket) -> None:
        if websocket.request.path != "/ws":
            await websocket.close(code=1008, reason="endpoint is /ws")
            return

        async def close(reason: str) -> None:
            try:
                await websocket.send(protocol.goodbye_line(reason))
            except ConnectionClosed:
                pass
            await websocket.close()

        conn = self._register(close)
        if conn is None:
            await websocket.send(protocol.goodbye_line("server_full"))
            await websocket.close()
            return
        pump = asyncio.create_task(self._pump_ws(conn, websocket))
        try:
            async for message in websocket:
                if isinstance(message, bytes):
                    message = message.decode("utf-8", errors="replace")
                text = message.strip()
                if text:
                    self._enqueue_line(conn, text)
        except ConnectionClosed:
            pass
        finally:
            conn.alive = False
            self.conns.pop(conn.cid, None)
            pump.cancel()
            try:
                await pump
            except asyncio.CancelledError:
                pass

    async def _pump_ws(self, conn: _Conn, websocket) -> None:
        while True:
            item = await conn.outq.get()
            if item is None or not conn.alive:
                break
            is_frame, line = item
            if is_frame:
                conn.queued_frames -= 1
            try:
                await websocket.send(line)
            except ConnectionClosed:
                break


async def run_server_async(config: ServerConfig, *, ready: asyncio.Event | None = None) -> None:
    server = RigServer(config)
    await server.start()
    if ready is not None:
        ready.set()
    try:
        import signal

        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, server.request_stop)
            except NotImplementedError:
                pass
    except ImportError:
        pass
    await server.serve_forever()


def run_server(config: ServerConfig) -> None:
    """Blocking entry point; returns after a clean shutdown signal.

    Raises ConfigError for bad configuration/rig and OSError for bind
    failures -- the CLI maps those to exit codes 2 and 3.
    """
    asyncio.run(run_server_async(config))
