"""TCP ingestion of joint-frame streams and fan-out of pointing events.

Every client connection on the ingest port is one stream with its own engine.
Lines are queued in arrival order and consumed by a single task per stream, so
frames are processed strictly in order while reading continues. Events go to the
sink (stdout by default) and to every client connected on the events port. A
malformed line is logged and skipped; it never closes the connection.
"""
from __future__ import annotations

import asyncio
import logging
import sys
from typing import Callable, Optional

from .engine import PointingEngine
from .stream import MalformedFrame, PointingEvent, parse_frame, serialize_event

log = logging.getLogger(__name__)


class PointingServer:
    def __init__(self, make_engine: Callable[[], PointingEngine], host: str = "127.0.0.1",
                 ingest_port: int = 0, events_port: Optional[int] = None, sink=None,
                 gap_reset_s: float = 1.0):
        self.make_engine = make_engine
        self.host = host
        self._ingest_port = ingest_port
        self._events_port = events_port
        self.sink = sys.stdout if sink is None else sink
        self.gap_reset_s = gap_reset_s
        self.frames = 0
        self.malformed = 0
        self.events = 0
        self._subscribers: set[asyncio.StreamWriter] = set()
        self._servers: list[asyncio.base_events.Server] = []
        self._streams: set[asyncio.Task] = set()

    @property
    def ingest_port(self) -> int:
        return self._servers[0].sockets[0].getsockname()[1]

    @property
    def events_port(self) -> Optional[int]:
        if len(self._servers) < 2:
            return None
        return self._servers[1].sockets[0].getsockname()[1]

    async def start(self):
        self._servers.append(await asyncio.start_server(self._ingest, self.host, self._ingest_port))
        if self._events_port is not None:
            self._servers.append(await asyncio.start_server(self._subscribe, self.host, self._events_port))
        log.info("ingesting frames on %s:%d", self.host, self.ingest_port)
        if self.events_port is not None:
            log.info("publishing events on %s:%d", self.host, self.events_port)

    async def serve_forever(self):
        await asyncio.gather(*(s.serve_forever() for s in self._servers))

    async def close(self):
        for s in self._servers:
            s.close()
        for w in list(self._subscribers):
            w.close()
        self._subscribers.clear()
        for s in self._servers:
            await s.wait_closed()

    async def wait_idle(self):
        """Wait until every open ingest stream has been fully consumed."""
        while self._streams:
            await asyncio.gather(*list(self._streams), return_exceptions=True)

    # -- events ---------------------------------------------------------------

    async def _subscribe(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self._subscribers.add(writer)
        try:
            await reader.read()  # subscribers only listen; wait for them to hang up
        finally:
            self._subscribers.discard(writer)
            writer.close()

    def publish(self, event: PointingEvent):
        line = serialize_event(event) + "\n"
        self.events += 1
        self.sink.write(line)
        self.sink.flush()
        data = line.encode("utf-8")
        for w in list(self._subscribers):
            if w.is_closing():
                self._subscribers.discard(w)
            else:
                w.write(data)

    # -- frames ---------------------------------------------------------------

    async def _ingest(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        peer = writer.get_extra_info("peername")
        log.info("stream opened from %s", peer)
        queue: asyncio.Queue = asyncio.Queue()
        consumer = asyncio.create_task(self._consume(queue, peer))
        self._streams.add(consumer)
        consumer.add_done_callback(self._streams.discard)
        loop = asyncio.get_running_loop()
        line_no = 0
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                line_no += 1
                queue.put_nowait((line_no, line, loop.time()))
        except (ConnectionError, asyncio.IncompleteReadError) as e:
            log.warning("stream from %s dropped: %s", peer, e)
        finally:
            queue.put_nowait(None)
            writer.close()
        await consumer
        log.info("stream from %s closed after %d lines", peer, line_no)

    async def _consume(self, queue: asyncio.Queue, peer):
        engine = self.make_engine()
        last_arrival = None
        while True:
            item = await queue.get()
            if item is None:
                return
            line_no, line, arrived = item
            if not line.strip():
                continue
            try:
                frame = parse_frame(line, line_no)
            except MalformedFrame as e:
                self.malformed += 1
                log.warning("%s: %s", peer, e)
                continue
            if last_arrival is not None and arrived - last_arrival > self.gap_reset_s:
                log.info("%s: %.2f s without frames, engine reset", peer, arrived - last_arrival)
                engine.reset()
            last_arrival = arrived
            if engine.last_t is not None and frame.t < engine.last_t:
                log.warning("%s: line %d: frame t=%g out of order, dropped", peer, line_no, frame.t)
                continue
            self.frames += 1
            for ev in engine.step(frame):
                self.publish(ev)


async def run(server: PointingServer):
    await server.start()
    try:
        await server.serve_forever()
    finally:
        await server.close()
