"""Byte transports between a client and a server endpoint.

A transport carries one request frame and hands back the peer's reply. The
loopback variant calls the server handler in-process and lets tests watch
or rewrite the traffic; the WebSocket variant sends each frame as one
binary message over TCP.
"""

from __future__ import annotations

import asyncio
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import aiohttp
from aiohttp import web

from grid_shield.crypto.mask import Direction
from grid_shield.errors import TransportError
from grid_shield.protocol.frame import session_id_of

logger = logging.getLogger(__name__)

Handler = Callable[[bytes], bytes]
Tamper = Callable[[bytes, Direction], bytes]
Disconnect = Callable[[Iterable[bytes]], None]

WS_PATH = "/sgsl"
MAX_MESSAGE = 512 * 1024 * 1024


class Transport(ABC):
    """Request/response channel for encoded frames."""

    @abstractmethod
    async def exchange(self, frame: bytes) -> bytes:
        """Send one frame and return the peer's reply frame."""

    async def close(self) -> None:
        return None

    async def __aenter__(self) -> "Transport":
        return self

    async def __aexit__(self, *exc_info: object) -> None:
        await self.close()


@dataclass
class LoopbackTransport(Transport):
    """In-process channel; ``wire_log`` keeps every frame as it crossed."""

    handler: Handler
    tamper: Optional[Tamper] = None
    wire_log: list[tuple[Direction, bytes]] = field(default_factory=list)

    async def exchange(self, frame: bytes) -> bytes:
        outbound = self._cross(frame, Direction.CLIENT_TO_SERVER)
        reply = self.handler(outbound)
        return self._cross(reply, Direction.SERVER_TO_CLIENT)

    def _cross(self, data: bytes, direction: Direction) -> bytes:
        if self.tamper is not None:
            data = self.tamper(data, direction)
        self.wire_log.append((direction, data))
        return data


class WebSocketTransport(Transport):
    """Client side of the WebSocket channel, with retrying connect."""

    def __init__(self, url: str, retries: int = 3, timeout: float = 30.0):
        self.url = url
        self.retries = retries
        self.timeout = timeout
        self._session: Optional[aiohttp.ClientSession] = None
        self._ws: Optional[aiohttp.ClientWebSocketResponse] = None

    async def connect(self) -> None:
        """Open the socket, retrying with a growing pause."""
        last_error: Optional[BaseException] = None
        for attempt in range(self.retries):
            try:
                self._session = aiohttp.ClientSession(
                    timeout=aiohttp.ClientTimeout(total=self.timeout)
                )
                self._ws = await self._session.ws_connect(self.url, max_msg_size=MAX_MESSAGE)
                logger.info("Connected to %s", self.url)
                return
            except (aiohttp.ClientError, asyncio.TimeoutError) as e:
                last_error = e
                await self._drop_session()
                if attempt < self.retries - 1:
                    logger.warning("Connect to %s failed (%s), retrying", self.url, e)
                    await asyncio.sleep(0.5 * (attempt + 1))
                    continue
        raise TransportError(
            f"Failed to connect to {self.url} after {self.retries} attempts", cause=last_error
        )

    async def exchange(self, frame: bytes) -> bytes:
        if self._ws is None:
            await self.connect()
        assert self._ws is not None
        try:
            await self._ws.send_bytes(frame)
            msg = await self._ws.receive(timeout=self.timeout)
        except (aiohttp.ClientError, asyncio.TimeoutError) as e:
            raise TransportError(f"Network error: {e}", cause=e) from e
        if msg.type != aiohttp.WSMsgType.BINARY:
            raise TransportError(f"unexpected WebSocket message {msg.type.name}")
        return bytes(msg.data)

    async def close(self) -> None:
        if self._ws is not None:
            await self._ws.close()
            self._ws = None
        await self._drop_session()

    async def _drop_session(self) -> None:
        if self._session is not None:
            await self._session.close()
            self._session = None


def create_app(handler: Handler, on_disconnect: Optional[Disconnect] = None) -> web.Application:
    """aiohttp application answering each binary message with ``handler``.

    The handler runs in a worker thread so one slow training step does not
    stall other connections. When a peer goes away, ``on_disconnect`` gets
    the session ids its frames carried.
    """

    async def socket(request: web.Request) -> web.WebSocketResponse:
        ws = web.WebSocketResponse(max_msg_size=MAX_MESSAGE)
        await ws.prepare(request)
        peer = request.remote
        seen: set[bytes] = set()
        logger.info("Peer %s connected", peer)
        try:
            async for msg in ws:
                if msg.type == aiohttp.WSMsgType.BINARY:
                    data = bytes(msg.data)
                    session_id = session_id_of(data)
                    if session_id is not None:
                        seen.add(session_id)
                    await ws.send_bytes(await asyncio.to_thread(handler, data))
                elif msg.type == aiohttp.WSMsgType.ERROR:
                    logger.warning("WebSocket error from %s: %s", peer, ws.exception())
        finally:
            logger.info("Peer %s disconnected", peer)
            if on_disconnect is not None and seen:
                on_disconnect(seen)
        return ws

    app = web.Application()
    app.router.add_get(WS_PATH, socket)
    return app
