"""Tests for the loopback and WebSocket transports."""

import asyncio
import threading

import pytest
from aiohttp.test_utils import TestServer

from grid_shield.crypto.mask import Direction
from grid_shield.errors import TransportError
from grid_shield.protocol import WS_PATH, LoopbackTransport, Phase, WebSocketTransport, create_app
from grid_shield.splitlearn import handshake, local_pair, train_epoch


def _reverse(data: bytes) -> bytes:
    return data[::-1]


class TestLoopback:
    """Test cases for the in-process transport."""

    async def test_exchange_calls_handler(self):
        """The handler's answer comes back unchanged."""
        transport = LoopbackTransport(_reverse)
        assert await transport.exchange(b"abc") == b"cba"

    async def test_wire_log(self):
        """Both directions are recorded in order."""
        transport = LoopbackTransport(_reverse)
        await transport.exchange(b"ab")
        assert transport.wire_log == [
            (Direction.CLIENT_TO_SERVER, b"ab"),
            (Direction.SERVER_TO_CLIENT, b"ba"),
        ]

    async def test_tamper_sees_both_directions(self):
        """The tamper hook can rewrite traffic either way."""
        seen = []

        def tamper(data, direction):
            seen.append(direction)
            return data + b"!" if direction is Direction.CLIENT_TO_SERVER else data

        transport = LoopbackTransport(_reverse, tamper=tamper)
        assert await transport.exchange(b"ab") == b"!ba"
        assert seen == [Direction.CLIENT_TO_SERVER, Direction.SERVER_TO_CLIENT]

    async def test_context_manager(self):
        """Transports work as async context managers."""
        async with LoopbackTransport(_reverse) as transport:
            assert await transport.exchange(b"x") == b"x"


class TestWebSocket:
    """Test cases for the WebSocket transport against a local aiohttp server."""

    async def test_echo_round_trip(self):
        """A binary message reaches the handler and its answer comes back."""
        async with TestServer(create_app(_reverse)) as server:
            transport = WebSocketTransport(str(server.make_url(WS_PATH)), retries=1, timeout=5.0)
            try:
                assert await transport.exchange(b"hello") == b"olleh"
                assert await transport.exchange(b"again") == b"niaga"
            finally:
                await transport.close()

    async def test_connect_failure(self):
        """A closed port is a TransportError once the retries are used up."""
        transport = WebSocketTransport("http://127.0.0.1:1/sgsl", retries=1, timeout=2.0)
        with pytest.raises(TransportError):
            await transport.connect()

    async def test_training_over_websocket(self, tiny_model, tiny_train, toy_windows):
        """A handshake and a training epoch work over a real socket."""
        client, endpoint, _ = local_pair(tiny_model, tiny_train)
        async with TestServer(create_app(endpoint.handle)) as server:
            async with WebSocketTransport(str(server.make_url(WS_PATH)), retries=1, timeout=30.0) as transport:
                await handshake(client, transport)
                log = await train_epoch(client, transport, toy_windows)
        assert client.session.established
        assert len(log) == 4
        assert endpoint.latest is not None and len(endpoint.latest.loss_log) == 4

    async def test_handler_runs_off_the_event_loop(self):
        """Handlers run in a worker thread, not on the loop."""
        seen = []

        def handler(data):
            try:
                asyncio.get_running_loop()
                seen.append("loop")
            except RuntimeError:
                seen.append("thread")
            return data

        async with TestServer(create_app(handler)) as server:
            async with WebSocketTransport(str(server.make_url(WS_PATH)), retries=1, timeout=5.0) as transport:
                assert await transport.exchange(b"x") == b"x"
        assert seen == ["thread"]

    async def test_slow_handler_does_not_block_other_peers(self):
        """A second connection is served while the first handler is still busy."""
        fast_served = threading.Event()

        def handler(data):
            if data == b"slow":
                return b"done" if fast_served.wait(timeout=5.0) else b"starved"
            fast_served.set()
            return data

        async with TestServer(create_app(handler)) as server:
            url = str(server.make_url(WS_PATH))
            async with WebSocketTransport(url, retries=1, timeout=10.0) as slow, WebSocketTransport(
                url, retries=1, timeout=10.0
            ) as fast:
                slow_reply = asyncio.ensure_future(slow.exchange(b"slow"))
                await asyncio.sleep(0.1)
                assert await fast.exchange(b"fast") == b"fast"
                assert await slow_reply == b"done"

    async def test_disconnect_closes_sessions(self, tiny_model, tiny_train):
        """When a client goes away its server session is dropped and its keys wiped."""
        client, endpoint, _ = local_pair(tiny_model, tiny_train)
        app = create_app(endpoint.handle, on_disconnect=endpoint.disconnect)
        async with TestServer(app) as server:
            async with WebSocketTransport(str(server.make_url(WS_PATH)), retries=1, timeout=30.0) as transport:
                await handshake(client, transport)
                session = endpoint.servers[client.session.session_id].session
            for _ in range(100):
                if not endpoint.servers:
                    break
                await asyncio.sleep(0.02)
        assert not endpoint.servers
        assert endpoint.closed_sessions == 1
        assert session.phase is Phase.CLOSED
        assert session.keys.zeroized
