"""Tests for frames, payload codecs and the session state machines."""

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from grid_shield.crypto import KeyPair, quantize
from grid_shield.errors import (
    ConfigurationError,
    FrameParseError,
    PeerAbortError,
    ProtocolError,
    ProtocolStateError,
    ReplayError,
    SaturationError,
    SignatureError,
)
from grid_shield.protocol import (
    AbortCode,
    ClientSession,
    Flags,
    Frame,
    MsgType,
    Phase,
    ProtocolConfig,
    Purpose,
    ReplayCache,
    ServerSession,
)
from grid_shield.protocol.wire import decode_abort, decode_blob, decode_intermediate, decode_reply

FIXTURES = Path(__file__).parent / "fixtures"


def _flip(data: bytes, index: int) -> bytes:
    tampered = bytearray(data)
    tampered[index] ^= 0x01
    return bytes(tampered)


def _resign(frame: Frame, keys: KeyPair, **changes) -> Frame:
    """Rebuild a frame with changed fields under a valid signature."""
    fields = dict(
        msg_type=frame.msg_type, session_id=frame.session_id, counter=frame.counter, payload=frame.payload
    )
    fields.update(changes)
    return Frame(**fields).signed(keys.sk)


class TestFrame:
    """Test cases for the frame layout."""

    def test_header_layout(self):
        """The header matches the recorded byte layout."""
        recorded = json.loads((FIXTURES / "handshake_header.json").read_text(encoding="utf-8"))
        frame = Frame(
            msg_type=MsgType(recorded["msg_type"]),
            session_id=bytes.fromhex(recorded["session_id"]),
            counter=recorded["counter"],
            payload=bytes.fromhex(recorded["payload"]),
        )
        assert frame.header().hex() == recorded["header"]

    def test_encode_decode(self, client_keys):
        """A signed frame survives the wire and still verifies."""
        frame = Frame(MsgType.CS2, bytes(range(16)), 7, b"payload").signed(client_keys.sk)
        again = Frame.decode(frame.encode())
        assert again == frame
        assert again.verify(client_keys.pk)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d[:10],
            lambda d: b"XXXX" + d[4:],
            lambda d: d[:4] + b"\x02" + d[5:],
            lambda d: d[:5] + b"\x09" + d[6:],
            lambda d: d + b"\x00",
        ],
        ids=["truncated", "magic", "version", "msg-type", "trailing"],
    )
    def test_decode_rejects(self, client_keys, mutate):
        """Malformed frames raise FrameParseError."""
        data = Frame(MsgType.CS2, bytes(16), 1, b"abc").signed(client_keys.sk).encode()
        with pytest.raises(FrameParseError):
            Frame.decode(mutate(data))

    def test_field_checks(self):
        """Session ids are 16 bytes and counters fit in 64 bits."""
        with pytest.raises(FrameParseError):
            Frame(MsgType.CS1, b"short", 0, b"")
        with pytest.raises(FrameParseError):
            Frame(MsgType.CS1, bytes(16), 2 ** 64, b"")

    def test_signature_covers_header(self, client_keys):
        """Changing the counter invalidates the signature."""
        frame = Frame(MsgType.CS2, bytes(16), 3, b"abc").signed(client_keys.sk)
        moved = Frame(MsgType.CS2, bytes(16), 4, b"abc", frame.signature)
        assert not moved.verify(client_keys.pk)

    def test_mutations_never_crash(self, client_keys, rng):
        """Random byte flips either fail to parse or fail to verify."""
        data = Frame(MsgType.CS2, bytes(range(16)), 5, bytes(40)).signed(client_keys.sk).encode()
        for _ in range(60):
            mutated = bytearray(data)
            for index in rng.choice(len(data), size=int(rng.integers(1, 4)), replace=False):
                mutated[int(index)] ^= int(rng.integers(1, 256))
            try:
                frame = Frame.decode(bytes(mutated))
            except FrameParseError:
                continue
            assert not frame.verify(client_keys.pk)


class TestProtocolConfig:
    """Test cases for protocol settings."""

    def test_flags(self):
        """Policy flags follow the masking and encryption switches."""
        assert ProtocolConfig().flags == Flags.MASKING | Flags.ENCRYPT_TARGET
        assert ProtocolConfig.plain().flags == Flags.NONE

    @pytest.mark.parametrize(
        "overrides",
        [{"curve": "P-521"}, {"frac_bits": 31}, {"grad_clip": 0.0}, {"retries": 0}, {"saturation": "clamp"}],
    )
    def test_rejects_bad_values(self, overrides):
        """Invalid settings are configuration errors."""
        with pytest.raises(ConfigurationError):
            ProtocolConfig(**overrides)

    def test_dict_round_trip(self):
        """to_dict and from_dict agree; unknown keys are ignored."""
        cfg = ProtocolConfig(frac_bits=12, masking=False)
        assert ProtocolConfig.from_dict({**cfg.to_dict(), "extra": 1}) == cfg

    def test_key_on_wrong_curve(self, registry):
        """The long-term key must live on the configured curve."""
        from grid_shield.crypto import TOY17

        with pytest.raises(ConfigurationError):
            ClientSession("client", KeyPair.from_secret(3, TOY17), registry, "server")


class TestHandshake:
    """Test cases for session establishment."""

    def test_establishes_shared_keys(self, established_pair):
        """Both sides hold the same session id and keys."""
        client, server = established_pair
        assert client.established and server.established
        assert client.session_id == server.session_id
        assert bytes(client.keys.k_enc) == bytes(server.keys.k_enc)
        assert bytes(client.keys.k_mask) == bytes(server.keys.k_mask)

    def test_fresh_session_ids(self, client_keys, registry):
        """Each handshake draws a new session id."""
        a = ClientSession("client", client_keys, registry, "server").handshake_client_init()
        b = ClientSession("client", client_keys, registry, "server").handshake_client_init()
        assert a.session_id != b.session_id

    def test_handshake_once(self, session_pair):
        """A second CS1 from the same client is a state error."""
        client, _ = session_pair
        client.handshake_client_init()
        with pytest.raises(ProtocolStateError):
            client.handshake_client_init()

    def test_unknown_client(self, client_keys, server_keys, protocol_config):
        """A client missing from the registry gets ABORT(UNKNOWN_PARTY)."""
        registry = {"server": server_keys.pk}
        client = ClientSession("client", client_keys, {"server": server_keys.pk}, "server")
        server = ServerSession("server", server_keys, registry, protocol_config)
        reply = server.handshake_server_respond(client.handshake_client_init())
        assert reply.msg_type is MsgType.ABORT
        assert decode_abort(reply.payload).code == AbortCode.UNKNOWN_PARTY
        assert server.phase is Phase.CLOSED

    def test_bad_cs1_signature(self, session_pair):
        """A CS1 with a broken signature is refused."""
        client, server = session_pair
        cs1 = client.handshake_client_init()
        data = cs1.encode()
        reply = server.handshake_server_respond(Frame.decode(_flip(data, len(data) - 1)))
        assert reply.msg_type is MsgType.ABORT
        assert decode_abort(reply.payload).code == AbortCode.BAD_SIGNATURE

    def test_replayed_cs1(self, client_keys, server_keys, registry, protocol_config):
        """A session id seen before is rejected by the shared cache."""
        cache = ReplayCache()
        client = ClientSession("client", client_keys, registry, "server", protocol_config)
        cs1 = client.handshake_client_init()
        first = ServerSession("server", server_keys, registry, protocol_config, replay_cache=cache)
        assert first.handshake_server_respond(cs1).msg_type is MsgType.SC1
        second = ServerSession("server", server_keys, registry, protocol_config, replay_cache=cache)
        reply = second.handshake_server_respond(cs1)
        assert decode_abort(reply.payload).code == AbortCode.REPLAY

    def test_policy_mismatch(self, client_keys, server_keys, registry):
        """Mismatched protection flags abort, and the client sees the typed error."""
        client = ClientSession("client", client_keys, registry, "server", ProtocolConfig())
        server = ServerSession("server", server_keys, registry, ProtocolConfig.plain())
        reply = server.handshake_server_respond(client.handshake_client_init())
        assert decode_abort(reply.payload).code == AbortCode.POLICY
        with pytest.raises(PeerAbortError) as exc:
            client.receive(reply)
        assert exc.value.code == AbortCode.POLICY
        assert client.phase is Phase.CLOSED

    def test_sc1_from_impostor(self, session_pair, entropy_factory):
        """An SC1 signed by a key other than the registered server's is refused."""
        client, server = session_pair
        sc1 = server.handshake_server_respond(client.handshake_client_init())
        forged = _resign(sc1, KeyPair.generate(entropy=entropy_factory(b"mallory")))
        with pytest.raises(SignatureError):
            client.receive(forged)
        assert client.keys is None

    def test_nonzero_handshake_counter(self, session_pair, client_keys):
        """Handshake frames carry counter 0."""
        client, server = session_pair
        cs1 = _resign(client.handshake_client_init(), client_keys, counter=1)
        reply = server.handshake_server_respond(cs1)
        assert decode_abort(reply.payload).code == AbortCode.REPLAY


class TestExchange:
    """Test cases for CS2 / SC2 messages on an established session."""

    def test_intermediate_round_trip(self, established_pair, rng):
        """T_Mid arrives within one quantum; the target window arrives exactly."""
        client, server = established_pair
        t_mid = rng.normal(size=(2, 5, 4)).astype(np.float32)
        target = rng.normal(size=(2, 4, 1)).astype(np.float32)
        msg = server.receive(client.send_intermediate(t_mid, target))
        assert msg.purpose is Purpose.TRAIN
        assert msg.counter == 1
        assert np.abs(msg.t_mid - t_mid).max() <= 2.0 ** -16
        np.testing.assert_array_equal(msg.t_target, target)

    def test_gradient_round_trip(self, established_pair, rng):
        """T_Back is clipped to the gradient bound; losses come back decrypted."""
        client, server = established_pair
        server.receive(client.send_intermediate(np.zeros((1, 2, 3)), np.zeros((1, 2, 1))))
        t_back = rng.normal(size=(1, 2, 3))
        t_back[0, 0, 0] = 100.0
        reply = client.receive(server.send_gradient(t_back, np.array([1.5, 0.25, 3.0])))
        assert reply.values[0, 0, 0] == pytest.approx(8.0)
        assert np.abs(reply.values - np.clip(t_back, -8, 8)).max() <= 2.0 ** -16
        np.testing.assert_allclose(reply.losses, [1.5, 0.25, 3.0])

    def test_wire_words_are_masked(self, established_pair, rng):
        """m1 on the wire differs from the plain quantized words."""
        client, _ = established_pair
        t_mid = rng.normal(size=(2, 3, 4))
        frame = client.send_intermediate(t_mid, np.zeros((2, 3, 1)))
        wire = decode_blob(decode_intermediate(frame.payload).m1, masked=True)
        plain = quantize(t_mid, 16)
        assert not np.array_equal(wire.words, plain.words)

    def test_plain_config_sends_plain_words(self, client_keys, server_keys, registry, rng):
        """With masking off the wire carries the quantized words as-is."""
        cfg = ProtocolConfig.plain()
        client = ClientSession("client", client_keys, registry, "server", cfg)
        server = ServerSession("server", server_keys, registry, cfg)
        client.receive(server.handshake_server_respond(client.handshake_client_init()))
        t_mid = rng.normal(size=(2, 3, 4))
        target = np.ones((2, 3, 1), dtype=np.float32)
        frame = client.send_intermediate(t_mid, target)
        payload = decode_intermediate(frame.payload)
        wire = decode_blob(payload.m1, masked=True)
        np.testing.assert_array_equal(wire.words, quantize(t_mid, 16).words)
        assert np.frombuffer(payload.m2[-4:], dtype="<f4")[0] == 1.0

    def test_masking_is_transparent(self, client_keys, server_keys, registry, rng, entropy_factory):
        """The server decodes bit-identical T_Mid with and without masking."""
        t_mid = rng.normal(size=(3, 4, 2))
        target = rng.normal(size=(3, 4, 1)).astype(np.float32)
        received = []
        for cfg in (ProtocolConfig(), ProtocolConfig.plain()):
            client = ClientSession("client", client_keys, registry, "server", cfg, entropy_factory(b"c"))
            server = ServerSession("server", server_keys, registry, cfg, entropy_factory(b"s"))
            client.receive(server.handshake_server_respond(client.handshake_client_init()))
            received.append(server.receive(client.send_intermediate(t_mid, target)))
        np.testing.assert_array_equal(received[0].t_mid, received[1].t_mid)
        np.testing.assert_array_equal(received[0].t_target, received[1].t_target)

    def test_saturation_warns_by_default(self, client_keys, server_keys, registry, caplog):
        """Out-of-range T_Mid is clamped, sent and reported."""
        cfg = ProtocolConfig(frac_bits=30)
        client = ClientSession("client", client_keys, registry, "server", cfg)
        server = ServerSession("server", server_keys, registry, cfg)
        client.receive(server.handshake_server_respond(client.handshake_client_init()))
        with caplog.at_level(logging.WARNING):
            msg = server.receive(client.send_intermediate(np.full((1, 2, 2), 5.0), np.zeros((1, 2, 1))))
        assert "saturated" in caplog.text
        assert np.abs(msg.t_mid).max() < 2.0

    def test_saturation_can_fail(self, client_keys, server_keys, registry):
        """With the fail policy a clamped value closes the session instead of being sent."""
        cfg = ProtocolConfig(frac_bits=30, saturation="fail")
        client = ClientSession("client", client_keys, registry, "server", cfg)
        server = ServerSession("server", server_keys, registry, cfg)
        client.receive(server.handshake_server_respond(client.handshake_client_init()))
        client.send_intermediate(np.full((1, 2, 2), 1.5), np.zeros((1, 2, 1)))
        with pytest.raises(SaturationError):
            client.send_intermediate(np.full((1, 2, 2), 5.0), np.zeros((1, 2, 1)))
        assert client.phase is Phase.CLOSED
        assert client.abort_code == AbortCode.POLICY
        assert client.keys.zeroized

    def test_counters_increase(self, established_pair):
        """Each message carries the next counter of its direction."""
        client, server = established_pair
        counters = []
        for _ in range(3):
            frame = client.send_intermediate(np.zeros((1, 1, 1)), np.zeros((1, 1, 1)))
            counters.append(frame.counter)
            server.receive(frame)
            client.receive(server.send_gradient(np.zeros((1, 1, 1))))
        assert counters == [1, 2, 3]

    def test_scores_reply(self, established_pair):
        """Inference replies carry scores without a loss record."""
        client, server = established_pair
        msg = server.receive(client.send_intermediate(np.zeros((2, 1, 1)), np.zeros((2, 1, 1)), Purpose.INFER))
        assert msg.purpose is Purpose.INFER
        reply = client.receive(server.send_scores(np.array([0.5, 20.0])))
        np.testing.assert_allclose(reply.values, [0.5, 20.0])
        assert reply.losses is None

    def test_send_before_handshake(self, session_pair):
        """Nothing is sent on an unestablished session."""
        client, _ = session_pair
        with pytest.raises(ProtocolStateError):
            client.send_intermediate(np.zeros((1, 1, 1)), np.zeros((1, 1, 1)))

    def test_saturation_is_logged(self, established_pair, caplog):
        """Saturated words are reported in the log, not raised."""
        client, server = established_pair
        with caplog.at_level(logging.WARNING):
            frame = client.send_intermediate(np.full((1, 2, 2), 1e6), np.zeros((1, 2, 1)))
        assert "saturated" in caplog.text
        msg = server.receive(frame)
        assert msg.t_mid.max() == pytest.approx((2 ** 31 - 1) / 2 ** 16)


class TestTampering:
    """Test cases for rejected in-session frames."""

    def test_tampered_payload(self, established_pair):
        """A flipped payload bit fails verification and closes the session."""
        client, server = established_pair
        data = client.send_intermediate(np.ones((1, 2, 2)), np.ones((1, 2, 1))).encode()
        with pytest.raises(SignatureError):
            server.receive(Frame.decode(_flip(data, 40)))
        assert server.phase is Phase.CLOSED
        assert server.keys.zeroized
        assert server.abort_code == AbortCode.BAD_SIGNATURE
        with pytest.raises(ProtocolStateError):
            server.receive(Frame.decode(data))

    def test_replayed_cs2(self, established_pair):
        """The same CS2 twice is a replay."""
        client, server = established_pair
        frame = client.send_intermediate(np.ones((1, 1, 1)), np.ones((1, 1, 1)))
        server.receive(frame)
        with pytest.raises(ReplayError):
            server.receive(frame)

    def test_replayed_sc2(self, established_pair):
        """The same SC2 twice is a replay on the client."""
        client, server = established_pair
        server.receive(client.send_intermediate(np.ones((1, 1, 1)), np.ones((1, 1, 1))))
        reply = server.send_gradient(np.ones((1, 1, 1)))
        client.receive(reply)
        with pytest.raises(ReplayError):
            client.receive(reply)

    def test_frame_from_other_session(self, established_pair, client_keys):
        """A validly signed frame for another session id is a state error."""
        client, server = established_pair
        frame = client.send_intermediate(np.ones((1, 1, 1)), np.ones((1, 1, 1)))
        moved = _resign(frame, client_keys, session_id=bytes(16))
        with pytest.raises(ProtocolStateError):
            server.receive(moved)

    def test_unexpected_type(self, established_pair, client_keys):
        """An SC2-typed frame sent to the server is a state error."""
        client, server = established_pair
        frame = client.send_intermediate(np.ones((1, 1, 1)), np.ones((1, 1, 1)))
        with pytest.raises(ProtocolStateError):
            server.receive(_resign(frame, client_keys, msg_type=MsgType.SC2))

    def test_signed_garbage_payload(self, established_pair, client_keys):
        """A well-signed but undecodable payload is a parse error."""
        client, server = established_pair
        frame = client.send_intermediate(np.ones((1, 1, 1)), np.ones((1, 1, 1)))
        with pytest.raises(FrameParseError):
            server.receive(_resign(frame, client_keys, payload=b"\x00\x01"))
        assert server.abort_code == AbortCode.BAD_FRAME

    def test_errors_are_protocol_errors(self):
        """Every rejection type shares the ProtocolError base."""
        for cls in (FrameParseError, SignatureError, ProtocolStateError, ReplayError, PeerAbortError):
            assert issubclass(cls, ProtocolError)

    def test_close_wipes_keys(self, established_pair):
        """Closing zeroizes the session keys."""
        client, _ = established_pair
        client.close()
        assert client.keys.zeroized
        assert client.phase is Phase.CLOSED


class TestReplayCache:
    """Test cases for the session id cache."""

    def test_add_and_contains(self):
        """Adding twice reports the duplicate."""
        cache = ReplayCache()
        assert cache.add(b"a" * 16)
        assert not cache.add(b"a" * 16)
        assert b"a" * 16 in cache

    def test_capacity(self):
        """The oldest ids are evicted first."""
        cache = ReplayCache(capacity=2)
        for sid in (b"a", b"b", b"c"):
            cache.add(sid)
        assert b"a" not in cache and b"c" in cache


def test_reply_payload_layout(established_pair):
    """SC2 payloads carry m3 and an empty m4 when there are no losses."""
    client, server = established_pair
    server.receive(client.send_intermediate(np.ones((1, 1, 1)), np.ones((1, 1, 1))))
    reply = decode_reply(server.send_gradient(np.ones((1, 1, 1))).payload)
    assert reply.m4 == b""
    assert decode_blob(reply.m3, masked=True).shape == (1, 1, 1)


def test_same_entropy_same_frames(client_keys, server_keys, registry, protocol_config, entropy_factory):
    """Replaying one entropy source reproduces every handshake frame byte for byte."""
    transcripts = []
    for _ in range(2):
        client = ClientSession("client", client_keys, registry, "server", protocol_config, entropy_factory(b"c"))
        server = ServerSession("server", server_keys, registry, protocol_config, entropy_factory(b"s"))
        cs1 = client.handshake_client_init()
        sc1 = server.handshake_server_respond(cs1)
        transcripts.append((cs1.encode(), sc1.encode()))
    assert transcripts[0] == transcripts[1]


@pytest.mark.slow
def test_many_handshakes_agree(client_keys, server_keys, registry, protocol_config):
    """Randomized handshakes always end with identical keys on both sides."""
    cache = ReplayCache()
    for _ in range(10_000):
        client = ClientSession("client", client_keys, registry, "server", protocol_config)
        server = ServerSession("server", server_keys, registry, protocol_config, replay_cache=cache)
        client.receive(server.handshake_server_respond(client.handshake_client_init()))
        assert bytes(client.keys.k_enc) == bytes(server.keys.k_enc)
        assert bytes(client.keys.k_mask) == bytes(server.keys.k_mask)


@pytest.mark.slow
@pytest.mark.parametrize("target", ["CS1", "SC1", "CS2", "SC2"])
def test_every_message_type_detects_tampering(session_pair, rng, target):
    """A flipped bit anywhere after the header in any message aborts the exchange."""
    for _ in range(20):
        client, server = _fresh_pair(session_pair)
        cs1 = client.handshake_client_init()
        if target == "CS1":
            reply = server.handshake_server_respond(_flip_random(cs1, rng))
            assert reply.msg_type is MsgType.ABORT
            continue
        sc1 = server.handshake_server_respond(cs1)
        if target == "SC1":
            with pytest.raises(ProtocolError):
                client.receive(_flip_random(sc1, rng))
            continue
        client.receive(sc1)
        cs2 = client.send_intermediate(np.ones((1, 2, 2)), np.ones((1, 2, 1)))
        if target == "CS2":
            with pytest.raises(ProtocolError):
                server.receive(_flip_random(cs2, rng))
            continue
        server.receive(cs2)
        with pytest.raises(ProtocolError):
            client.receive(_flip_random(server.send_gradient(np.ones((1, 2, 2))), rng))


@pytest.mark.slow
def test_fuzzed_frames_raise_typed_errors(session_pair, rng):
    """Random bytes and mutated frames never escape as untyped exceptions."""
    delivered = 0
    client, server = _established(session_pair)
    template = client.send_intermediate(np.ones((1, 2, 2)), np.ones((1, 2, 1))).encode()
    for i in range(1_000_000):
        if i % 2:
            data = bytearray(template)
            for index in rng.integers(0, len(data), size=3):
                data[int(index)] = int(rng.integers(0, 256))
        else:
            data = rng.integers(0, 256, size=int(rng.integers(0, 120)), dtype=np.uint8).tobytes()
        try:
            frame = Frame.decode(bytes(data))
        except FrameParseError:
            continue
        if delivered < 200 and bytes(data) != template:
            delivered += 1
            with pytest.raises(ProtocolError):
                server.receive(frame)
            client, server = _established(session_pair)
            template = client.send_intermediate(np.ones((1, 2, 2)), np.ones((1, 2, 1))).encode()


def _established(session_pair):
    client, server = _fresh_pair(session_pair)
    client.receive(server.handshake_server_respond(client.handshake_client_init()))
    return client, server


def _fresh_pair(session_pair):
    client, server = session_pair
    return (
        ClientSession("client", client.keypair, client.registry, "server", client.config),
        ServerSession("server", server.keypair, server.registry, server.config),
    )


def _flip_random(frame: Frame, rng) -> Frame:
    """Flip one bit past the fixed header fields, keeping the frame parseable."""
    data = frame.encode()
    start = 4 + 1 + 1  # magic, version, type stay intact
    index = int(rng.integers(start, len(data)))
    tampered = bytearray(data)
    tampered[index] ^= 1 << int(rng.integers(0, 8))
    try:
        return Frame.decode(bytes(tampered))
    except FrameParseError:
        return Frame(frame.msg_type, frame.session_id, frame.counter, frame.payload, _flip(frame.signature, 0))
