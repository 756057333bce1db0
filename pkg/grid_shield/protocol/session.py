"""Client and server state machines of the secure split-learning protocol.

    client                                   server
    CS1  sid, Q_c, sig(SK_c)        ->
                                    <-       SC1  Q_s, sig(SK_s)
    (both) k_Enc, k_Mask = KDF(ECDH, salt=sid)
    CS2  m1 = T_Mid + Mask1, m2 = Enc(T_Target)  ->
                                    <-       SC2  m3 = T_Back + Mask2, m4 = Enc(losses)

Every incoming frame is verified before anything in it is decoded; counters
move only after verification. Any failure closes the session for good and
wipes its keys.
"""

from __future__ import annotations

import logging
import secrets
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from threading import Lock
from typing import Mapping, NoReturn, Optional, Union

import numpy as np

from grid_shield.crypto.codec import clip_to_range, dequantize, quantize, representable_limit
from grid_shield.crypto.curve import CURVES, CurveParams, Entropy, Point
from grid_shield.crypto.ecdh import KeyPair, ecdh_shared
from grid_shield.crypto.kdf import SessionKeys, derive_session_keys
from grid_shield.crypto.keystore import KeyStore
from grid_shield.crypto.mask import Direction, MaskStream, demask, mask
from grid_shield.crypto.target import decrypt_target, encrypt_target, target_nonce
from grid_shield.errors import (
    ConfigurationError,
    CryptoError,
    FrameParseError,
    PeerAbortError,
    ProtocolError,
    ProtocolStateError,
    ReplayError,
    SaturationError,
    SignatureError,
)
from grid_shield.protocol.frame import SESSION_ID_LEN, Frame, MsgType
from grid_shield.protocol.wire import (
    Abort,
    AbortCode,
    Flags,
    Hello,
    Intermediate,
    Purpose,
    Reply,
    decode_abort,
    decode_array,
    decode_blob,
    decode_hello,
    decode_intermediate,
    decode_reply,
    encode_abort,
    encode_array,
    encode_blob,
    encode_hello,
    encode_intermediate,
    encode_reply,
)

logger = logging.getLogger(__name__)

Registry = Union[KeyStore, Mapping[str, Point]]
NO_SESSION = bytes(SESSION_ID_LEN)
SATURATION_POLICIES = ("warn", "fail")


class Phase(Enum):
    INIT = "init"
    AWAIT_PEER_POINT = "await_peer_point"
    ESTABLISHED = "established"
    CLOSED = "closed"


@dataclass
class ProtocolConfig:
    curve: str = "P-256"
    frac_bits: int = 16
    grad_clip: float = 8.0
    masking: bool = True
    encrypt_targets: bool = True
    saturation_warn_ratio: float = 0.001
    saturation: str = "warn"
    retries: int = 3
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.curve not in CURVES:
            raise ConfigurationError(f"unknown curve {self.curve!r}")
        if not 0 <= self.frac_bits <= 30:
            raise ConfigurationError("frac_bits must be in [0, 30]")
        if self.grad_clip <= 0:
            raise ConfigurationError("grad_clip must be positive")
        if not 0 <= self.saturation_warn_ratio <= 1:
            raise ConfigurationError("saturation_warn_ratio must be in [0, 1]")
        if self.saturation not in SATURATION_POLICIES:
            raise ConfigurationError(f"saturation must be one of {SATURATION_POLICIES}")
        if self.retries < 1 or self.timeout <= 0:
            raise ConfigurationError("retries must be >= 1 and timeout positive")

    @property
    def curve_params(self) -> CurveParams:
        return CURVES[self.curve]

    @property
    def flags(self) -> Flags:
        flags = Flags.NONE
        if self.masking:
            flags |= Flags.MASKING
        if self.encrypt_targets:
            flags |= Flags.ENCRYPT_TARGET
        return flags

    @classmethod
    def plain(cls, **overrides) -> "ProtocolConfig":
        """Zero mask and no target encryption; same quantization."""
        return cls(masking=False, encrypt_targets=False, **overrides)

    def to_dict(self) -> dict:
        return {
            "curve": self.curve,
            "frac_bits": self.frac_bits,
            "grad_clip": self.grad_clip,
            "masking": self.masking,
            "encrypt_targets": self.encrypt_targets,
            "saturation_warn_ratio": self.saturation_warn_ratio,
            "saturation": self.saturation,
            "retries": self.retries,
            "timeout": self.timeout,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolConfig":
        known = cls().to_dict()
        return cls(**{k: data[k] for k in known if k in data})


@dataclass
class IntermediateMessage:
    """What the server application gets out of a CS2 frame."""

    purpose: Purpose
    t_mid: np.ndarray
    t_target: np.ndarray
    counter: int


@dataclass
class ReplyMessage:
    """What the client application gets out of an SC2 frame."""

    values: np.ndarray  # T_Back when training, per-window scores when inferring
    losses: Optional[np.ndarray]
    counter: int


class ReplayCache:
    """Session ids a server has already accepted, oldest evicted first."""

    def __init__(self, capacity: int = 100_000):
        self.capacity = capacity
        self._seen: OrderedDict[bytes, None] = OrderedDict()
        self._lock = Lock()

    def __contains__(self, session_id: bytes) -> bool:
        with self._lock:
            return session_id in self._seen

    def add(self, session_id: bytes) -> bool:
        """Record ``session_id``; False if it was already there."""
        with self._lock:
            if session_id in self._seen:
                return False
            self._seen[session_id] = None
            while len(self._seen) > self.capacity:
                self._seen.popitem(last=False)
            return True


def _lookup(registry: Registry, party_id: str) -> Optional[Point]:
    if isinstance(registry, KeyStore):
        return registry.lookup(party_id)
    return registry.get(party_id)


@dataclass
class _Counters:
    sent: int = 0
    received: int = 0


class _Session:
    send_direction: Direction
    recv_direction: Direction

    def __init__(
        self,
        party_id: str,
        keypair: KeyPair,
        registry: Registry,
        config: Optional[ProtocolConfig] = None,
        entropy: Optional[Entropy] = None,
    ):
        self.party_id = party_id
        self.keypair = keypair
        self.registry = registry
        self.config = config or ProtocolConfig()
        self.curve = self.config.curve_params
        if keypair.curve != self.curve:
            raise ConfigurationError("long-term key is on a different curve than the protocol")
        self.entropy = entropy
        self.phase = Phase.INIT
        self.session_id: Optional[bytes] = None
        self.peer_id: Optional[str] = None
        self.peer_pk: Optional[Point] = None
        self.keys: Optional[SessionKeys] = None
        self.counters = _Counters()
        self.last_error: Optional[ProtocolError] = None
        self.abort_code: Optional[AbortCode] = None
        self._stream: Optional[MaskStream] = None
        self._ephemeral: Optional[int] = None

    @property
    def established(self) -> bool:
        return self.phase is Phase.ESTABLISHED

    def close(self) -> None:
        """Move to Closed and wipe every secret the session holds."""
        if self.keys is not None:
            self.keys.zeroize()
        if self._stream is not None:
            self._stream.wipe()
        self._ephemeral = None
        self.phase = Phase.CLOSED

    def _fail(self, error: ProtocolError, code: AbortCode = AbortCode.INTERNAL) -> NoReturn:
        self.last_error = error
        self.abort_code = code
        logger.warning("%s session closed: %s", type(self).__name__, error)
        self.close()
        raise error

    def _sign(self, msg_type: MsgType, counter: int, payload: bytes) -> Frame:
        frame = Frame(
            msg_type=msg_type,
            session_id=self.session_id or NO_SESSION,
            counter=counter,
            payload=payload,
        )
        return frame.signed(self.keypair.sk, self.curve)

    def abort_frame(self, code: AbortCode, reason: str) -> Frame:
        return self._sign(MsgType.ABORT, 0, encode_abort(Abort(code=int(code), reason=reason)))

    def _decode_peer_point(self, raw: bytes) -> tuple[int, int]:
        try:
            return self.curve.decode_point(raw)
        except CryptoError as e:
            self._fail(FrameParseError(f"peer point rejected: {e}", cause=e), AbortCode.BAD_POINT)

    def _establish(self, point: tuple[int, int]) -> None:
        assert self._ephemeral is not None and self.session_id is not None
        shared = ecdh_shared(self._ephemeral, point, self.curve)
        self._ephemeral = None
        self.keys = derive_session_keys(shared, self.session_id, self.curve)
        self._stream = MaskStream(bytes(self.keys.k_mask), self.session_id, enabled=self.config.masking)
        self.phase = Phase.ESTABLISHED

    def _check_frame(self, frame: Frame, expected: MsgType) -> None:
        """Verify an in-session frame; raises (and closes) on any mismatch."""
        if self.phase is Phase.CLOSED:
            raise ProtocolStateError("session is closed")
        if frame.msg_type is MsgType.ABORT:
            self._peer_abort(frame)
        if frame.session_id != self.session_id:
            self._fail(ProtocolStateError("frame belongs to another session"), AbortCode.STATE)
        if frame.msg_type is not expected:
            self._fail(
                ProtocolStateError(f"{frame.msg_type.name} not accepted in phase {self.phase.value}"),
                AbortCode.STATE,
            )
        if expected in (MsgType.CS1, MsgType.SC1):
            if frame.counter != 0:
                self._fail(ReplayError(f"handshake counter must be 0, got {frame.counter}"), AbortCode.REPLAY)
        elif frame.counter <= self.counters.received:
            self._fail(
                ReplayError(f"counter {frame.counter} not above {self.counters.received}"),
                AbortCode.REPLAY,
            )
        assert self.peer_pk is not None
        if not frame.verify(self.peer_pk, self.curve):
            self._fail(SignatureError(f"{frame.msg_type.name} signature did not verify"), AbortCode.BAD_SIGNATURE)
        if expected not in (MsgType.CS1, MsgType.SC1):
            self.counters.received = frame.counter

    def _peer_abort(self, frame: Frame) -> NoReturn:
        if self.peer_pk is None or not frame.verify(self.peer_pk, self.curve):
            self._fail(SignatureError("unauthenticated ABORT frame"), AbortCode.BAD_SIGNATURE)
        try:
            abort = decode_abort(frame.payload)
        except FrameParseError as e:
            self._fail(e, AbortCode.BAD_FRAME)
        self._fail(PeerAbortError(f"peer aborted: {abort.reason}", code=abort.code), AbortCode.STATE)

    def _require_established(self) -> None:
        if self.phase is not Phase.ESTABLISHED:
            raise ProtocolStateError(f"session not established (phase {self.phase.value})")

    def _masked_words(self, values: np.ndarray, counter: int) -> bytes:
        assert self._stream is not None
        blob = quantize(values, self.config.frac_bits)
        if blob.saturated and self.config.saturation == "fail":
            limit = representable_limit(self.config.frac_bits)
            self._fail(
                SaturationError(
                    f"{blob.saturated} of {len(blob)} values outside +-{limit:.4g} at frac_bits={self.config.frac_bits}"
                ),
                AbortCode.POLICY,
            )
        if blob.saturated > self.config.saturation_warn_ratio * len(blob):
            logger.warning(
                "%d of %d words saturated in message %d", blob.saturated, len(blob), counter
            )
        return encode_blob(mask(blob, self._stream, counter, self.send_direction))

    def _unmasked_values(self, data: bytes, counter: int) -> np.ndarray:
        assert self._stream is not None
        try:
            blob = decode_blob(data, masked=True)
        except FrameParseError as e:
            self._fail(e, AbortCode.BAD_FRAME)
        return dequantize(demask(blob, self._stream, counter, self.recv_direction))

    def _seal(self, values: np.ndarray, counter: int) -> bytes:
        assert self.keys is not None
        plain = encode_array(values)
        if not self.config.encrypt_targets:
            return plain
        return encrypt_target(bytes(self.keys.k_enc), target_nonce(counter, self.send_direction), plain)

    def _open(self, data: bytes, counter: int) -> np.ndarray:
        assert self.keys is not None
        plain = data
        if self.config.encrypt_targets:
            plain = decrypt_target(bytes(self.keys.k_enc), target_nonce(counter, self.recv_direction), data)
        try:
            return decode_array(plain)
        except FrameParseError as e:
            self._fail(e, AbortCode.BAD_FRAME)


class ClientSession(_Session):
    send_direction = Direction.CLIENT_TO_SERVER
    recv_direction = Direction.SERVER_TO_CLIENT

    def __init__(
        self,
        party_id: str,
        keypair: KeyPair,
        registry: Registry,
        server_id: str,
        config: Optional[ProtocolConfig] = None,
        entropy: Optional[Entropy] = None,
    ):
        super().__init__(party_id, keypair, registry, config, entropy)
        self.peer_id = server_id

    def handshake_client_init(self) -> Frame:
        """Step 1: fresh session id and ephemeral point, signed with SK_c."""
        if self.phase is not Phase.INIT:
            raise ProtocolStateError(f"handshake already started (phase {self.phase.value})")
        entropy = self.entropy
        self.session_id = entropy(SESSION_ID_LEN) if entropy else secrets.token_bytes(SESSION_ID_LEN)
        self._ephemeral = self.curve.random_scalar(entropy)
        q_c = self.curve.mul_base(self._ephemeral)
        payload = encode_hello(
            Hello(party_id=self.party_id, point=self.curve.encode_point(q_c), flags=self.config.flags)
        )
        self.phase = Phase.AWAIT_PEER_POINT
        return self._sign(MsgType.CS1, 0, payload)

    def receive(self, frame: Frame) -> Optional[ReplyMessage]:
        """SC1 completes the handshake (returns None); SC2 yields the server's reply."""
        if self.phase is Phase.AWAIT_PEER_POINT:
            self._finish_handshake(frame)
            return None
        if self.phase is Phase.INIT:
            self._fail(ProtocolStateError(f"{frame.msg_type.name} before handshake"), AbortCode.STATE)
        self._check_frame(frame, MsgType.SC2)
        try:
            reply = decode_reply(frame.payload)
        except FrameParseError as e:
            self._fail(e, AbortCode.BAD_FRAME)
        values = self._unmasked_values(reply.m3, frame.counter)
        losses = self._open(reply.m4, frame.counter) if reply.m4 else None
        return ReplyMessage(values=values, losses=losses, counter=frame.counter)

    def _finish_handshake(self, frame: Frame) -> None:
        if self.peer_pk is None:
            self.peer_pk = _lookup(self.registry, self.peer_id or "")
            if self.peer_pk is None:
                self._fail(SignatureError(f"no registered key for server {self.peer_id!r}"), AbortCode.UNKNOWN_PARTY)
        self._check_frame(frame, MsgType.SC1)
        try:
            hello = decode_hello(frame.payload, self.curve.point_len)
        except FrameParseError as e:
            self._fail(e, AbortCode.BAD_FRAME)
        if hello.party_id != self.peer_id:
            self._fail(SignatureError(f"SC1 from {hello.party_id!r}, expected {self.peer_id!r}"), AbortCode.UNKNOWN_PARTY)
        if hello.flags != self.config.flags:
            self._fail(ProtocolStateError("server accepted different protection flags"), AbortCode.POLICY)
        self._establish(self._decode_peer_point(hello.point))
        logger.info("Client session %s established with %s", self.session_id.hex() if self.session_id else "", self.peer_id)

    def send_intermediate(
        self, t_mid: np.ndarray, t_target: np.ndarray, purpose: Purpose = Purpose.TRAIN
    ) -> Frame:
        """Step 3: m1 = masked T_Mid, m2 = encrypted T_Target."""
        self._require_established()
        self.counters.sent += 1
        counter = self.counters.sent
        payload = encode_intermediate(
            Intermediate(
                purpose=purpose,
                m1=self._masked_words(t_mid, counter),
                m2=self._seal(np.asarray(t_target, dtype=np.float32), counter),
            )
        )
        return self._sign(MsgType.CS2, counter, payload)


class ServerSession(_Session):
    send_direction = Direction.SERVER_TO_CLIENT
    recv_direction = Direction.CLIENT_TO_SERVER

    def __init__(
        self,
        party_id: str,
        keypair: KeyPair,
        registry: Registry,
        config: Optional[ProtocolConfig] = None,
        entropy: Optional[Entropy] = None,
        replay_cache: Optional[ReplayCache] = None,
    ):
        super().__init__(party_id, keypair, registry, config, entropy)
        self.replay_cache = replay_cache if replay_cache is not None else ReplayCache()
        self._client_point: Optional[tuple[int, int]] = None

    def handshake_server_respond(self, frame: Frame) -> Frame:
        """Step 2. Returns SC1, or a signed ABORT after closing the session."""
        try:
            self._accept_hello(frame)
        except ProtocolError as e:
            code = self.abort_code or AbortCode.INTERNAL
            if self.phase is not Phase.CLOSED:
                self.last_error = e
                self.close()
            return self.abort_frame(code, str(e))

        assert self._ephemeral is not None and self._client_point is not None
        q_s = self.curve.mul_base(self._ephemeral)
        payload = encode_hello(
            Hello(party_id=self.party_id, point=self.curve.encode_point(q_s), flags=self.config.flags)
        )
        reply = self._sign(MsgType.SC1, 0, payload)
        self._establish(self._client_point)
        logger.info("Server session %s established with %s", frame.session_id.hex(), self.peer_id)
        return reply

    def _accept_hello(self, frame: Frame) -> None:
        if self.phase is not Phase.INIT:
            self._fail(ProtocolStateError(f"CS1 not accepted in phase {self.phase.value}"), AbortCode.STATE)
        self.session_id = frame.session_id
        if frame.msg_type is not MsgType.CS1:
            self._fail(ProtocolStateError(f"expected CS1, got {frame.msg_type.name}"), AbortCode.STATE)
        try:
            hello = decode_hello(frame.payload, self.curve.point_len)
        except FrameParseError as e:
            self._fail(e, AbortCode.BAD_FRAME)
        self.peer_id = hello.party_id
        self.peer_pk = _lookup(self.registry, hello.party_id)
        if self.peer_pk is None:
            self._fail(SignatureError(f"no registered key for client {hello.party_id!r}"), AbortCode.UNKNOWN_PARTY)
        self._check_frame(frame, MsgType.CS1)
        if not self.replay_cache.add(frame.session_id):
            self._fail(ReplayError("session id already used"), AbortCode.REPLAY)
        if hello.flags != self.config.flags:
            self._fail(ProtocolStateError("client protection flags do not match server policy"), AbortCode.POLICY)
        self._client_point = self._decode_peer_point(hello.point)
        self._ephemeral = self.curve.random_scalar(self.entropy)
        self.phase = Phase.AWAIT_PEER_POINT

    def receive(self, frame: Frame) -> IntermediateMessage:
        """Step 3 on the server side: verify, then demask m1 and decrypt m2."""
        if self.phase is not Phase.ESTABLISHED:
            if self.phase is Phase.CLOSED:
                raise ProtocolStateError("session is closed")
            self._fail(ProtocolStateError(f"{frame.msg_type.name} before handshake"), AbortCode.STATE)
        self._check_frame(frame, MsgType.CS2)
        try:
            msg = decode_intermediate(frame.payload)
        except FrameParseError as e:
            self._fail(e, AbortCode.BAD_FRAME)
        return IntermediateMessage(
            purpose=msg.purpose,
            t_mid=self._unmasked_values(msg.m1, frame.counter),
            t_target=self._open(msg.m2, frame.counter),
            counter=frame.counter,
        )

    def send_gradient(self, t_back: np.ndarray, losses: Optional[np.ndarray] = None) -> Frame:
        """Step 4: m3 = clipped, masked T_Back; m4 = encrypted loss record."""
        self._require_established()
        clipped = clip_to_range(t_back, self.config.grad_clip, self.config.frac_bits)
        return self._reply(clipped, losses)

    def send_scores(self, scores: np.ndarray) -> Frame:
        """Inference reply: masked per-window anomaly scores."""
        self._require_established()
        clipped = clip_to_range(scores, float("inf"), self.config.frac_bits)
        return self._reply(clipped, None)

    def _reply(self, values: np.ndarray, losses: Optional[np.ndarray]) -> Frame:
        self.counters.sent += 1
        counter = self.counters.sent
        m4 = self._seal(np.asarray(losses, dtype=np.float32), counter) if losses is not None else b""
        payload = encode_reply(Reply(m3=self._masked_words(values, counter), m4=m4))
        return self._sign(MsgType.SC2, counter, payload)
