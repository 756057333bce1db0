"""The two parties of split training.

The client owns theta_Enc and the raw windows; the server owns theta_Dec and
theta_Dis. Neither object holds the other side's parameters, and everything
that crosses between them is an encoded frame.
"""

from __future__ import annotations

import logging
from pathlib import Path
from threading import Lock
from typing import Iterable, Optional, Union

import numpy as np

from grid_shield.crypto.curve import Entropy
from grid_shield.crypto.ecdh import KeyPair
from grid_shield.data.windows import Batch
from grid_shield.errors import (
    ConfigurationError,
    FrameParseError,
    GridShieldError,
    ProtocolError,
    TrainingDivergedError,
)
from grid_shield.model.checkpoint import load_checkpoint, load_prefixed, prefixed_tensors, save_checkpoint
from grid_shield.model.config import ModelConfig, TrainConfig
from grid_shield.model.optim import Optimizer, make_optimizer
from grid_shield.model.params import ModelParams, ParamSet, init_params
from grid_shield.model.trainer import (
    LossRecord,
    client_backward,
    client_forward,
    prediction_error,
    server_update,
)
from grid_shield.model.transformer import decode, encode
from grid_shield.protocol.frame import Frame, MsgType
from grid_shield.protocol.session import (
    NO_SESSION,
    ClientSession,
    Phase,
    ProtocolConfig,
    Registry,
    ReplayCache,
    ServerSession,
)
from grid_shield.protocol.transport import LoopbackTransport, Tamper
from grid_shield.protocol.wire import Abort, AbortCode, Purpose, encode_abort
from grid_shield.tensor import Tape, Tensor

logger = logging.getLogger(__name__)


class SplitClient:
    """Client party: encoder forward/backward around a ClientSession."""

    def __init__(
        self,
        session: ClientSession,
        enc: ParamSet,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        optimizer: Optional[Optimizer] = None,
    ):
        self.session = session
        self.enc = enc
        self.model_cfg = model_cfg
        self.train_cfg = train_cfg
        self.optimizer = optimizer or make_optimizer(train_cfg, train_cfg.lr)
        self.trained = False
        self.loss_log: list[LossRecord] = []
        self._pending: Optional[tuple[Tape, Tensor]] = None

    def hello(self) -> bytes:
        return self.session.handshake_client_init().encode()

    def welcome(self, data: bytes) -> None:
        self.session.receive(self._parse(data))

    def forward(self, batch: Batch) -> bytes:
        """Encode a batch and wrap T_Mid plus the target window into CS2."""
        tape, t_mid = client_forward(self.enc, batch.x, self.model_cfg)
        frame = self.session.send_intermediate(t_mid.data, batch.y_window, Purpose.TRAIN)
        self._pending = (tape, t_mid)
        return frame.encode()

    def backward(self, data: bytes) -> LossRecord:
        """Apply the server's T_Back to the pending forward pass."""
        if self._pending is None:
            raise ProtocolError("no forward pass is waiting for a gradient")
        reply = self.session.receive(self._parse(data))
        assert reply is not None
        tape, t_mid = self._pending
        self._pending = None
        if reply.values.shape != t_mid.shape:
            self.session.close()
            raise ProtocolError(f"T_Back shape {reply.values.shape} does not match T_Mid {t_mid.shape}")
        client_backward(self.enc, tape, t_mid, reply.values, self.optimizer)
        losses = reply.losses if reply.losses is not None else np.zeros(3, dtype=np.float32)
        record = LossRecord(*(float(v) for v in losses[:3]))
        self.loss_log.append(record)
        self.trained = True
        return record

    def infer_request(self, x: np.ndarray, y_window: np.ndarray) -> bytes:
        t_mid = encode(self.enc, Tensor(x, dtype=self.enc.dtype), self.model_cfg)
        return self.session.send_intermediate(t_mid.data, y_window, Purpose.INFER).encode()

    def scores(self, data: bytes) -> np.ndarray:
        reply = self.session.receive(self._parse(data))
        assert reply is not None
        return reply.values.reshape(-1).astype(np.float64)

    def _parse(self, data: bytes) -> Frame:
        try:
            return Frame.decode(data)
        except FrameParseError:
            self.session.close()
            raise

    def save(self, filepath: Union[str, Path]) -> None:
        """Checkpoint with only enc.* tensors."""
        save_checkpoint(prefixed_tensors(self.enc, "enc"), filepath)

    def load(self, filepath: Union[str, Path]) -> None:
        load_prefixed(self.enc, "enc", load_checkpoint(filepath))
        self.trained = True


class SplitServer:
    """Server party for one session: decoder and discriminator updates."""

    def __init__(
        self,
        session: ServerSession,
        dec: ParamSet,
        dis: ParamSet,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
    ):
        self.session = session
        self.dec = dec
        self.dis = dis
        self.model_cfg = model_cfg
        self.train_cfg = train_cfg
        self.dec_opt = make_optimizer(train_cfg, train_cfg.lr)
        self.dis_opt = make_optimizer(train_cfg, train_cfg.discriminator_lr)
        self.loss_log: list[LossRecord] = []

    def handle(self, data: bytes) -> bytes:
        try:
            frame = Frame.decode(data)
        except FrameParseError as e:
            self.session.close()
            return self.session.abort_frame(AbortCode.BAD_FRAME, str(e)).encode()
        return self.handle_frame(frame).encode()

    def handle_frame(self, frame: Frame) -> Frame:
        """Answer one verified-or-rejected frame; failures come back as ABORT.

        Any failure closes the session, so its keys are wiped before the
        ABORT leaves.
        """
        try:
            if self.session.phase is Phase.INIT:
                return self.session.handshake_server_respond(frame)
            msg = self.session.receive(frame)
            if msg.purpose is Purpose.INFER:
                return self.session.send_scores(self._score(msg.t_mid, msg.t_target))
            y_window = msg.t_target
            t_back, record = server_update(
                self.dec,
                self.dis,
                msg.t_mid,
                y_window[:, -1, :],
                y_window,
                self.model_cfg,
                self.train_cfg,
                self.dec_opt,
                self.dis_opt,
                step=len(self.loss_log),
            )
            self.loss_log.append(record)
            losses = np.array([record.l_rec, record.l_adv, record.l_dis], dtype=np.float32)
            return self.session.send_gradient(t_back, losses)
        except TrainingDivergedError as e:
            self.session.close()
            return self.session.abort_frame(AbortCode.DIVERGED, str(e))
        except ProtocolError as e:
            code = self.session.abort_code or AbortCode.STATE
            self.session.close()
            return self.session.abort_frame(code, str(e))
        except GridShieldError as e:
            logger.warning("Server step failed: %s", e)
            self.session.close()
            return self.session.abort_frame(AbortCode.INTERNAL, str(e))
        except Exception as e:
            logger.exception("Unexpected server failure")
            self.session.close()
            return self.session.abort_frame(AbortCode.INTERNAL, f"internal error: {type(e).__name__}")

    def _score(self, t_mid: np.ndarray, y_window: np.ndarray) -> np.ndarray:
        x_hat = decode(self.dec, Tensor(t_mid, dtype=self.dec.dtype), self.model_cfg).data
        return prediction_error(x_hat, y_window[:, -1, :])

    def save(self, filepath: Union[str, Path]) -> None:
        """Checkpoint with only dec.* and dis.* tensors."""
        save_checkpoint({**prefixed_tensors(self.dec, "dec"), **prefixed_tensors(self.dis, "dis")}, filepath)


class ServerEndpoint:
    """Routes frames to independent per-session SplitServers.

    Each new session starts from its own copy of the template decoder and
    discriminator, so concurrent clients never share mutable parameters.
    """

    def __init__(
        self,
        party_id: str,
        keypair: KeyPair,
        registry: Registry,
        params: ModelParams,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        protocol_cfg: Optional[ProtocolConfig] = None,
        entropy: Optional[Entropy] = None,
    ):
        self.party_id = party_id
        self.keypair = keypair
        self.registry = registry
        self.template_dec = params.dec
        self.template_dis = params.dis
        self.model_cfg = model_cfg
        self.train_cfg = train_cfg
        self.protocol_cfg = protocol_cfg or ProtocolConfig()
        self.entropy = entropy
        self.replay_cache = ReplayCache()
        self.servers: dict[bytes, SplitServer] = {}
        self.closed_sessions = 0
        self.latest: Optional[SplitServer] = None
        self._lock = Lock()

    @classmethod
    def from_checkpoint(
        cls,
        filepath: Union[str, Path],
        party_id: str,
        keypair: KeyPair,
        registry: Registry,
        params: ModelParams,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        protocol_cfg: Optional[ProtocolConfig] = None,
    ) -> "ServerEndpoint":
        tensors = load_checkpoint(filepath)
        if any(k.startswith("enc.") for k in tensors):
            raise ConfigurationError("server checkpoint must not contain encoder tensors")
        load_prefixed(params.dec, "dec", tensors)
        load_prefixed(params.dis, "dis", tensors)
        return cls(party_id, keypair, registry, params, model_cfg, train_cfg, protocol_cfg)

    def handle(self, data: bytes) -> bytes:
        try:
            frame = Frame.decode(data)
        except FrameParseError as e:
            return self._abort(NO_SESSION, AbortCode.BAD_FRAME, str(e))

        if frame.msg_type is MsgType.CS1:
            server = self._new_server()
            reply = server.handle_frame(frame)
            if server.session.established:
                with self._lock:
                    self.servers[frame.session_id] = server
                    self.latest = server
            return reply.encode()

        with self._lock:
            server = self.servers.get(frame.session_id)
        if server is None:
            return self._abort(frame.session_id, AbortCode.STATE, "unknown session")
        reply = server.handle_frame(frame)
        if server.session.phase is Phase.CLOSED:
            self.disconnect([frame.session_id])
        return reply.encode()

    def _new_server(self) -> SplitServer:
        session = ServerSession(
            self.party_id,
            self.keypair,
            self.registry,
            self.protocol_cfg,
            entropy=self.entropy,
            replay_cache=self.replay_cache,
        )
        return SplitServer(
            session, self.template_dec.copy(), self.template_dis.copy(), self.model_cfg, self.train_cfg
        )

    def _abort(self, session_id: bytes, code: AbortCode, reason: str) -> bytes:
        logger.warning("Rejecting frame: %s", reason)
        frame = Frame(
            msg_type=MsgType.ABORT,
            session_id=session_id,
            counter=0,
            payload=encode_abort(Abort(code=int(code), reason=reason)),
        )
        return frame.signed(self.keypair.sk, self.keypair.curve).encode()

    def disconnect(self, session_ids: Iterable[bytes]) -> None:
        """Close and forget the given sessions; their keys are zeroized."""
        with self._lock:
            for session_id in session_ids:
                server = self.servers.pop(session_id, None)
                if server is None:
                    continue
                server.session.close()
                self.closed_sessions += 1
                logger.info("Session %s closed", session_id.hex())

    def close(self) -> None:
        self.disconnect(list(self.servers))


def local_pair(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    protocol_cfg: Optional[ProtocolConfig] = None,
    params: Optional[ModelParams] = None,
    entropy: Optional[Entropy] = None,
    tamper: Optional[Tamper] = None,
) -> tuple[SplitClient, ServerEndpoint, LoopbackTransport]:
    """Client and server endpoint with fresh identities, joined in-process."""
    protocol_cfg = protocol_cfg or ProtocolConfig()
    curve = protocol_cfg.curve_params
    params = params or init_params(model_cfg, seed=train_cfg.seed)
    client_keys = KeyPair.generate(curve, entropy)
    server_keys = KeyPair.generate(curve, entropy)
    registry = {"client": client_keys.pk, "server": server_keys.pk}
    endpoint = ServerEndpoint(
        "server", server_keys, registry, params, model_cfg, train_cfg, protocol_cfg, entropy=entropy
    )
    session = ClientSession("client", client_keys, registry, "server", protocol_cfg, entropy)
    client = SplitClient(session, params.enc, model_cfg, train_cfg)
    return client, endpoint, LoopbackTransport(endpoint.handle, tamper=tamper)
