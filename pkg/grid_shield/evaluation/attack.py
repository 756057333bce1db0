"""Reconstruction attack on intercepted intermediate tensors.

The attacker reads m1 off CS2 frames exactly as they cross the wire,
interprets the words as plain fixed-point values, and fits a small per-token
decoder that maps each T_Mid token back to the raw channel vector of the
step it encodes. It is handed a paired auxiliary set for training, which is
the strongest position a passive eavesdropper can be given.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

from grid_shield.data.windows import WindowSet
from grid_shield.errors import ConfigurationError, ContractError
from grid_shield.evaluation.metrics import r2
from grid_shield.model.optim import Adam
from grid_shield.model.params import ParamSet
from grid_shield.protocol.frame import Frame, MsgType
from grid_shield.protocol.transport import Transport
from grid_shield.protocol.wire import decode_blob, decode_intermediate
from grid_shield.splitlearn.engine import handshake
from grid_shield.splitlearn.parties import SplitClient
from grid_shield.tensor import Tape, Tensor, add, gelu, matmul, mean, mul, sub

logger = logging.getLogger(__name__)

Mode = Literal["plain", "masked"]
MIN_AUXILIARY_PAIRS = 100

# One intercepted CS2 frame and the raw windows it was computed from.
Interception = tuple[bytes, np.ndarray]


@dataclass
class AttackConfig:
    hidden: int = 64
    epochs: int = 60
    batch_tokens: int = 512
    lr: float = 5e-3
    holdout: float = 0.3
    stride: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.hidden, self.epochs, self.batch_tokens, self.stride) < 1:
            raise ConfigurationError("attack hidden, epochs, batch_tokens and stride must be positive")
        if not 0.0 < self.holdout < 1.0:
            raise ConfigurationError(f"attack holdout must be in (0, 1), got {self.holdout}")
        if self.lr <= 0:
            raise ConfigurationError("attack learning rate must be > 0")

    def to_dict(self) -> dict:
        return {
            "hidden": self.hidden,
            "epochs": self.epochs,
            "batch_tokens": self.batch_tokens,
            "lr": self.lr,
            "holdout": self.holdout,
            "stride": self.stride,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AttackConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class AttackReport:
    """Held-out reconstruction quality; ``real``/``recon`` are [N, S, F]."""

    mode: Mode
    per_sample_r2: np.ndarray
    real: np.ndarray
    recon: np.ndarray
    auxiliary_pairs: int
    warnings: list[str] = field(default_factory=list)

    @property
    def mean_r2(self) -> float:
        return float(np.mean(self.per_sample_r2)) if self.per_sample_r2.size else float("nan")

    def trace(self, sample: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Per-step channel mean of one held-out window: (real, reconstructed)."""
        return self.real[sample].mean(axis=-1), self.recon[sample].mean(axis=-1)

    def summary(self) -> str:
        lines = [
            f"mode: {self.mode}",
            f"auxiliary pairs: {self.auxiliary_pairs}",
            f"held-out samples: {self.per_sample_r2.size}",
            f"mean R2: {self.mean_r2:.4f}",
        ]
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def wire_tokens(frame_bytes: bytes) -> np.ndarray:
    """Token features [B, S, D] as an eavesdropper reads them from a CS2 frame.

    The words are taken at face value as signed fixed point; the class token
    is dropped so token i lines up with input step i.
    """
    frame = Frame.decode(frame_bytes)
    if frame.msg_type is not MsgType.CS2:
        raise ContractError(f"expected a CS2 frame, got {frame.msg_type.name}")
    blob = decode_blob(decode_intermediate(frame.payload).m1, masked=False)
    values = blob.words.view(np.int32).astype(np.float64) / float(2 ** blob.frac_bits)
    return values.reshape(blob.shape)[:, 1:, :]


def paired_samples(intercepted: Iterable[Interception]) -> tuple[np.ndarray, np.ndarray]:
    """Stack the wire tokens and raw windows of intercepted frames."""
    tokens, raws = [], []
    for payload, raw in intercepted:
        t = wire_tokens(payload)
        raw = np.asarray(raw, dtype=np.float64)
        if raw.shape[:2] != t.shape[:2]:
            raise ContractError(f"payload tokens {t.shape[:2]} do not match raw windows {raw.shape[:2]}")
        tokens.append(t)
        raws.append(raw)
    if not tokens:
        raise ContractError("no intercepted frames")
    return np.concatenate(tokens), np.concatenate(raws)


class TokenDecoder:
    """Per-token MLP: token features -> raw channel vector."""

    def __init__(self, in_dim: int, out_dim: int, config: AttackConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.in_mean = np.zeros(in_dim)
        self.in_std = np.ones(in_dim)

        def glorot(fan_in: int, fan_out: int) -> Tensor:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return Tensor(rng.uniform(-limit, limit, (fan_in, fan_out)).astype(np.float32))

        self.params = ParamSet(
            {
                "w1": glorot(in_dim, config.hidden),
                "b1": Tensor(np.zeros(config.hidden, dtype=np.float32)),
                "w2": glorot(config.hidden, out_dim),
                "b2": Tensor(np.zeros(out_dim, dtype=np.float32)),
            }
        )

    def _standardize(self, tokens: np.ndarray) -> np.ndarray:
        return ((tokens - self.in_mean) / self.in_std).astype(np.float32)

    def _forward(self, flat: Tensor) -> Tensor:
        p = self.params
        return add(matmul(gelu(add(matmul(flat, p["w1"]), p["b1"])), p["w2"]), p["b2"])

    def fit(self, tokens: np.ndarray, raw: np.ndarray) -> list[float]:
        flat_in = tokens.reshape(-1, tokens.shape[-1])
        flat_out = raw.reshape(-1, raw.shape[-1]).astype(np.float32)
        self.in_mean = flat_in.mean(axis=0)
        self.in_std = flat_in.std(axis=0) + 1e-8
        inputs = self._standardize(flat_in)

        rng = np.random.default_rng(self.config.seed)
        opt = Adam(self.config.lr)
        history = []
        for _ in range(self.config.epochs):
            order = rng.permutation(len(inputs))
            losses = []
            for begin in range(0, len(order), self.config.batch_tokens):
                idx = order[begin:begin + self.config.batch_tokens]
                self.params.zero_grad()
                with Tape() as tape:
                    diff = sub(self._forward(Tensor(inputs[idx])), Tensor(flat_out[idx]))
                    loss = mean(mul(diff, diff))
                tape.backward(loss)
                opt.step(self.params)
                losses.append(loss.item())
            history.append(float(np.mean(losses)))
        return history

    def predict(self, tokens: np.ndarray) -> np.ndarray:
        flat = self._standardize(tokens.reshape(-1, tokens.shape[-1]))
        out = self._forward(Tensor(flat)).data.astype(np.float64)
        return out.reshape(tokens.shape[:-1] + (out.shape[-1],))


@dataclass
class Attacker:
    decoder: TokenDecoder
    mode: Mode
    auxiliary_pairs: int
    warnings: list[str] = field(default_factory=list)

    def evaluate(self, intercepted: Sequence[Interception]) -> AttackReport:
        tokens, raw = paired_samples(intercepted)
        return self.report(tokens, raw)

    def report(self, tokens: np.ndarray, raw: np.ndarray) -> AttackReport:
        recon = self.decoder.predict(tokens)
        scores = []
        for truth, guess in zip(raw, recon):
            if np.var(truth) == 0.0:
                continue
            scores.append(r2(truth, guess))
        return AttackReport(
            mode=self.mode,
            per_sample_r2=np.asarray(scores),
            real=raw,
            recon=recon,
            auxiliary_pairs=self.auxiliary_pairs,
            warnings=list(self.warnings),
        )


def fit_attacker(
    tokens: np.ndarray, raw: np.ndarray, mode: Mode, config: Optional[AttackConfig] = None
) -> Attacker:
    config = config or AttackConfig()
    warnings = []
    if len(tokens) < MIN_AUXILIARY_PAIRS:
        warnings.append(
            f"auxiliary set has {len(tokens)} pairs, fewer than {MIN_AUXILIARY_PAIRS}; R2 is unreliable"
        )
        logger.warning(warnings[-1])
    decoder = TokenDecoder(tokens.shape[-1], raw.shape[-1], config)
    history = decoder.fit(tokens, raw)
    logger.info("Attacker (%s) trained on %d pairs, final loss %.5f", mode, len(tokens), history[-1])
    return Attacker(decoder=decoder, mode=mode, auxiliary_pairs=len(tokens), warnings=warnings)


def reconstruction_attack(
    intercepted: Sequence[Interception], mode: Mode, config: Optional[AttackConfig] = None
) -> AttackReport:
    """Train on an auxiliary split of ``intercepted`` and score the rest."""
    if mode not in ("plain", "masked"):
        raise ContractError(f"unknown attack mode {mode!r}")
    config = config or AttackConfig()
    tokens, raw = paired_samples(intercepted)
    if len(tokens) < 2:
        raise ContractError("need at least two intercepted windows")
    order = np.random.default_rng(config.seed).permutation(len(tokens))
    held = max(1, int(round(len(tokens) * config.holdout)))
    held_idx, aux_idx = order[:held], order[held:]
    attacker = fit_attacker(tokens[aux_idx], raw[aux_idx], mode, config)
    report = attacker.report(tokens[held_idx], raw[held_idx])
    logger.info("Attack (%s): mean R2 %.4f over %d held-out windows", mode, report.mean_r2, held)
    return report


async def intercept(
    client: SplitClient, transport: Transport, windows: WindowSet, batch_size: int = 32
) -> list[Interception]:
    """Run inference requests and keep each CS2 frame with its raw windows."""
    if not client.session.established:
        await handshake(client, transport)
    captured: list[Interception] = []
    for batch in windows.batches(batch_size):
        request = client.infer_request(batch.x, batch.y_window)
        client.scores(await transport.exchange(request))
        captured.append((request, batch.x))
    return captured
