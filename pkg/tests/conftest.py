"""Pytest fixtures for grid-shield tests."""

import hashlib
import tempfile
from typing import Callable

import numpy as np
import pytest

from grid_shield.crypto.curve import P256
from grid_shield.crypto.ecdh import KeyPair
from grid_shield.data.stats import NormStats
from grid_shield.data.synth import synth
from grid_shield.data.series import MeterSeries
from grid_shield.data.windows import WindowSet, windowize
from grid_shield.model.config import ModelConfig, TrainConfig
from grid_shield.protocol.session import ClientSession, ProtocolConfig, ServerSession


class CountingEntropy:
    """Deterministic byte source: SHA-256 of a label and a running counter."""

    def __init__(self, label: bytes = b"tests"):
        self.label = label
        self.counter = 0

    def __call__(self, n: int) -> bytes:
        out = b""
        while len(out) < n:
            out += hashlib.sha256(self.label + self.counter.to_bytes(8, "big")).digest()
            self.counter += 1
        return out[:n]


@pytest.fixture
def temp_data_dir():
    """Create a temporary data directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield tmpdir


@pytest.fixture
def entropy_factory() -> Callable[[bytes], CountingEntropy]:
    return CountingEntropy


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model() -> ModelConfig:
    """Small enough for finite differences and quick protocol runs."""
    return ModelConfig(
        feature_dim=3, d_model=8, heads=2, layers=2, split=1, mlp_ratio=2, max_seq=8, dis_layers=1
    )


@pytest.fixture
def tiny_train() -> TrainConfig:
    return TrainConfig(lambda_rec=1.0, lambda_adv=1.0, lr=1e-2, batch_size=4, seq_len=6, stride=2, seed=0)


@pytest.fixture
def client_keys() -> KeyPair:
    return KeyPair.from_secret(0x1234567890ABCDEF, P256)


@pytest.fixture
def server_keys() -> KeyPair:
    return KeyPair.from_secret(0xFEDCBA0987654321, P256)


@pytest.fixture
def registry(client_keys: KeyPair, server_keys: KeyPair) -> dict:
    return {"client": client_keys.pk, "server": server_keys.pk}


@pytest.fixture
def protocol_config() -> ProtocolConfig:
    return ProtocolConfig()


@pytest.fixture
def session_pair(client_keys, server_keys, registry, protocol_config, entropy_factory):
    """Unestablished client and server sessions with deterministic entropy."""
    client = ClientSession(
        "client", client_keys, registry, "server", protocol_config, entropy=entropy_factory(b"client")
    )
    server = ServerSession(
        "server", server_keys, registry, protocol_config, entropy=entropy_factory(b"server")
    )
    return client, server


@pytest.fixture
def established_pair(session_pair):
    client, server = session_pair
    reply = server.handshake_server_respond(client.handshake_client_init())
    client.receive(reply)
    return client, server


@pytest.fixture(scope="session")
def week_series() -> MeterSeries:
    return synth(profile_seed=7, days=7)


@pytest.fixture
def toy_windows(rng) -> WindowSet:
    """Bounded random windows for the tiny model: 16 windows, 6 steps, 3 features."""
    x = rng.uniform(-0.5, 0.5, size=(16, 6, 3)).astype(np.float32)
    y_window = np.tanh(x.sum(axis=-1, keepdims=True)).astype(np.float32) * 0.5
    return WindowSet(
        x=x,
        y=y_window[:, -1, :].copy(),
        y_window=y_window,
        end_index=np.arange(16) + 5,
        labels=np.zeros(16, dtype=bool),
    )


@pytest.fixture(scope="session")
def week_windows(week_series) -> tuple[WindowSet, NormStats]:
    norm = NormStats.fit(week_series)
    return windowize(week_series, 96, 24, norm), norm
