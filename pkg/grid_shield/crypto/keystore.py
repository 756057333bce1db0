"""Key files and the public-key registry.

Key file: the secret scalar, hex-encoded on one line.
Registry: one ``party_id,hex(compressed pk)`` line per party, standing in
for a trusted authority that vouches for public keys.
"""

from __future__ import annotations

import logging
from pathlib import Path
from threading import Lock
from typing import Optional, Union

from grid_shield.crypto.curve import P256, CurveParams
from grid_shield.crypto.ecdh import KeyPair
from grid_shield.errors import ConfigurationError, ContractError, CryptoError

logger = logging.getLogger(__name__)


def save_keypair(keypair: KeyPair, filepath: Union[str, Path]) -> None:
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    filepath.write_text(keypair.secret_hex() + "\n", encoding="utf-8")
    try:
        filepath.chmod(0o600)
    except OSError:
        logger.warning("Could not restrict permissions on %s", filepath)


def load_keypair(filepath: Union[str, Path], curve: CurveParams = P256) -> KeyPair:
    filepath = Path(filepath)
    if not filepath.exists():
        raise ConfigurationError(f"key file not found: {filepath}")
    text = filepath.read_text(encoding="utf-8").strip()
    try:
        sk = int(text, 16)
    except ValueError as e:
        raise ConfigurationError(f"{filepath} does not hold a hex scalar", cause=e) from e
    try:
        return KeyPair.from_secret(sk, curve)
    except ContractError as e:
        raise ConfigurationError(f"{filepath} holds an invalid scalar", cause=e) from e


class KeyStore:
    """In-memory view of a registry file, written back on every change."""

    def __init__(self, registry_file: Union[str, Path], curve: CurveParams = P256):
        self.registry_file = Path(registry_file)
        self.curve = curve
        self._keys: dict[str, tuple[int, int]] = {}
        self._lock = Lock()
        self._load()

    def _load(self) -> None:
        if not self.registry_file.exists():
            return
        text = self.registry_file.read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                party_id, pk_hex = line.split(",", 1)
                self._keys[party_id.strip()] = self.curve.decode_point(bytes.fromhex(pk_hex.strip()))
            except (ValueError, CryptoError) as e:
                raise ConfigurationError(
                    f"{self.registry_file}:{lineno}: bad registry entry", cause=e
                ) from e

    def _write(self) -> None:
        self.registry_file.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{pid},{self.curve.encode_point(pk).hex()}" for pid, pk in sorted(self._keys.items())]
        self.registry_file.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def register(self, party_id: str, pk: tuple[int, int]) -> None:
        if not party_id or "," in party_id or len(party_id.encode("utf-8")) > 255:
            raise ConfigurationError(f"invalid party id {party_id!r}")
        self.curve.validate(pk)
        with self._lock:
            self._keys[party_id] = pk
            self._write()

    def lookup(self, party_id: str) -> Optional[tuple[int, int]]:
        with self._lock:
            return self._keys.get(party_id)

    def parties(self) -> list[str]:
        with self._lock:
            return sorted(self._keys)
