"""Known-answer tests for the benchmark ciphers and the benchmark itself."""

import numpy as np
import pytest

from grid_shield.crypto import Simon64, Speck64, aes_ecb_block, bench_ciphers
from grid_shield.crypto.bench import AES_CTR, FHE, MASK_ONLINE
from grid_shield.crypto.ciphers import key_words_from_bytes
from grid_shield.errors import ContractError

KEY_WORDS = (0x1B1A1918, 0x13121110, 0x0B0A0908, 0x03020100)


class TestSimon:
    """Simon64/128 against the designers' test vector."""

    def test_encrypt_vector(self):
        """656b696c 20646e75 -> 44c8fc20 b9dfa07a."""
        assert Simon64(KEY_WORDS).encrypt_block(0x656B696C, 0x20646E75) == (0x44C8FC20, 0xB9DFA07A)

    def test_decrypt_vector(self):
        """Decryption inverts the vector."""
        assert Simon64(KEY_WORDS).decrypt_block(0x44C8FC20, 0xB9DFA07A) == (0x656B696C, 0x20646E75)


class TestSpeck:
    """Speck64/128 against the designers' test vector."""

    def test_encrypt_vector(self):
        """3b726574 7475432d -> 8c6fa548 454e028b."""
        assert Speck64(KEY_WORDS).encrypt_block(0x3B726574, 0x7475432D) == (0x8C6FA548, 0x454E028B)

    def test_decrypt_vector(self):
        """Decryption inverts the vector."""
        assert Speck64(KEY_WORDS).decrypt_block(0x8C6FA548, 0x454E028B) == (0x3B726574, 0x7475432D)


class TestAes:
    """AES-128 against FIPS-197."""

    def test_fips197_vector(self):
        """Appendix C.1 example."""
        key = bytes(range(16))
        block = bytes.fromhex("00112233445566778899aabbccddeeff")
        assert aes_ecb_block(key, block).hex() == "69c4e0d86a7b0430d8cdb78070b4c55a"


class TestCtr:
    """Test cases for the word-cipher CTR mode."""

    @pytest.mark.parametrize("cipher_cls", [Simon64, Speck64])
    def test_ctr_inverts(self, cipher_cls, rng):
        """Applying the keystream twice restores the data, including a partial block."""
        cipher = cipher_cls(KEY_WORDS)
        data = rng.integers(0, 256, 101, dtype=np.uint8).tobytes()
        once = cipher.ctr(data, 42)
        assert once != data
        assert cipher.ctr(once, 42) == data

    def test_key_words_from_bytes(self):
        """Bytes map to big-endian words, most significant first."""
        assert key_words_from_bytes(bytes.fromhex("1b1a1918131211100b0a090803020100")) == KEY_WORDS
        with pytest.raises(ContractError):
            key_words_from_bytes(bytes(8))

    def test_bad_key(self):
        """A key is exactly four 32-bit words."""
        with pytest.raises(ContractError):
            Simon64((1, 2, 3))


class TestBench:
    """Test cases for the cipher benchmark."""

    def test_table_rows(self):
        """Every scheme gets a row; FHE is listed but not measured."""
        table = bench_ciphers(4096, runs=1)
        names = [row.name for row in table.rows]
        assert names[:3] == [MASK_ONLINE, "mask pad derivation", AES_CTR]
        assert "Simon64/128-CTR" in names and "Speck64/128-CTR" in names
        assert table.row(FHE).median_s is None
        assert all(row.median_s > 0 for row in table.rows if row.name != FHE)

    def test_frame_and_text(self):
        """The table renders as a frame and as text."""
        table = bench_ciphers(2048, runs=1)
        frame = table.to_frame()
        assert list(frame.columns) == ["name", "median_s", "mib_per_s", "note"]
        assert len(frame) == len(table.rows)
        assert "2048 bytes" in table.format()

    def test_payload_too_small(self):
        """Payloads below 1 KiB are refused."""
        with pytest.raises(ContractError):
            bench_ciphers(100)

    @pytest.mark.slow
    def test_mask_beats_aes_on_one_mib(self):
        """Online masking of 1 MiB is no slower than AES-128-CTR, median of 9 runs."""
        table = bench_ciphers(1024 * 1024, runs=9)
        assert table.mask_beats_aes, table.format()
