"""Tests for the group, key agreement, signatures, KDF, codec, masking and key files."""

import hashlib
import os

import numpy as np
import pytest
from cryptography.hazmat.primitives.asymmetric import ec
from scipy.stats import chisquare

from grid_shield.crypto import (
    P256,
    TOY17,
    Direction,
    IntBlob,
    KeyPair,
    KeyStore,
    MaskStream,
    block_nonce,
    clip_to_range,
    decrypt_target,
    demask,
    dequantize,
    derive_session_keys,
    ecdh_shared,
    encrypt_target,
    kdf,
    load_keypair,
    mask,
    quantize,
    save_keypair,
    sign,
    signature_len,
    target_nonce,
    verify,
)
from grid_shield.crypto.curve import sqrt_mod
from grid_shield.errors import (
    ConfigurationError,
    ContractError,
    CryptoError,
    InvalidPointError,
    NonFiniteError,
)

# Multiples of G on the 19-point curve y^2 = x^3 + 2x + 2 over GF(17).
TOY_MULTIPLES = [
    (5, 1), (6, 3), (10, 6), (3, 1), (9, 16), (16, 13), (0, 6), (13, 7), (7, 6),
    (7, 11), (13, 10), (0, 11), (16, 4), (9, 1), (3, 16), (10, 11), (6, 14), (5, 16),
]

DIGEST = hashlib.sha256(b"frame header and payload").digest()


def _oracle_public(sk: int) -> tuple[int, int]:
    numbers = ec.derive_private_key(sk, ec.SECP256R1()).public_key().public_numbers()
    return numbers.x, numbers.y


class TestCurve:
    """Test cases for group arithmetic and point encoding."""

    def test_toy_multiples(self):
        """k * G walks the whole 19-element group."""
        for k, expected in enumerate(TOY_MULTIPLES, start=1):
            assert TOY17.mul_base(k) == expected
            assert TOY17.mul(k, TOY17.g) == expected
        assert TOY17.mul_base(19) is None

    def test_toy_addition(self):
        """Addition agrees with scalar multiplication and inverses cancel."""
        assert TOY17.add(TOY17.mul_base(4), TOY17.mul_base(7)) == TOY17.mul_base(11)
        assert TOY17.add(TOY17.g, TOY17.neg(TOY17.g)) is None
        assert TOY17.add(None, TOY17.g) == TOY17.g

    def test_p256_double_base(self):
        """2G matches the published P-256 value."""
        assert P256.mul_base(2) == (
            0x7CF27B188D034F7E8A52380304B51AC3C08969E277F21B35A60B48FC47669978,
            0x07775510DB8ED040293D9AC69F7430DBBA7DADE63CE982299E04B79D227873D1,
        )

    @pytest.mark.parametrize("sk", [1, 3, 0xDEADBEEF, P256.n - 1, 2 ** 200 + 12345])
    def test_p256_matches_reference(self, sk):
        """Public keys agree with an independent P-256 implementation."""
        assert P256.mul_base(sk) == _oracle_public(sk)
        assert P256.mul(sk, P256.g) == _oracle_public(sk)

    def test_point_encoding(self):
        """Compressed encodings decode back to the same point."""
        for point in TOY_MULTIPLES:
            assert TOY17.decode_point(TOY17.encode_point(point)) == point
        pk = P256.mul_base(77)
        encoded = P256.encode_point(pk)
        assert len(encoded) == 33
        assert P256.decode_point(encoded) == pk

    @pytest.mark.parametrize("data", [b"\x04\x05", b"\x02", b"\x02\x01", b"\x02\x11"])
    def test_decode_rejects(self, data):
        """Bad prefix, bad length, off-curve or out-of-range x are rejected."""
        with pytest.raises(InvalidPointError):
            TOY17.decode_point(data)

    def test_validate(self):
        """Identity and off-curve points are not valid public points."""
        with pytest.raises(InvalidPointError):
            TOY17.validate(None)
        with pytest.raises(InvalidPointError):
            TOY17.validate((1, 1))
        assert isinstance(InvalidPointError("x"), CryptoError)

    def test_sqrt_mod(self):
        """Square roots exist exactly for quadratic residues."""
        for p in (17, 13, 23):
            for v in range(1, p):
                root = sqrt_mod(v, p)
                residue = pow(v, (p - 1) // 2, p) == 1
                assert (root is not None) == residue
                if root is not None:
                    assert root * root % p == v

    def test_singular_curve_rejected(self):
        """A singular curve cannot be constructed."""
        from grid_shield.crypto.curve import CurveParams

        with pytest.raises(ContractError):
            CurveParams(name="bad", p=17, a=0, b=0, gx=0, gy=0, n=17)


class TestKeyAgreement:
    """Test cases for key pairs and ECDH."""

    def test_shared_point_agrees(self, client_keys, server_keys):
        """Both sides derive the same point."""
        assert ecdh_shared(client_keys.sk, server_keys.pk) == ecdh_shared(server_keys.sk, client_keys.pk)

    def test_shared_point_matches_reference(self, client_keys, server_keys):
        """The x coordinate matches an independent ECDH."""
        own = ec.derive_private_key(client_keys.sk, ec.SECP256R1())
        peer = ec.EllipticCurvePublicNumbers(*server_keys.pk, ec.SECP256R1()).public_key()
        expected = own.exchange(ec.ECDH(), peer)
        x, _ = ecdh_shared(client_keys.sk, server_keys.pk)
        assert x.to_bytes(32, "big") == expected

    def test_rejects_invalid_peer(self, client_keys):
        """Off-curve peer points are refused before use."""
        with pytest.raises(InvalidPointError):
            ecdh_shared(client_keys.sk, (1, 2))

    @pytest.mark.parametrize("sk", [0, P256.n])
    def test_rejects_bad_secret(self, sk):
        """Secret scalars must lie in [1, n - 1]."""
        with pytest.raises(ContractError):
            KeyPair.from_secret(sk)

    def test_generate_uses_entropy(self, entropy_factory):
        """The same entropy source gives the same key."""
        a = KeyPair.generate(P256, entropy_factory(b"k"))
        b = KeyPair.generate(P256, entropy_factory(b"k"))
        assert a.pk == b.pk
        assert P256.contains(a.pk)

    def test_secret_not_in_repr(self, client_keys):
        """The secret scalar stays out of repr."""
        assert hex(client_keys.sk)[2:] not in repr(client_keys).lower()


class TestKdf:
    """Test cases for key derivation."""

    def test_deterministic_and_separated(self, client_keys, server_keys):
        """Same inputs, same output; salt and context both separate keys."""
        shared = ecdh_shared(client_keys.sk, server_keys.pk)
        base = kdf(shared, b"salt", b"ctx")
        assert kdf(shared, b"salt", b"ctx") == base
        assert kdf(shared, b"salt2", b"ctx") != base
        assert kdf(shared, b"salt", b"ctx2") != base
        assert len(kdf(shared, b"salt", b"ctx", length=80)) == 80

    @pytest.mark.parametrize("length", [0, 255 * 32 + 1])
    def test_length_bounds(self, client_keys, length):
        """Output length must be in [1, 255 * 32]."""
        with pytest.raises(ContractError):
            kdf(client_keys.pk, b"s", b"c", length=length)

    def test_rejects_identity(self):
        """The identity is not a usable shared point."""
        with pytest.raises(InvalidPointError):
            kdf(None, b"s", b"c")

    def test_session_keys(self, client_keys, server_keys):
        """k_Enc and k_Mask differ and can be wiped."""
        keys = derive_session_keys(ecdh_shared(client_keys.sk, server_keys.pk), bytes(16))
        assert keys.k_enc != keys.k_mask
        assert len(keys.k_enc) == len(keys.k_mask) == 32
        keys.zeroize()
        assert keys.zeroized


class TestSchnorr:
    """Test cases for signatures."""

    def test_sign_verify(self, client_keys):
        """A fresh signature verifies and is deterministic."""
        sig = sign(client_keys.sk, DIGEST)
        assert len(sig) == signature_len() == 65
        assert sign(client_keys.sk, DIGEST) == sig
        assert verify(client_keys.pk, DIGEST, sig)

    def test_wrong_key_or_digest(self, client_keys, server_keys):
        """Another key or another digest fails."""
        sig = sign(client_keys.sk, DIGEST)
        assert not verify(server_keys.pk, DIGEST, sig)
        assert not verify(client_keys.pk, hashlib.sha256(b"other").digest(), sig)

    def test_bit_flips_fail(self, client_keys, rng):
        """Flipping any sampled bit of the signature breaks it."""
        sig = sign(client_keys.sk, DIGEST)
        for bit in map(int, rng.choice(len(sig) * 8, size=48, replace=False)):
            tampered = bytearray(sig)
            tampered[bit // 8] ^= 1 << (bit % 8)
            assert not verify(client_keys.pk, DIGEST, bytes(tampered))

    def test_malformed_input_is_false(self, client_keys):
        """Short signatures and digests are rejected without raising."""
        sig = sign(client_keys.sk, DIGEST)
        assert not verify(client_keys.pk, DIGEST, sig[:-1])
        assert not verify(client_keys.pk, DIGEST[:16], sig)
        assert not verify(None, DIGEST, sig)

    def test_toy_curve(self):
        """Signatures also work on the small test group."""
        keys = KeyPair.from_secret(7, TOY17)
        sig = sign(keys.sk, DIGEST, TOY17)
        assert verify(keys.pk, DIGEST, sig, TOY17)

    def test_bad_digest_length(self, client_keys):
        """Signing needs a 32-byte digest."""
        with pytest.raises(ContractError):
            sign(client_keys.sk, b"short")


class TestCodec:
    """Test cases for the fixed-point codec."""

    def test_known_words(self):
        """1.5 and -1.0 at 16 fractional bits."""
        blob = quantize(np.array([1.5, -1.0, 0.0]), 16)
        np.testing.assert_array_equal(blob.words, [98304, 0xFFFF0000, 0])
        assert blob.saturated == 0

    def test_dequantize_error_bound(self, rng):
        """Reading back is exact to half a quantum."""
        values = rng.uniform(-100, 100, size=(8, 5))
        back = dequantize(quantize(values, 16), np.float64)
        assert np.abs(back - values).max() <= 2.0 ** -17 + 1e-12
        assert back.shape == values.shape

    def test_saturation_is_counted(self):
        """Out-of-range values clamp and are counted."""
        blob = quantize(np.array([1e6, -1e6, 1.0]), 16)
        assert blob.saturated == 2
        back = dequantize(blob, np.float64)
        assert back[0] == pytest.approx((2 ** 31 - 1) / 2 ** 16)
        assert back[1] == -(2 ** 31) / 2 ** 16

    def test_clip_to_range(self):
        """Clipping uses the smaller of the clip and the representable range."""
        np.testing.assert_array_equal(clip_to_range(np.array([-20.0, 3.0, 20.0]), 8.0, 16), [-8.0, 3.0, 8.0])
        assert clip_to_range(np.array([1e9]), 1e12, 30)[0] == pytest.approx(2.0)

    def test_rejects_bad_input(self):
        """Non-finite values and bad frac_bits are refused."""
        with pytest.raises(NonFiniteError):
            quantize(np.array([np.nan]))
        with pytest.raises(ContractError):
            quantize(np.array([1.0]), 31)
        with pytest.raises(ContractError):
            IntBlob(shape=(2, 2), frac_bits=16, words=np.zeros(3, dtype=np.uint32))


class TestMask:
    """Test cases for the additive mask stream."""

    @pytest.fixture
    def stream(self):
        return MaskStream(bytes(range(32)), b"s" * 16)

    def test_mask_then_demask(self, stream, rng):
        """Demasking restores the exact words."""
        blob = quantize(rng.normal(size=(3, 7)))
        masked = mask(blob, stream, 5, Direction.CLIENT_TO_SERVER)
        assert masked.masked and not np.array_equal(masked.words, blob.words)
        restored = demask(masked, stream, 5, Direction.CLIENT_TO_SERVER)
        assert restored.same_bits(blob)

    def test_pads_are_unique(self, stream):
        """Counter and direction each select a different pad."""
        a = stream.pad(1, Direction.CLIENT_TO_SERVER, 64)
        assert not np.array_equal(a, stream.pad(2, Direction.CLIENT_TO_SERVER, 64))
        assert not np.array_equal(a, stream.pad(1, Direction.SERVER_TO_CLIENT, 64))
        np.testing.assert_array_equal(a, stream.pad(1, Direction.CLIENT_TO_SERVER, 64))
        np.testing.assert_array_equal(a[:10], stream.pad(1, Direction.CLIENT_TO_SERVER, 10))

    def test_session_separates_streams(self):
        """Different session ids give different pads under one key."""
        key = bytes(range(32))
        a = MaskStream(key, b"a" * 16).pad(0, 0, 8)
        b = MaskStream(key, b"b" * 16).pad(0, 0, 8)
        assert not np.array_equal(a, b)

    def test_disabled_stream_is_zero(self):
        """Masking disabled leaves words unchanged."""
        stream = MaskStream(bytes(32), bytes(16), enabled=False)
        assert not stream.pad(3, 1, 9).any()

    def test_masked_blob_cannot_be_read(self, stream):
        """Dequantizing masked words is refused, as is masking twice."""
        masked = mask(quantize(np.ones(4)), stream, 0, 0)
        with pytest.raises(ContractError):
            dequantize(masked)
        with pytest.raises(ContractError):
            mask(masked, stream, 1, 0)

    def test_masked_words_look_uniform(self, stream, rng):
        """Masked words spread evenly over 256 top-byte buckets and track nothing of the input."""
        blob = quantize(rng.normal(size=1 << 16))
        masked = mask(blob, stream, 11, Direction.CLIENT_TO_SERVER)
        _assert_hidden(blob, masked, significance=0.001)

    def test_block_nonce_layout(self):
        """counter | direction | zero padding | block."""
        nonce = block_nonce(0x0102030405060708, 1, 9)
        assert nonce == bytes.fromhex("0102030405060708") + b"\x01\x00\x00\x00" + b"\x00\x00\x00\x09"
        with pytest.raises(ContractError):
            block_nonce(2 ** 64, 0)

    def test_short_key(self):
        """k_Mask must be 32 bytes."""
        with pytest.raises(ContractError):
            MaskStream(bytes(16), bytes(16))


def _assert_hidden(plain: IntBlob, masked: IntBlob, significance: float) -> None:
    counts = np.bincount((masked.words >> 24).astype(np.int64), minlength=256)
    assert chisquare(counts).pvalue > significance
    corr = np.corrcoef(masked.words.astype(np.float64), plain.words.astype(np.float64))[0, 1]
    assert abs(corr) < 0.05


@pytest.mark.slow
def test_statistical_hiding_at_scale(rng):
    """A million masked words pass the uniformity and correlation checks."""
    stream = MaskStream(hashlib.sha256(b"hiding").digest(), b"h" * 16)
    blob = quantize(rng.normal(size=1_000_000))
    _assert_hidden(blob, mask(blob, stream, 1, Direction.CLIENT_TO_SERVER), significance=0.01)


@pytest.mark.slow
def test_mask_round_trip_at_scale(rng):
    """Demasking is bit-exact for many random blobs."""
    stream = MaskStream(bytes(range(32)), bytes(16))
    for counter in range(1, 2001):
        blob = quantize(rng.normal(size=int(rng.integers(1, 1000))) * 100.0)
        masked = mask(blob, stream, counter, counter % 2)
        assert demask(masked, stream, counter, counter % 2).same_bits(blob)


class TestTargetEncryption:
    """Test cases for target window encryption."""

    def test_round_trip(self):
        """Decryption restores the plaintext."""
        key = bytes(range(32))
        nonce = target_nonce(4, Direction.CLIENT_TO_SERVER)
        plaintext = b"grid readings" * 10
        ciphertext = encrypt_target(key, nonce, plaintext)
        assert ciphertext != plaintext and len(ciphertext) == len(plaintext)
        assert decrypt_target(key, nonce, ciphertext) == plaintext

    def test_nonce_per_message(self):
        """Different counters give different ciphertexts."""
        key = bytes(range(32))
        a = encrypt_target(key, target_nonce(1, 0), bytes(32))
        b = encrypt_target(key, target_nonce(2, 0), bytes(32))
        assert a != b

    def test_short_key(self):
        """Keys shorter than 16 bytes are refused."""
        with pytest.raises(ContractError):
            encrypt_target(bytes(8), target_nonce(0, 0), b"x")


class TestKeyFiles:
    """Test cases for key files and the registry."""

    def test_keypair_file_round_trip(self, client_keys, temp_data_dir):
        """A saved key loads back to the same pair."""
        path = os.path.join(temp_data_dir, "keys", "client.key")
        save_keypair(client_keys, path)
        assert load_keypair(path) == client_keys

    def test_missing_or_bad_key_file(self, temp_data_dir):
        """Missing files and non-hex content raise ConfigurationError."""
        path = os.path.join(temp_data_dir, "bad.key")
        with pytest.raises(ConfigurationError):
            load_keypair(path)
        with open(path, "w", encoding="utf-8") as f:
            f.write("not hex\n")
        with pytest.raises(ConfigurationError):
            load_keypair(path)

    def test_registry_persists(self, client_keys, server_keys, temp_data_dir):
        """Registered keys survive reopening the registry."""
        path = os.path.join(temp_data_dir, "registry.csv")
        store = KeyStore(path)
        store.register("server", server_keys.pk)
        store.register("client", client_keys.pk)
        reopened = KeyStore(path)
        assert reopened.parties() == ["client", "server"]
        assert reopened.lookup("server") == server_keys.pk
        assert reopened.lookup("nobody") is None

    def test_registry_rejects_bad_entries(self, client_keys, temp_data_dir):
        """Bad party ids and corrupt lines are configuration errors."""
        path = os.path.join(temp_data_dir, "registry.csv")
        store = KeyStore(path)
        with pytest.raises(ConfigurationError):
            store.register("a,b", client_keys.pk)
        with open(path, "w", encoding="utf-8") as f:
            f.write("client,zz\n")
        with pytest.raises(ConfigurationError):
            KeyStore(path)


@pytest.mark.slow
def test_session_keys_differ_in_about_half_their_bits(rng):
    """k_Enc and k_Mask look independent across 1000 random shared secrets."""
    differing = []
    for _ in range(1000):
        secret = int.from_bytes(rng.bytes(32), "big") % (P256.n - 1) + 1
        keys = derive_session_keys(P256.mul_base(secret), rng.bytes(16))
        xor = int.from_bytes(keys.k_enc, "big") ^ int.from_bytes(keys.k_mask, "big")
        differing.append(bin(xor).count("1"))
    differing = np.array(differing)
    assert np.mean(differing >= 100) >= 0.99
    assert differing.min() >= 80
    assert 120 <= differing.mean() <= 136
