"""Crypto package - group, agreement, signatures, KDF, masking and baselines."""

from grid_shield.crypto.curve import CURVES, P256, TOY17, CurveParams, Point
from grid_shield.crypto.ecdh import KeyPair, ecdh_shared
from grid_shield.crypto.kdf import SessionKeys, derive_session_keys, kdf
from grid_shield.crypto.schnorr import sign, signature_len, verify
from grid_shield.crypto.codec import IntBlob, clip_to_range, dequantize, quantize
from grid_shield.crypto.mask import Direction, MaskStream, block_nonce, demask, mask
from grid_shield.crypto.target import decrypt_target, encrypt_target, target_nonce
from grid_shield.crypto.ciphers import Simon64, Speck64, aes_ctr, aes_ecb_block
from grid_shield.crypto.bench import BenchTable, bench_ciphers
from grid_shield.crypto.keystore import KeyStore, load_keypair, save_keypair

__all__ = [
    "CURVES",
    "P256",
    "TOY17",
    "CurveParams",
    "Point",
    "KeyPair",
    "ecdh_shared",
    "SessionKeys",
    "derive_session_keys",
    "kdf",
    "sign",
    "verify",
    "signature_len",
    "IntBlob",
    "quantize",
    "dequantize",
    "clip_to_range",
    "Direction",
    "MaskStream",
    "block_nonce",
    "mask",
    "demask",
    "encrypt_target",
    "decrypt_target",
    "target_nonce",
    "Simon64",
    "Speck64",
    "aes_ctr",
    "aes_ecb_block",
    "BenchTable",
    "bench_ciphers",
    "KeyStore",
    "load_keypair",
    "save_keypair",
]
