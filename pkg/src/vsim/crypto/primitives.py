"""Hashing, key derivation, DH, public-key encryption, AEAD, AES-CBC, and
plain signatures.

Symmetric primitives are standard constructions backed by hashlib/hmac and
the cryptography package; the asymmetric operations run over the prime-order
group in :mod:`vsim.crypto.group`. Chosen suite: SHA-256, HKDF-SHA256,
ChaCha20-Poly1305 (12-byte nonces), AES-256-CBC with pad-byte-equals-pad-length
padding, and deterministic Schnorr signatures.
"""

from __future__ import annotations

import hashlib
import hmac as hmac_mod
import struct

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

from ..errors import (
    AuthFailure,
    DecryptFailure,
    InvalidPoint,
    KeyLengthError,
    LengthError,
    PaddingError,
)
from ..rng import Rng, SYSTEM_RNG
from . import group
from .group import GENERATOR, L

HASH_LEN = 32
AEAD_NONCE_LEN = 12
AEAD_TAG_LEN = 16
SIG_LEN = 64

_PKE_LABEL = b"vsim-pke"
_SIG_NONCE = b"vsim-sig-nonce"
_SIG_CHALLENGE = b"vsim-sig-challenge"


def hash_bytes(data: bytes) -> bytes:
    """SHA-256."""
    return hashlib.sha256(data).digest()


# -- key derivation -----------------------------------------------------------

def kdf(input_key_material: bytes, context_label: bytes, out_len: int) -> bytes:
    """HKDF-SHA256 (extract with a zero salt, then expand with the label)."""
    if out_len > 255 * HASH_LEN:
        raise LengthError(f"kdf output limited to {255 * HASH_LEN} bytes")
    prk = hmac_mod.new(bytes(HASH_LEN), input_key_material, hashlib.sha256).digest()
    okm = b""
    block = b""
    counter = 1
    while len(okm) < out_len:
        block = hmac_mod.new(prk, block + context_label + bytes([counter]), hashlib.sha256).digest()
        okm += block
        counter += 1
    return okm[:out_len]


# -- Diffie-Hellman -----------------------------------------------------------

def dh_keygen(rng: Rng = SYSTEM_RNG) -> tuple[int, bytes]:
    """Fresh ephemeral keypair: (secret scalar, encoded public element)."""
    esk = rng.scalar(L)
    return esk, (GENERATOR * esk).encode()


def dh(esk: int, peer_epk: bytes) -> bytes:
    """Shared secret: hash of the DH point. Symmetric in the two keypairs."""
    peer = group.decode(peer_epk)  # InvalidPoint on malformed or identity keys
    return hash_bytes((peer * esk).encode())


# -- AEAD ----------------------------------------------------------------------

def aead_seal(key: bytes, nonce: bytes, associated_data: bytes, plaintext: bytes) -> bytes:
    if len(key) != 32:
        raise KeyLengthError("aead key must be 32 bytes")
    if len(nonce) != AEAD_NONCE_LEN:
        raise KeyLengthError("aead nonce must be 12 bytes")
    return ChaCha20Poly1305(key).encrypt(nonce, plaintext, associated_data)


def aead_open(key: bytes, nonce: bytes, associated_data: bytes, ciphertext: bytes) -> bytes:
    if len(key) != 32:
        raise KeyLengthError("aead key must be 32 bytes")
    if len(nonce) != AEAD_NONCE_LEN:
        raise KeyLengthError("aead nonce must be 12 bytes")
    try:
        return ChaCha20Poly1305(key).decrypt(nonce, ciphertext, associated_data)
    except InvalidTag:
        raise AuthFailure("aead open failed") from None


# -- public-key encryption (ephemeral-static DH + KDF + AEAD) ------------------

def pk_encrypt(recipient_pk: bytes, plaintext: bytes, rng: Rng = SYSTEM_RNG) -> bytes:
    """Seal to a public element; output = one-shot ephemeral pk || aead blob."""
    esk, epk = dh_keygen(rng)
    key = kdf(dh(esk, recipient_pk), _PKE_LABEL + epk + recipient_pk, 32)
    return epk + aead_seal(key, bytes(AEAD_NONCE_LEN), b"", plaintext)


def pk_decrypt(recipient_sk: int, sealed: bytes) -> bytes:
    if len(sealed) < 32 + AEAD_TAG_LEN:
        raise DecryptFailure("sealed blob too short")
    epk, blob = sealed[:32], sealed[32:]
    recipient_pk = (GENERATOR * recipient_sk).encode()
    try:
        key = kdf(dh(recipient_sk, epk), _PKE_LABEL + epk + recipient_pk, 32)
        return aead_open(key, bytes(AEAD_NONCE_LEN), b"", blob)
    except (InvalidPoint, AuthFailure):
        raise DecryptFailure("public-key decryption failed") from None


# -- AES-256-CBC and CBC-MAC ----------------------------------------------------

def _check_cbc_args(key: bytes, iv: bytes) -> None:
    if len(key) != 32:
        raise KeyLengthError("cbc key must be exactly 32 bytes")
    if len(iv) != 16:
        raise KeyLengthError("cbc iv must be exactly 16 bytes")


def cbc_encrypt_256(key: bytes, iv: bytes, plaintext: bytes) -> bytes:
    """AES-256-CBC with deterministic padding (pad byte = pad length, 1..16)."""
    _check_cbc_args(key, iv)
    pad = 16 - (len(plaintext) % 16)
    padded = plaintext + bytes([pad]) * pad
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return enc.update(padded) + enc.finalize()


def cbc_decrypt_256(key: bytes, iv: bytes, ciphertext: bytes) -> bytes:
    _check_cbc_args(key, iv)
    if len(ciphertext) == 0 or len(ciphertext) % 16 != 0:
        raise PaddingError("ciphertext must be a positive multiple of the block size")
    dec = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    padded = dec.update(ciphertext) + dec.finalize()
    pad = padded[-1]
    if not 1 <= pad <= 16 or padded[-pad:] != bytes([pad]) * pad:
        raise PaddingError("bad padding")
    return padded[:-pad]


def cbc_mac_256(key: bytes, message: bytes) -> bytes:
    """Final CBC block over a zero IV; the 8-byte big-endian length prefix
    makes the MAC sound for variable-length input."""
    ct = cbc_encrypt_256(key, bytes(16), struct.pack(">Q", len(message)) + message)
    return ct[-16:]


# -- plain signatures (boot chain, issuer credentials) --------------------------

def sig_keygen(rng: Rng = SYSTEM_RNG) -> tuple[int, bytes]:
    sk = rng.scalar(L)
    return sk, (GENERATOR * sk).encode()


def sig_sign(sk: int, message: bytes) -> bytes:
    """Deterministic Schnorr signature: R(32) || z(32)."""
    msg_hash = hash_bytes(message)
    r = group.hash_to_scalar(group.scalar_to_bytes(sk), msg_hash, domain=_SIG_NONCE)
    R = GENERATOR * r
    pk = (GENERATOR * sk).encode()
    c = group.hash_to_scalar(R.encode(), pk, msg_hash, domain=_SIG_CHALLENGE)
    z = (r + c * sk) % L
    return R.encode() + group.scalar_to_bytes(z)


def sig_verify(pk: bytes, message: bytes, signature: bytes) -> bool:
    """True iff the signature verifies; never raises."""
    if len(signature) != SIG_LEN:
        return False
    try:
        R = group.decode(signature[:32], allow_identity=True)
        pub = group.decode(pk)
    except InvalidPoint:
        return False
    z = int.from_bytes(signature[32:], "big")
    if z >= L:
        return False
    c = group.hash_to_scalar(signature[:32], pk, hash_bytes(message), domain=_SIG_CHALLENGE)
    return GENERATOR * z == R + pub * c
