"""Simulated TEE: measured enclave loading and sealed persistence.

Everything outside this module sees only sealed bytes and attestation
outputs; the sealing key binds ciphertexts to both the device root secret
and the enclave measurement, so a blob sealed on one device or under one
binary cannot be opened on another.

Sealed blob layout (version 0x01):

    magic "VSIM"(4) || version(1) || iv(16) || ciphertext || mac(16)

with mac = cbc_mac_256(sealing_key, magic || version || iv || ciphertext)
and ciphertext = AES-256-CBC under a key derived from the sealing key.
Unsealing verifies the MAC before interpreting the header bytes, so any
single-bit tamper anywhere in the blob reports SealTamper; BadHeader is
reserved for blobs that do not even parse structurally.
"""

from __future__ import annotations

import hmac
import os
from dataclasses import dataclass

from .attestation import Measurement, measure_binary, parse_boot_manifest, verify_boot_chain
from .crypto.groupsig import MemberPrivateKey
from .crypto.primitives import cbc_decrypt_256, cbc_encrypt_256, cbc_mac_256, kdf
from .errors import (
    BadHeader,
    BootChainBroken,
    IoError,
    PaddingError,
    SealTamper,
    VersionUnsupported,
    WidthError,
)
from .rng import Rng, SYSTEM_RNG

SEAL_MAGIC = b"VSIM"
SEAL_VERSION = 1
_HEADER_LEN = 4 + 1 + 16
_MIN_BLOB_LEN = _HEADER_LEN + 16 + 16  # one ciphertext block plus the MAC


@dataclass(frozen=True, repr=False)
class EnclaveContext:
    """Loaded enclave identity: measurement plus device-bound key material.

    The member key and derived keys stay inside this object; there is no
    serialization path for them.
    """

    measurement: Measurement
    device_root_secret: bytes
    member_key: MemberPrivateKey
    sealing_key: bytes

    def __repr__(self) -> str:
        return f"EnclaveContext(measurement={self.measurement.digest.hex()[:16]}...)"


def derive_sealing_key(device_root_secret: bytes, measurement: Measurement) -> bytes:
    return kdf(device_root_secret, b"seal" + measurement.digest, 32)


def load_enclave(
    image: bytes,
    device_root_secret: bytes,
    member_key: MemberPrivateKey,
    root_pk: bytes,
    boot_manifest: bytes,
) -> EnclaveContext:
    """Verify the boot chain, measure the image, derive the sealing key."""
    if len(device_root_secret) != 32:
        raise WidthError("device root secret must be 32 bytes")
    chain = parse_boot_manifest(boot_manifest, root_pk)
    broken = verify_boot_chain(root_pk, chain)
    if broken is not None:
        raise BootChainBroken(broken)
    measurement = measure_binary(image)
    return EnclaveContext(
        measurement=measurement,
        device_root_secret=device_root_secret,
        member_key=member_key,
        sealing_key=derive_sealing_key(device_root_secret, measurement),
    )


@dataclass(frozen=True)
class SealedBlob:
    magic: bytes
    version: int
    iv: bytes
    ciphertext: bytes
    mac: bytes

    def to_bytes(self) -> bytes:
        return self.magic + bytes([self.version]) + self.iv + self.ciphertext + self.mac

    @classmethod
    def from_bytes(cls, data: bytes) -> "SealedBlob":
        if len(data) < _MIN_BLOB_LEN:
            raise BadHeader("blob too short")
        ct_len = len(data) - _HEADER_LEN - 16
        if ct_len % 16 != 0:
            raise BadHeader("ciphertext not block aligned")
        return cls(
            magic=data[:4],
            version=data[4],
            iv=data[5:_HEADER_LEN],
            ciphertext=data[_HEADER_LEN : _HEADER_LEN + ct_len],
            mac=data[_HEADER_LEN + ct_len :],
        )


def _blob_mac(sealing_key: bytes, magic: bytes, version: int, iv: bytes, ciphertext: bytes) -> bytes:
    return cbc_mac_256(sealing_key, magic + bytes([version]) + iv + ciphertext)


def seal(ctx: EnclaveContext, plaintext: bytes, rng: Rng = SYSTEM_RNG) -> SealedBlob:
    iv = rng.bytes(16)
    enc_key = kdf(ctx.sealing_key, b"seal-enc", 32)
    ciphertext = cbc_encrypt_256(enc_key, iv, plaintext)
    mac = _blob_mac(ctx.sealing_key, SEAL_MAGIC, SEAL_VERSION, iv, ciphertext)
    return SealedBlob(SEAL_MAGIC, SEAL_VERSION, iv, ciphertext, mac)


def unseal(ctx: EnclaveContext, blob: SealedBlob) -> bytes:
    expected = _blob_mac(ctx.sealing_key, blob.magic, blob.version, blob.iv, blob.ciphertext)
    if not hmac.compare_digest(expected, blob.mac):
        raise SealTamper("sealed blob failed integrity check")
    if blob.magic != SEAL_MAGIC:
        raise BadHeader("bad magic")
    if blob.version != SEAL_VERSION:
        raise VersionUnsupported(f"unsupported sealed format version {blob.version}")
    enc_key = kdf(ctx.sealing_key, b"seal-enc", 32)
    try:
        return cbc_decrypt_256(enc_key, blob.iv, blob.ciphertext)
    except PaddingError:
        raise SealTamper("sealed blob failed integrity check") from None


def store_blob(path: str | os.PathLike, blob: SealedBlob) -> None:
    """Atomic persistence: write a temp file in the same directory, then rename."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(blob.to_bytes())
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot store blob at {path}: {exc}") from exc


def load_blob(path: str | os.PathLike) -> SealedBlob:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot load blob from {path}: {exc}") from exc
    return SealedBlob.from_bytes(data)
