"""Provisioning wire protocol: framing, payload layouts, and error codes.

Every message is a frame:

    magic "VSP1"(4) || msg_type(1) || payload_len(4, BE) || payload

Message types and payloads:

    0x01 ClientHello     pk-encrypted blob of nonce_c(32) || epk_c(32) || token(16)
    0x02 ServerHello     pk-encrypted (to epk_c) blob of nonce_c(32) || nonce_s(32)
                         || tee_version(2, BE) || basename_len(2, BE) || basename
                         || epk_s(32)
    0x03 ClientAttest    aead blob of signed_quote || nonce_c(32) || nonce_s(32)
    0x04 ProfileDelivery aead blob of the canonical profile serialization
    0xFF Error           code(2, BE) and nothing else (error opacity)

AEAD nonces are 12-byte big-endian counters: client-origin frames use even
values, server-origin odd, so the two directions can never collide under
the shared session key. The associated data for every AEAD frame is the
magic plus the message type byte.
"""

from __future__ import annotations

import enum
import socket
import struct

from .errors import ProtocolError

MAGIC = b"VSP1"
HEADER_LEN = 4 + 1 + 4
MAX_PAYLOAD = 1 << 20

NONCE_LEN = 32
TOKEN_LEN = 16
EPK_LEN = 32


class MsgType(enum.IntEnum):
    CLIENT_HELLO = 0x01
    SERVER_HELLO = 0x02
    CLIENT_ATTEST = 0x03
    PROFILE_DELIVERY = 0x04
    ERROR = 0xFF


class ErrorCode(enum.IntEnum):
    """Wire error codes; failure frames carry the code and nothing else."""

    DECRYPT_FAILURE = 0x0001
    REPLAY_DETECTED = 0x0002
    UNKNOWN_TOKEN = 0x0003
    TOKEN_ALREADY_CLAIMED = 0x0004
    CHANNEL_AUTH_FAILURE = 0x0005
    NONCE_MISMATCH = 0x0006
    PROTOCOL_VIOLATION = 0x0007
    BASENAME_MISMATCH = 0x0008
    ATTEST_BAD_SIGNATURE = 0x0010
    ATTEST_REVOKED_BY_KEY = 0x0011
    ATTEST_REVOKED_BY_SIGNATURE = 0x0012
    ATTEST_MEASUREMENT_MISMATCH = 0x0013
    ATTEST_REPORT_DATA_MISMATCH = 0x0014
    INTERNAL = 0x00FF


ATTEST_REJECT_CODES = {
    ErrorCode.ATTEST_BAD_SIGNATURE,
    ErrorCode.ATTEST_REVOKED_BY_KEY,
    ErrorCode.ATTEST_REVOKED_BY_SIGNATURE,
    ErrorCode.ATTEST_MEASUREMENT_MISMATCH,
    ErrorCode.ATTEST_REPORT_DATA_MISMATCH,
    ErrorCode.BASENAME_MISMATCH,
}


def encode_frame(msg_type: int, payload: bytes) -> bytes:
    return MAGIC + bytes([msg_type]) + struct.pack(">I", len(payload)) + payload


def decode_frame(data: bytes) -> tuple[int, bytes]:
    if len(data) < HEADER_LEN:
        raise ProtocolError("frame too short")
    if data[:4] != MAGIC:
        raise ProtocolError("bad frame magic")
    msg_type = data[4]
    (length,) = struct.unpack_from(">I", data, 5)
    payload = data[HEADER_LEN:]
    if len(payload) != length:
        raise ProtocolError("frame length mismatch")
    return msg_type, payload


def encode_error(code: ErrorCode) -> bytes:
    return encode_frame(MsgType.ERROR, struct.pack(">H", int(code)))


def parse_error(payload: bytes) -> ErrorCode:
    if len(payload) != 2:
        raise ProtocolError("error frames carry exactly a 2-byte code")
    (code,) = struct.unpack(">H", payload)
    try:
        return ErrorCode(code)
    except ValueError:
        raise ProtocolError(f"unknown error code {code:#06x}") from None


def aead_nonce(counter: int, from_server: bool) -> bytes:
    """12-byte counter nonce; even counters are client-origin, odd server-origin."""
    value = counter * 2 + (1 if from_server else 0)
    return value.to_bytes(12, "big")


def aead_ad(msg_type: int) -> bytes:
    return MAGIC + bytes([msg_type])


# -- payload plaintext layouts ---------------------------------------------------

def build_hello_plaintext(nonce_c: bytes, epk_c: bytes, token: bytes) -> bytes:
    assert len(nonce_c) == NONCE_LEN and len(epk_c) == EPK_LEN and len(token) == TOKEN_LEN
    return nonce_c + epk_c + token


def parse_hello_plaintext(data: bytes) -> tuple[bytes, bytes, bytes]:
    if len(data) != NONCE_LEN + EPK_LEN + TOKEN_LEN:
        raise ProtocolError("bad ClientHello plaintext length")
    return data[:32], data[32:64], data[64:]


def build_server_hello_plaintext(
    nonce_c: bytes, nonce_s: bytes, tee_version: int, basename: bytes, epk_s: bytes
) -> bytes:
    return (
        nonce_c
        + nonce_s
        + struct.pack(">H", tee_version)
        + struct.pack(">H", len(basename))
        + basename
        + epk_s
    )


def parse_server_hello_plaintext(data: bytes) -> tuple[bytes, bytes, int, bytes, bytes]:
    if len(data) < 2 * NONCE_LEN + 4 + EPK_LEN:
        raise ProtocolError("bad ServerHello plaintext length")
    nonce_c, nonce_s = data[:32], data[32:64]
    tee_version, bn_len = struct.unpack_from(">HH", data, 64)
    off = 68
    basename = data[off : off + bn_len]
    epk_s = data[off + bn_len :]
    if len(basename) != bn_len or len(epk_s) != EPK_LEN:
        raise ProtocolError("bad ServerHello plaintext length")
    return nonce_c, nonce_s, tee_version, basename, epk_s


def build_attest_plaintext(signed_quote: bytes, nonce_c: bytes, nonce_s: bytes) -> bytes:
    return signed_quote + nonce_c + nonce_s


def parse_attest_plaintext(data: bytes) -> tuple[bytes, bytes, bytes]:
    if len(data) < 2 * NONCE_LEN + 1:
        raise ProtocolError("bad ClientAttest plaintext length")
    return data[:-64], data[-64:-32], data[-32:]


# -- stream transport --------------------------------------------------------------

class Transport:
    """Blocking frame channel over a socket-like object."""

    def __init__(self, sock: socket.socket):
        self._sock = sock

    def send_frame(self, frame: bytes) -> None:
        try:
            self._sock.sendall(frame)
        except OSError as exc:
            raise ProtocolError(f"send failed: {exc}") from exc

    def recv_frame(self) -> tuple[int, bytes]:
        header = self._recv_exact(HEADER_LEN)
        if header[:4] != MAGIC:
            raise ProtocolError("bad frame magic")
        msg_type = header[4]
        (length,) = struct.unpack_from(">I", header, 5)
        if length > MAX_PAYLOAD:
            raise ProtocolError("frame payload too large")
        return msg_type, self._recv_exact(length)

    def _recv_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            try:
                chunk = self._sock.recv(remaining)
            except OSError as exc:
                raise ProtocolError(f"receive failed: {exc}") from exc
            if not chunk:
                raise ProtocolError("connection closed mid-frame")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def connect(address: tuple[str, int], timeout: float = 10.0) -> Transport:
    try:
        sock = socket.create_connection(address, timeout=timeout)
    except OSError as exc:
        raise ProtocolError(f"cannot connect to {address[0]}:{address[1]}: {exc}") from exc
    return Transport(sock)
