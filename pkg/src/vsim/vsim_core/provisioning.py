"""Client side of the four-message provisioning handshake.

    M1 ClientHello:   nonce_c + ephemeral pk + activation token, sealed to the
                      provisioner's static key
    M2 ServerHello:   both nonces + attestation request + server ephemeral pk,
                      sealed to our ephemeral pk
    M3 ClientAttest:  signed quote + nonce echo, under the session key
    M4 Delivery:      subscriber profile, under the session key

The session key is derived only from the ephemeral DH output and the
transcript of the first two frames, which is what gives the channel forward
secrecy; the quote binds the transcript and both nonces through its report
data, so an attestation cannot be detached and replayed elsewhere.

`ClientSession` is a pure state machine over frame bytes (testable without
sockets); `run_provisioning` drives it over a transport.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass
from typing import Callable

from .. import protocol
from ..attestation import binding_report_data, make_quote, sign_quote
from ..crypto import primitives
from ..errors import (
    AttestRejected,
    AttestRequestMismatch,
    AuthFailure,
    ChannelAuthFailure,
    DecryptFailure,
    InvalidPoint,
    ProfileParseError,
    ProtocolError,
    ServerNonceMismatch,
)
from ..rng import Rng, SYSTEM_RNG
from ..tee_host import EnclaveContext
from .profile import SubscriberProfile

SESSION_LABEL = b"vsim-session"


@dataclass(frozen=True)
class AttestRequest:
    """What the provisioner asks a quote to contain."""

    tee_version: int
    basename: bytes


class ProvisioningState(enum.Enum):
    INIT = "Init"
    HELLO_SENT = "HelloSent"
    ATTESTING = "Attesting"
    PROVISIONED = "Provisioned"
    FAILED = "Failed"


_ERROR_CODE_TO_EXC: dict[protocol.ErrorCode, Callable[[], Exception]] = {
    protocol.ErrorCode.REPLAY_DETECTED: lambda: ProtocolError("server: replay detected"),
    protocol.ErrorCode.UNKNOWN_TOKEN: lambda: ProtocolError("server: unknown token"),
    protocol.ErrorCode.TOKEN_ALREADY_CLAIMED: lambda: ProtocolError("server: token already claimed"),
    protocol.ErrorCode.DECRYPT_FAILURE: lambda: ProtocolError("server: could not decrypt hello"),
    protocol.ErrorCode.CHANNEL_AUTH_FAILURE: lambda: ChannelAuthFailure("server: channel auth failure"),
    protocol.ErrorCode.NONCE_MISMATCH: lambda: ProtocolError("server: nonce mismatch"),
    protocol.ErrorCode.PROTOCOL_VIOLATION: lambda: ProtocolError("server: protocol violation"),
    protocol.ErrorCode.INTERNAL: lambda: ProtocolError("server: internal error"),
}


def _server_error(code: protocol.ErrorCode) -> Exception:
    if code in protocol.ATTEST_REJECT_CODES:
        return AttestRejected(code.name)
    return _ERROR_CODE_TO_EXC.get(code, lambda: ProtocolError(f"server error {code:#06x}"))()


class ClientSession:
    """One provisioning attempt. Transitions only forward; any failure is final."""

    def __init__(
        self,
        ctx: EnclaveContext,
        provisioner_static_pk: bytes,
        activation_token: bytes,
        expected_request: AttestRequest,
        rng: Rng = SYSTEM_RNG,
        clock: Callable[[], float] = time.time,
    ):
        if len(activation_token) != protocol.TOKEN_LEN:
            raise ProtocolError("activation token must be 16 bytes")
        self._ctx = ctx
        self._static_pk = provisioner_static_pk
        self._token = activation_token
        self._expected = expected_request
        self._rng = rng
        self._clock = clock
        self.state = ProvisioningState.INIT
        self._nonce_c = b""
        self._nonce_s = b""
        self._esk_c = 0
        self._epk_c = b""
        self._m1_frame = b""
        self._session_key = b""
        self._transcript_hash = b""

    # test hook: pin the ephemeral keypair and nonce before build_m1
    def inject_ephemerals(self, nonce_c: bytes, esk_c: int, epk_c: bytes) -> None:
        if self.state is not ProvisioningState.INIT:
            raise ProtocolError("ephemerals can only be injected before M1")
        self._nonce_c, self._esk_c, self._epk_c = nonce_c, esk_c, epk_c

    def _fail(self, exc: Exception) -> Exception:
        self.state = ProvisioningState.FAILED
        self._wipe()
        return exc

    def _wipe(self) -> None:
        # value types cannot be shredded in-place; drop every reference we hold
        self._esk_c = 0
        self._session_key = b""

    def _expect_state(self, state: ProvisioningState) -> None:
        if self.state is not state:
            raise self._fail(ProtocolError(f"message out of order in state {self.state.value}"))

    def build_m1(self) -> bytes:
        self._expect_state(ProvisioningState.INIT)
        if not self._nonce_c:
            self._nonce_c = self._rng.bytes(protocol.NONCE_LEN)
            self._esk_c, self._epk_c = primitives.dh_keygen(self._rng)
        plaintext = protocol.build_hello_plaintext(self._nonce_c, self._epk_c, self._token)
        payload = primitives.pk_encrypt(self._static_pk, plaintext, self._rng)
        self._m1_frame = protocol.encode_frame(protocol.MsgType.CLIENT_HELLO, payload)
        self.state = ProvisioningState.HELLO_SENT
        return self._m1_frame

    def consume_m2(self, frame: bytes) -> None:
        self._expect_state(ProvisioningState.HELLO_SENT)
        msg_type, payload = self._decode(frame)
        if msg_type != protocol.MsgType.SERVER_HELLO:
            raise self._fail(ProtocolError(f"expected ServerHello, got type {msg_type:#04x}"))
        try:
            plaintext = primitives.pk_decrypt(self._esk_c, payload)
        except DecryptFailure:
            raise self._fail(ChannelAuthFailure("cannot decrypt ServerHello"))
        try:
            echoed, nonce_s, tee_version, basename, epk_s = (
                protocol.parse_server_hello_plaintext(plaintext)
            )
        except ProtocolError as exc:
            raise self._fail(exc)
        if echoed != self._nonce_c:
            # stale or replayed ServerHello: it echoes some other session's nonce
            raise self._fail(ServerNonceMismatch("ServerHello echoed a wrong nonce"))
        if tee_version != self._expected.tee_version or basename != self._expected.basename:
            raise self._fail(
                AttestRequestMismatch(
                    f"server requested tee_version={tee_version} basename={basename!r}"
                )
            )
        self._nonce_s = nonce_s
        self._transcript_hash = primitives.hash_bytes(self._m1_frame + frame)
        try:
            shared = primitives.dh(self._esk_c, epk_s)
        except InvalidPoint:
            raise self._fail(ChannelAuthFailure("bad server ephemeral key"))
        self._session_key = primitives.kdf(shared, SESSION_LABEL + self._transcript_hash, 32)
        self.state = ProvisioningState.ATTESTING

    def build_m3(self) -> bytes:
        self._expect_state(ProvisioningState.ATTESTING)
        report_data = binding_report_data(self._transcript_hash, self._nonce_c, self._nonce_s)
        quote = make_quote(
            self._ctx.measurement, report_data, self._expected.tee_version, self._clock
        )
        sq = sign_quote(self._ctx.member_key, quote, self._expected.basename)
        plaintext = protocol.build_attest_plaintext(sq.to_bytes(), self._nonce_c, self._nonce_s)
        payload = primitives.aead_seal(
            self._session_key,
            protocol.aead_nonce(0, from_server=False),
            protocol.aead_ad(protocol.MsgType.CLIENT_ATTEST),
            plaintext,
        )
        return protocol.encode_frame(protocol.MsgType.CLIENT_ATTEST, payload)

    def consume_m4(self, frame: bytes) -> SubscriberProfile:
        self._expect_state(ProvisioningState.ATTESTING)
        msg_type, payload = self._decode(frame)
        if msg_type != protocol.MsgType.PROFILE_DELIVERY:
            raise self._fail(ProtocolError(f"expected ProfileDelivery, got type {msg_type:#04x}"))
        try:
            plaintext = primitives.aead_open(
                self._session_key,
                protocol.aead_nonce(0, from_server=True),
                protocol.aead_ad(protocol.MsgType.PROFILE_DELIVERY),
                payload,
            )
        except AuthFailure:
            raise self._fail(ChannelAuthFailure("cannot open ProfileDelivery"))
        try:
            profile = SubscriberProfile.from_bytes(plaintext)
        except ProfileParseError as exc:
            raise self._fail(exc)
        self.state = ProvisioningState.PROVISIONED
        self._wipe()
        return profile

    def _decode(self, frame: bytes) -> tuple[int, bytes]:
        try:
            msg_type, payload = protocol.decode_frame(frame)
        except ProtocolError as exc:
            raise self._fail(exc)
        if msg_type == protocol.MsgType.ERROR:
            try:
                code = protocol.parse_error(payload)
            except ProtocolError as exc:
                raise self._fail(exc)
            raise self._fail(_server_error(code))
        return msg_type, payload


def run_provisioning(
    transport,
    ctx: EnclaveContext,
    provisioner_static_pk: bytes,
    activation_token: bytes,
    expected_request: AttestRequest,
    rng: Rng = SYSTEM_RNG,
    clock: Callable[[], float] = time.time,
) -> SubscriberProfile:
    """Drive a ClientSession over a frame transport; returns the delivered profile."""
    session = ClientSession(
        ctx, provisioner_static_pk, activation_token, expected_request, rng, clock
    )
    transport.send_frame(session.build_m1())
    msg_type, payload = transport.recv_frame()
    session.consume_m2(protocol.encode_frame(msg_type, payload))
    transport.send_frame(session.build_m3())
    msg_type, payload = transport.recv_frame()
    return session.consume_m4(protocol.encode_frame(msg_type, payload))
