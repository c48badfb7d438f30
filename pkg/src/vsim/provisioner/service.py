"""The provisioner: server side of the secure channel plus the TCP service.

`ServerSession` is a pure state machine over frame bytes: feed it M1 and M3,
get back M2 and M4 or a `SessionRejected` carrying the wire error code. The
service wraps sessions in a threaded TCP server; shared state (inventory,
replay cache, revocation file) is accessed through serialized operations, so
the single-claim guarantee holds under any interleaving of connections.

No code path emits a ProfileDelivery frame without an Accepted verdict from
quote verification in the same session: the claim that releases the profile
sits directly behind that check.
"""

from __future__ import annotations

import enum
import logging
import socketserver
import threading
import time
from typing import Callable

from .. import protocol
from ..attestation import Measurement, SignedQuote, binding_report_data, verify_signed_quote
from ..attestation import QuoteVerdict
from ..config import ProvisionerConfig
from ..crypto import primitives
from ..errors import (
    AuthFailure,
    BindError,
    DecryptFailure,
    ProtocolError,
    SessionRejected,
    VsimError,
    WidthError,
)
from ..protocol import ErrorCode, MsgType
from ..rng import Rng
from .inventory import Inventory
from .replay import ReplayCache
from .revocation import load_revocation_file

logger = logging.getLogger(__name__)

_VERDICT_TO_CODE = {
    QuoteVerdict.BAD_SIGNATURE: ErrorCode.ATTEST_BAD_SIGNATURE,
    QuoteVerdict.REVOKED_BY_KEY: ErrorCode.ATTEST_REVOKED_BY_KEY,
    QuoteVerdict.REVOKED_BY_SIGNATURE: ErrorCode.ATTEST_REVOKED_BY_SIGNATURE,
    QuoteVerdict.MEASUREMENT_MISMATCH: ErrorCode.ATTEST_MEASUREMENT_MISMATCH,
    QuoteVerdict.REPORT_DATA_MISMATCH: ErrorCode.ATTEST_REPORT_DATA_MISMATCH,
}


class SessionState(enum.Enum):
    AWAIT_HELLO = "AwaitHello"
    AWAIT_ATTEST = "AwaitAttest"
    DONE = "Done"
    FAILED = "Failed"


class ServerSession:
    """One connection's provisioning state; secrets dropped on Done/Failed."""

    def __init__(
        self,
        config: ProvisionerConfig,
        inventory: Inventory,
        replay_cache: ReplayCache,
        rng: Rng | None = None,
    ):
        self._config = config
        self._inventory = inventory
        self._replay = replay_cache
        self._rng = rng or config.rng
        self.state = SessionState.AWAIT_HELLO
        self.claimed_pseudonym: bytes | None = None
        self._nonce_c = b""
        self._nonce_s = b""
        self._token = b""
        self._session_key = b""
        self._transcript_hash = b""

    def _fail(self, code: ErrorCode, detail: str) -> SessionRejected:
        self.state = SessionState.FAILED
        self._session_key = b""
        return SessionRejected(code, detail)

    def on_client_hello(self, m1_frame: bytes) -> bytes:
        if self.state is not SessionState.AWAIT_HELLO:
            raise self._fail(ErrorCode.PROTOCOL_VIOLATION, "hello out of order")
        try:
            msg_type, payload = protocol.decode_frame(m1_frame)
        except ProtocolError as exc:
            raise self._fail(ErrorCode.PROTOCOL_VIOLATION, str(exc))
        if msg_type != MsgType.CLIENT_HELLO:
            raise self._fail(ErrorCode.PROTOCOL_VIOLATION, "expected ClientHello")
        try:
            plaintext = primitives.pk_decrypt(self._config.static_sk, payload)
        except DecryptFailure:
            raise self._fail(ErrorCode.DECRYPT_FAILURE, "cannot decrypt ClientHello")
        try:
            nonce_c, epk_c, token = protocol.parse_hello_plaintext(plaintext)
        except ProtocolError:
            raise self._fail(ErrorCode.PROTOCOL_VIOLATION, "bad ClientHello plaintext")
        # replay first, then token validity; the nonce is recorded either way
        if not self._replay.check_and_add(nonce_c):
            raise self._fail(ErrorCode.REPLAY_DETECTED, "nonce_c already seen")
        try:
            self._inventory.check_available(token)
        except SessionRejected as exc:
            raise self._fail(ErrorCode(exc.code), str(exc))
        self._nonce_c, self._token = nonce_c, token
        self._nonce_s = self._rng.bytes(protocol.NONCE_LEN)
        esk_s, epk_s = primitives.dh_keygen(self._rng)
        m2_plaintext = protocol.build_server_hello_plaintext(
            nonce_c, self._nonce_s, self._config.tee_version, self._config.basename, epk_s
        )
        try:
            m2_payload = primitives.pk_encrypt(epk_c, m2_plaintext, self._rng)
            shared = primitives.dh(esk_s, epk_c)
        except VsimError:
            raise self._fail(ErrorCode.DECRYPT_FAILURE, "bad client ephemeral key")
        m2_frame = protocol.encode_frame(MsgType.SERVER_HELLO, m2_payload)
        self._transcript_hash = primitives.hash_bytes(m1_frame + m2_frame)
        self._session_key = primitives.kdf(
            shared, b"vsim-session" + self._transcript_hash, 32
        )
        self.state = SessionState.AWAIT_ATTEST
        return m2_frame

    def on_client_attest(self, m3_frame: bytes) -> bytes:
        if self.state is not SessionState.AWAIT_ATTEST:
            raise self._fail(ErrorCode.PROTOCOL_VIOLATION, "attest out of order")
        try:
            msg_type, payload = protocol.decode_frame(m3_frame)
        except ProtocolError as exc:
            raise self._fail(ErrorCode.PROTOCOL_VIOLATION, str(exc))
        if msg_type != MsgType.CLIENT_ATTEST:
            raise self._fail(ErrorCode.PROTOCOL_VIOLATION, "expected ClientAttest")
        try:
            plaintext = primitives.aead_open(
                self._session_key,
                protocol.aead_nonce(0, from_server=False),
                protocol.aead_ad(MsgType.CLIENT_ATTEST),
                payload,
            )
        except AuthFailure:
            raise self._fail(ErrorCode.CHANNEL_AUTH_FAILURE, "cannot open ClientAttest")
        try:
            sq_bytes, nonce_c, nonce_s = protocol.parse_attest_plaintext(plaintext)
        except ProtocolError:
            raise self._fail(ErrorCode.PROTOCOL_VIOLATION, "bad ClientAttest plaintext")
        if nonce_c != self._nonce_c or nonce_s != self._nonce_s:
            raise self._fail(ErrorCode.NONCE_MISMATCH, "attest nonces do not match session")
        try:
            sq = SignedQuote.from_bytes(sq_bytes)
        except (WidthError, VsimError):
            raise self._fail(ErrorCode.ATTEST_BAD_SIGNATURE, "unparseable signed quote")
        # the quote must use our basename, otherwise its pseudonym would
        # dodge the signature blacklist
        if sq.basename != self._config.basename:
            raise self._fail(ErrorCode.BASENAME_MISMATCH, "quote signed under a foreign basename")
        expected_report_data = binding_report_data(
            self._transcript_hash, self._nonce_c, self._nonce_s
        )
        rl = load_revocation_file(self._config.revocation_file)
        verdict = verify_signed_quote(
            self._config.group_public_key,
            sq,
            Measurement(self._config.expected_measurement),
            expected_report_data,
            rl,
        )
        if verdict is not QuoteVerdict.ACCEPTED:
            raise self._fail(_VERDICT_TO_CODE[verdict], f"attestation verdict {verdict.value}")
        pseudonym = sq.signature.pseudonym
        try:
            profile = self._inventory.claim(self._token, pseudonym)
        except SessionRejected as exc:
            raise self._fail(ErrorCode(exc.code), str(exc))
        self.claimed_pseudonym = pseudonym
        m4_payload = primitives.aead_seal(
            self._session_key,
            protocol.aead_nonce(0, from_server=True),
            protocol.aead_ad(MsgType.PROFILE_DELIVERY),
            profile.to_bytes(),
        )
        self.state = SessionState.DONE
        self._session_key = b""
        logger.info("delivered profile for pseudonym %s", pseudonym.hex())
        return protocol.encode_frame(MsgType.PROFILE_DELIVERY, m4_payload)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        service: ProvisionerService = self.server.service  # type: ignore[attr-defined]
        self.request.settimeout(service.config.session_timeout)
        transport = protocol.Transport(self.request)
        session = service.new_session()
        try:
            while session.state not in (SessionState.DONE, SessionState.FAILED):
                msg_type, payload = transport.recv_frame()
                frame = protocol.encode_frame(msg_type, payload)
                if session.state is SessionState.AWAIT_HELLO:
                    transport.send_frame(session.on_client_hello(frame))
                else:
                    transport.send_frame(session.on_client_attest(frame))
        except SessionRejected as exc:
            logger.info("session rejected: %s", exc)
            try:
                transport.send_frame(protocol.encode_error(ErrorCode(exc.code)))
            except OSError:
                pass
        except (ProtocolError, TimeoutError, OSError) as exc:
            logger.info("session aborted: %s", exc)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class ProvisionerService:
    """Long-running provisioning endpoint over TCP."""

    def __init__(self, config: ProvisionerConfig, clock: Callable[[], float] = time.monotonic):
        self.config = config
        self.inventory = Inventory(config.inventory_file)
        self.replay_cache = ReplayCache(config.replay_max_age, config.replay_max_size, clock)
        try:
            self._server = _Server(config.listen_address, _Handler)
        except OSError as exc:
            raise BindError(f"cannot bind {config.listen_address}: {exc}") from exc
        self._server.service = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    def new_session(self) -> ServerSession:
        return ServerSession(self.config, self.inventory, self.replay_cache)

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return str(host), int(port)

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        logger.info("provisioner listening on %s:%d", *self.address)

    def serve_forever(self) -> None:
        logger.info("provisioner listening on %s:%d", *self.address)
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
