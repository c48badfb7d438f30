"""Exception hierarchy shared across the package.

Operations whose failure modes are part of normal control flow (signature
verification, quote verification, boot-chain checks) return enumerated
results instead of raising; everything here signals a contract violation
or an aborted protocol run.
"""

from __future__ import annotations


class VsimError(Exception):
    """Base class for all package errors."""


# -- crypto ------------------------------------------------------------------

class LengthError(VsimError):
    """Requested output length exceeds what the KDF can produce."""


class KeyLengthError(VsimError):
    """A fixed-width key argument has the wrong size."""


class WidthError(VsimError):
    """A fixed-width protocol field has the wrong size."""


class InvalidPoint(VsimError):
    """Byte string is not a canonical encoding of a group element."""


class AuthFailure(VsimError):
    """AEAD open failed: ciphertext, tag, or associated data was modified."""


class DecryptFailure(VsimError):
    """Public-key decryption failed (tamper or wrong key)."""


class PaddingError(VsimError):
    """CBC padding is malformed."""


# -- attestation / TEE -------------------------------------------------------

class EmptyImage(VsimError):
    """An enclave image must be non-empty."""


class BadReportDataLength(VsimError):
    """Quote report_data must be exactly 64 bytes."""


class BadManifest(VsimError):
    """Boot-chain manifest bytes do not parse."""


class BootChainBroken(VsimError):
    """Secure-boot verification failed at the given layer index."""

    def __init__(self, index: int):
        super().__init__(f"boot chain broken at layer {index}")
        self.index = index


class SealTamper(VsimError):
    """Sealed blob failed its integrity check."""


class BadHeader(VsimError):
    """Sealed blob bytes are structurally invalid."""


class VersionUnsupported(VsimError):
    """Sealed blob was produced by an unsupported format version."""


class IoError(VsimError):
    """Filesystem operation failed."""


# -- provisioning (client side) ----------------------------------------------

class ProtocolError(VsimError):
    """Peer violated the wire protocol (bad frame, wrong message order)."""


class ServerNonceMismatch(ProtocolError):
    """Server failed to echo our fresh nonce: replayed or spliced reply."""


class AttestRequestMismatch(ProtocolError):
    """Server's attestation request differs from the one we were configured for."""


class ChannelAuthFailure(ProtocolError):
    """A session-key protected message failed to open."""


class AttestRejected(ProtocolError):
    """Provisioner rejected our attestation quote."""

    def __init__(self, reason: str):
        super().__init__(f"attestation rejected: {reason}")
        self.reason = reason


class ProfileParseError(VsimError):
    """Delivered profile bytes do not parse."""


class AlreadyProvisioned(VsimError):
    """This device already holds a profile (single-profile contract)."""


class NotProvisioned(VsimError):
    """No profile is stored; provision first."""


# -- provisioner service -----------------------------------------------------

class ConfigError(VsimError):
    """Configuration file is missing required fields or has invalid values."""


class BindError(VsimError):
    """Service could not bind its listen address."""


class SessionRejected(VsimError):
    """Server-side session abort; carries the wire error code to send."""

    def __init__(self, code: int, detail: str = ""):
        super().__init__(detail or f"session rejected with code {code:#06x}")
        self.code = code


class DuplicateSupi(VsimError):
    """Inventory already contains a profile with this SUPI."""


# -- network simulation -------------------------------------------------------

class ResyncMacFailure(VsimError):
    """AUTS failed its integrity check during resynchronization."""


class NotAttached(VsimError):
    """Data path requested before a successful attach."""
