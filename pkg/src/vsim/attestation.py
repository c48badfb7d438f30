"""Binary measurement, simulated secure-boot chain, and attestation quotes.

Quote wire format (canonical, fixed widths):

    measurement(32) || report_data(64) || tee_version(2, BE) || timestamp(8, BE)

Signed quotes append the basename and the group signature:

    quote(106) || basename_len(2, BE) || basename || proof(96) || pseudonym(32)

Boot-chain manifest files are a sequence of records:

    image_len(4, BE) || image || sig_len(2, BE) || sig || pk(32)

where `pk` is the verification key this layer embeds for the next layer's
signature, and `sig` covers the layer's image bytes under the previous
layer's embedded key (layer 0 under the hardware root key).
"""

from __future__ import annotations

import enum
import struct
import time
from dataclasses import dataclass
from typing import Callable

from .crypto import groupsig, primitives
from .errors import BadManifest, BadReportDataLength, EmptyImage, WidthError

REPORT_DATA_LEN = 64
QUOTE_LEN = 32 + REPORT_DATA_LEN + 2 + 8


@dataclass(frozen=True)
class Measurement:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != 32:
            raise WidthError("measurement digest must be 32 bytes")


def measure_binary(image: bytes) -> Measurement:
    if not image:
        raise EmptyImage("cannot measure an empty image")
    return Measurement(primitives.hash_bytes(image))


@dataclass(frozen=True)
class Quote:
    measurement: Measurement
    report_data: bytes
    tee_version: int
    timestamp: int

    def __post_init__(self):
        if len(self.report_data) != REPORT_DATA_LEN:
            raise BadReportDataLength(
                f"report_data must be {REPORT_DATA_LEN} bytes, got {len(self.report_data)}"
            )

    def to_bytes(self) -> bytes:
        return (
            self.measurement.digest
            + self.report_data
            + struct.pack(">H", self.tee_version)
            + struct.pack(">Q", self.timestamp)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Quote":
        if len(data) != QUOTE_LEN:
            raise WidthError(f"quote is {QUOTE_LEN} bytes, got {len(data)}")
        tee_version, timestamp = struct.unpack(">HQ", data[96:])
        return cls(Measurement(data[:32]), data[32:96], tee_version, timestamp)


def make_quote(
    measurement: Measurement,
    report_data: bytes,
    tee_version: int,
    clock: Callable[[], float] = time.time,
) -> Quote:
    return Quote(measurement, report_data, tee_version, int(clock()))


def binding_report_data(transcript_hash: bytes, nonce_c: bytes, nonce_s: bytes) -> bytes:
    """Session-binding report data: hash of (transcript, both nonces), zero padded.

    Binding the handshake into the quote keeps the attestation from being
    replayed into a different session.
    """
    digest = primitives.hash_bytes(transcript_hash + nonce_c + nonce_s)
    return digest + bytes(REPORT_DATA_LEN - len(digest))


@dataclass(frozen=True)
class SignedQuote:
    quote: Quote
    signature: groupsig.GroupSignature
    basename: bytes

    def to_bytes(self) -> bytes:
        return (
            self.quote.to_bytes()
            + struct.pack(">H", len(self.basename))
            + self.basename
            + self.signature.to_bytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "SignedQuote":
        if len(data) < QUOTE_LEN + 2:
            raise WidthError("signed quote too short")
        quote = Quote.from_bytes(data[:QUOTE_LEN])
        (bn_len,) = struct.unpack_from(">H", data, QUOTE_LEN)
        off = QUOTE_LEN + 2
        basename = data[off : off + bn_len]
        if len(basename) != bn_len:
            raise WidthError("truncated basename")
        sig = groupsig.GroupSignature.from_bytes(data[off + bn_len :])
        return cls(quote, sig, basename)


def sign_quote(
    member_key: groupsig.MemberPrivateKey, quote: Quote, basename: bytes
) -> SignedQuote:
    return SignedQuote(quote, groupsig.gsig_sign(member_key, quote.to_bytes(), basename), basename)


class QuoteVerdict(enum.Enum):
    ACCEPTED = "Accepted"
    BAD_SIGNATURE = "BadSignature"
    REVOKED_BY_KEY = "RevokedByKey"
    REVOKED_BY_SIGNATURE = "RevokedBySignature"
    MEASUREMENT_MISMATCH = "MeasurementMismatch"
    REPORT_DATA_MISMATCH = "ReportDataMismatch"


_GSIG_TO_VERDICT = {
    groupsig.GsigStatus.BAD_PROOF: QuoteVerdict.BAD_SIGNATURE,
    groupsig.GsigStatus.REVOKED_BY_KEY: QuoteVerdict.REVOKED_BY_KEY,
    groupsig.GsigStatus.REVOKED_BY_SIGNATURE: QuoteVerdict.REVOKED_BY_SIGNATURE,
}


def verify_signed_quote(
    gpk: groupsig.GroupPublicKey,
    sq: SignedQuote,
    expected_measurement: Measurement,
    expected_report_data: bytes,
    rl: groupsig.RevocationLists,
) -> QuoteVerdict:
    """Signature (including revocation) first, then measurement, then report data."""
    status = groupsig.gsig_verify(gpk, sq.quote.to_bytes(), sq.basename, sq.signature, rl)
    if status is not groupsig.GsigStatus.VALID:
        return _GSIG_TO_VERDICT[status]
    if sq.quote.measurement != expected_measurement:
        return QuoteVerdict.MEASUREMENT_MISMATCH
    if sq.quote.report_data != expected_report_data:
        return QuoteVerdict.REPORT_DATA_MISMATCH
    return QuoteVerdict.ACCEPTED


# -- secure boot ----------------------------------------------------------------

@dataclass(frozen=True)
class BootLayer:
    image: bytes
    image_signature: bytes
    next_layer_pk: bytes
    signer_pk: bytes | None = None  # informational: the key expected to have signed us


def verify_boot_chain(root_pk: bytes, chain: list[BootLayer]) -> int | None:
    """Return None when every layer verifies, else the first broken index.

    Layer i's signature is checked under layer i-1's embedded key; layer 0
    under the hardware root key.
    """
    if not chain:
        raise BadManifest("boot chain must have at least one layer")
    verify_key = root_pk
    for index, layer in enumerate(chain):
        if not primitives.sig_verify(verify_key, layer.image, layer.image_signature):
            return index
        verify_key = layer.next_layer_pk
    return None


def serialize_boot_manifest(chain: list[BootLayer]) -> bytes:
    out = []
    for layer in chain:
        out.append(struct.pack(">I", len(layer.image)))
        out.append(layer.image)
        out.append(struct.pack(">H", len(layer.image_signature)))
        out.append(layer.image_signature)
        if len(layer.next_layer_pk) != 32:
            raise BadManifest("manifest pk fields are 32 bytes")
        out.append(layer.next_layer_pk)
    return b"".join(out)


def parse_boot_manifest(data: bytes, root_pk: bytes | None = None) -> list[BootLayer]:
    layers: list[BootLayer] = []
    off = 0
    prev_pk = root_pk
    while off < len(data):
        try:
            (image_len,) = struct.unpack_from(">I", data, off)
            off += 4
            image = data[off : off + image_len]
            if len(image) != image_len:
                raise BadManifest("truncated image")
            off += image_len
            (sig_len,) = struct.unpack_from(">H", data, off)
            off += 2
            sig = data[off : off + sig_len]
            if len(sig) != sig_len:
                raise BadManifest("truncated signature")
            off += sig_len
            pk = data[off : off + 32]
            if len(pk) != 32:
                raise BadManifest("truncated pk")
            off += 32
        except struct.error:
            raise BadManifest("truncated record header") from None
        layers.append(BootLayer(image, sig, pk, signer_pk=prev_pk))
        prev_pk = pk
    if not layers:
        raise BadManifest("empty manifest")
    return layers


def build_boot_chain(root_sk: int, images: list[bytes], rng=None) -> list[BootLayer]:
    """Construct a correctly signed chain over the given layer images."""
    from .rng import SYSTEM_RNG

    rng = rng or SYSTEM_RNG
    layers = []
    signing_key = root_sk
    for image in images:
        next_sk, next_pk = primitives.sig_keygen(rng)
        layers.append(BootLayer(image, primitives.sig_sign(signing_key, image), next_pk))
        signing_key = next_sk
    return layers
