"""Group signatures with per-basename pseudonyms and two revocation lists.

Members share one verification context (the group public key) while holding
individual secret scalars. A signature is a Schnorr-style proof of knowledge
of the scalar behind the pseudonym ``HashToGroup(basename) * s``, bound to
the message and the group id. The same (key, basename) pair always produces
the same pseudonym, which is what revocation-by-signature-pattern matches
against; different basenames produce unrelated-looking pseudonyms.

Known limitation, by design: the proof demonstrates knowledge of the
pseudonym's scalar, not possession of an issuer credential — credentials are
plain signatures checked at join time and auditable out of band. A
pairing-based scheme with in-proof credentials could replace this module
behind the same interface. Likewise, because basepoints are derived as
known multiples of the generator, unlinkability holds against value
comparison (the tested property) but not against an algebraic attacker.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from ..errors import InvalidPoint, WidthError
from ..rng import Rng, SYSTEM_RNG
from . import group, primitives
from .group import GENERATOR, L

GROUP_ID_LEN = 16
PROOF_LEN = 96  # challenge(32) || response(32) || commitment(32)
PSEUDONYM_LEN = 32

_CRED_LABEL = b"vsim-member-credential"
_GSIG_NONCE = b"vsim-gsig-nonce"
_GSIG_CHALLENGE = b"vsim-gsig-challenge"


@dataclass(frozen=True)
class GroupPublicKey:
    """Shared verification key: issuer element plus a stable group id."""

    group_element: bytes
    group_id: bytes

    def __post_init__(self):
        group.decode(self.group_element)  # valid, non-identity
        if len(self.group_id) != GROUP_ID_LEN:
            raise WidthError("group_id must be 16 bytes")

    def to_bytes(self) -> bytes:
        return self.group_element + self.group_id

    @classmethod
    def from_bytes(cls, data: bytes) -> "GroupPublicKey":
        if len(data) != 32 + GROUP_ID_LEN:
            raise WidthError("group public key is 48 bytes")
        return cls(data[:32], data[32:])


@dataclass(frozen=True)
class IssuerSecret:
    signing_key: int
    group_id: bytes


@dataclass(frozen=True, repr=False)
class MemberPrivateKey:
    secret_scalar: int
    membership_credential: bytes
    group_id: bytes

    def __repr__(self) -> str:  # never leak the scalar through logs
        return f"MemberPrivateKey(group_id={self.group_id.hex()})"

    def public_commitment(self) -> bytes:
        return (GENERATOR * self.secret_scalar).encode()

    def pseudonym(self, basename: bytes) -> bytes:
        return (group.hash_to_group(basename) * self.secret_scalar).encode()


@dataclass(frozen=True)
class GroupSignature:
    proof: bytes
    pseudonym: bytes

    def __post_init__(self):
        if len(self.proof) != PROOF_LEN:
            raise WidthError("proof must be 96 bytes")
        if len(self.pseudonym) != PSEUDONYM_LEN:
            raise WidthError("pseudonym must be 32 bytes")

    def to_bytes(self) -> bytes:
        return self.proof + self.pseudonym

    @classmethod
    def from_bytes(cls, data: bytes) -> "GroupSignature":
        if len(data) != PROOF_LEN + PSEUDONYM_LEN:
            raise WidthError("group signature is 128 bytes")
        return cls(data[:PROOF_LEN], data[PROOF_LEN:])


@dataclass
class RevocationLists:
    """Independently updatable revocation state.

    priv_rl holds revoked secret scalars; sig_rl holds (basename, pseudonym)
    pairs observed from signatures that should no longer verify.
    """

    priv_rl: list[int] = field(default_factory=list)
    sig_rl: list[tuple[bytes, bytes]] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        out = [struct.pack(">I", len(self.priv_rl))]
        out += [group.scalar_to_bytes(s) for s in self.priv_rl]
        out.append(struct.pack(">I", len(self.sig_rl)))
        for basename, pseudonym in self.sig_rl:
            out.append(struct.pack(">H", len(basename)) + basename + pseudonym)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RevocationLists":
        try:
            (n_priv,) = struct.unpack_from(">I", data, 0)
            off = 4
            priv = []
            for _ in range(n_priv):
                priv.append(group.scalar_from_bytes(data[off : off + 32]))
                off += 32
            (n_sig,) = struct.unpack_from(">I", data, off)
            off += 4
            sig = []
            for _ in range(n_sig):
                (bn_len,) = struct.unpack_from(">H", data, off)
                off += 2
                basename = data[off : off + bn_len]
                off += bn_len
                pseudonym = data[off : off + PSEUDONYM_LEN]
                if len(pseudonym) != PSEUDONYM_LEN:
                    raise WidthError("truncated sig_rl entry")
                off += PSEUDONYM_LEN
                sig.append((basename, pseudonym))
            if off != len(data):
                raise WidthError("trailing bytes in revocation lists")
            return cls(priv, sig)
        except (struct.error, InvalidPoint) as exc:
            raise WidthError(f"bad revocation list encoding: {exc}") from None


class GsigStatus(enum.Enum):
    VALID = "Valid"
    BAD_PROOF = "BadProof"
    REVOKED_BY_KEY = "RevokedByKey"
    REVOKED_BY_SIGNATURE = "RevokedBySignature"


def group_setup(rng: Rng = SYSTEM_RNG) -> tuple[GroupPublicKey, IssuerSecret]:
    sk, pk = primitives.sig_keygen(rng)
    group_id = rng.bytes(GROUP_ID_LEN)
    return GroupPublicKey(pk, group_id), IssuerSecret(sk, group_id)


def group_join(issuer: IssuerSecret, rng: Rng = SYSTEM_RNG) -> MemberPrivateKey:
    """Issue a fresh member key: secret scalar plus a credential over its commitment."""
    s = rng.scalar(L)
    commitment = (GENERATOR * s).encode()
    credential = primitives.sig_sign(issuer.signing_key, _CRED_LABEL + issuer.group_id + commitment)
    return MemberPrivateKey(s, credential, issuer.group_id)


def credential_verify(gpk: GroupPublicKey, public_commitment: bytes, credential: bytes) -> bool:
    return primitives.sig_verify(
        gpk.group_element, _CRED_LABEL + gpk.group_id + public_commitment, credential
    )


def _challenge(group_id: bytes, basename: bytes, pseudonym: bytes, commitment: bytes,
               message: bytes) -> int:
    return group.hash_to_scalar(
        group_id,
        primitives.hash_bytes(basename),
        pseudonym,
        commitment,
        primitives.hash_bytes(message),
        domain=_GSIG_CHALLENGE,
    )


def gsig_sign(member_key: MemberPrivateKey, message: bytes, basename: bytes) -> GroupSignature:
    base = group.hash_to_group(basename)
    pseudonym = (base * member_key.secret_scalar).encode()
    r = group.hash_to_scalar(
        group.scalar_to_bytes(member_key.secret_scalar),
        member_key.group_id,
        primitives.hash_bytes(basename),
        primitives.hash_bytes(message),
        domain=_GSIG_NONCE,
    )
    commitment = (base * r).encode()
    c = _challenge(member_key.group_id, basename, pseudonym, commitment, message)
    z = (r + c * member_key.secret_scalar) % L
    proof = group.scalar_to_bytes(c) + group.scalar_to_bytes(z) + commitment
    return GroupSignature(proof, pseudonym)


def gsig_verify(
    gpk: GroupPublicKey,
    message: bytes,
    basename: bytes,
    sig: GroupSignature,
    rl: RevocationLists,
) -> GsigStatus:
    """Check proof, then priv_rl, then sig_rl; first failure wins."""
    c = int.from_bytes(sig.proof[:32], "big")
    z = int.from_bytes(sig.proof[32:64], "big")
    commitment_bytes = sig.proof[64:]
    if c >= L or z >= L:
        return GsigStatus.BAD_PROOF
    try:
        pseudonym = group.decode(sig.pseudonym)
        commitment = group.decode(commitment_bytes, allow_identity=True)
    except InvalidPoint:
        return GsigStatus.BAD_PROOF
    base = group.hash_to_group(basename)
    if base * z != commitment + pseudonym * c:
        return GsigStatus.BAD_PROOF
    if c != _challenge(gpk.group_id, basename, sig.pseudonym, commitment_bytes, message):
        return GsigStatus.BAD_PROOF
    for revoked_scalar in rl.priv_rl:
        if (base * revoked_scalar).encode() == sig.pseudonym:
            return GsigStatus.REVOKED_BY_KEY
    for revoked_basename, revoked_pseudonym in rl.sig_rl:
        if revoked_basename == basename and revoked_pseudonym == sig.pseudonym:
            return GsigStatus.REVOKED_BY_SIGNATURE
    return GsigStatus.VALID
