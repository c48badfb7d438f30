"""Cryptographic suite: hashing, KDF, DH, AEAD, AES-CBC, signatures, and the
group-signature scheme with revocation."""

from .group import GENERATOR, L, decode, hash_to_group, hash_to_scalar  # noqa: F401
from .groupsig import (  # noqa: F401
    GroupPublicKey,
    GroupSignature,
    GsigStatus,
    IssuerSecret,
    MemberPrivateKey,
    RevocationLists,
    credential_verify,
    group_join,
    group_setup,
    gsig_sign,
    gsig_verify,
)
from .primitives import (  # noqa: F401
    aead_open,
    aead_seal,
    cbc_decrypt_256,
    cbc_encrypt_256,
    cbc_mac_256,
    dh,
    dh_keygen,
    hash_bytes,
    kdf,
    pk_decrypt,
    pk_encrypt,
    sig_keygen,
    sig_sign,
    sig_verify,
)
