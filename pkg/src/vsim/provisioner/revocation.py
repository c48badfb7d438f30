"""Revocation list file: two sections of hex lines, reloaded on every verify.

    [priv]
    <32-byte secret scalar, hex>
    [sig]
    <basename hex>\t<pseudonym hex>

Updates rewrite atomically so a concurrently running service never reads a
half-written list; the service re-reads the file before each attestation
verification, so revocations take effect without a restart.
"""

from __future__ import annotations

import os

from ..crypto.group import scalar_from_bytes, scalar_to_bytes
from ..crypto.groupsig import RevocationLists
from ..errors import IoError


def load_revocation_file(path: str | os.PathLike) -> RevocationLists:
    path = os.fspath(path)
    if not os.path.exists(path):
        return RevocationLists()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.strip() for line in fh]
    except OSError as exc:
        raise IoError(f"cannot read revocation file {path}: {exc}") from exc
    rl = RevocationLists()
    section = None
    for line in lines:
        if not line or line.startswith("#"):
            continue
        if line == "[priv]":
            section = "priv"
        elif line == "[sig]":
            section = "sig"
        elif section == "priv":
            rl.priv_rl.append(scalar_from_bytes(bytes.fromhex(line)))
        elif section == "sig":
            basename_hex, pseudonym_hex = line.split("\t")
            rl.sig_rl.append((bytes.fromhex(basename_hex), bytes.fromhex(pseudonym_hex)))
        else:
            raise IoError(f"revocation line outside a section: {line!r}")
    return rl


def store_revocation_file(path: str, rl: RevocationLists) -> None:
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("[priv]\n")
            for scalar in rl.priv_rl:
                fh.write(scalar_to_bytes(scalar).hex() + "\n")
            fh.write("[sig]\n")
            for basename, pseudonym in rl.sig_rl:
                fh.write(f"{basename.hex()}\t{pseudonym.hex()}\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write revocation file {path}: {exc}") from exc


def revoke_key(path: str | os.PathLike, secret_scalar: int) -> None:
    path = os.fspath(path)
    rl = load_revocation_file(path)
    if secret_scalar not in rl.priv_rl:
        rl.priv_rl.append(secret_scalar)
    store_revocation_file(path, rl)


def revoke_signature(path: str | os.PathLike, basename: bytes, pseudonym: bytes) -> None:
    path = os.fspath(path)
    rl = load_revocation_file(path)
    if (basename, pseudonym) not in rl.sig_rl:
        rl.sig_rl.append((basename, pseudonym))
    store_revocation_file(path, rl)


def unrevoke_key(path: str | os.PathLike, secret_scalar: int) -> None:
    path = os.fspath(path)
    rl = load_revocation_file(path)
    rl.priv_rl = [s for s in rl.priv_rl if s != secret_scalar]
    store_revocation_file(path, rl)


def unrevoke_signature(path: str | os.PathLike, basename: bytes, pseudonym: bytes) -> None:
    path = os.fspath(path)
    rl = load_revocation_file(path)
    rl.sig_rl = [e for e in rl.sig_rl if e != (basename, pseudonym)]
    store_revocation_file(path, rl)
