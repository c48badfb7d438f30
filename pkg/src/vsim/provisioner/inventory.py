"""Profile inventory: the provisioner's stock of deliverable profiles.

Flat file, one record per line, tab-separated hex fields in this order:

    token  supi  k  opc  amf  sqn(6B)  carrier  snn  claimed(00|01)  pseudonym|-

Updates rewrite the whole file atomically (temp file + rename). A record's
claimed flag transitions false -> true exactly once; the claim operation is
the serialization point that enforces single delivery per token under
concurrent sessions.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, replace

from ..errors import DuplicateSupi, IoError, SessionRejected
from ..protocol import ErrorCode, TOKEN_LEN
from ..rng import Rng, SYSTEM_RNG
from ..vsim_core.aka import sqn_from_bytes, sqn_to_bytes
from ..vsim_core.profile import SubscriberProfile


@dataclass(frozen=True)
class ProfileRecord:
    activation_token: bytes
    profile: SubscriberProfile
    claimed: bool = False
    claimed_by_pseudonym: bytes | None = None


def _record_to_line(rec: ProfileRecord) -> str:
    p = rec.profile
    fields = [
        rec.activation_token.hex(),
        p.supi.encode("ascii").hex(),
        p.k.hex(),
        p.opc.hex(),
        p.amf.hex(),
        sqn_to_bytes(p.sqn).hex(),
        p.carrier_name.encode("utf-8").hex(),
        p.serving_network_name.encode("utf-8").hex(),
        "01" if rec.claimed else "00",
        rec.claimed_by_pseudonym.hex() if rec.claimed_by_pseudonym else "-",
    ]
    return "\t".join(fields)


def _record_from_line(line: str) -> ProfileRecord:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 10:
        raise IoError(f"malformed inventory record: {len(fields)} fields")
    profile = SubscriberProfile(
        supi=bytes.fromhex(fields[1]).decode("ascii"),
        k=bytes.fromhex(fields[2]),
        opc=bytes.fromhex(fields[3]),
        amf=bytes.fromhex(fields[4]),
        sqn=sqn_from_bytes(bytes.fromhex(fields[5])),
        carrier_name=bytes.fromhex(fields[6]).decode("utf-8"),
        serving_network_name=bytes.fromhex(fields[7]).decode("utf-8"),
    )
    return ProfileRecord(
        activation_token=bytes.fromhex(fields[0]),
        profile=profile,
        claimed=fields[8] == "01",
        claimed_by_pseudonym=None if fields[9] == "-" else bytes.fromhex(fields[9]),
    )


class Inventory:
    """File-backed record store; all mutation happens under one lock."""

    def __init__(self, path: str | os.PathLike):
        self.path = os.fspath(path)
        self._lock = threading.Lock()
        if not os.path.exists(self.path):
            self._write([])

    def _read(self) -> list[ProfileRecord]:
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                lines = [line for line in fh if line.strip() and not line.startswith("#")]
        except OSError as exc:
            raise IoError(f"cannot read inventory {self.path}: {exc}") from exc
        return [_record_from_line(line) for line in lines]

    def _write(self, records: list[ProfileRecord]) -> None:
        tmp = self.path + ".tmp"
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                for rec in records:
                    fh.write(_record_to_line(rec) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
        except OSError as exc:
            raise IoError(f"cannot write inventory {self.path}: {exc}") from exc

    def add(self, profile: SubscriberProfile, rng: Rng = SYSTEM_RNG) -> bytes:
        """Append an unclaimed record under a fresh one-time token."""
        return self.add_many([profile], rng)[0]

    def add_many(self, profiles: list[SubscriberProfile], rng: Rng = SYSTEM_RNG) -> list[bytes]:
        """Append a batch in one atomic rewrite; one fresh token per profile."""
        with self._lock:
            records = self._read()
            supis = {rec.profile.supi for rec in records}
            existing = {rec.activation_token for rec in records}
            tokens = []
            for profile in profiles:
                if profile.supi in supis:
                    raise DuplicateSupi(f"supi {profile.supi} already in inventory")
                supis.add(profile.supi)
                token = rng.bytes(TOKEN_LEN)
                while token in existing:
                    token = rng.bytes(TOKEN_LEN)
                existing.add(token)
                tokens.append(token)
                records.append(ProfileRecord(token, profile))
            self._write(records)
            return tokens

    def list_records(self) -> list[ProfileRecord]:
        with self._lock:
            return self._read()

    def get(self, token: bytes) -> ProfileRecord | None:
        with self._lock:
            for rec in self._read():
                if rec.activation_token == token:
                    return rec
            return None

    def check_available(self, token: bytes) -> None:
        """Raise the wire-level rejection if the token cannot be served."""
        rec = self.get(token)
        if rec is None:
            raise SessionRejected(ErrorCode.UNKNOWN_TOKEN, "unknown activation token")
        if rec.claimed:
            raise SessionRejected(ErrorCode.TOKEN_ALREADY_CLAIMED, "token already claimed")

    def claim(self, token: bytes, pseudonym: bytes) -> SubscriberProfile:
        """Atomically flip a record to claimed; at most one caller ever wins."""
        with self._lock:
            records = self._read()
            for i, rec in enumerate(records):
                if rec.activation_token == token:
                    if rec.claimed:
                        raise SessionRejected(
                            ErrorCode.TOKEN_ALREADY_CLAIMED, "token already claimed"
                        )
                    records[i] = replace(rec, claimed=True, claimed_by_pseudonym=pseudonym)
                    self._write(records)
                    return rec.profile
            raise SessionRejected(ErrorCode.UNKNOWN_TOKEN, "unknown activation token")
