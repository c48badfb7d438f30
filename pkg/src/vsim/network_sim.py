"""Serving-network simulator: vector generation, RES* verification, resync,
the ME/attach flow, and the post-attach data-path harness.

The network side reuses the same challenge-function module as the
subscriber side; correctness of both is anchored by the frozen oracle
vectors, not by comparing the two halves to each other. Home-control
structure is kept: the vector carries HXRES* (hash check at the serving
side) and XRES* (final comparison), and a successful attach leaves both
ends holding the same anchor key.

The user plane is a loopback byte pump. Its only claim under test is that
moving data after attach involves zero calls into the vSIM, with a paired
throughput comparison against a SIM-less control attach.
"""

from __future__ import annotations

import enum
import time
import zlib
from dataclasses import dataclass, field

from .errors import NotAttached, NotProvisioned, ResyncMacFailure, VsimError, WidthError
from .rng import Rng, SYSTEM_RNG
from .vsim_core import aka
from .vsim_core.device import (
    AuthMacFailure,
    AuthSuccess,
    AuthSyncFailure,
    VsimDevice,
)
from .vsim_core.profile import SubscriberProfile


@dataclass
class NetworkSubscriberEntry:
    supi: str
    k: bytes
    opc: bytes
    amf: bytes
    sqn_he: int
    serving_network_name: str

    @classmethod
    def from_profile(cls, profile: SubscriberProfile, sqn_he: int | None = None) -> "NetworkSubscriberEntry":
        return cls(
            supi=profile.supi,
            k=profile.k,
            opc=profile.opc,
            amf=profile.amf,
            sqn_he=profile.sqn if sqn_he is None else sqn_he,
            serving_network_name=profile.serving_network_name,
        )


@dataclass(frozen=True)
class AuthVector:
    rand: bytes
    autn: bytes
    hxres_star: bytes
    xres_star: bytes
    k_ausf: bytes


class Network:
    """Collapsed SEAF/AUSF/UDM endpoint over an in-memory subscriber table."""

    def __init__(self, entries: list[NetworkSubscriberEntry] | None = None,
                 rng: Rng = SYSTEM_RNG):
        self._entries = {e.supi: e for e in entries or []}
        self._rng = rng
        self._issued: dict[bytes, str] = {}  # rand -> supi, for resync validation

    def add_entry(self, entry: NetworkSubscriberEntry) -> None:
        self._entries[entry.supi] = entry

    def entry(self, supi: str) -> NetworkSubscriberEntry:
        if supi not in self._entries:
            raise VsimError(f"no subscriber entry for {supi}")
        return self._entries[supi]

    def generate_auth_vector(self, supi: str) -> AuthVector:
        """Fresh challenge: advances the home counter, computes the full vector."""
        entry = self.entry(supi)
        entry.sqn_he += 1
        rand = self._rng.bytes(16)
        snn = entry.serving_network_name
        autn = aka.build_autn(entry.k, entry.opc, rand, entry.sqn_he, entry.amf)
        res = aka.f2(entry.k, entry.opc, rand)
        ck = aka.f3(entry.k, entry.opc, rand)
        ik = aka.f4(entry.k, entry.opc, rand)
        xres_star = aka.derive_res_star(ck, ik, snn, rand, res)
        conc_sqn = autn[:6]
        k_ausf = aka.derive_k_ausf(ck, ik, snn, conc_sqn)
        self._issued[rand] = supi
        return AuthVector(rand, autn, aka.hxres_star(rand, xres_star), xres_star, k_ausf)

    def verify_response(self, supi: str, vector: AuthVector, res_star: bytes) -> bool:
        """Serving-side hash check, then home-side RES* comparison."""
        if aka.hxres_star(vector.rand, res_star) != vector.hxres_star:
            return False
        return res_star == vector.xres_star

    def process_resync(self, supi: str, rand: bytes, auts: bytes) -> None:
        """Adopt the subscriber's counter after authenticating the AUTS token."""
        if len(auts) != 14:
            raise WidthError("auts must be 14 bytes")
        if self._issued.get(rand) != supi:
            raise ResyncMacFailure("rand was not issued to this subscriber")
        entry = self.entry(supi)
        concealed, mac_s = auts[:6], auts[6:]
        sqn_ms_bytes = aka.xor_bytes(concealed, aka.f5_star(entry.k, entry.opc, rand))
        expected = aka.f1_star(entry.k, entry.opc, rand, sqn_ms_bytes, aka.RESYNC_AMF)
        if expected != mac_s:
            raise ResyncMacFailure("auts failed its integrity check")
        entry.sqn_he = aka.sqn_from_bytes(sqn_ms_bytes)


# -- attach flow ------------------------------------------------------------------

class AttachOutcome(enum.Enum):
    ATTACHED = "Attached"
    REJECTED = "Rejected"
    RESYNCED_THEN_ATTACHED = "Resynced-then-Attached"


@dataclass(frozen=True)
class AttachReport:
    outcome: AttachOutcome
    reason: str | None
    vsim_invocations: int
    auth_round_trips: int

    def to_line(self) -> str:
        reason = self.reason or "-"
        return (
            f"attach outcome={self.outcome.value} reason={reason} "
            f"vsim_invocations={self.vsim_invocations} auth_round_trips={self.auth_round_trips}"
        )


class SimCard:
    """Minimal challenge interface the ME needs from whatever SIM backs it."""

    def respond(self, rand: bytes, autn: bytes, snn: str):
        raise NotImplementedError


class VsimBackedSim(SimCard):
    def __init__(self, device: VsimDevice):
        self.device = device
        self.invocations = 0

    def respond(self, rand: bytes, autn: bytes, snn: str):
        self.invocations += 1
        return self.device.handle_challenge(rand, autn, snn)

    @property
    def supi(self) -> str:
        return self.device.load_profile().supi


class InjectedKeySim(SimCard):
    """Control SIM: plain in-memory key material, no TEE or sealed storage."""

    def __init__(self, profile: SubscriberProfile):
        self._profile = profile
        self.invocations = 0

    def respond(self, rand: bytes, autn: bytes, snn: str):
        from .vsim_core.device import AuthChallenge, respond_to_challenge

        self.invocations += 1
        result, self._profile = respond_to_challenge(
            self._profile, AuthChallenge(rand, autn), snn
        )
        return result

    @property
    def supi(self) -> str:
        return self._profile.supi


@dataclass
class MobileEquipment:
    """UE shell: forwards network challenges to its SIM, owns the anchor key."""

    sim: SimCard
    supi: str = ""
    attached: bool = False
    k_ausf: bytes | None = None
    _invocations_at_attach: int = field(default=0, repr=False)

    def __post_init__(self):
        if not self.supi:
            self.supi = self.sim.supi  # type: ignore[attr-defined]

    def attach(self, network: Network) -> AttachReport:
        """One challenge round trip, plus at most one resync loop."""
        start_invocations = self.sim.invocations  # type: ignore[attr-defined]
        round_trips = 0
        resynced = False
        try:
            entry_snn = network.entry(self.supi).serving_network_name
            for _ in range(2):
                vector = network.generate_auth_vector(self.supi)
                round_trips += 1
                result = self.sim.respond(vector.rand, vector.autn, entry_snn)
                if isinstance(result, AuthMacFailure):
                    return self._report(AttachOutcome.REJECTED, "MacFailure",
                                        start_invocations, round_trips)
                if isinstance(result, AuthSyncFailure):
                    if resynced:
                        return self._report(AttachOutcome.REJECTED, "RepeatedSyncFailure",
                                            start_invocations, round_trips)
                    network.process_resync(self.supi, vector.rand, result.auts)
                    resynced = True
                    continue
                assert isinstance(result, AuthSuccess)
                if not network.verify_response(self.supi, vector, result.res_star):
                    return self._report(AttachOutcome.REJECTED, "ResStarMismatch",
                                        start_invocations, round_trips)
                self.attached = True
                self.k_ausf = result.k_ausf
                outcome = (
                    AttachOutcome.RESYNCED_THEN_ATTACHED if resynced else AttachOutcome.ATTACHED
                )
                return self._report(outcome, None, start_invocations, round_trips)
            return self._report(AttachOutcome.REJECTED, "ResyncLoop",
                                start_invocations, round_trips)
        except NotProvisioned:
            return self._report(AttachOutcome.REJECTED, "NotProvisioned",
                                start_invocations, round_trips)
        except ResyncMacFailure:
            return self._report(AttachOutcome.REJECTED, "ResyncMacFailure",
                                start_invocations, round_trips)

    def _report(self, outcome: AttachOutcome, reason: str | None,
                start_invocations: int, round_trips: int) -> AttachReport:
        invocations = self.sim.invocations - start_invocations  # type: ignore[attr-defined]
        self._invocations_at_attach = self.sim.invocations  # type: ignore[attr-defined]
        return AttachReport(outcome, reason, invocations, round_trips)


# -- data path ----------------------------------------------------------------------

@dataclass(frozen=True)
class DataPathReport:
    bytes_moved: int
    elapsed_seconds: float
    vsim_invocations_during_transfer: int

    @property
    def throughput_mbps(self) -> float:
        if self.elapsed_seconds == 0:
            return float("inf")
        return self.bytes_moved * 8 / self.elapsed_seconds / 1e6

    def to_line(self) -> str:
        return (
            f"datapath bytes={self.bytes_moved} elapsed_s={self.elapsed_seconds:.4f} "
            f"throughput_mbps={self.throughput_mbps:.1f} "
            f"vsim_invocations={self.vsim_invocations_during_transfer}"
        )


def run_data_path(ue: MobileEquipment, network: Network, total_bytes: int,
                  chunk_size: int = 1 << 20) -> DataPathReport:
    """Pump bytes through the simulated user plane; the SIM must stay idle."""
    if not ue.attached:
        raise NotAttached("attach before moving user-plane data")
    invocations_before = ue.sim.invocations  # type: ignore[attr-defined]
    chunk = bytes(range(256)) * (chunk_size // 256 + 1)
    chunk = chunk[:chunk_size]
    moved = 0
    crc = 0
    start = time.perf_counter()
    while moved < total_bytes:
        n = min(chunk_size, total_bytes - moved)
        # receiver side: integrity fold over the payload, as a stand-in for
        # the copy/checksum work a user-plane stack performs per packet
        crc = zlib.crc32(chunk[:n], crc)
        moved += n
    elapsed = time.perf_counter() - start
    invocations_after = ue.sim.invocations  # type: ignore[attr-defined]
    # post-attach traffic must never touch the SIM
    assert invocations_after == invocations_before
    return DataPathReport(moved, elapsed, invocations_after - invocations_before)


# -- subscriber entry files ------------------------------------------------------------

def load_network_entries(path: str) -> list[NetworkSubscriberEntry]:
    """Tab-separated hex records: supi, k, opc, amf, sqn_he(6B), snn."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 6:
                raise VsimError(f"malformed network entry: {len(fields)} fields")
            entries.append(
                NetworkSubscriberEntry(
                    supi=bytes.fromhex(fields[0]).decode("ascii"),
                    k=bytes.fromhex(fields[1]),
                    opc=bytes.fromhex(fields[2]),
                    amf=bytes.fromhex(fields[3]),
                    sqn_he=aka.sqn_from_bytes(bytes.fromhex(fields[4])),
                    serving_network_name=bytes.fromhex(fields[5]).decode("utf-8"),
                )
            )
    return entries


def store_network_entries(path: str, entries: list[NetworkSubscriberEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fields = [
                e.supi.encode("ascii").hex(),
                e.k.hex(),
                e.opc.hex(),
                e.amf.hex(),
                aka.sqn_to_bytes(e.sqn_he).hex(),
                e.serving_network_name.encode("utf-8").hex(),
            ]
            fh.write("\t".join(fields) + "\n")
