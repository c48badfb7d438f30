"""The vSIM: provisioned identity over sealed storage plus the 5G AKA responder.

Challenge handling follows the usual flow: recover the network's sequence
number through the anonymity key, verify the network MAC, and either answer
with RES*/K_AUSF (advancing the stored counter) or return a resync token
carrying our own counter. The profile round-trips through sealed storage on
every challenge, mirroring a SIM that keeps no plaintext state outside the
secure element.
"""

from __future__ import annotations

import enum
import os
import time
from dataclasses import dataclass
from typing import Callable

from ..errors import (
    AlreadyProvisioned,
    BadHeader,
    IoError,
    NotProvisioned,
    SealTamper,
    VersionUnsupported,
    WidthError,
)
from ..rng import Rng, SYSTEM_RNG
from ..tee_host import EnclaveContext, load_blob, seal, store_blob, unseal
from . import aka
from .profile import SubscriberProfile
from .provisioning import AttestRequest, run_provisioning


# -- challenge result variants -----------------------------------------------------

@dataclass(frozen=True)
class AuthSuccess:
    res_star: bytes
    k_ausf: bytes


@dataclass(frozen=True)
class AuthSyncFailure:
    auts: bytes


@dataclass(frozen=True)
class AuthMacFailure:
    pass


AuthResult = AuthSuccess | AuthSyncFailure | AuthMacFailure


@dataclass(frozen=True)
class AuthChallenge:
    rand: bytes
    autn: bytes

    def __post_init__(self):
        if len(self.rand) != 16:
            raise WidthError("rand must be 16 bytes")
        if len(self.autn) != 16:
            raise WidthError("autn must be 16 bytes")


def respond_to_challenge(
    profile: SubscriberProfile, challenge: AuthChallenge, serving_network_name: str | None = None
) -> tuple[AuthResult, SubscriberProfile]:
    """Pure AKA response: returns the result and the (possibly advanced) profile."""
    snn = serving_network_name or profile.serving_network_name
    rand = challenge.rand
    conc_sqn, amf, mac = challenge.autn[:6], challenge.autn[6:8], challenge.autn[8:]
    ak = aka.f5(profile.k, profile.opc, rand)
    sqn_bytes = aka.xor_bytes(conc_sqn, ak)
    expected_mac = aka.f1(profile.k, profile.opc, rand, sqn_bytes, amf)
    if expected_mac != mac:
        return AuthMacFailure(), profile
    sqn_net = aka.sqn_from_bytes(sqn_bytes)
    in_window = profile.sqn < sqn_net <= profile.sqn + aka.SQN_WINDOW
    if not in_window:
        return AuthSyncFailure(aka.build_auts(profile.k, profile.opc, rand, profile.sqn)), profile
    res = aka.f2(profile.k, profile.opc, rand)
    ck = aka.f3(profile.k, profile.opc, rand)
    ik = aka.f4(profile.k, profile.opc, rand)
    res_star = aka.derive_res_star(ck, ik, snn, rand, res)
    k_ausf = aka.derive_k_ausf(ck, ik, snn, conc_sqn)
    return AuthSuccess(res_star, k_ausf), profile.with_sqn(sqn_net)


# -- device status -------------------------------------------------------------------

class StatusKind(enum.Enum):
    UNPROVISIONED = "Unprovisioned"
    PROVISIONED = "Provisioned"
    CORRUPTED = "Corrupted"


@dataclass(frozen=True)
class DeviceStatus:
    kind: StatusKind
    supi: str | None = None
    carrier_name: str | None = None
    sqn: int | None = None


class VsimDevice:
    """One simulated device: an enclave context bound to a sealed storage path."""

    def __init__(
        self,
        ctx: EnclaveContext,
        storage_path: str | os.PathLike,
        rng: Rng = SYSTEM_RNG,
        clock: Callable[[], float] = time.time,
    ):
        self.ctx = ctx
        self.storage_path = os.fspath(storage_path)
        self.rng = rng
        self.clock = clock

    # -- profile lifecycle ------------------------------------------------------

    def is_provisioned(self) -> bool:
        return os.path.exists(self.storage_path)

    def store_profile(self, profile: SubscriberProfile) -> None:
        blob = seal(self.ctx, profile.to_bytes(), self.rng)
        store_blob(self.storage_path, blob)

    def load_profile(self) -> SubscriberProfile:
        if not self.is_provisioned():
            raise NotProvisioned(f"no profile at {self.storage_path}")
        return SubscriberProfile.from_bytes(unseal(self.ctx, load_blob(self.storage_path)))

    def provision(
        self,
        transport,
        provisioner_static_pk: bytes,
        activation_token: bytes,
        expected_request: AttestRequest,
    ) -> SubscriberProfile:
        """Run the secure-channel handshake, then seal and store the profile."""
        if self.is_provisioned():
            raise AlreadyProvisioned(f"profile already stored at {self.storage_path}")
        profile = run_provisioning(
            transport,
            self.ctx,
            provisioner_static_pk,
            activation_token,
            expected_request,
            self.rng,
            self.clock,
        )
        self.store_profile(profile)
        return profile

    # -- authentication -----------------------------------------------------------

    def handle_challenge(
        self, rand: bytes, autn: bytes, serving_network_name: str | None = None
    ) -> AuthResult:
        """The ME-facing surface: unseal, answer, re-seal on counter advance."""
        profile = self.load_profile()
        result, updated = respond_to_challenge(
            profile, AuthChallenge(rand, autn), serving_network_name
        )
        if updated.sqn != profile.sqn:
            self.store_profile(updated)
        return result

    def status(self) -> DeviceStatus:
        if not self.is_provisioned():
            return DeviceStatus(StatusKind.UNPROVISIONED)
        try:
            profile = self.load_profile()
        except (SealTamper, BadHeader, VersionUnsupported, IoError):
            return DeviceStatus(StatusKind.CORRUPTED)
        return DeviceStatus(
            StatusKind.PROVISIONED,
            supi=profile.supi,
            carrier_name=profile.carrier_name,
            sqn=profile.sqn,
        )
