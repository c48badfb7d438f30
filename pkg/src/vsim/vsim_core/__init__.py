"""The vSIM: AKA challenge functions, subscriber profiles, the provisioning
client, and the device object tying them to sealed storage."""

from .device import (  # noqa: F401
    AuthChallenge,
    AuthMacFailure,
    AuthResult,
    AuthSuccess,
    AuthSyncFailure,
    DeviceStatus,
    StatusKind,
    VsimDevice,
    respond_to_challenge,
)
from .profile import SubscriberProfile  # noqa: F401
from .provisioning import (  # noqa: F401
    AttestRequest,
    ClientSession,
    ProvisioningState,
    run_provisioning,
)
