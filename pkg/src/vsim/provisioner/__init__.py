"""Provider-side vSIM manager: secure-channel server, profile inventory,
replay cache, and revocation list handling."""

from .inventory import Inventory, ProfileRecord  # noqa: F401
from .replay import ReplayCache  # noqa: F401
from .revocation import (  # noqa: F401
    load_revocation_file,
    revoke_key,
    revoke_signature,
    store_revocation_file,
    unrevoke_key,
    unrevoke_signature,
)
from .service import ProvisionerService, ServerSession, SessionState  # noqa: F401
