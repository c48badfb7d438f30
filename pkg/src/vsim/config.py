"""Key-value config files shared by the device, provisioner, and CLI.

Format: one `key = value` pair per line, `#` comments, blank lines ignored.
Binary values are hex encoded; paths are resolved relative to the config
file's directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .crypto.group import scalar_from_bytes
from .crypto.groupsig import GroupPublicKey, MemberPrivateKey
from .errors import ConfigError
from .rng import Rng


def parse_kv_file(path: str | os.PathLike) -> dict[str, str]:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_kv_file(path: str | os.PathLike, values: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in values.items():
            fh.write(f"{key} = {value}\n")


class _Fields:
    def __init__(self, raw: dict[str, str], origin: str):
        self.raw = raw
        self.origin = origin
        self.base_dir = os.path.dirname(os.path.abspath(origin))

    def require(self, key: str) -> str:
        if key not in self.raw:
            raise ConfigError(f"{self.origin}: missing required field '{key}'")
        return self.raw[key]

    def get_hex(self, key: str, width: int | None = None) -> bytes:
        value = self.require(key)
        try:
            data = bytes.fromhex(value)
        except ValueError:
            raise ConfigError(f"{self.origin}: field '{key}' is not valid hex") from None
        if width is not None and len(data) != width:
            raise ConfigError(f"{self.origin}: field '{key}' must be {width} bytes")
        return data

    def get_path(self, key: str, must_exist: bool = False) -> str:
        value = self.require(key)
        resolved = value if os.path.isabs(value) else os.path.join(self.base_dir, value)
        if must_exist and not os.path.exists(resolved):
            raise ConfigError(f"{self.origin}: path for '{key}' does not exist: {resolved}")
        return resolved

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.raw:
            if default is None:
                raise ConfigError(f"{self.origin}: missing required field '{key}'")
            return default
        try:
            return int(self.raw[key])
        except ValueError:
            raise ConfigError(f"{self.origin}: field '{key}' is not an integer") from None

    def get_address(self, key: str) -> tuple[str, int]:
        value = self.require(key)
        host, _, port = value.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"{self.origin}: field '{key}' must be host:port")
        return host, int(port)

    def make_rng(self) -> Rng:
        if "seed" in self.raw:
            return Rng.from_seed(self.raw["seed"])
        return Rng.system()


@dataclass
class DeviceConfig:
    device_root_secret: bytes
    member_key: MemberPrivateKey
    enclave_image_path: str
    boot_manifest_path: str
    storage_path: str
    provisioner_address: tuple[str, int]
    provisioner_static_pk: bytes
    root_pk: bytes
    activation_token: bytes
    tee_version: int
    basename: bytes
    rng: Rng

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DeviceConfig":
        fields = _Fields(parse_kv_file(path), os.fspath(path))
        member_key = MemberPrivateKey(
            secret_scalar=scalar_from_bytes(fields.get_hex("member_secret_scalar", 32)),
            membership_credential=fields.get_hex("member_credential", 64),
            group_id=fields.get_hex("group_id", 16),
        )
        return cls(
            device_root_secret=fields.get_hex("device_root_secret", 32),
            member_key=member_key,
            enclave_image_path=fields.get_path("enclave_image", must_exist=True),
            boot_manifest_path=fields.get_path("boot_manifest", must_exist=True),
            storage_path=fields.get_path("storage"),
            provisioner_address=fields.get_address("provisioner_address"),
            provisioner_static_pk=fields.get_hex("provisioner_static_pk", 32),
            root_pk=fields.get_hex("root_pk", 32),
            activation_token=fields.get_hex("activation_token", 16),
            tee_version=fields.get_int("tee_version", 1),
            basename=fields.require("basename").encode(),
            rng=fields.make_rng(),
        )


@dataclass
class ProvisionerConfig:
    listen_address: tuple[str, int]
    static_sk: int
    group_public_key: GroupPublicKey
    revocation_file: str
    expected_measurement: bytes
    inventory_file: str
    tee_version: int
    basename: bytes
    session_timeout: float
    replay_max_age: float
    replay_max_size: int
    rng: Rng

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ProvisionerConfig":
        fields = _Fields(parse_kv_file(path), os.fspath(path))
        return cls(
            listen_address=fields.get_address("listen_address"),
            static_sk=scalar_from_bytes(fields.get_hex("static_sk", 32)),
            group_public_key=GroupPublicKey.from_bytes(fields.get_hex("group_public_key", 48)),
            revocation_file=fields.get_path("revocation_file"),
            expected_measurement=fields.get_hex("expected_measurement", 32),
            inventory_file=fields.get_path("inventory_file"),
            tee_version=fields.get_int("tee_version", 1),
            basename=fields.require("basename").encode(),
            session_timeout=fields.get_int("session_timeout", 30),
            replay_max_age=fields.get_int("replay_max_age", 300),
            replay_max_size=fields.get_int("replay_max_size", 4096),
            rng=fields.make_rng(),
        )
