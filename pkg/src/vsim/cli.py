"""Operator CLI: provisioner administration, device provisioning, attach,
revocation drills, and the data-path benchmark.

Output is line-structured `key=value` text so scripts can parse it without
regexes. Exit codes: 0 success, 1 runtime error (error class name on
stderr), 2 usage error, and distinct codes per protocol failure class for
device commands (see EXIT_CODES).
"""

from __future__ import annotations

import os
import signal
import statistics
import sys

import click

from . import attestation, network_sim, protocol, tee_host
from .config import (
    DeviceConfig,
    ProvisionerConfig,
    parse_kv_file,
    write_kv_file,
)
from .crypto import group_join, group_setup, sig_keygen
from .crypto.group import scalar_from_bytes, scalar_to_bytes
from .crypto.groupsig import IssuerSecret
from .errors import (
    AlreadyProvisioned,
    AttestRejected,
    AttestRequestMismatch,
    BadHeader,
    BootChainBroken,
    ChannelAuthFailure,
    ConfigError,
    NotAttached,
    NotProvisioned,
    ProfileParseError,
    ProtocolError,
    SealTamper,
    ServerNonceMismatch,
    VsimError,
)
from .provisioner import revocation
from .provisioner.inventory import Inventory
from .provisioner.service import ProvisionerService
from .rng import Rng
from .vsim_core import AttestRequest, SubscriberProfile, VsimDevice

EXIT_CODES: list[tuple[type, int]] = [
    # ordered: subclasses before their bases
    (BootChainBroken, 3),
    (ChannelAuthFailure, 4),
    (ServerNonceMismatch, 5),
    (AttestRejected, 6),
    (ProfileParseError, 7),
    (AlreadyProvisioned, 8),
    (NotProvisioned, 9),
    (AttestRequestMismatch, 15),
    (SealTamper, 12),
    (BadHeader, 12),
    (NotAttached, 14),
    (ProtocolError, 13),
    (VsimError, 1),
]

ATTACH_REJECT_CODES = {"MacFailure": 10, "ResStarMismatch": 11, "NotProvisioned": 9}


def _exit_for(exc: VsimError) -> int:
    for exc_type, code in EXIT_CODES:
        if isinstance(exc, exc_type):
            return code
    return 1


def _run(fn):
    try:
        fn()
    except VsimError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(_exit_for(exc))


def _load_profile_spec(path: str) -> SubscriberProfile:
    fields = parse_kv_file(path)
    try:
        return SubscriberProfile(
            supi=fields["supi"],
            k=bytes.fromhex(fields["k"]),
            opc=bytes.fromhex(fields["opc"]),
            amf=bytes.fromhex(fields["amf"]),
            sqn=int(fields.get("sqn", "0")),
            carrier_name=fields["carrier_name"],
            serving_network_name=fields["serving_network_name"],
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing profile field {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


@click.group()
def main():
    """Software SIM with attested provisioning: provisioner, device, and setup tools."""


# -------------------------------------------------------------------------------
# provisioner
# -------------------------------------------------------------------------------

@main.group()
def provisioner():
    """Provider-side vSIM manager commands."""


_config_option = click.option(
    "--config",
    "config_path",
    envvar="VSIM_CONFIG",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="key-value config file (or set VSIM_CONFIG)",
)


@provisioner.command()
@_config_option
@click.option("--listen", "listen_override", default=None, help="override listen host:port")
def serve(config_path: str, listen_override: str | None):
    """Run the provisioning service until interrupted."""

    def body():
        cfg = ProvisionerConfig.load(config_path)
        if listen_override:
            host, _, port = listen_override.rpartition(":")
            cfg.listen_address = (host, int(port))
        service = ProvisionerService(cfg)
        click.echo(f"listening address={service.address[0]}:{service.address[1]}")

        def stop(_signum, _frame):
            raise KeyboardInterrupt

        signal.signal(signal.SIGTERM, stop)
        try:
            service.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            service.shutdown()

    _run(body)


@provisioner.command("add-profile")
@_config_option
@click.option("--profile-spec", required=True, type=click.Path(exists=True, dir_okay=False))
def add_profile(config_path: str, profile_spec: str):
    """Add a profile to the inventory; prints its one-time activation token."""

    def body():
        cfg = ProvisionerConfig.load(config_path)
        token = Inventory(cfg.inventory_file).add(_load_profile_spec(profile_spec), cfg.rng)
        click.echo(f"token={token.hex()}")

    _run(body)


@provisioner.command("list-profiles")
@_config_option
def list_profiles(config_path: str):
    """List inventory records (never prints key material)."""

    def body():
        cfg = ProvisionerConfig.load(config_path)
        for rec in Inventory(cfg.inventory_file).list_records():
            pseudonym = rec.claimed_by_pseudonym.hex() if rec.claimed_by_pseudonym else "-"
            click.echo(
                f"profile token={rec.activation_token.hex()} supi={rec.profile.supi} "
                f"claimed={'yes' if rec.claimed else 'no'} pseudonym={pseudonym}"
            )

    _run(body)


@provisioner.command("revoke-key")
@_config_option
@click.argument("secret_scalar_hex")
@click.option("--remove", is_flag=True, help="un-revoke instead")
def revoke_key_cmd(config_path: str, secret_scalar_hex: str, remove: bool):
    """Add (or remove) a member secret scalar on the private-key revocation list."""

    def body():
        cfg = ProvisionerConfig.load(config_path)
        scalar = scalar_from_bytes(bytes.fromhex(secret_scalar_hex))
        if remove:
            revocation.unrevoke_key(cfg.revocation_file, scalar)
        else:
            revocation.revoke_key(cfg.revocation_file, scalar)
        click.echo(f"revocation priv={'removed' if remove else 'added'}")

    _run(body)


@provisioner.command("revoke-sig")
@_config_option
@click.argument("basename")
@click.argument("pseudonym_hex")
@click.option("--remove", is_flag=True, help="un-revoke instead")
def revoke_sig_cmd(config_path: str, basename: str, pseudonym_hex: str, remove: bool):
    """Blacklist (or unblacklist) a (basename, pseudonym) signature pattern."""

    def body():
        cfg = ProvisionerConfig.load(config_path)
        args = (cfg.revocation_file, basename.encode(), bytes.fromhex(pseudonym_hex))
        if remove:
            revocation.unrevoke_signature(*args)
        else:
            revocation.revoke_signature(*args)
        click.echo(f"revocation sig={'removed' if remove else 'added'}")

    _run(body)


# -------------------------------------------------------------------------------
# device
# -------------------------------------------------------------------------------

@main.group()
def device():
    """Device-side commands: provision, attach, status, bench."""


def _load_device(config_path: str, token_override: str | None = None) -> tuple[DeviceConfig, VsimDevice]:
    cfg = DeviceConfig.load(config_path)
    if token_override:
        cfg.activation_token = bytes.fromhex(token_override)
    with open(cfg.enclave_image_path, "rb") as fh:
        image = fh.read()
    with open(cfg.boot_manifest_path, "rb") as fh:
        manifest = fh.read()
    ctx = tee_host.load_enclave(
        image, cfg.device_root_secret, cfg.member_key, cfg.root_pk, manifest
    )
    return cfg, VsimDevice(ctx, cfg.storage_path, cfg.rng)


@device.command()
@_config_option
@click.option("--token", "token_override", default=None, help="override the activation token (hex)")
def provision(config_path: str, token_override: str | None):
    """Obtain a profile over the attested secure channel and seal it to storage."""

    def body():
        # enclave load (and boot-chain verification) happens before any connection
        cfg, dev = _load_device(config_path, token_override)
        transport = protocol.connect(cfg.provisioner_address)
        try:
            profile = dev.provision(
                transport,
                cfg.provisioner_static_pk,
                cfg.activation_token,
                AttestRequest(cfg.tee_version, cfg.basename),
            )
        finally:
            transport.close()
        click.echo(f"provisioned supi={profile.supi} carrier={profile.carrier_name}")

    _run(body)


@device.command()
@_config_option
def status(config_path: str):
    """Report the sealed-profile state."""

    def body():
        _, dev = _load_device(config_path)
        st = dev.status()
        if st.supi is None:
            click.echo(f"status kind={st.kind.value}")
        else:
            click.echo(
                f"status kind={st.kind.value} supi={st.supi} "
                f"carrier={st.carrier_name} sqn={st.sqn}"
            )

    _run(body)


def _network_from_file(path: str, rng: Rng) -> network_sim.Network:
    return network_sim.Network(network_sim.load_network_entries(path), rng)


@device.command()
@_config_option
@click.option("--network-entries", required=True, type=click.Path(exists=True, dir_okay=False))
def attach(config_path: str, network_entries: str):
    """Run the 5G AKA attach flow against a local simulated network."""

    def body():
        cfg, dev = _load_device(config_path)
        network = _network_from_file(network_entries, cfg.rng)
        ue = network_sim.MobileEquipment(network_sim.VsimBackedSim(dev))
        report = ue.attach(network)
        click.echo(report.to_line())
        if report.outcome is network_sim.AttachOutcome.REJECTED:
            sys.exit(ATTACH_REJECT_CODES.get(report.reason or "", 1))

    _run(body)


def _parse_size(text: str) -> int:
    text = text.strip().upper()
    multipliers = {"K": 1 << 10, "M": 1 << 20, "G": 1 << 30}
    if text and text[-1] in multipliers:
        return int(float(text[:-1]) * multipliers[text[-1]])
    return int(text)


@device.command()
@_config_option
@click.option("--network-entries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--bytes", "total_bytes", default="200M", help="transfer size, e.g. 200M")
@click.option("--chunk-size", default="1M")
@click.option("--runs", default=5, type=int)
def bench(config_path: str, network_entries: str, total_bytes: str, chunk_size: str, runs: int):
    """Paired data-path benchmark: vSIM-backed attach vs direct-key control attach."""

    def body():
        cfg, dev = _load_device(config_path)
        size = _parse_size(total_bytes)
        chunk = _parse_size(chunk_size)
        network = _network_from_file(network_entries, cfg.rng)

        vsim_ue = network_sim.MobileEquipment(network_sim.VsimBackedSim(dev))
        report = vsim_ue.attach(network)
        if report.outcome is network_sim.AttachOutcome.REJECTED:
            click.echo(report.to_line())
            sys.exit(ATTACH_REJECT_CODES.get(report.reason or "", 1))

        control_profile = dev.load_profile()
        control_sim = network_sim.InjectedKeySim(control_profile)
        control_ue = network_sim.MobileEquipment(control_sim)
        control_ue.attach(network)

        vsim_runs, control_runs = [], []
        total_invocations = 0
        for run in range(1, runs + 1):
            r_vsim = network_sim.run_data_path(vsim_ue, network, size, chunk)
            r_ctl = network_sim.run_data_path(control_ue, network, size, chunk)
            vsim_runs.append(r_vsim.throughput_mbps)
            control_runs.append(r_ctl.throughput_mbps)
            total_invocations += r_vsim.vsim_invocations_during_transfer
            click.echo(f"bench run={run} kind=vsim {r_vsim.to_line()}")
            click.echo(f"bench run={run} kind=control {r_ctl.to_line()}")
        median_vsim = statistics.median(vsim_runs)
        median_control = statistics.median(control_runs)
        rel_diff = abs(median_vsim - median_control) / max(median_vsim, median_control) * 100
        click.echo(
            f"bench summary median_vsim_mbps={median_vsim:.1f} "
            f"median_control_mbps={median_control:.1f} relative_diff_pct={rel_diff:.2f} "
            f"vsim_invocations_during_transfer={total_invocations}"
        )

    _run(body)


# -------------------------------------------------------------------------------
# setup: key material and scenario plumbing
# -------------------------------------------------------------------------------

@main.group()
def setup():
    """Generate key material, boot manifests, and ready-to-run scenario files."""


@setup.command("gen-group")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=None)
def gen_group(out_dir: str, seed: str | None):
    """Create a signature group: issuer secret + shared public key."""

    def body():
        rng = Rng.from_seed(seed) if seed else Rng.system()
        os.makedirs(out_dir, exist_ok=True)
        gpk, issuer = group_setup(rng)
        write_kv_file(
            os.path.join(out_dir, "issuer.conf"),
            {
                "signing_key": scalar_to_bytes(issuer.signing_key).hex(),
                "group_id": issuer.group_id.hex(),
            },
        )
        write_kv_file(
            os.path.join(out_dir, "group.conf"),
            {"group_public_key": gpk.to_bytes().hex()},
        )
        click.echo(f"group_public_key={gpk.to_bytes().hex()}")

    _run(body)


@setup.command("gen-member")
@click.option("--issuer", "issuer_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=None)
def gen_member(issuer_path: str, out_path: str, seed: str | None):
    """Join the group: write a member key file."""

    def body():
        rng = Rng.from_seed(seed) if seed else Rng.system()
        fields = parse_kv_file(issuer_path)
        issuer = IssuerSecret(
            signing_key=scalar_from_bytes(bytes.fromhex(fields["signing_key"])),
            group_id=bytes.fromhex(fields["group_id"]),
        )
        member = group_join(issuer, rng)
        write_kv_file(
            out_path,
            {
                "member_secret_scalar": scalar_to_bytes(member.secret_scalar).hex(),
                "member_credential": member.membership_credential.hex(),
                "group_id": member.group_id.hex(),
            },
        )
        click.echo(f"member written path={out_path}")

    _run(body)


@setup.command("gen-keypair")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=None)
def gen_keypair(out_path: str, seed: str | None):
    """Generate a signing/decryption keypair file (sk + pk, hex)."""

    def body():
        rng = Rng.from_seed(seed) if seed else Rng.system()
        sk, pk = sig_keygen(rng)
        write_kv_file(out_path, {"sk": scalar_to_bytes(sk).hex(), "pk": pk.hex()})
        click.echo(f"pk={pk.hex()}")

    _run(body)


@setup.command("gen-boot-chain")
@click.option("--root", "root_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--layers", default=2, type=int, help="synthetic layers before the enclave image")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=None)
def gen_boot_chain(root_path: str, image_path: str, layers: int, out_path: str, seed: str | None):
    """Build a signed boot manifest ending at the enclave image."""

    def body():
        rng = Rng.from_seed(seed) if seed else Rng.system()
        root_sk = scalar_from_bytes(bytes.fromhex(parse_kv_file(root_path)["sk"]))
        with open(image_path, "rb") as fh:
            image = fh.read()
        images = [f"boot layer {i}".encode() + rng.bytes(64) for i in range(layers)] + [image]
        chain = attestation.build_boot_chain(root_sk, images, rng)
        with open(out_path, "wb") as fh:
            fh.write(attestation.serialize_boot_manifest(chain))
        click.echo(f"manifest written path={out_path} layers={len(images)}")

    _run(body)


@setup.command("network-entry")
@click.option("--profile-spec", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def network_entry(profile_spec: str, out_path: str):
    """Derive a serving-network subscriber entry from a profile spec."""

    def body():
        profile = _load_profile_spec(profile_spec)
        entries = (
            network_sim.load_network_entries(out_path) if os.path.exists(out_path) else []
        )
        entries = [e for e in entries if e.supi != profile.supi]
        entries.append(network_sim.NetworkSubscriberEntry.from_profile(profile))
        network_sim.store_network_entries(out_path, entries)
        click.echo(f"network entry written supi={profile.supi} path={out_path}")

    _run(body)


@setup.command("demo")
@click.option("--workdir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default="vsim-demo", help="seeds the generated key material")
@click.option("--port", default=0, type=int)
@click.option(
    "--runtime-seeds",
    is_flag=True,
    help="also pin the runtime RNGs (single-shot deterministic runs only: "
    "a replayed DRBG reuses nonces, which the replay defense will reject)",
)
def demo_setup(workdir: str, seed: str, port: int, runtime_seeds: bool):
    """Materialize a complete scenario: keys, manifest, configs, profile spec."""

    def body():
        rng = Rng.from_seed(seed)
        os.makedirs(workdir, exist_ok=True)
        join = lambda name: os.path.join(workdir, name)  # noqa: E731

        gpk, issuer = group_setup(rng)
        member = group_join(issuer, rng)
        root_sk, root_pk = sig_keygen(rng)
        static_sk, static_pk = sig_keygen(rng)

        image = b"vsim reference enclave " + rng.bytes(1024)
        with open(join("enclave.bin"), "wb") as fh:
            fh.write(image)
        chain = attestation.build_boot_chain(root_sk, [b"layer0" + rng.bytes(32), b"layer1" + rng.bytes(32), image], rng)
        with open(join("boot_manifest.bin"), "wb") as fh:
            fh.write(attestation.serialize_boot_manifest(chain))
        measurement = attestation.measure_binary(image)

        provisioner_conf = {
            "listen_address": f"127.0.0.1:{port}",
            "static_sk": scalar_to_bytes(static_sk).hex(),
            "group_public_key": gpk.to_bytes().hex(),
            "revocation_file": "revocation.txt",
            "expected_measurement": measurement.digest.hex(),
            "inventory_file": "inventory.tsv",
            "tee_version": "1",
            "basename": "provisioner-1",
        }
        device_conf = {
            "device_root_secret": rng.bytes(32).hex(),
            "member_secret_scalar": scalar_to_bytes(member.secret_scalar).hex(),
            "member_credential": member.membership_credential.hex(),
            "group_id": member.group_id.hex(),
            "enclave_image": "enclave.bin",
            "boot_manifest": "boot_manifest.bin",
            "storage": "profile.sealed",
            "provisioner_address": f"127.0.0.1:{port}",
            "provisioner_static_pk": static_pk.hex(),
            "root_pk": root_pk.hex(),
            "activation_token": "00" * 16,
            "tee_version": "1",
            "basename": "provisioner-1",
        }
        if runtime_seeds:
            provisioner_conf["seed"] = seed + "-provisioner"
            device_conf["seed"] = seed + "-device"
        write_kv_file(join("provisioner.conf"), provisioner_conf)
        write_kv_file(join("device.conf"), device_conf)
        write_kv_file(
            join("profile.spec"),
            {
                "supi": "001010000000001",
                "k": rng.bytes(32).hex(),
                "opc": rng.bytes(16).hex(),
                "amf": "8000",
                "sqn": "0",
                "carrier_name": "DemoCarrier",
                "serving_network_name": "5G:mnc001.mcc001.3gppnetwork.org",
            },
        )
        click.echo(f"demo scenario written workdir={workdir}")
        click.echo(f"member_secret_scalar={scalar_to_bytes(member.secret_scalar).hex()}")

    _run(body)


if __name__ == "__main__":
    main()
