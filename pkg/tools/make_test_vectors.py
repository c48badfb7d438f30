#!/usr/bin/env python3
"""Generate the frozen known-answer vectors under tests/vectors/.

This script is the independent oracle for the package's keyed primitives:
it carries its own AES-256 (built from the field arithmetic up, no shared
code with src/), its own CBC / CBC-MAC / challenge-function / key-derivation
constructions, and uses the `cryptography` package's HKDF and HMAC as
second opinions. The emitted JSON files are committed; the test suite
compares the package's output against them byte for byte.

Inputs are deterministic (fixed seeds), so re-running the script must
reproduce the committed files exactly.

Usage: python tools/make_test_vectors.py [--check]
  --check  regenerate in memory and fail if any committed file differs
"""

from __future__ import annotations

import argparse
import hashlib
import json
import struct
import subprocess
import sys
from pathlib import Path

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.hmac import HMAC
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

VECTOR_DIR = Path(__file__).resolve().parent.parent / "tests" / "vectors"


# ---------------------------------------------------------------------------
# Standalone AES-256, derived from the GF(2^8) arithmetic rather than
# transcribed tables, so it cannot share a mistake with any library.
# ---------------------------------------------------------------------------

def _gf_mul(a: int, b: int) -> int:
    r = 0
    for _ in range(8):
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= 0x11B
    return r


def _build_sbox() -> list[int]:
    # multiplicative inverse in GF(2^8) followed by the affine transform
    inv = [0] * 256
    for x in range(1, 256):
        for y in range(1, 256):
            if _gf_mul(x, y) == 1:
                inv[x] = y
                break
    sbox = []
    for x in range(256):
        b = inv[x]
        v = b
        for shift in range(1, 5):
            v ^= ((b << shift) | (b >> (8 - shift))) & 0xFF
        sbox.append(v ^ 0x63)
    return sbox


_SBOX = _build_sbox()


def _expand_key_256(key: bytes) -> list[list[int]]:
    assert len(key) == 32
    nk, nr = 8, 14
    words = [list(key[4 * i : 4 * i + 4]) for i in range(nk)]
    rcon = 1
    for i in range(nk, 4 * (nr + 1)):
        w = list(words[i - 1])
        if i % nk == 0:
            w = w[1:] + w[:1]
            w = [_SBOX[b] for b in w]
            w[0] ^= rcon
            rcon = _gf_mul(rcon, 2)
        elif i % nk == 4:
            w = [_SBOX[b] for b in w]
        words.append([a ^ b for a, b in zip(words[i - nk], w)])
    return [sum(words[4 * r : 4 * r + 4], []) for r in range(nr + 1)]


def _mix_single_column(col: list[int]) -> list[int]:
    a0, a1, a2, a3 = col
    return [
        _gf_mul(a0, 2) ^ _gf_mul(a1, 3) ^ a2 ^ a3,
        a0 ^ _gf_mul(a1, 2) ^ _gf_mul(a2, 3) ^ a3,
        a0 ^ a1 ^ _gf_mul(a2, 2) ^ _gf_mul(a3, 3),
        _gf_mul(a0, 3) ^ a1 ^ a2 ^ _gf_mul(a3, 2),
    ]


def aes256_encrypt_block(key: bytes, block: bytes) -> bytes:
    round_keys = _expand_key_256(key)
    state = [block[c * 4 + r] for r in range(4) for c in range(4)]  # column major -> row major

    def add_round_key(rk: list[int]) -> None:
        for c in range(4):
            for r in range(4):
                state[r * 4 + c] ^= rk[c * 4 + r]

    def sub_bytes() -> None:
        for i in range(16):
            state[i] = _SBOX[state[i]]

    def shift_rows() -> None:
        for r in range(1, 4):
            row = state[r * 4 : r * 4 + 4]
            state[r * 4 : r * 4 + 4] = row[r:] + row[:r]

    def mix_columns() -> None:
        for c in range(4):
            col = [state[r * 4 + c] for r in range(4)]
            col = _mix_single_column(col)
            for r in range(4):
                state[r * 4 + c] = col[r]

    add_round_key(round_keys[0])
    for rnd in range(1, 14):
        sub_bytes()
        shift_rows()
        mix_columns()
        add_round_key(round_keys[rnd])
    sub_bytes()
    shift_rows()
    add_round_key(round_keys[14])
    return bytes(state[r * 4 + c] for c in range(4) for r in range(4))


def _selfcheck_aes() -> None:
    rnd = DetRand(b"aes-selfcheck")
    for _ in range(32):
        key, block = rnd.get(32), rnd.get(16)
        enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
        want = enc.update(block) + enc.finalize()
        got = aes256_encrypt_block(key, block)
        if got != want:
            raise SystemExit("oracle AES disagrees with the cryptography package")


# ---------------------------------------------------------------------------
# Oracle constructions under test
# ---------------------------------------------------------------------------

def oracle_cbc_encrypt(key: bytes, iv: bytes, plaintext: bytes) -> bytes:
    pad = 16 - (len(plaintext) % 16)
    data = plaintext + bytes([pad]) * pad
    out, prev = [], iv
    for off in range(0, len(data), 16):
        block = bytes(a ^ b for a, b in zip(data[off : off + 16], prev))
        prev = aes256_encrypt_block(key, block)
        out.append(prev)
    return b"".join(out)


def oracle_cbc_mac(key: bytes, message: bytes) -> bytes:
    ct = oracle_cbc_encrypt(key, bytes(16), struct.pack(">Q", len(message)) + message)
    return ct[-16:]


FUNC_BYTES = {"f1": 1, "f2": 2, "f3": 3, "f4": 4, "f5": 5, "f1_star": 6, "f5_star": 7}


def oracle_challenge_funcs(k: bytes, opc: bytes, rand: bytes, sqn: bytes, amf: bytes) -> dict:
    def mac(func: str, tail: bytes) -> bytes:
        return oracle_cbc_mac(k, opc + bytes([FUNC_BYTES[func]]) + tail)

    return {
        "f1": mac("f1", rand + sqn + amf)[:8].hex(),
        "f1_star": mac("f1_star", rand + sqn + amf)[:8].hex(),
        "f2": mac("f2", rand)[8:16].hex(),
        "f3": mac("f3", rand).hex(),
        "f4": mac("f4", rand).hex(),
        "f5": mac("f5", rand)[:6].hex(),
        "f5_star": mac("f5_star", rand)[6:12].hex(),
    }


def oracle_hkdf(ikm: bytes, label: bytes, out_len: int) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=out_len, salt=None, info=label).derive(ikm)


def oracle_fc_kdf(key: bytes, fc: int, params: list[bytes]) -> bytes:
    s = bytes([fc])
    for p in params:
        s += p + struct.pack(">H", len(p))
    h = HMAC(key, hashes.SHA256())
    h.update(s)
    return h.finalize()


def oracle_res_star(ck: bytes, ik: bytes, snn: str, rand: bytes, res: bytes) -> bytes:
    return oracle_fc_kdf(ck + ik, 0x6B, [snn.encode(), rand, res])[16:32]


def oracle_k_ausf(ck: bytes, ik: bytes, snn: str, sqn_xor_ak: bytes) -> bytes:
    return oracle_fc_kdf(ck + ik, 0x6A, [snn.encode(), sqn_xor_ak])


# ---------------------------------------------------------------------------
# Deterministic input stream (the vectors must be reproducible)
# ---------------------------------------------------------------------------

class DetRand:
    def __init__(self, seed: bytes):
        self.seed = seed
        self.counter = 0

    def get(self, n: int) -> bytes:
        out = b""
        while len(out) < n:
            out += hashlib.sha256(self.seed + struct.pack(">Q", self.counter)).digest()
            self.counter += 1
        return out[:n]


def build_vectors() -> dict[str, dict]:
    rnd = DetRand(b"vsim-oracle-v1")

    cbc_cases = []
    for size in (0, 1, 15, 16, 17, 64, 100):
        key, iv, pt = rnd.get(32), rnd.get(16), rnd.get(size)
        cbc_cases.append(
            {
                "key": key.hex(),
                "iv": iv.hex(),
                "plaintext": pt.hex(),
                "ciphertext": oracle_cbc_encrypt(key, iv, pt).hex(),
            }
        )

    mac_cases = []
    for size in (0, 1, 8, 16, 23, 48, 200):
        key, msg = rnd.get(32), rnd.get(size)
        mac_cases.append({"key": key.hex(), "message": msg.hex(), "mac": oracle_cbc_mac(key, msg).hex()})
    # a prefix pair: the 8-byte length prefix must force distinct MACs
    key = rnd.get(32)
    long_msg = rnd.get(48)
    for msg in (long_msg[:32], long_msg):
        mac_cases.append({"key": key.hex(), "message": msg.hex(), "mac": oracle_cbc_mac(key, msg).hex()})

    chal_cases = []
    # the fixed all-zero vector first, then randomized ones
    fixed = {
        "k": "00" * 32,
        "opc": "00" * 16,
        "rand": "00" * 16,
        "sqn": "000000000000",
        "amf": "8000",
    }
    inputs = [fixed]
    for _ in range(6):
        inputs.append(
            {
                "k": rnd.get(32).hex(),
                "opc": rnd.get(16).hex(),
                "rand": rnd.get(16).hex(),
                "sqn": rnd.get(6).hex(),
                "amf": rnd.get(2).hex(),
            }
        )
    for case in inputs:
        outputs = oracle_challenge_funcs(
            bytes.fromhex(case["k"]),
            bytes.fromhex(case["opc"]),
            bytes.fromhex(case["rand"]),
            bytes.fromhex(case["sqn"]),
            bytes.fromhex(case["amf"]),
        )
        chal_cases.append({**case, "outputs": outputs})

    kdf_cases = []
    for ikm_len, label, out_len in [
        (32, b"session", 32),
        (32, b"seal", 32),
        (16, b"vsim-session\x00binding", 64),
        (64, b"", 16),
        (32, b"expand-long", 255),
    ]:
        ikm = rnd.get(ikm_len)
        kdf_cases.append(
            {
                "ikm": ikm.hex(),
                "label": label.hex(),
                "out_len": out_len,
                "okm": oracle_hkdf(ikm, label, out_len).hex(),
            }
        )

    snn = "5G:mnc093.mcc208.3gppnetwork.org"
    deriv_cases = []
    for i in range(5):
        ck, ik, rand, res, sqn_xor_ak = rnd.get(16), rnd.get(16), rnd.get(16), rnd.get(8), rnd.get(6)
        name = snn if i % 2 == 0 else "5G:mnc001.mcc001.3gppnetwork.org"
        deriv_cases.append(
            {
                "ck": ck.hex(),
                "ik": ik.hex(),
                "serving_network_name": name,
                "rand": rand.hex(),
                "res": res.hex(),
                "sqn_xor_ak": sqn_xor_ak.hex(),
                "res_star": oracle_res_star(ck, ik, name, rand, res).hex(),
                "k_ausf": oracle_k_ausf(ck, ik, name, sqn_xor_ak).hex(),
            }
        )

    return {
        "cbc_encrypt.json": {"cases": cbc_cases},
        "cbc_mac.json": {"cases": mac_cases},
        "challenge_funcs.json": {"cases": chal_cases},
        "kdf.json": {"cases": kdf_cases},
        "aka_derivations.json": {"cases": deriv_cases},
    }


def make_reference_enclave() -> None:
    """Bundle a reference enclave image and pin its digest with sha256sum."""
    data_dir = Path(__file__).resolve().parent.parent / "tests" / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    image = DetRand(b"reference-enclave-image").get(4096)
    image_path = data_dir / "reference_enclave.bin"
    image_path.write_bytes(image)
    # pin via the system hashing tool, not any Python hash call
    out = subprocess.run(
        ["sha256sum", str(image_path)], check=True, capture_output=True, text=True
    ).stdout.split()[0]
    (data_dir / "reference_manifest.json").write_text(
        json.dumps({"reference_enclave.bin": out}, indent=2) + "\n"
    )


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--check", action="store_true")
    args = parser.parse_args()

    _selfcheck_aes()
    vectors = build_vectors()

    if args.check:
        stale = []
        for name, payload in vectors.items():
            path = VECTOR_DIR / name
            want = json.dumps(payload, indent=2) + "\n"
            if not path.exists() or path.read_text() != want:
                stale.append(name)
        if stale:
            print("stale vector files: %s" % ", ".join(stale), file=sys.stderr)
            return 1
        print("vectors up to date")
        return 0

    VECTOR_DIR.mkdir(parents=True, exist_ok=True)
    for name, payload in vectors.items():
        (VECTOR_DIR / name).write_text(json.dumps(payload, indent=2) + "\n")
        print("wrote tests/vectors/%s" % name)
    make_reference_enclave()
    print("wrote tests/data/reference_enclave.bin + reference_manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
