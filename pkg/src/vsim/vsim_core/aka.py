"""5G AKA challenge functions and key derivations.

The seven challenge functions are a domain-separated AES-256-CBC-MAC family
(one function byte per role):

    f_i(k, opc, inputs) = truncate_i(cbc_mac_256(k, opc || i || inputs))

    byte 1 f1   -> mac[:8]        network MAC over (rand, sqn, amf)
    byte 2 f2   -> mac[8:16]      RES
    byte 3 f3   -> full 16        CK
    byte 4 f4   -> full 16        IK
    byte 5 f5   -> mac[:6]        AK (conceals SQN)
    byte 6 f1*  -> mac[:8]        resync MAC
    byte 7 f5*  -> mac[6:12]      resync AK

The outer derivations (RES*, K_AUSF, HXRES*) follow the standard FC-tagged
KDF pattern: HMAC-SHA256 over CK||IK of FC plus length-suffixed parameters.
Both the subscriber side and the network simulator import this one module;
the independent check lives in the frozen oracle vectors.
"""

from __future__ import annotations

import hashlib
import hmac
import struct

from ..errors import WidthError
from ..crypto.primitives import cbc_mac_256

SQN_LIMIT = 1 << 48
# largest forward jump the subscriber accepts before demanding a resync
SQN_WINDOW = 1 << 16
RESYNC_AMF = b"\x00\x00"

FC_K_AUSF = 0x6A
FC_RES_STAR = 0x6B

_F1, _F2, _F3, _F4, _F5, _F1_STAR, _F5_STAR = 1, 2, 3, 4, 5, 6, 7


def _require(name: str, value: bytes, width: int) -> None:
    if len(value) != width:
        raise WidthError(f"{name} must be {width} bytes, got {len(value)}")


def _mac(k: bytes, opc: bytes, func_byte: int, tail: bytes) -> bytes:
    _require("k", k, 32)
    _require("opc", opc, 16)
    return cbc_mac_256(k, opc + bytes([func_byte]) + tail)


def _challenge_tail(rand: bytes, sqn: bytes, amf: bytes) -> bytes:
    _require("rand", rand, 16)
    _require("sqn", sqn, 6)
    _require("amf", amf, 2)
    return rand + sqn + amf


def f1(k: bytes, opc: bytes, rand: bytes, sqn: bytes, amf: bytes) -> bytes:
    return _mac(k, opc, _F1, _challenge_tail(rand, sqn, amf))[:8]


def f1_star(k: bytes, opc: bytes, rand: bytes, sqn: bytes, amf: bytes) -> bytes:
    return _mac(k, opc, _F1_STAR, _challenge_tail(rand, sqn, amf))[:8]


def f2(k: bytes, opc: bytes, rand: bytes) -> bytes:
    _require("rand", rand, 16)
    return _mac(k, opc, _F2, rand)[8:16]


def f3(k: bytes, opc: bytes, rand: bytes) -> bytes:
    _require("rand", rand, 16)
    return _mac(k, opc, _F3, rand)


def f4(k: bytes, opc: bytes, rand: bytes) -> bytes:
    _require("rand", rand, 16)
    return _mac(k, opc, _F4, rand)


def f5(k: bytes, opc: bytes, rand: bytes) -> bytes:
    _require("rand", rand, 16)
    return _mac(k, opc, _F5, rand)[:6]


def f5_star(k: bytes, opc: bytes, rand: bytes) -> bytes:
    _require("rand", rand, 16)
    return _mac(k, opc, _F5_STAR, rand)[6:12]


def xor_bytes(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b, strict=True))


def sqn_to_bytes(sqn: int) -> bytes:
    if not 0 <= sqn < SQN_LIMIT:
        raise WidthError("sqn must fit in 48 bits")
    return struct.pack(">Q", sqn)[2:]


def sqn_from_bytes(data: bytes) -> int:
    _require("sqn", data, 6)
    return struct.unpack(">Q", b"\x00\x00" + data)[0]


def _fc_kdf(key: bytes, fc: int, params: list[bytes]) -> bytes:
    s = bytes([fc])
    for p in params:
        s += p + struct.pack(">H", len(p))
    return hmac.new(key, s, hashlib.sha256).digest()


def derive_res_star(ck: bytes, ik: bytes, serving_network_name: str, rand: bytes,
                    res: bytes) -> bytes:
    """Low-order 16 bytes of the FC 0x6B derivation over CK||IK."""
    _require("ck", ck, 16)
    _require("ik", ik, 16)
    _require("rand", rand, 16)
    _require("res", res, 8)
    return _fc_kdf(ck + ik, FC_RES_STAR, [serving_network_name.encode(), rand, res])[16:]


def derive_k_ausf(ck: bytes, ik: bytes, serving_network_name: str,
                  sqn_xor_ak: bytes) -> bytes:
    """Full 32-byte FC 0x6A derivation over CK||IK."""
    _require("ck", ck, 16)
    _require("ik", ik, 16)
    _require("sqn_xor_ak", sqn_xor_ak, 6)
    return _fc_kdf(ck + ik, FC_K_AUSF, [serving_network_name.encode(), sqn_xor_ak])


def hxres_star(rand: bytes, xres_star: bytes) -> bytes:
    """First 16 bytes of hash(rand || xres_star)."""
    _require("rand", rand, 16)
    _require("xres_star", xres_star, 16)
    return hashlib.sha256(rand + xres_star).digest()[:16]


def build_autn(k: bytes, opc: bytes, rand: bytes, sqn: int, amf: bytes) -> bytes:
    """AUTN = (sqn xor AK)(6) || amf(2) || f1-mac(8)."""
    sqn_bytes = sqn_to_bytes(sqn)
    conc_sqn = xor_bytes(sqn_bytes, f5(k, opc, rand))
    return conc_sqn + amf + f1(k, opc, rand, sqn_bytes, amf)


def build_auts(k: bytes, opc: bytes, rand: bytes, sqn_ms: int) -> bytes:
    """Resync token: (sqn_ms xor f5*)(6) || f1*-mac(8) with the dummy AMF."""
    sqn_bytes = sqn_to_bytes(sqn_ms)
    concealed = xor_bytes(sqn_bytes, f5_star(k, opc, rand))
    return concealed + f1_star(k, opc, rand, sqn_bytes, RESYNC_AMF)
