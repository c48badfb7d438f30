"""Subscriber profile: the provisioned identity and its canonical wire form.

Canonical serialization (what ProfileDelivery carries and what gets sealed):

    supi_len(2, BE) || supi ascii || k(32) || opc(16) || amf(2) || sqn(6, BE)
    || carrier_len(2, BE) || carrier utf-8 || snn_len(2, BE) || snn utf-8
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

from ..errors import ProfileParseError, WidthError

SQN_LIMIT = 1 << 48


@dataclass(frozen=True, repr=False)
class SubscriberProfile:
    supi: str
    k: bytes
    opc: bytes
    amf: bytes
    sqn: int
    carrier_name: str
    serving_network_name: str

    def __post_init__(self):
        if len(self.supi) != 15 or not self.supi.isdigit():
            raise WidthError("supi must be a 15-digit decimal string")
        if len(self.k) != 32:
            raise WidthError("k must be 32 bytes")
        if len(self.opc) != 16:
            raise WidthError("opc must be 16 bytes")
        if len(self.amf) != 2:
            raise WidthError("amf must be 2 bytes")
        if not 0 <= self.sqn < SQN_LIMIT:
            raise WidthError("sqn must fit in 48 bits")

    def __repr__(self) -> str:  # keep K and OPc out of logs and tracebacks
        return f"SubscriberProfile(supi={self.supi}, carrier={self.carrier_name!r}, sqn={self.sqn})"

    def with_sqn(self, sqn: int) -> "SubscriberProfile":
        return replace(self, sqn=sqn)

    def to_bytes(self) -> bytes:
        supi = self.supi.encode("ascii")
        carrier = self.carrier_name.encode("utf-8")
        snn = self.serving_network_name.encode("utf-8")
        return (
            struct.pack(">H", len(supi))
            + supi
            + self.k
            + self.opc
            + self.amf
            + struct.pack(">Q", self.sqn)[2:]
            + struct.pack(">H", len(carrier))
            + carrier
            + struct.pack(">H", len(snn))
            + snn
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "SubscriberProfile":
        try:
            (supi_len,) = struct.unpack_from(">H", data, 0)
            off = 2
            supi = data[off : off + supi_len].decode("ascii")
            off += supi_len
            k = data[off : off + 32]
            opc = data[off + 32 : off + 48]
            amf = data[off + 48 : off + 50]
            sqn_bytes = data[off + 50 : off + 56]
            if len(sqn_bytes) != 6:
                raise ProfileParseError("truncated profile")
            sqn = struct.unpack(">Q", b"\x00\x00" + sqn_bytes)[0]
            off += 56
            (carrier_len,) = struct.unpack_from(">H", data, off)
            off += 2
            carrier = data[off : off + carrier_len].decode("utf-8")
            off += carrier_len
            (snn_len,) = struct.unpack_from(">H", data, off)
            off += 2
            snn = data[off : off + snn_len].decode("utf-8")
            off += snn_len
            if off != len(data):
                raise ProfileParseError("trailing bytes after profile")
            return cls(supi, k, opc, amf, sqn, carrier, snn)
        except (struct.error, UnicodeDecodeError, WidthError) as exc:
            raise ProfileParseError(f"bad profile encoding: {exc}") from None
