"""Subscriber profile validation and canonical serialization."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsim.errors import ProfileParseError, WidthError
from vsim.vsim_core.profile import SubscriberProfile

supi_strategy = st.from_regex(r"[0-9]{15}", fullmatch=True)


@settings(max_examples=50, deadline=None)
@given(
    supi=supi_strategy,
    k=st.binary(min_size=32, max_size=32),
    opc=st.binary(min_size=16, max_size=16),
    amf=st.binary(min_size=2, max_size=2),
    sqn=st.integers(0, (1 << 48) - 1),
    carrier=st.text(max_size=40),
    snn=st.text(min_size=1, max_size=60),
)
def test_round_trip(supi, k, opc, amf, sqn, carrier, snn):
    profile = SubscriberProfile(supi, k, opc, amf, sqn, carrier, snn)
    assert SubscriberProfile.from_bytes(profile.to_bytes()) == profile


def _valid(**overrides):
    fields = dict(
        supi="001010000000001",
        k=bytes(32),
        opc=bytes(16),
        amf=b"\x80\x00",
        sqn=0,
        carrier_name="Carrier",
        serving_network_name="5G:mnc001.mcc001.3gppnetwork.org",
    )
    fields.update(overrides)
    return SubscriberProfile(**fields)


def test_validation():
    with pytest.raises(WidthError):
        _valid(supi="123")  # not 15 digits
    with pytest.raises(WidthError):
        _valid(supi="00101000000000a")
    with pytest.raises(WidthError):
        _valid(k=bytes(16))
    with pytest.raises(WidthError):
        _valid(opc=bytes(15))
    with pytest.raises(WidthError):
        _valid(amf=b"\x00")
    with pytest.raises(WidthError):
        _valid(sqn=1 << 48)


def test_trailing_bytes_rejected():
    data = _valid().to_bytes() + b"\x00"
    with pytest.raises(ProfileParseError):
        SubscriberProfile.from_bytes(data)


def test_truncated_rejected():
    data = _valid().to_bytes()
    with pytest.raises(ProfileParseError):
        SubscriberProfile.from_bytes(data[:-3])


def test_repr_hides_key_material():
    profile = _valid(k=b"\xab" * 32, opc=b"\xcd" * 16)
    text = repr(profile)
    assert "ab" * 8 not in text
    assert "cd" * 8 not in text
    assert profile.supi in text


def test_sqn_advance_keeps_identity():
    profile = _valid()
    advanced = profile.with_sqn(7)
    assert advanced.sqn == 7
    assert advanced.k == profile.k
    assert advanced.supi == profile.supi
