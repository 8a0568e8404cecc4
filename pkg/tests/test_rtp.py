"""RTP wire-format tests against an independent bit-arithmetic oracle."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from webcall.media.rtp import HEADER_LEN, RtcpSenderReport, RtpError, RtpPacket


def oracle_header(payload_type, seq, timestamp, ssrc, marker=False):
    """Assemble the 12 header bytes by hand, one field at a time.

    Deliberately avoids struct so it cannot share a mistake with the
    implementation: every byte is computed with shifts and masks.
    """
    out = bytearray(12)
    out[0] = (2 << 6) | (0 << 5) | (0 << 4) | 0  # V=2, P=0, X=0, CC=0
    out[1] = ((1 if marker else 0) << 7) | (payload_type & 0x7F)
    out[2] = (seq >> 8) & 0xFF
    out[3] = seq & 0xFF
    out[4] = (timestamp >> 24) & 0xFF
    out[5] = (timestamp >> 16) & 0xFF
    out[6] = (timestamp >> 8) & 0xFF
    out[7] = timestamp & 0xFF
    out[8] = (ssrc >> 24) & 0xFF
    out[9] = (ssrc >> 16) & 0xFF
    out[10] = (ssrc >> 8) & 0xFF
    out[11] = ssrc & 0xFF
    return bytes(out)


def test_header_layout_matches_oracle_field_by_field():
    rng = random.Random(0x52545001)
    for _ in range(1000):
        pt = rng.randrange(0, 128)
        seq = rng.randrange(0, 1 << 16)
        ts = rng.randrange(0, 1 << 32)
        ssrc = rng.randrange(0, 1 << 32)
        marker = rng.random() < 0.5
        payload = rng.randbytes(rng.randrange(0, 64))
        got = RtpPacket(pt, seq, ts, ssrc, payload, marker).serialize()
        want = oracle_header(pt, seq, ts, ssrc, marker) + payload
        assert len(got) == 12 + len(payload)
        # Field-by-field, not just bytes-equal, so a failure names the field.
        assert got[0] >> 6 == 2, "version"
        assert (got[0] >> 5) & 1 == 0, "padding"
        assert (got[0] >> 4) & 1 == 0, "extension"
        assert got[0] & 0x0F == 0, "csrc count"
        assert (got[1] >> 7) & 1 == (1 if marker else 0), "marker"
        assert got[1] & 0x7F == pt, "payload type"
        assert (got[2] << 8) | got[3] == seq, "sequence"
        assert int.from_bytes(got[4:8], "big") == ts, "timestamp"
        assert int.from_bytes(got[8:12], "big") == ssrc, "ssrc"
        assert got[12:] == payload, "payload"
        assert got == want


@settings(max_examples=200)
@given(
    pt=st.integers(0, 127),
    seq=st.integers(0, (1 << 16) - 1),
    ts=st.integers(0, (1 << 32) - 1),
    ssrc=st.integers(0, (1 << 32) - 1),
    payload=st.binary(max_size=256),
    marker=st.booleans(),
)
def test_parse_serialize_round_trip(pt, seq, ts, ssrc, payload, marker):
    p = RtpPacket(pt, seq, ts, ssrc, payload, marker)
    q = RtpPacket.parse(p.serialize())
    assert q == p


def test_parse_rejects_short_datagram():
    for n in range(HEADER_LEN):
        with pytest.raises(RtpError):
            RtpPacket.parse(bytes(n))


def test_parse_rejects_wrong_version():
    raw = bytearray(RtpPacket(96, 1, 2, 3).serialize())
    for version in (0, 1, 3):
        raw[0] = (version << 6) | (raw[0] & 0x3F)
        with pytest.raises(RtpError):
            RtpPacket.parse(bytes(raw))


def test_payload_type_range_enforced():
    with pytest.raises(RtpError):
        RtpPacket(128, 0, 0, 0)
    with pytest.raises(RtpError):
        RtpPacket(-1, 0, 0, 0)


def test_audio_stream_seq_and_timestamp_invariants():
    """10,000 consecutive audio packets: seq +1 mod 2**16, ts +160 mod 2**32."""
    start_seq = 65000  # forces a 16-bit wrap inside the run
    ts0 = (1 << 32) - 160 * 7  # forces a 32-bit wrap inside the run
    packets = []
    for i in range(10_000):
        packets.append(
            RtpPacket(96, (start_seq + i) % (1 << 16), (ts0 + 160 * i) % (1 << 32), 0xABCD)
        )
    wire = [RtpPacket.parse(p.serialize()) for p in packets]
    wrapped_seq = wrapped_ts = 0
    for a, b in zip(wire, wire[1:]):
        assert (b.seq - a.seq) % (1 << 16) == 1
        assert (b.timestamp - a.timestamp) % (1 << 32) == 160
        if b.seq < a.seq:
            wrapped_seq += 1
        if b.timestamp < a.timestamp:
            wrapped_ts += 1
    assert wrapped_seq == 1
    assert wrapped_ts == 1


def test_rtcp_sender_report_round_trip():
    sr = RtcpSenderReport(
        ssrc=0xDEADBEEF,
        ntp_seconds=3_900_000_000,
        ntp_fraction=0x80000000,
        rtp_timestamp=12345,
        packet_count=250,
        octet_count=250 * 320,
    )
    raw = sr.serialize()
    assert len(raw) == 28
    assert raw[0] >> 6 == 2
    assert raw[1] == 200  # SR packet type
    assert int.from_bytes(raw[2:4], "big") == 6  # length in words minus one
    assert RtcpSenderReport.parse(raw) == sr


def test_rtcp_rejects_non_sr():
    raw = bytearray(RtcpSenderReport(1, 2, 3, 4, 5, 6).serialize())
    raw[1] = 201  # RR
    with pytest.raises(RtpError):
        RtcpSenderReport.parse(bytes(raw))
    with pytest.raises(RtpError):
        RtcpSenderReport.parse(bytes(raw[:20]))


def test_rtp_demux_discriminator():
    """First byte of RTP (and RTCP) always has the top bit set; JSON never does."""
    assert RtpPacket(96, 0, 0, 0).serialize()[0] & 0x80
    assert RtcpSenderReport(1, 2, 3, 4, 5).serialize()[0] & 0x80
    assert not b'{"t":"ping"}'[0] & 0x80
