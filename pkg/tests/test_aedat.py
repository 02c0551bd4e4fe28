import struct

import numpy as np
import pytest

from cochleanet.aedat import (
    AedatHeader,
    Polarity,
    decode_address,
    encode_address,
    read_aedat,
    write_aedat,
)
from cochleanet.errors import AddressOutOfRange, BadMagic, ChannelOutOfRange, TruncatedRecord
from cochleanet.events import RawEvent, RawStream

HEADER = b"#!AER-DAT2.0\r\n# test\r\n"


def records(*pairs):
    return b"".join(struct.pack(">II", a, t) for a, t in pairs)


@pytest.mark.parametrize("addr, expected", [
    (0, (0, Polarity.POSITIVE)),
    (5, (2, Polarity.NEGATIVE)),
    (63, (31, Polarity.NEGATIVE)),
])
def test_decode_address(addr, expected):
    assert decode_address(addr) == expected


def test_decode_rejects_64():
    with pytest.raises(AddressOutOfRange):
        decode_address(64)


def test_encode_address_examples():
    assert encode_address(0, Polarity.POSITIVE) == 0
    assert encode_address(31, Polarity.NEGATIVE) == 63
    with pytest.raises(ChannelOutOfRange):
        encode_address(32)


@pytest.mark.parametrize("even_positive", [True, False])
def test_address_codec_bijection(even_positive):
    pairs = [(c, p) for c in range(32) for p in Polarity]
    addrs = [encode_address(c, p, even_positive) for c, p in pairs]
    assert sorted(addrs) == list(range(64))
    for (c, p), a in zip(pairs, addrs):
        assert decode_address(a, even_positive) == (c, p)


def test_flipped_parity():
    assert decode_address(0, polarity_even_positive=False) == (0, Polarity.NEGATIVE)


def test_header_only_file():
    header, stream, discarded = read_aedat(HEADER)
    assert len(stream) == 0 and discarded == 0
    assert header.lines == ["#!AER-DAT2.0", "# test"]


def test_single_record():
    _, stream, discarded = read_aedat(HEADER + records((2, 1000)))
    assert list(stream) == [RawEvent(1000, 1)]
    assert discarded == 0


def test_negative_polarity_discarded():
    _, stream, discarded = read_aedat(HEADER + records((0, 7), (1, 7)))
    assert list(stream) == [RawEvent(7, 0)]
    assert discarded == 1


def test_bad_magic():
    with pytest.raises(BadMagic):
        read_aedat(b"#!AER-DAT9.9\r\n" + records((0, 1)))
    with pytest.raises(BadMagic):
        read_aedat(records((0, 1)))


def test_truncated_record_reports_offset():
    with pytest.raises(TruncatedRecord, match="offset"):
        read_aedat(HEADER + records((0, 1)) + b"\x00\x00\x00")


def test_address_out_of_range():
    with pytest.raises(AddressOutOfRange):
        read_aedat(HEADER + records((64, 1)))


def test_aedat_v1_sniffed():
    body = struct.pack(">HI", 4, 10) + struct.pack(">HI", 5, 11)
    header, stream, discarded = read_aedat(b"#!AER-DAT1.0\n" + body)
    assert header.version == "1.0"
    assert list(stream) == [RawEvent(10, 2)] and discarded == 1


def test_unsorted_file_is_time_sorted_stably():
    _, stream, _ = read_aedat(HEADER + records((4, 9), (2, 3), (6, 3)))
    assert list(stream) == [RawEvent(3, 1), RawEvent(3, 3), RawEvent(9, 2)]


def test_write_empty_stream_is_header_only():
    data = write_aedat(AedatHeader(), RawStream.empty())
    assert data == b"#!AER-DAT2.0\r\n"


def test_three_event_round_trip_bit_exact():
    s = RawStream.from_events([(0, 0), (17, 31), (4294967295, 5)])
    data = write_aedat(AedatHeader.default("x"), s)
    header, back, discarded = read_aedat(data)
    assert back == s and discarded == 0
    assert write_aedat(header, back) == data


def test_write_rejects_timestamp_beyond_32_bits():
    with pytest.raises(TruncatedRecord):
        write_aedat(AedatHeader(), RawStream.from_events([(2**32, 0)]))


def test_written_addresses_are_positive_polarity():
    s = RawStream.from_events([(1, c) for c in range(32)])
    body = write_aedat(AedatHeader(), s)[len(b"#!AER-DAT2.0\r\n"):]
    addrs = np.frombuffer(body, dtype=">u4")[::2]
    assert np.all(addrs % 2 == 0)
