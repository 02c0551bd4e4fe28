"""AEDAT 2.0 reader/writer for NAS spike captures.

Each record after the ASCII header is a big-endian 32-bit address followed
by a big-endian 32-bit timestamp in microseconds. AEDAT 1.0 files (16-bit
addresses) are accepted on read.

Address layout: ``channel = addr >> 1`` and the least significant bit holds
the polarity. By default an even address is the positive half-wave; pass
``polarity_even_positive=False`` to flip that for captures wired the other
way round.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

import numpy as np

from .errors import AddressOutOfRange, BadMagic, ChannelOutOfRange, TruncatedRecord
from .events import NUM_CHANNELS, RawStream, sort_stable_by_time

MAGIC_V2 = "#!AER-DAT2.0"
MAGIC_V1 = "#!AER-DAT1.0"
NUM_ADDRESSES = 2 * NUM_CHANNELS
MAX_TIMESTAMP = 0xFFFFFFFF


class Polarity(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass
class AedatHeader:
    lines: List[str] = field(default_factory=lambda: [MAGIC_V2])
    version: str = "2.0"

    @classmethod
    def default(cls, *comments: str) -> "AedatHeader":
        lines = [MAGIC_V2, "# This is a raw AE data file - do not edit",
                 "# Data format is int32 address, int32 timestamp (8 bytes total), "
                 "repeated for each event",
                 "# Timestamps tick is 1 us"]
        lines += ["# " + c for c in comments]
        return cls(lines, "2.0")


def decode_address(addr: int, polarity_even_positive: bool = True) -> Tuple[int, Polarity]:
    if addr < 0 or addr >= NUM_ADDRESSES:
        raise AddressOutOfRange(f"address {addr} outside [0, {NUM_ADDRESSES})")
    even = addr % 2 == 0
    positive = even if polarity_even_positive else not even
    return addr >> 1, Polarity.POSITIVE if positive else Polarity.NEGATIVE


def encode_address(channel: int, polarity: Polarity = Polarity.POSITIVE,
                   polarity_even_positive: bool = True) -> int:
    if channel < 0 or channel >= NUM_CHANNELS:
        raise ChannelOutOfRange(f"channel {channel} outside [0, {NUM_CHANNELS - 1}]")
    odd = (polarity is Polarity.NEGATIVE) == polarity_even_positive
    return (channel << 1) | int(odd)


def _split_header(data: bytes) -> Tuple[List[str], int]:
    lines = []
    pos = 0
    while pos < len(data) and data[pos:pos + 1] == b"#":
        end = data.find(b"\n", pos)
        if end < 0:
            raise BadMagic(f"unterminated header line at offset {pos}")
        lines.append(data[pos:end].rstrip(b"\r").decode("ascii", errors="replace"))
        pos = end + 1
    return lines, pos


def read_aedat(data: bytes, polarity_even_positive: bool = True
               ) -> Tuple[AedatHeader, RawStream, int]:
    """Parse an AEDAT buffer.

    Returns the header, the positive-polarity events (stable time-sorted) and
    the number of negative-polarity events that were dropped.
    """
    lines, body_start = _split_header(data)
    if not lines or lines[0].strip() not in (MAGIC_V2, MAGIC_V1):
        raise BadMagic("file does not start with '#!AER-DAT2.0' (or 1.0)")
    version = "2.0" if lines[0].strip() == MAGIC_V2 else "1.0"
    addr_dtype = ">u4" if version == "2.0" else ">u2"
    rec_size = 8 if version == "2.0" else 6

    body = memoryview(data)[body_start:]
    if len(body) % rec_size:
        whole = len(body) - len(body) % rec_size
        raise TruncatedRecord(
            f"trailing {len(body) % rec_size} bytes at file offset {body_start + whole}"
            f" do not form a {rec_size}-byte record")
    records = np.frombuffer(body, dtype=np.dtype([("addr", addr_dtype), ("ts", ">u4")]))
    addr = records["addr"].astype(np.int64)
    ts = records["ts"].astype(np.int64)

    bad = np.flatnonzero(addr >= NUM_ADDRESSES)
    if bad.size:
        i = int(bad[0])
        raise AddressOutOfRange(
            f"address {int(addr[i])} at file offset {body_start + i * rec_size}")

    odd = (addr & 1).astype(bool)
    negative = odd if polarity_even_positive else ~odd
    keep = ~negative
    stream = RawStream(ts[keep], addr[keep] >> 1)
    return AedatHeader(lines, version), sort_stable_by_time(stream), int(negative.sum())


def write_aedat(header: AedatHeader, stream: RawStream,
                polarity_even_positive: bool = True) -> bytes:
    """Serialize ``stream`` as AEDAT 2.0 using positive-polarity addresses."""
    ts = stream.timestamps
    if ts.size and (ts.min() < 0 or ts.max() > MAX_TIMESTAMP):
        raise TruncatedRecord("timestamps must fit in an unsigned 32-bit field")
    ch = stream.channels
    if ch.size and (ch.min() < 0 or ch.max() >= NUM_CHANNELS):
        raise ChannelOutOfRange("stream holds channels outside [0, 31]")

    lines = list(header.lines) if header.lines else [MAGIC_V2]
    if lines[0].strip() != MAGIC_V2:
        lines = [MAGIC_V2] + [ln for ln in lines if ln.strip() != MAGIC_V1]
    head = "".join(ln + "\r\n" for ln in lines).encode("ascii")

    records = np.empty(ts.size, dtype=np.dtype([("addr", ">u4"), ("ts", ">u4")]))
    records["addr"] = (ch << 1) | (0 if polarity_even_positive else 1)
    records["ts"] = ts
    return head + records.tobytes()


def read_aedat_file(path, polarity_even_positive: bool = True):
    with open(path, "rb") as fh:
        return read_aedat(fh.read(), polarity_even_positive)


def write_aedat_file(path, header: AedatHeader, stream: RawStream,
                     polarity_even_positive: bool = True) -> None:
    with open(path, "wb") as fh:
        fh.write(write_aedat(header, stream, polarity_even_positive))
