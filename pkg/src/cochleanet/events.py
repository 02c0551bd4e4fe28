"""Event tuples and array-backed event streams.

Streams keep one numpy array per field instead of a list of tuples; a
1-s Speech Commands clip easily produces 10^5 events. Iterating a stream
still yields the per-event named tuples.

Timestamps are integer microseconds everywhere. Decay math converts to
seconds at the point of use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

NUM_CHANNELS = 32


class RawEvent(NamedTuple):
    timestamp_us: int
    channel: int


class LocalEvent(NamedTuple):
    timestamp_us: int
    channel: int
    local_feature: int


class CrossEvent(NamedTuple):
    timestamp_us: int
    cross_feature: int


def _as_int_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("event fields must be one-dimensional")
    return arr


def _default_duration(timestamps: np.ndarray, duration_us: Optional[int]) -> int:
    last = int(timestamps.max()) if timestamps.size else 0
    if duration_us is None:
        return last
    if duration_us < last:
        raise ValueError(f"duration_us={duration_us} precedes last timestamp {last}")
    return int(duration_us)


@dataclass(frozen=True, eq=False)
class RawStream:
    """Stream of (timestamp, channel) events as emitted by the cochlea."""

    timestamps: np.ndarray
    channels: np.ndarray
    duration_us: Optional[int] = None

    def __post_init__(self):
        ts = _as_int_array(self.timestamps)
        ch = _as_int_array(self.channels)
        if ts.shape != ch.shape:
            raise ValueError("timestamps and channels differ in length")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "duration_us", _default_duration(ts, self.duration_us))

    @classmethod
    def from_events(cls, events, duration_us=None) -> "RawStream":
        events = list(events)
        ts = [e[0] for e in events]
        ch = [e[1] for e in events]
        return cls(np.array(ts, dtype=np.int64), np.array(ch, dtype=np.int64), duration_us)

    @classmethod
    def empty(cls) -> "RawStream":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __iter__(self) -> Iterator[RawEvent]:
        for t, c in zip(self.timestamps.tolist(), self.channels.tolist()):
            yield RawEvent(t, c)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RawStream):
            return NotImplemented
        return (
            np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.channels, other.channels)
        )

    def shifted(self, delta_us: int) -> "RawStream":
        return RawStream(self.timestamps + delta_us, self.channels.copy(),
                         self.duration_us + delta_us)


@dataclass(frozen=True, eq=False)
class LocalStream:
    timestamps: np.ndarray
    channels: np.ndarray
    local_features: np.ndarray
    duration_us: Optional[int] = None

    def __post_init__(self):
        ts = _as_int_array(self.timestamps)
        ch = _as_int_array(self.channels)
        lf = _as_int_array(self.local_features)
        if not (ts.shape == ch.shape == lf.shape):
            raise ValueError("event fields differ in length")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "local_features", lf)
        object.__setattr__(self, "duration_us", _default_duration(ts, self.duration_us))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __iter__(self) -> Iterator[LocalEvent]:
        for t, c, f in zip(self.timestamps.tolist(), self.channels.tolist(),
                           self.local_features.tolist()):
            yield LocalEvent(t, c, f)


@dataclass(frozen=True, eq=False)
class CrossStream:
    timestamps: np.ndarray
    cross_features: np.ndarray
    duration_us: Optional[int] = None

    def __post_init__(self):
        ts = _as_int_array(self.timestamps)
        cf = _as_int_array(self.cross_features)
        if ts.shape != cf.shape:
            raise ValueError("event fields differ in length")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "cross_features", cf)
        object.__setattr__(self, "duration_us", _default_duration(ts, self.duration_us))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __iter__(self) -> Iterator[CrossEvent]:
        for t, f in zip(self.timestamps.tolist(), self.cross_features.tolist()):
            yield CrossEvent(t, f)


@dataclass(frozen=True)
class Recording:
    id: str
    label: str
    stream: RawStream


@dataclass(frozen=True)
class ValidationReport:
    first_violation: Optional[int] = None
    out_of_range_channels: int = 0
    negative_timestamps: int = 0

    @property
    def ordering_violations(self) -> int:
        return 0 if self.first_violation is None else 1

    @property
    def valid(self) -> bool:
        return (self.first_violation is None and self.out_of_range_channels == 0
                and self.negative_timestamps == 0)


def validate_stream(stream: RawStream) -> ValidationReport:
    """Report ordering and range problems without touching the stream.

    ``first_violation`` is the index of the first event whose timestamp is
    smaller than its predecessor's.
    """
    ts = stream.timestamps
    first = None
    if ts.size > 1:
        bad = np.flatnonzero(np.diff(ts) < 0)
        if bad.size:
            first = int(bad[0]) + 1
    ch = stream.channels
    out_of_range = int(np.count_nonzero((ch < 0) | (ch >= NUM_CHANNELS)))
    return ValidationReport(first, out_of_range, int(np.count_nonzero(ts < 0)))


def sort_stable_by_time(stream: RawStream) -> RawStream:
    order = np.argsort(stream.timestamps, kind="stable")
    return RawStream(stream.timestamps[order], stream.channels[order], stream.duration_us)
