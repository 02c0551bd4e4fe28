"""Temporal contexts and exponential-decay time vectors.

Local time vectors look at the last ``n`` events of the reference event's
own channel (the reference event included) and decay their ages with a
channel-dependent time constant. Cross time vectors look at the most recent
event of every (channel, local feature) cell and decay with one shared
constant. Cells that have never fired hold ``-inf`` and read out as 0.

Two routes exist for each vector type: the per-event context objects
(``LocalContext``, ``CrossContext``), and batch kernels over whole streams
used by the network. Both compute the same quantities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .clustering import nearest_rows
from .errors import ChannelOutOfRange, NonMonotoneEvent, NonPositiveTau
from .events import NUM_CHANNELS, LocalEvent, LocalStream, RawEvent, RawStream

US_PER_S = 1e6


def tau_for_channel(ch: int, tau_local: float) -> float:
    """Decay constant in seconds for channel ``ch``: ``(2 + ch*7/31) * tau_local``."""
    if ch < 0 or ch >= NUM_CHANNELS:
        raise ChannelOutOfRange(f"channel {ch} outside [0, 31]")
    if not tau_local > 0:
        raise NonPositiveTau(f"tau_local must be positive, got {tau_local}")
    return (2 + ch * (7 / 31)) * tau_local


@dataclass(frozen=True)
class TauSchedule:
    tau_local: float

    def __post_init__(self):
        if not self.tau_local > 0:
            raise NonPositiveTau(f"tau_local must be positive, got {self.tau_local}")

    @property
    def multipliers(self) -> np.ndarray:
        return 2 + np.arange(NUM_CHANNELS) * (7 / 31)

    @property
    def taus(self) -> np.ndarray:
        return np.array([tau_for_channel(c, self.tau_local) for c in range(NUM_CHANNELS)])

    def tau(self, ch: int) -> float:
        return tau_for_channel(ch, self.tau_local)


def _decay(gap_us, tau_s):
    return np.exp(-(gap_us / US_PER_S) / tau_s)


class LocalContext:
    """Per-channel FIFO of the ``n`` most recent timestamps, newest first."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.fifo = np.full((NUM_CHANNELS, n), -np.inf)

    def reset(self) -> "LocalContext":
        self.fifo.fill(-np.inf)
        return self


def push_and_build_local(ctx: LocalContext, ev: RawEvent, sched: TauSchedule) -> np.ndarray:
    t, ch = ev[0], ev[1]
    if ch < 0 or ch >= NUM_CHANNELS:
        raise ChannelOutOfRange(f"channel {ch} outside [0, 31]")
    row = ctx.fifo[ch]
    if t < row[0]:
        raise NonMonotoneEvent(f"timestamp {t} precedes {row[0]:.0f} on channel {ch}")
    row[1:] = row[:-1].copy()
    row[0] = t
    return _decay(t - row, sched.tau(ch))


class CrossContext:
    """Last-event timestamp per (channel, local feature) cell."""

    def __init__(self, lk: int):
        if lk < 1:
            raise ValueError("lk must be >= 1")
        self.lk = lk
        self.last = np.full((NUM_CHANNELS, lk), -np.inf)

    @property
    def dim(self) -> int:
        return NUM_CHANNELS * self.lk

    def reset(self) -> "CrossContext":
        self.last.fill(-np.inf)
        return self


def reset(ctx):
    return ctx.reset()


def update_and_build_cross(ctx: CrossContext, ev: LocalEvent, tau_cr: float) -> np.ndarray:
    t, ch, lft = ev[0], ev[1], ev[2]
    if not tau_cr > 0:
        raise NonPositiveTau(f"tau_cr must be positive, got {tau_cr}")
    if ch < 0 or ch >= NUM_CHANNELS:
        raise ChannelOutOfRange(f"channel {ch} outside [0, 31]")
    if t < ctx.last[ch, lft]:
        raise NonMonotoneEvent(
            f"timestamp {t} precedes {ctx.last[ch, lft]:.0f} in cell ({ch}, {lft})")
    ctx.last[ch, lft] = t
    return _decay(t - ctx.last.ravel(), tau_cr)


def check_monotone(timestamps: np.ndarray) -> None:
    if timestamps.size > 1:
        bad = np.flatnonzero(np.diff(timestamps) < 0)
        if bad.size:
            raise NonMonotoneEvent(f"stream not time-sorted at index {int(bad[0]) + 1}")


def local_time_vectors(stream: RawStream, n: int, sched: TauSchedule) -> np.ndarray:
    """Local time vector of every event of a fresh-context stream, shape (len, n)."""
    ts = stream.timestamps
    check_monotone(ts)
    ch = stream.channels
    out = np.zeros((ts.size, n))
    if ts.size == 0:
        return out
    if ch.min() < 0 or ch.max() >= NUM_CHANNELS:
        raise ChannelOutOfRange("stream holds channels outside [0, 31]")
    taus = sched.taus
    for c in np.unique(ch):
        idx = np.flatnonzero(ch == c)
        t = ts[idx].astype(np.float64)
        hist = np.full((t.size, n), -np.inf)
        for j in range(n):
            if j == 0:
                hist[:, 0] = t
            elif j < t.size:
                hist[j:, j] = t[:-j]
        out[idx] = _decay(t[:, None] - hist, taus[c])
    return out


@numba.njit(cache=True)
def _cross_vector_into(t, last, tau, buf):
    lk = last.shape[1]
    for c in range(last.shape[0]):
        for f in range(lk):
            buf[c * lk + f] = np.exp(-((t - last[c, f]) / US_PER_S) / tau)


@numba.njit(cache=True)
def _cross_vectors_selected(ts, ch, lf, last, tau, selected, out):
    # ``selected`` is a sorted array of event indices whose vectors are kept
    k = 0
    for i in range(ts.size):
        c = ch[i]
        f = lf[i]
        t = float(ts[i])
        last[c, f] = t
        if k < selected.size and selected[k] == i:
            _cross_vector_into(t, last, tau, out[k])
            k += 1


@numba.njit(cache=True)
def _cross_vectors_range(ts, ch, lf, last, tau, start, out):
    for i in range(start, start + out.shape[0]):
        t = float(ts[i])
        last[ch[i], lf[i]] = t
        _cross_vector_into(t, last, tau, out[i - start])


CHUNK = 4096


def _check_local_stream(stream: LocalStream, lk: int) -> None:
    check_monotone(stream.timestamps)
    if len(stream):
        if stream.channels.min() < 0 or stream.channels.max() >= NUM_CHANNELS:
            raise ChannelOutOfRange("stream holds channels outside [0, 31]")
        if stream.local_features.min() < 0 or stream.local_features.max() >= lk:
            raise ValueError(f"local features outside [0, {lk - 1}]")


def cross_time_vectors(stream: LocalStream, lk: int, tau_cr: float,
                       selected: np.ndarray | None = None) -> np.ndarray:
    """Cross time vectors of a fresh-context stream.

    ``selected`` (sorted event indices) limits which vectors are returned;
    the context still advances through every event.
    """
    if not tau_cr > 0:
        raise NonPositiveTau(f"tau_cr must be positive, got {tau_cr}")
    _check_local_stream(stream, lk)
    if selected is None:
        selected = np.arange(len(stream), dtype=np.int64)
    selected = np.asarray(selected, dtype=np.int64)
    out = np.zeros((selected.size, NUM_CHANNELS * lk))
    last = np.full((NUM_CHANNELS, lk), -np.inf)
    _cross_vectors_selected(stream.timestamps, stream.channels, stream.local_features,
                            last, float(tau_cr), selected, out)
    return out


def cross_nearest(stream: LocalStream, lk: int, tau_cr: float,
                  centers: np.ndarray) -> np.ndarray:
    """Nearest-center index of each event's cross time vector (fresh context)."""
    if not tau_cr > 0:
        raise NonPositiveTau(f"tau_cr must be positive, got {tau_cr}")
    _check_local_stream(stream, lk)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    out = np.zeros(len(stream), dtype=np.int64)
    last = np.full((NUM_CHANNELS, lk), -np.inf)
    buf = np.empty((CHUNK, NUM_CHANNELS * lk))
    for start in range(0, len(stream), CHUNK):
        block = buf[:min(CHUNK, len(stream) - start)]
        _cross_vectors_range(stream.timestamps, stream.channels, stream.local_features,
                             last, float(tau_cr), start, block)
        out[start:start + block.shape[0]] = nearest_rows(block, centers)
    return out
