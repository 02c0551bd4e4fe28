"""Software stand-in for the 32-channel neuromorphic auditory sensor.

The hardware sensor cascades spike-domain band-pass filters behind a
synthetic spike generator. Here the decomposition is a parallel bank of
digital band-pass biquads; each channel is half-wave rectified, mapped to
an instantaneous spike rate and fed to a deterministic integrate-and-fire
counter. Only positive-polarity events are produced since the network
discards the negative half-wave anyway.

Channel 0 is the highest-frequency channel and also the fastest spiking.
"""

from __future__ import annotations

import io
import wave
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ChannelOutOfRange, CorruptRiff, NyquistViolation, UnsupportedFormat
from .events import NUM_CHANNELS, RawStream

PEAK_RATE_CH0 = 9e4
PEAK_RATE_CH31 = 2e4
NYQUIST_MARGIN = 0.45


@dataclass
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class FilterBankConfig:
    num_channels: int = NUM_CHANNELS
    f_low_hz: float = 20.0
    f_high_hz: float = 20000.0
    order: int = 2
    q: float = 4.0

    def __post_init__(self):
        if not 1 <= self.num_channels <= NUM_CHANNELS:
            raise ChannelOutOfRange(f"num_channels must be in [1, {NUM_CHANNELS}]")
        if self.order < 2 or self.order % 2:
            raise ValueError("filter order must be a positive even number")
        if self.q <= 0:
            raise ValueError("q must be positive")
        if not 0 < self.f_low_hz < self.f_high_hz:
            raise ValueError("need 0 < f_low_hz < f_high_hz")


def peak_rate(ch: int) -> float:
    """Saturation spike rate of channel ``ch``: linear from 9e4 (ch 0) to 2e4 (ch 31)."""
    if ch < 0 or ch >= NUM_CHANNELS:
        raise ChannelOutOfRange(f"channel {ch} outside [0, 31]")
    return PEAK_RATE_CH0 + ch * (PEAK_RATE_CH31 - PEAK_RATE_CH0) / (NUM_CHANNELS - 1)


@dataclass
class RateProfile:
    peak_rates: np.ndarray

    @classmethod
    def default(cls, num_channels: int = NUM_CHANNELS) -> "RateProfile":
        return cls(np.array([peak_rate(c) for c in range(num_channels)]))


def read_wav(data: bytes) -> AudioBuffer:
    """Decode a mono 16-bit PCM RIFF/WAVE buffer, scaled by 1/32768."""
    if data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptRiff("missing RIFF/WAVE signature")
    try:
        with wave.open(io.BytesIO(data), "rb") as w:
            nch, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            frames = w.readframes(w.getnframes())
    except wave.Error as exc:
        if "unknown format" in str(exc):
            raise UnsupportedFormat(f"non-PCM wave file ({exc})") from exc
        raise CorruptRiff(str(exc)) from exc
    except EOFError as exc:
        raise CorruptRiff("truncated RIFF chunk") from exc
    if nch != 1:
        raise UnsupportedFormat(f"expected mono, got {nch} channels")
    if width != 2:
        raise UnsupportedFormat(f"expected 16-bit samples, got {8 * width}-bit")
    if len(frames) % 2:
        frames = frames[:-1]
    pcm = np.frombuffer(frames, dtype="<i2")
    return AudioBuffer(pcm.astype(np.float64) / 32768.0, rate)


def write_wav(audio: AudioBuffer) -> bytes:
    pcm = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    out = io.BytesIO()
    with wave.open(out, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate_hz)
        w.writeframes(pcm.tobytes())
    return out.getvalue()


@dataclass
class FilterBank:
    center_hz: np.ndarray
    sos: np.ndarray  # (channels, sections, 6)
    sample_rate_hz: int


def _bandpass_biquad(f0: float, q: float, fs: float) -> np.ndarray:
    # constant 0 dB peak-gain band-pass (Audio EQ Cookbook)
    w0 = 2 * np.pi * f0 / fs
    alpha = np.sin(w0) / (2 * q)
    a0 = 1 + alpha
    return np.array([alpha / a0, 0.0, -alpha / a0, 1.0, -2 * np.cos(w0) / a0, (1 - alpha) / a0])


def design_filterbank(config: FilterBankConfig, sample_rate: int) -> FilterBank:
    if sample_rate < 8000:
        raise NyquistViolation(f"sample rate {sample_rate} Hz below the 8000 Hz minimum")
    top = min(config.f_high_hz, NYQUIST_MARGIN * sample_rate)
    if config.f_low_hz >= top:
        raise NyquistViolation(
            f"f_low={config.f_low_hz} Hz not below {NYQUIST_MARGIN}*sample_rate={top} Hz")
    centers = np.geomspace(top, config.f_low_hz, config.num_channels)
    sections = config.order // 2
    sos = np.stack([np.tile(_bandpass_biquad(f, config.q, sample_rate), (sections, 1))
                    for f in centers])
    return FilterBank(centers, sos, sample_rate)


def filter_channels(audio: AudioBuffer, bank: FilterBank) -> np.ndarray:
    x = np.asarray(audio.samples, dtype=np.float64)
    return np.stack([signal.sosfilt(s, x) for s in bank.sos])


def encode(audio: AudioBuffer, config: FilterBankConfig | None = None,
           rate_profile: RateProfile | None = None) -> RawStream:
    """Convert audio into a positive-polarity spike stream.

    The integrate-and-fire stage adds ``rate * dt`` to an accumulator per
    sample and emits one event per whole unit crossed, all stamped with
    that sample's time. The number of events emitted up to sample i is
    therefore ``floor(cumsum(rate * dt)[i])``, which is what is computed.
    """
    config = config or FilterBankConfig()
    rate_profile = rate_profile or RateProfile.default(config.num_channels)
    sr = audio.sample_rate_hz
    n = audio.samples.size
    duration_us = n * 1_000_000 // sr
    if n == 0:
        return RawStream(np.zeros(0, np.int64), np.zeros(0, np.int64), 0)

    bank = design_filterbank(config, sr)
    filtered = filter_channels(audio, bank)
    sample_time_us = np.arange(n, dtype=np.int64) * 1_000_000 // sr
    dt = 1.0 / sr

    all_ts, all_ch = [], []
    for ch in range(config.num_channels):
        drive = np.minimum(1.0, np.maximum(filtered[ch], 0.0))
        acc = np.cumsum(rate_profile.peak_rates[ch] * drive * dt)
        fired = np.diff(np.floor(acc).astype(np.int64), prepend=0)
        idx = np.flatnonzero(fired)
        if idx.size == 0:
            continue
        ts = np.repeat(sample_time_us[idx], fired[idx])
        all_ts.append(ts)
        all_ch.append(np.full(ts.size, ch, dtype=np.int64))
    if not all_ts:
        return RawStream(np.zeros(0, np.int64), np.zeros(0, np.int64), duration_us)
    ts = np.concatenate(all_ts)
    ch = np.concatenate(all_ch)
    # channels were concatenated in index order, so a stable sort on time
    # yields (timestamp, channel, emission order)
    order = np.argsort(ts, kind="stable")
    return RawStream(ts[order], ch[order], duration_us)
