"""Synthetic test signals: tones at filter-bank centers and linear chirps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cochlea import AudioBuffer, FilterBankConfig, design_filterbank, write_wav


def channel_center_hz(ch: int, sample_rate: int = 16000,
                      config: FilterBankConfig | None = None) -> float:
    return float(design_filterbank(config or FilterBankConfig(), sample_rate).center_hz[ch])


def tone(freq_hz: float, duration_s: float, sample_rate: int = 16000,
         amplitude: float = 1.0, phase: float = 0.0) -> AudioBuffer:
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq_hz * t + phase), sample_rate)


def chirp(f_start_hz: float, f_end_hz: float, duration_s: float, sample_rate: int = 16000,
          amplitude: float = 1.0, phase: float = 0.0) -> AudioBuffer:
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    k = (f_end_hz - f_start_hz) / duration_s
    return AudioBuffer(
        amplitude * np.sin(2 * np.pi * (f_start_hz * t + 0.5 * k * t * t) + phase), sample_rate)


def _jittered(rng, make, noise: float, sample_rate: int, level=(0.25, 0.25)) -> AudioBuffer:
    audio = make(amplitude=rng.uniform(*level), phase=rng.uniform(0, 2 * np.pi))
    samples = audio.samples + noise * rng.standard_normal(audio.samples.size)
    return AudioBuffer(np.clip(samples, -1.0, 1.0), sample_rate)


def tone_pair_dataset(n_per_class: int, channels=(5, 25), duration_s: float = 0.5,
                      sample_rate: int = 16000, noise: float = 0.01, seed: int = 0,
                      level=(0.25, 0.25)):
    """Yield (label, audio) for tones at two channels' center frequencies.

    Each clip gets a random phase and additive white noise of standard
    deviation ``noise``. Peak amplitude is drawn uniformly from ``level``,
    which defaults to a single fixed value.
    """
    rng = np.random.default_rng(seed)
    freqs = {f"ch{c}": channel_center_hz(c, sample_rate) for c in channels}
    for i in range(n_per_class):
        for label, f in freqs.items():
            yield label, _jittered(
                rng, lambda **kw: tone(f, duration_s, sample_rate, **kw), noise, sample_rate,
                level)


def chirp_pair_dataset(n_per_class: int, f_low: float = 1000.0, f_high: float = 6000.0,
                       duration_s: float = 0.5, sample_rate: int = 16000,
                       noise: float = 0.01, seed: int = 0, level=(0.25, 0.25)):
    """Yield (label, audio) for rising and falling linear chirps (same jitter as tones)."""
    rng = np.random.default_rng(seed)
    spans = {"falling": (f_high, f_low), "rising": (f_low, f_high)}
    for i in range(n_per_class):
        for label, (a, b) in spans.items():
            yield label, _jittered(
                rng, lambda **kw: chirp(a, b, duration_s, sample_rate, **kw), noise, sample_rate,
                level)


def write_wav_dataset(root, items) -> int:
    """Write (label, audio) pairs as ``root/label/label_NNNN.wav``."""
    root = Path(root)
    counters: dict = {}
    for label, audio in items:
        i = counters.get(label, 0)
        counters[label] = i + 1
        d = root / label
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{label}_{i:04d}.wav").write_bytes(write_wav(audio))
    return sum(counters.values())
