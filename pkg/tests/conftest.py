"""Shared synthetic-signal helpers for the test suite."""

import numpy as np
import pytest

from scattersim.audio import AudioClip
from scattersim.config import AnalysisConfig

# Small analysis config used by the signal-path tests: fast to compute but
# covers the full rate/scale machinery.
SMALL = AnalysisConfig(sample_rate=22050, quality_factor=8, octave_count=6,
                       min_center_frequency=100.0, rate_max=64.0,
                       beta_max=2.0)


def am_tone(fm, sr=22050, carrier=440.0, depth=0.9, duration=1.0):
    t = np.arange(int(duration * sr)) / sr
    x = (1.0 + depth * np.sin(2 * np.pi * fm * t)) * np.sin(2 * np.pi * carrier * t)
    return AudioClip(x, sr, clip_id="am%g" % fm)


def exp_chirp(sr=22050, f0=150.0, f1=1200.0, duration=1.0, up=True):
    """Hann-windowed exponential (linear-in-log-frequency) chirp."""
    n = int(duration * sr)
    t = np.arange(n) / sr
    k = np.log(f1 / f0)
    phase = 2 * np.pi * f0 * (duration / k) * (np.exp(k * t / duration) - 1.0)
    x = np.sin(phase) * np.hanning(n)
    if not up:
        x = x[::-1].copy()
    return AudioClip(x, sr, clip_id="chirp-up" if up else "chirp-down")


def impulse_train(rate_hz, sr=22050, duration=1.0):
    x = np.zeros(int(duration * sr))
    x[:: int(sr / rate_hz)] = 1.0
    return AudioClip(x, sr, clip_id="imp%g" % rate_hz)


def harmonic_tone(f0=261.6, partials=8, sr=22050, duration=1.0):
    t = np.arange(int(duration * sr)) / sr
    x = sum(np.sin(2 * np.pi * f0 * (k + 1) * t) / (k + 1)
            for k in range(partials))
    return AudioClip(x, sr, clip_id="harm")


@pytest.fixture(scope="session")
def small_config():
    return SMALL
