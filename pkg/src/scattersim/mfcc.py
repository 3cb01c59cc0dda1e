"""MFCC and MFCC-Gram baseline features.

40-band mel spectrogram (triangular HTK-style filters spanning 0 to
Nyquist), pointwise log, then an orthonormal DCT-II across bands, on
25 ms Hann frames with 12.5 ms hop.  The Gram variant summarizes a clip
by the across-time Gram matrix of its MFCC trajectory (upper triangle,
820 values) plus the 40 time-averaged coefficients: 860 dimensions.
Both feed the same feature-store, metric, and retrieval stages as the
scattering features.
"""

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct, rfft

N_MFCC = 40
FRAME_SECONDS = 0.025
HOP_SECONDS = 0.0125
_LOG_FLOOR = 1e-10


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0)
                    - 1.0)


def mel_filterbank(sample_rate, n_fft, n_bands=N_MFCC):
    """Triangular mel filters on the rfft grid, area-normalized."""
    edges = _mel_to_hz(np.linspace(_hz_to_mel(0.0),
                                   _hz_to_mel(sample_rate / 2.0),
                                   n_bands + 2))
    freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    bank = np.zeros((n_bands, freqs.size))
    for m in range(n_bands):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - freqs) / max(hi - mid, 1e-12)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
        bank[m] *= 2.0 / max(hi - lo, 1e-12)
    return bank


@dataclass(frozen=True)
class MfccFrames:
    """Framewise MFCC matrix for one clip."""

    clip_id: str
    sample_rate: float
    frame_length: int
    hop_length: int
    coefficients: np.ndarray    # frames x N_MFCC

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != N_MFCC or c.shape[0] < 1:
            raise ValueError("coefficients must be frames x %d" % N_MFCC)
        object.__setattr__(self, "coefficients", c)

    @property
    def n_frames(self):
        return self.coefficients.shape[0]

    def mean_vector(self):
        return self.coefficients.mean(axis=0)


def mfcc(clip, clip_id=""):
    """MFCC frames for an audio clip.

    A clip shorter than one frame is zero-padded to a single frame.
    """
    samples = np.asarray(clip.samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("empty clip")
    sr = clip.sample_rate
    frame = int(round(FRAME_SECONDS * sr))
    hop = int(round(HOP_SECONDS * sr))
    if samples.size < frame:
        samples = np.pad(samples, (0, frame - samples.size))
    n_frames = 1 + (samples.size - frame) // hop
    window = np.hanning(frame)
    bank = mel_filterbank(sr, frame)
    rows = np.empty((n_frames, N_MFCC))
    for t in range(n_frames):
        seg = samples[t * hop:t * hop + frame] * window
        power = np.abs(rfft(seg)) ** 2
        mel = bank @ power
        rows[t] = dct(np.log(mel + _LOG_FLOOR), type=2, norm="ortho")
    return MfccFrames(clip_id=clip_id, sample_rate=sr, frame_length=frame,
                      hop_length=hop, coefficients=rows)


def mfcc_gram(frames):
    """Gram summary row: upper-triangular G(a,b) = sum_t c(t,a)c(t,b)
    (820 values, row-major) followed by the 40 time-averaged MFCCs."""
    c = frames.coefficients
    gram = c.T @ c
    iu, ju = np.triu_indices(N_MFCC)
    return np.concatenate([gram[iu, ju], frames.mean_vector()])


def mfcc_paths():
    """Path descriptors for the 40-dim time-averaged MFCC feature."""
    return ["mfcc:%02d" % k for k in range(N_MFCC)]


def mfcc_gram_paths():
    """Path descriptors for the 860-dim Gram feature."""
    iu, ju = np.triu_indices(N_MFCC)
    labels = ["gram:%02d,%02d" % (a, b) for a, b in zip(iu, ju)]
    return labels + ["mean:%02d" % k for k in range(N_MFCC)]
