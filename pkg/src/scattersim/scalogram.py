"""First-order modulus wavelet transform (constant-Q scalogram).

FFT-based: the clip is reflection-padded by the support of the longest
wavelet, transformed once, multiplied with each frequency-domain kernel,
inverse-transformed, and the modulus is taken.  Multirate mode subsamples
each band at its kernel's admissible power-of-2 factor; dense mode keeps
one common hop for all bands.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import fft, ifft, next_fast_len

from .filterbank import TemporalFilterbankSpec, build_temporal_filterbank


@dataclass(frozen=True)
class ScalogramBand:
    center: float
    hop: int
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Scalogram:
    bands: tuple
    clip_id: str
    sample_rate: float

    @property
    def centers(self):
        return np.array([b.center for b in self.bands])

    def matrix(self):
        """Bands stacked into one array; requires a common hop."""
        hops = {b.hop for b in self.bands}
        if len(hops) > 1:
            raise ValueError("bands have mixed hops; use dense mode")
        return np.stack([b.values for b in self.bands])


@functools.lru_cache(maxsize=8)
def _cached_bank(spec, n_fft):
    return build_temporal_filterbank(spec, n_fft)


def _pad_amount(spec):
    """Support half-width of the longest (lowest-frequency) kernel.

    Six time-domain standard deviations keep boundary leakage below ~1e-8,
    which the time-shift covariance tolerance relies on.
    """
    from .filterbank import _calibrated_sigma
    sigma_f = _calibrated_sigma(spec.quality_factor) * spec.min_center_frequency
    sigma_t = 1.0 / (2 * math.pi * sigma_f)
    return int(math.ceil(6 * sigma_t * spec.sample_rate))


def scalogram(clip, spec, mode="dense", dense_hop=1):
    """Per-band magnitude of the constant-Q wavelet transform.

    Reflection padding of the longest kernel support on each side avoids
    attack-transient edge artifacts; clips shorter than the padding length
    are zero-extended first.
    """
    if len(clip) == 0:
        raise ValueError("empty clip")
    if int(clip.sample_rate) != int(spec.sample_rate):
        raise ValueError("clip sample rate %s does not match bank rate %s"
                         % (clip.sample_rate, spec.sample_rate))
    if mode not in ("dense", "multirate"):
        raise ValueError("mode must be 'dense' or 'multirate'")

    x = clip.samples
    pad = _pad_amount(spec)
    if len(x) < pad + 1:
        x = np.concatenate([x, np.zeros(pad + 1 - len(x))])
    n = len(x)
    xp = np.pad(x, pad, mode="reflect")
    n_fft = next_fast_len(len(xp))
    xp = np.concatenate([xp, np.zeros(n_fft - len(xp))])
    spectrum = fft(xp)

    bank = _cached_bank(spec, n_fft)
    bands = []
    for kernel in bank:
        y = np.abs(ifft(spectrum * kernel.samples))[pad:pad + n]
        hop = dense_hop if mode == "dense" else max(kernel.downsample, dense_hop)
        bands.append(ScalogramBand(center=kernel.center, hop=hop,
                                   values=y[::hop]))
    return Scalogram(bands=tuple(bands), clip_id=clip.clip_id,
                     sample_rate=spec.sample_rate)
