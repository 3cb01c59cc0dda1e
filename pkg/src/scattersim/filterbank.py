"""Constant-Q Morlet filterbanks and Gaussian low-pass filters.

All kernels are built directly in the frequency domain at a given FFT
length.  A Morlet kernel is a Gaussian bump at its center frequency minus a
scaled Gaussian at DC; the scaling is computed so the DC bin is exactly
zero (zero-average admissibility).  Kernels are normalized to unit peak
magnitude of the analytic part.

Construction is pure and deterministic; banks are immutable and safe to
share across threads.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class TemporalFilterbankSpec:
    """Constant-Q bank layout: center frequencies form a geometric grid of
    ratio 2**(1/Q) starting at min_center_frequency, Q*J of them."""

    quality_factor: int
    octave_count: int
    sample_rate: float
    min_center_frequency: float

    def __post_init__(self):
        if self.quality_factor < 1:
            raise ValueError("quality factor must be >= 1")
        if self.octave_count < 1:
            raise ValueError("octave count must be >= 1")
        if self.min_center_frequency <= 0:
            raise ValueError("min center frequency must be positive")
        if self.max_center_frequency >= self.sample_rate / 2:
            raise ValueError(
                "highest center frequency %.1f Hz reaches Nyquist (%.1f Hz)"
                % (self.max_center_frequency, self.sample_rate / 2))

    @property
    def center_frequencies(self):
        q, j = self.quality_factor, self.octave_count
        return [self.min_center_frequency * 2.0 ** (i / q) for i in range(q * j)]

    @property
    def max_center_frequency(self):
        q, j = self.quality_factor, self.octave_count
        return self.min_center_frequency * 2.0 ** ((q * j - 1) / q)


@dataclass(frozen=True)
class JointFilterbankSpec:
    """Grid of 2-D wavelets: temporal rates (Hz) times signed frequential
    scales (cycles/octave) plus the beta=0 low-pass slot."""

    rates: tuple                 # Hz, ascending
    scales: tuple                # cycles/octave, signed, may include 0
    frequential_lowpass_width: float = 2.0  # F, octaves
    time_rate: float = 1.0       # samples per second on the scalogram time axis
    freq_rate: float = 12.0      # samples per octave on the log-frequency axis

    def __post_init__(self):
        if not self.rates:
            raise ValueError("rate grid is empty")
        if any(a <= 0 for a in self.rates):
            raise ValueError("rates must be positive")
        if self.frequential_lowpass_width <= 0:
            raise ValueError("frequential low-pass width must be positive")
        pos = sorted(b for b in self.scales if b > 0)
        neg = sorted(-b for b in self.scales if b < 0)
        if pos != neg:
            raise ValueError("scale grid must be symmetric about 0")


@dataclass(frozen=True)
class FilterKernel:
    """Frequency-domain kernel samples over a full (signed) DFT grid."""

    samples: np.ndarray = field(repr=False)
    center: float                # center frequency in axis units (Hz or c/o)
    bandwidth: float             # equivalent rectangular bandwidth
    axis_rate: float             # samples per axis unit
    downsample: int              # admissible power-of-2 subsampling factor

    @property
    def n_fft(self):
        return self.samples.shape[0]


@functools.lru_cache(maxsize=None)
def _calibrated_sigma(quality_factor):
    """Frequency-domain Gaussian width of the mother wavelet (center 1)
    so that its measured ERB is exactly 1/Q.

    The corrective DC term shifts the ERB away from the pure-Gaussian value
    sqrt(pi)*sigma, noticeably so at low Q, so we solve for sigma
    numerically.
    """
    q = float(quality_factor)
    f = np.linspace(-8.0, 8.0, 40001)
    df = f[1] - f[0]

    def erb(sigma):
        g = np.exp(-((f - 1.0) ** 2) / (2 * sigma ** 2))
        kappa = math.exp(-1.0 / (2 * sigma ** 2))
        psi = g - kappa * np.exp(-(f ** 2) / (2 * sigma ** 2))
        p = np.abs(psi) ** 2
        return p.sum() * df / p.max()

    target = 1.0 / q
    lo, hi = target / (_SQRT_PI * 4), target / _SQRT_PI * 4
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if erb(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@functools.lru_cache(maxsize=32)
def _fft_grid(n_fft, axis_rate):
    return np.fft.fftfreq(n_fft) * axis_rate


def _gauss_periodized(freqs, center, sigma, axis_span):
    """Gaussian bump at `center`, periodized over the DFT span.

    The exponential is only evaluated within 16 sigma of each periodized
    center; the remainder underflows to zero anyway.
    """
    out = np.zeros_like(freqs)
    for m in (-1, 0, 1):
        d = freqs + m * axis_span - center
        mask = np.abs(d) < 16 * sigma
        if mask.any():
            out[mask] += np.exp(-(d[mask] ** 2) / (2 * sigma ** 2))
    return out


def morlet_kernel(n_fft, axis_rate, center, sigma, downsample=1):
    """Frequency-domain Morlet: bump at `center` minus a DC-zeroing Gaussian.

    `center` may be negative (anti-analytic kernel, used for negative
    frequential scales).  Peak magnitude is normalized to one.
    """
    freqs = _fft_grid(n_fft, axis_rate)
    num = _gauss_periodized(freqs, center, sigma, axis_rate)
    den = _gauss_periodized(freqs, 0.0, sigma, axis_rate)
    kappa = num[0] / den[0] if den[0] != 0 else 0.0
    samples = num - kappa * den
    # Normalize by the continuous-frequency peak, not the DFT-grid maximum:
    # the latter depends on how close a bin falls to the true peak, which
    # would make kernel gain vary with FFT length.
    fine = center + np.linspace(-1.0, 1.0, 201) * sigma
    peak = np.abs(np.exp(-((fine - center) ** 2) / (2 * sigma ** 2))
                  - kappa * np.exp(-(fine ** 2) / (2 * sigma ** 2))).max()
    samples /= peak
    bw = _measured_erb(samples, axis_rate)
    return FilterKernel(samples=samples.astype(np.complex128), center=center,
                        bandwidth=bw, axis_rate=axis_rate, downsample=downsample)


def _measured_erb(samples, axis_rate):
    p = np.abs(samples) ** 2
    df = axis_rate / samples.shape[0]
    return float(p.sum() * df / p.max())


def _admissible_downsample(samples, axis_rate, center, max_factor):
    """Largest power-of-2 subsampling keeping aliased energy < 1% of total.

    Aliased energy for factor h is the kernel energy outside the principal
    band of width axis_rate/h centered (circularly) on the kernel's center.
    Only bins carrying non-negligible energy are inspected.
    """
    n = samples.shape[0]
    p = np.abs(samples) ** 2
    keep = np.nonzero(p > 1e-14 * p.max())[0]
    freqs = _fft_grid(n, axis_rate)[keep]
    p = p[keep]
    dist = np.abs((freqs - center + axis_rate / 2) % axis_rate - axis_rate / 2)
    total = p.sum()
    h = 1
    while h * 2 <= max_factor:
        half_band = axis_rate / (2 * (h * 2))
        alias = p[dist > half_band].sum()
        if alias >= 0.01 * total:
            break
        h *= 2
    return h


def build_temporal_filterbank(spec, n_fft=2 ** 16):
    """One Morlet kernel per center frequency, ascending."""
    sigma1 = _calibrated_sigma(spec.quality_factor)
    kernels = []
    for lam in spec.center_frequencies:
        k = morlet_kernel(n_fft, spec.sample_rate, lam, sigma1 * lam)
        ds = _admissible_downsample(k.samples, spec.sample_rate, lam, n_fft // 4)
        kernels.append(FilterKernel(samples=k.samples, center=lam,
                                    bandwidth=k.bandwidth,
                                    axis_rate=spec.sample_rate, downsample=ds))
    return kernels


def gaussian_lowpass(width, axis_rate, n_fft):
    """Gaussian low-pass of the given width (seconds or octaves): unit DC
    gain, monotone magnitude.  The time-domain standard deviation is
    width/2."""
    if width <= 0:
        raise ValueError("low-pass width must be positive")
    freqs = np.fft.fftfreq(n_fft) * axis_rate
    sigma_t = width / 2.0
    samples = np.exp(-2 * math.pi ** 2 * sigma_t ** 2 * freqs ** 2)
    samples = samples / samples[0]  # exact unit DC gain
    ds = _admissible_downsample(samples, axis_rate, 0.0, n_fft // 4)
    return FilterKernel(samples=samples.astype(np.complex128), center=0.0,
                        bandwidth=_measured_erb(samples, axis_rate),
                        axis_rate=axis_rate, downsample=ds)


def build_joint_filterbank(spec, n_fft_time, n_fft_freq):
    """2-D wavelets as (temporal, frequential) kernel pairs.

    Both factors are Morlets of quality factor one.  The beta=0 slot pairs
    the temporal Morlet with a Gaussian low-pass of width F octaves along
    the log-frequency axis.  Negative beta mirrors the frequential kernel
    to negative frequencies (conjugate direction selectivity).
    """
    sigma1 = _calibrated_sigma(1)
    pairs = []
    for alpha in spec.rates:
        tk = morlet_kernel(n_fft_time, spec.time_rate, alpha, sigma1 * alpha)
        tk = FilterKernel(samples=tk.samples, center=alpha, bandwidth=tk.bandwidth,
                          axis_rate=spec.time_rate,
                          downsample=_admissible_downsample(
                              tk.samples, spec.time_rate, alpha, n_fft_time // 4))
        for beta in spec.scales:
            if beta == 0.0:
                fk = gaussian_lowpass(spec.frequential_lowpass_width,
                                      spec.freq_rate, n_fft_freq)
            else:
                fk = morlet_kernel(n_fft_freq, spec.freq_rate, beta,
                                   sigma1 * abs(beta))
            pairs.append((tk, fk))
    return pairs


def frame_bounds(bank):
    """Littlewood-Paley bounds of sum |psi_hat|^2 over the bank passband."""
    if not bank:
        raise ValueError("empty filterbank")
    n = bank[0].n_fft
    rate = bank[0].axis_rate
    freqs = np.fft.fftfreq(n) * rate
    lp = np.zeros(n)
    for k in bank:
        lp += np.abs(k.samples) ** 2
    lo = min(k.center for k in bank)
    hi = max(k.center for k in bank)
    if hi < freqs.min() or lo > freqs.max():
        raise ValueError("empty passband")
    mask = (freqs >= lo) & (freqs <= hi)
    if not mask.any():
        # Degenerate passband (e.g. a single kernel): use the nearest bin.
        mask = np.zeros(n, dtype=bool)
        mask[np.argmin(np.abs(freqs - 0.5 * (lo + hi)))] = True
    sub = lp[mask]
    return float(sub.min()), float(sub.max())
