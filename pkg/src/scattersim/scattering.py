"""Joint and separable time-frequency scattering, plus the rate-scale slice.

The scalogram is computed densely at a hop adapted to the fastest
modulation rate, then convolved with 2-D Morlet wavelets realized as
separable temporal x frequential kernel products.  Each stage subsamples
to the critical rate of its filter (powers of two), which is what keeps
the transform tractable at constant-Q resolution.

Per-path values are the mean of the low-passed second-order modulus over
the frames that correspond to actual clip content (padding excluded), so
features are duration-invariant.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import fft, ifft, next_fast_len

from .filterbank import (TemporalFilterbankSpec, _calibrated_sigma,
                         gaussian_lowpass, morlet_kernel)
from .scalogram import scalogram

_OVERSAMPLE = 8.0  # kept sample rate relative to filter center/cutoff


@dataclass(frozen=True)
class ScatteringPath:
    order: int
    lam: float     # acoustic center frequency, Hz
    alpha: float   # temporal modulation rate, Hz (0 for order 1)
    beta: float    # frequential scale, cycles/octave, signed


@dataclass(frozen=True)
class ScatteringFeatures:
    clip_id: str
    paths: tuple
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class RateScaleSlice:
    clip_id: str
    rates: tuple
    scales: tuple
    values: np.ndarray = field(repr=False)  # len(rates) x len(scales)


def _floor_pow2(x):
    return 1 if x < 2 else 2 ** int(math.floor(math.log2(x)))


@functools.lru_cache(maxsize=512)
def _cached_morlet(n_fft, axis_rate, center, sigma):
    return morlet_kernel(n_fft, axis_rate, center, sigma)


@functools.lru_cache(maxsize=512)
def _cached_lowpass(width, axis_rate, n_fft):
    return gaussian_lowpass(width, axis_rate, n_fft)


def _reflect_pad(arr, pad, axis):
    pad = min(pad, arr.shape[axis] - 1)
    width = [(0, 0)] * arr.ndim
    width[axis] = (pad, pad)
    return np.pad(arr, width, mode="reflect"), pad


def _zero_pad(arr, pad, axis):
    # Zero padding is used around the directional (signed) convolutions:
    # reflected content would carry the opposite orientation and blur the
    # up/down distinction near the edges.
    width = [(0, 0)] * arr.ndim
    width[axis] = (pad, pad)
    return np.pad(arr, width, mode="constant"), pad


def _conv_axis(arr, kernel_samples, axis):
    """FFT convolution along one axis with a frequency-domain kernel."""
    n = arr.shape[axis]
    n_fft = kernel_samples.shape[0]
    assert n_fft >= n
    spec = fft(arr, n=n_fft, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = n_fft
    out = ifft(spec * kernel_samples.reshape(shape), axis=axis)
    return np.take(out, np.arange(n), axis=axis)


def _valid_slice(start, stop, step):
    """Indices of the decimated axis that fall inside [start, stop)."""
    lo = int(math.ceil(start / step))
    hi = int(math.ceil(stop / step))
    return slice(lo, hi)


def _lambda_stride(q, beta, f_octaves):
    """Power-of-2 stride along the log-frequency axis for one scale.

    The log-frequency axis of a path at scale beta only needs about
    2*|beta| samples per octave (2/F for the low-pass slot), so constant-Q
    resolution is decimated accordingly.
    """
    rho = max(2.0 * abs(beta), 2.0 / f_octaves)
    return max(1, _floor_pow2(q / rho))


def _temporal_spec(cfg):
    return TemporalFilterbankSpec(
        quality_factor=cfg.quality_factor, octave_count=cfg.octave_count,
        sample_rate=cfg.sample_rate, min_center_frequency=cfg.min_center_frequency)


def _u1_matrix(clip, cfg):
    """Dense scalogram at the hop required by the fastest modulation rate."""
    rates = cfg.rate_grid()
    h0 = _floor_pow2(cfg.sample_rate / (_OVERSAMPLE * max(rates)))
    if cfg.peak_normalize:
        clip = clip.peak_normalized()
    scal = scalogram(clip, _temporal_spec(cfg), mode="dense", dense_hop=h0)
    return scal.matrix(), cfg.sample_rate / h0, scal.centers


def _pad_for_rates(u1, sr_u1, cfg):
    """Reflect-pad the time axis for the widest temporal filter envelope."""
    sigma1 = _calibrated_sigma(1)
    alpha_min = min(cfg.rate_grid())
    sigma_t = max(1.0 / (2 * math.pi * sigma1 * alpha_min),
                  cfg.time_constant / 2.0)
    want = int(math.ceil(4 * sigma_t * sr_u1))
    return _zero_pad(u1, want, axis=1)


def jtfs_first_order(scal, t_constant, f_octaves, betas, quality_factor):
    """Order-1 paths: scalogram low-passed over time, wavelet-transformed
    over log-frequency (beta >= 0; beta = 0 is the Gaussian low-pass slot).

    `scal` must be a dense-mode scalogram.
    """
    u1 = scal.matrix()
    hop = scal.bands[0].hop
    sr_u1 = scal.sample_rate / hop
    return _first_order(u1, sr_u1, scal.centers, t_constant, f_octaves,
                        betas, quality_factor)


def _first_order(u1, sr_u1, centers, t_constant, f_octaves, betas, q):
    sigma1 = _calibrated_sigma(1)
    up, pad_t = _reflect_pad(u1, int(math.ceil(4 * t_constant / 2 * sr_u1)), 1)
    n_fft_t = next_fast_len(up.shape[1])
    phi_t = gaussian_lowpass(t_constant, sr_u1, n_fft_t)
    smooth = _conv_axis(up, phi_t.samples, axis=1).real
    d_t = _floor_pow2(sr_u1 * t_constant / _OVERSAMPLE)
    smooth = smooth[:, ::d_t]
    valid = _valid_slice(pad_t, up.shape[1] - pad_t, d_t)

    paths, values = [], []
    n_lam = u1.shape[0]
    for beta in sorted(b for b in betas if b >= 0):
        fp, pad_u = _reflect_pad(smooth, _freq_pad(q, beta, f_octaves), 0)
        n_fft_u = next_fast_len(fp.shape[0])
        if beta == 0.0:
            fk = gaussian_lowpass(f_octaves, q, n_fft_u)
        else:
            fk = morlet_kernel(n_fft_u, q, beta, sigma1 * beta)
        out = np.abs(_conv_axis(fp, fk.samples, axis=0))[pad_u:pad_u + n_lam]
        stride = _lambda_stride(q, beta, f_octaves)
        per_lam = out[:, valid].mean(axis=1)
        for i in range(0, n_lam, stride):
            paths.append(ScatteringPath(1, float(centers[i]), 0.0, beta))
            values.append(per_lam[i])
    return paths, np.array(values)


def _freq_pad(q, beta, f_octaves):
    sigma1 = _calibrated_sigma(1)
    if beta == 0.0:
        sigma_u = f_octaves / 2.0
    else:
        sigma_u = 1.0 / (2 * math.pi * sigma1 * abs(beta))
    return int(math.ceil(4 * sigma_u * q))


def _second_order(u1, sr_u1, centers, cfg, want_paths=True, want_slice=False,
                  prune=True):
    """Shared engine for order-2 joint scattering and the rate-scale slice."""
    q = cfg.quality_factor
    rates = cfg.rate_grid()
    betas = cfg.beta_grid_signed()
    sigma1 = _calibrated_sigma(1)

    up, pad_t = _pad_for_rates(u1, sr_u1, cfg)
    n_tp = up.shape[1]
    n_fft_t = next_fast_len(n_tp)
    u_spec = fft(up, n=n_fft_t, axis=1)
    n_lam = u1.shape[0]

    paths, values = [], []
    v_slice = np.zeros((len(rates), len(betas)))
    # Slice-only runs stay at the full first-order rate: the rate-scale
    # integral is then exact instead of a coarse rectangle-rule sum.
    subsample = want_paths
    # One shared log-frequency pad (the widest kernel's) so the u-axis FFT
    # is computed once per rate and reused across scales.
    pad_u = max(_freq_pad(q, b, cfg.frequential_width) for b in betas)
    n_fft_u = next_fast_len(n_lam + 2 * pad_u)
    for ai, alpha in enumerate(rates):
        tk = _cached_morlet(n_fft_t, sr_u1, alpha, sigma1 * alpha)
        y = ifft(u_spec * tk.samples[None, :], axis=1)[:, :n_tp]
        d_a = _floor_pow2(sr_u1 / (_OVERSAMPLE * alpha)) if subsample else 1
        y = y[:, ::d_a]
        r_a = sr_u1 / d_a
        valid = _valid_slice(pad_t, n_tp - pad_t, d_a)
        yp, _ = _zero_pad(y, pad_u, 0)
        y_uspec = fft(yp, n=n_fft_u, axis=0)
        for bi, beta in enumerate(betas):
            if beta == 0.0:
                fk = _cached_lowpass(cfg.frequential_width, q, n_fft_u)
            else:
                fk = _cached_morlet(n_fft_u, q, beta, sigma1 * abs(beta))
            u2 = np.abs(ifft(y_uspec * fk.samples[:, None],
                             axis=0)[pad_u:pad_u + n_lam])
            if want_slice:
                # dt/du integration weights make columns at different
                # subsampling rates comparable.
                v_slice[ai, bi] = u2[:, valid].sum() * (d_a / sr_u1) / q
            if not want_paths:
                continue
            # S2: low-pass over time (phi_T) and log-frequency (phi_F).
            phi_t = _cached_lowpass(cfg.time_constant, r_a,
                                    next_fast_len(u2.shape[1]))
            s2 = _conv_axis(u2, phi_t.samples, axis=1).real
            s2p, pad_f = _reflect_pad(s2, _freq_pad(q, 0.0, cfg.frequential_width), 0)
            phi_f = _cached_lowpass(cfg.frequential_width, q,
                                    next_fast_len(s2p.shape[0]))
            s2 = _conv_axis(s2p, phi_f.samples, axis=0).real[pad_f:pad_f + n_lam]
            per_lam = s2[:, valid].mean(axis=1)
            stride = _lambda_stride(q, beta, cfg.frequential_width)
            for i in range(0, n_lam, stride):
                lam = float(centers[i])
                if prune and alpha > lam / q * (1 + 1e-9):
                    continue
                paths.append(ScatteringPath(2, lam, alpha, beta))
                values.append(per_lam[i])
    vals = np.array(values) if values else np.zeros(0)
    return paths, vals, v_slice


def jtfs_second_order(scal, jspec, t_constant, f_octaves):
    """Order-2 joint scattering from a dense scalogram and a joint-bank
    grid specification."""
    from .config import AnalysisConfig
    hop = scal.bands[0].hop
    sr_u1 = scal.sample_rate / hop
    u1 = scal.matrix()
    centers = scal.centers
    q = int(round(1.0 / math.log2(centers[1] / centers[0]))) if len(centers) > 1 else 1

    class _Grid:
        quality_factor = q
        time_constant = t_constant
        frequential_width = f_octaves
        peak_normalize = False

        def rate_grid(self):
            return list(jspec.rates)

        def beta_grid_signed(self):
            return sorted(jspec.scales)

    paths, values, _ = _second_order(u1, sr_u1, centers, _Grid())
    return paths, values


def scattering_vector(clip, cfg):
    """Concatenated order-1 and order-2 joint scattering features."""
    u1, sr_u1, centers = _u1_matrix(clip, cfg)
    p1, v1 = _first_order(u1, sr_u1, centers, cfg.time_constant,
                          cfg.frequential_width, cfg.beta_grid_unsigned(),
                          cfg.quality_factor)
    p2, v2, _ = _second_order(u1, sr_u1, centers, cfg)
    return ScatteringFeatures(clip_id=clip.clip_id, paths=tuple(p1 + p2),
                              values=np.concatenate([v1, v2]))


def rate_scale_slice(clip, cfg):
    """Second-order energy integrated over time and frequency: one value
    per (rate, scale) pair, suitable for heatmap export."""
    u1, sr_u1, centers = _u1_matrix(clip, cfg)
    _, _, v = _second_order(u1, sr_u1, centers, cfg, want_paths=False,
                            want_slice=True)
    return RateScaleSlice(clip_id=clip.clip_id, rates=tuple(cfg.rate_grid()),
                          scales=tuple(cfg.beta_grid_signed()), values=v)


def separable_scattering(clip, cfg):
    """Separable variant: temporal wavelet modulus first, then the
    frequential transform on the slow (T-rate) tensor; scales unsigned."""
    u1, sr_u1, centers = _u1_matrix(clip, cfg)
    q = cfg.quality_factor
    sigma1 = _calibrated_sigma(1)
    p1, v1 = _first_order(u1, sr_u1, centers, cfg.time_constant,
                          cfg.frequential_width, cfg.beta_grid_unsigned(), q)

    up, pad_t = _pad_for_rates(u1, sr_u1, cfg)
    n_tp = up.shape[1]
    n_fft_t = next_fast_len(n_tp)
    u_spec = fft(up, n=n_fft_t, axis=1)
    n_lam = u1.shape[0]

    paths, values = [], []
    for alpha in cfg.rate_grid():
        tk = morlet_kernel(n_fft_t, sr_u1, alpha, sigma1 * alpha)
        a = np.abs(ifft(u_spec * tk.samples[None, :], axis=1)[:, :n_tp])
        # Smooth to the T scale, then decimate: the frequential transform
        # operates on a tensor subsampled at a fixed slow rate.
        phi_t = gaussian_lowpass(cfg.time_constant, sr_u1, n_fft_t)
        a = _conv_axis(a, phi_t.samples, axis=1).real
        d_t = _floor_pow2(sr_u1 * cfg.time_constant / _OVERSAMPLE)
        a = a[:, ::d_t]
        r_t = sr_u1 / d_t
        valid = _valid_slice(pad_t, n_tp - pad_t, d_t)
        for beta in cfg.beta_grid_unsigned():
            ap, pad_u = _reflect_pad(a, _freq_pad(q, beta, cfg.frequential_width), 0)
            n_fft_u = next_fast_len(ap.shape[0])
            if beta == 0.0:
                fk = gaussian_lowpass(cfg.frequential_width, q, n_fft_u)
            else:
                fk = morlet_kernel(n_fft_u, q, beta, sigma1 * beta)
            b = np.abs(_conv_axis(ap, fk.samples, axis=0))[pad_u:pad_u + n_lam]
            n_fft_s = next_fast_len(b.shape[1])
            phi_t2 = gaussian_lowpass(cfg.time_constant, r_t, n_fft_s)
            s = _conv_axis(b, phi_t2.samples, axis=1).real
            sp, pad_f = _reflect_pad(s, _freq_pad(q, 0.0, cfg.frequential_width), 0)
            phi_f = gaussian_lowpass(cfg.frequential_width, q,
                                     next_fast_len(sp.shape[0]))
            s = _conv_axis(sp, phi_f.samples, axis=0).real[pad_f:pad_f + n_lam]
            per_lam = s[:, valid].mean(axis=1)
            stride = _lambda_stride(q, beta, cfg.frequential_width)
            for i in range(0, n_lam, stride):
                lam = float(centers[i])
                if alpha > lam / q * (1 + 1e-9):
                    continue
                paths.append(ScatteringPath(2, lam, alpha, beta))
                values.append(per_lam[i])
    vals = np.array(values) if values else np.zeros(0)
    return ScatteringFeatures(clip_id=clip.clip_id, paths=tuple(p1 + paths),
                              values=np.concatenate([v1, vals]))


def rate_scale_to_csv(sl):
    """CSV rendering: first row is the scale grid header, then one row per
    rate with its value across scales."""
    lines = ["alpha_hz," + ",".join("%g" % b for b in sl.scales)]
    for ai, alpha in enumerate(sl.rates):
        lines.append("%g," % alpha +
                     ",".join("%.10g" % v for v in sl.values[ai]))
    return "\n".join(lines) + "\n"
