import numpy as np
import pytest

from scattersim.audio import AudioClip
from scattersim.filterbank import TemporalFilterbankSpec, frame_bounds
from scattersim.scalogram import _cached_bank, scalogram

SPEC = TemporalFilterbankSpec(8, 6, 22050, 100.0)


def sine(freq, sr=22050, duration=0.5):
    t = np.arange(int(duration * sr)) / sr
    return AudioClip(np.sin(2 * np.pi * freq * t), sr, clip_id="sine%g" % freq)


class TestLocalization:
    def test_440hz_band_argmax(self):
        scal = scalogram(sine(440.0), SPEC)
        energy = [float((b.values ** 2).mean()) for b in scal.bands]
        peak = scal.bands[int(np.argmax(energy))].center
        assert abs(np.log2(peak / 440.0)) * 12 <= 1.0  # within one semitone

    def test_zero_clip_zero_output(self):
        clip = AudioClip(np.zeros(4096), 22050, clip_id="silence")
        scal = scalogram(clip, SPEC)
        assert all(np.all(b.values == 0) for b in scal.bands)


class TestStructure:
    def test_nonnegative_and_ordered(self):
        scal = scalogram(sine(300.0), SPEC)
        centers = scal.centers
        assert np.all(np.diff(centers) > 0)
        assert all(np.all(b.values >= 0) for b in scal.bands)

    def test_multirate_hop_monotone(self):
        scal = scalogram(sine(300.0), SPEC, mode="multirate")
        hops = [b.hop for b in scal.bands]
        assert all(a >= b for a, b in zip(hops, hops[1:]))

    def test_multirate_agrees_with_dense(self):
        rng = np.random.default_rng(0)
        clip = AudioClip(rng.standard_normal(22050), 22050, clip_id="noise")
        dense = scalogram(clip, SPEC, mode="dense")
        multi = scalogram(clip, SPEC, mode="multirate")
        for db, mb in zip(dense.bands, multi.bands):
            sub = db.values[:: mb.hop]
            n = min(len(sub), len(mb.values))
            err = np.linalg.norm(sub[:n] - mb.values[:n]) / np.linalg.norm(sub[:n])
            assert err < 0.01

    def test_mixed_hop_matrix_rejected(self):
        scal = scalogram(sine(300.0), SPEC, mode="multirate")
        with pytest.raises(ValueError):
            scal.matrix()

    def test_short_clip_zero_extended(self):
        clip = AudioClip(np.ones(8), 22050, clip_id="tick")
        scal = scalogram(clip, SPEC)
        assert all(len(b.values) >= 1 for b in scal.bands)


class TestInvariants:
    def test_time_shift_covariance(self):
        # Tone burst with silent margins so the circular shift is seam-free.
        sr = 22050
        n = int(0.6 * sr)
        t = np.arange(n) / sr
        x = np.sin(2 * np.pi * 500.0 * t)
        x[: n // 3] = 0.0
        x[-n // 3:] = 0.0
        hop = 64
        shift = 4 * hop
        a = scalogram(AudioClip(x, sr, clip_id="a"), SPEC, dense_hop=hop)
        b = scalogram(AudioClip(np.roll(x, shift), sr, clip_id="b"), SPEC,
                      dense_hop=hop)
        for ba, bb in zip(a.bands, b.bands):
            m = len(ba.values) - 4
            ref = ba.values[:m]
            err = np.linalg.norm(bb.values[4: m + 4] - ref)
            assert err <= 1e-6 * max(np.linalg.norm(ref), 1.0)

    def test_energy_bounded_by_frame_constant(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(16384)
        clip = AudioClip(x, 22050, clip_id="n")
        scal = scalogram(clip, SPEC)
        _, b = frame_bounds(_cached_bank(SPEC, 2 ** 16))
        total = sum(float((band.values ** 2).sum()) for band in scal.bands)
        assert total <= b * float((x ** 2).sum()) * (1 + 1e-9)

    def test_sample_rate_mismatch_rejected(self):
        clip = AudioClip(np.ones(1024), 44100, clip_id="x")
        with pytest.raises(ValueError):
            scalogram(clip, SPEC)

    def test_empty_clip_rejected(self):
        clip = AudioClip(np.zeros(0), 22050, clip_id="e")
        with pytest.raises(ValueError):
            scalogram(clip, SPEC)


class TestOracle:
    def test_matches_direct_convolution(self):
        """Dense scalogram equals modulus of a direct time-domain
        convolution with the inverse-transformed kernel."""
        from scipy.fft import next_fast_len
        from scattersim.scalogram import _pad_amount

        rng = np.random.default_rng(2)
        x = rng.standard_normal(11025)
        clip = AudioClip(x, 22050, clip_id="r")
        scal = scalogram(clip, SPEC)
        pad = _pad_amount(SPEC)
        xp = np.pad(x, pad, mode="reflect")
        n_fft = next_fast_len(len(xp))
        spectrum = np.fft.fft(xp, n_fft)
        bank = _cached_bank(SPEC, n_fft)
        for bi in (10, 30, 47):
            direct = np.abs(np.fft.ifft(spectrum * bank[bi].samples))
            direct = direct[pad: pad + len(x)]
            np.testing.assert_allclose(scal.bands[bi].values, direct,
                                       rtol=1e-7, atol=1e-10)
