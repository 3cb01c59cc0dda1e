"""Rate-scale portraits of three modulation archetypes.

A joint wavelet decomposition of the scalogram yields, after pooling
over time and acoustic frequency, a small matrix indexed by temporal
modulation rate (Hz) and frequential scale (cycles/octave, signed).
This script renders that matrix for three synthetic sounds whose
identities live in different corners of it:

  * an amplitude-modulated tone (energy at its tremolo rate, scale ~0),
  * an impulse train (a ridge across scales at the repetition rate),
  * an exponential chirp (energy concentrated at one sign of the scale
    axis -- the signature separable features cannot see).
"""

import numpy as np

from scattersim import AnalysisConfig, AudioClip
from scattersim.scattering import rate_scale_slice, rate_scale_to_csv

SR = 16000
CFG = AnalysisConfig(sample_rate=SR, quality_factor=8, octave_count=5,
                     min_center_frequency=125.0, rate_max=32.0,
                     beta_max=2.0)


def am_tone(fm, carrier=440.0, duration=1.0):
    t = np.arange(int(duration * SR)) / SR
    x = (1 + 0.9 * np.sin(2 * np.pi * fm * t)) * np.sin(2 * np.pi * carrier * t)
    return AudioClip(x, SR, clip_id="am%g" % fm)


def impulse_train(rate, duration=1.0):
    x = np.zeros(int(duration * SR))
    x[:: int(SR / rate)] = 1.0
    return AudioClip(x, SR, clip_id="imp%g" % rate)


def chirp(f0=180.0, f1=2880.0, duration=1.0):
    t = np.arange(int(duration * SR)) / SR
    k = np.log(f1 / f0)
    phase = 2 * np.pi * f0 * (duration / k) * (np.exp(k * t / duration) - 1)
    return AudioClip(np.sin(phase) * np.hanning(len(t)), SR, clip_id="chirp")


def show(clip):
    sl = rate_scale_slice(clip, CFG)
    print("== %s ==" % clip.clip_id)
    header = "rate\\scale | " + " ".join("%7.2f" % b for b in sl.scales)
    print(header)
    print("-" * len(header))
    top = sl.values.max()
    for ai, alpha in enumerate(sl.rates):
        row = " ".join("%7.3f" % (v / top) for v in sl.values[ai])
        print("%10.1f | %s" % (alpha, row))
    ai, bi = np.unravel_index(np.argmax(sl.values), sl.values.shape)
    print("argmax: rate %.1f Hz, scale %+.2f c/o\n" % (sl.rates[ai],
                                                       sl.scales[bi]))
    return sl


if __name__ == "__main__":
    show(am_tone(6.0))
    show(impulse_train(8.0))
    sl = show(chirp())
    # The same matrix in CSV form, e.g. for plotting elsewhere.
    print(rate_scale_to_csv(sl).splitlines()[0])
