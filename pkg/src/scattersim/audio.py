"""Audio clip container and WAV ingest with resampling."""

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly


@dataclass(frozen=True)
class AudioClip:
    """Mono PCM samples at a known sample rate."""

    samples: np.ndarray = field(repr=False)
    sample_rate: int
    clip_id: str = ""
    imt: object = None

    def __post_init__(self):
        object.__setattr__(self, "samples",
                           np.asarray(self.samples, dtype=np.float64))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return len(self) / self.sample_rate

    def peak_normalized(self):
        peak = np.abs(self.samples).max()
        if peak == 0:
            return self
        return AudioClip(self.samples / peak, self.sample_rate,
                         self.clip_id, self.imt)


_PCM_SCALE = {np.dtype(np.int16): 2.0 ** 15, np.dtype(np.int32): 2.0 ** 31,
              np.dtype(np.uint8): 2.0 ** 7}


def read_wav(path, target_rate=None, clip_id=""):
    """Load a 16/24/32-bit PCM or float WAV as a mono float clip.

    Stereo files keep the first channel only.  When target_rate differs
    from the file rate, the clip is resampled with a polyphase
    windowed-sinc filter.
    """
    rate, data = wavfile.read(path)
    if data.ndim > 1:
        data = data[:, 0]
    if data.dtype in _PCM_SCALE:
        x = data.astype(np.float64) / _PCM_SCALE[data.dtype]
        if data.dtype == np.dtype(np.uint8):
            x -= 1.0
    else:
        x = data.astype(np.float64)
    if target_rate is not None and target_rate != rate:
        from math import gcd
        g = gcd(int(target_rate), int(rate))
        x = resample_poly(x, int(target_rate) // g, int(rate) // g)
        rate = int(target_rate)
    return AudioClip(x, int(rate), clip_id=clip_id)


def write_wav(path, clip):
    """Write a clip as 16-bit PCM."""
    x = np.clip(clip.samples, -1.0, 1.0)
    wavfile.write(path, clip.sample_rate, (x * 32767.0).astype(np.int16))
