"""Run configuration: analysis parameters, LMNN parameters, fingerprinting.

One canonical config drives the whole pipeline.  Every on-disk artifact
(feature store, gaussianizer, metric, report) embeds the fingerprint of the
config it was produced under, so mismatched artifacts can be refused.
"""

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace

FEATURE_KINDS = ("jtfs", "separable", "mfcc", "mfcc-gram")


def _geometric_grid(lo, hi, ratio=2.0):
    out = []
    v = lo
    while v <= hi * (1.0 + 1e-9):
        out.append(v)
        v *= ratio
    return out


@dataclass(frozen=True)
class AnalysisConfig:
    """Parameters of the feature extraction front end."""

    sample_rate: int = 44100
    quality_factor: int = 12
    octave_count: int = 8
    min_center_frequency: float = 65.41  # C2; top of the default bank ~15.8 kHz
    time_constant: float = 1.0           # T, seconds
    frequential_width: float = 2.0       # F, octaves
    beta_min: float = 0.25               # cycles/octave, grid ratio 2
    beta_max: float = 4.0
    rate_max: float = 0.0                # Hz; 0 = no cap beyond lambda_max/Q
    feature_kind: str = "jtfs"
    epsilon: float = 1.0                 # median-log compression constant
    peak_normalize: bool = False

    def __post_init__(self):
        if self.quality_factor < 1:
            raise ValueError("quality_factor must be >= 1")
        if self.octave_count < 1:
            raise ValueError("octave_count must be >= 1")
        if self.time_constant <= 0:
            raise ValueError("time_constant must be positive")
        if self.frequential_width <= 0:
            raise ValueError("frequential_width must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.feature_kind not in FEATURE_KINDS:
            raise ValueError("feature_kind must be one of %s" % (FEATURE_KINDS,))

    @property
    def center_frequencies(self):
        n = self.quality_factor * self.octave_count
        return [self.min_center_frequency * 2.0 ** (i / self.quality_factor)
                for i in range(n)]

    @property
    def max_center_frequency(self):
        return self.center_frequencies[-1]

    def beta_grid_unsigned(self):
        """Nonnegative scale grid: 0 (low-pass slot) plus the geometric grid."""
        return [0.0] + _geometric_grid(self.beta_min, self.beta_max)

    def beta_grid_signed(self):
        pos = _geometric_grid(self.beta_min, self.beta_max)
        return [-b for b in reversed(pos)] + [0.0] + pos

    def rate_grid(self):
        """Temporal modulation rates, ratio 2, from 1/T up to lambda_max/Q."""
        lo = 1.0 / self.time_constant
        hi = self.max_center_frequency / self.quality_factor
        if self.rate_max > 0:
            hi = min(hi, self.rate_max)
        return _geometric_grid(lo, hi)


@dataclass(frozen=True)
class LmnnConfig:
    """Parameters of the metric-learning stage."""

    n_neighbors: int = 5                 # R
    max_iters: int = 200
    tolerance: float = 1e-5              # relative loss change
    initial_step: float = 1e-6
    negatives_cap: int = 500             # nearest negatives per anchor; exact below
    negatives_cap_threshold: int = 2000  # apply the cap only above this N
    seed: int = 0

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    lmnn: LmnnConfig = field(default_factory=LmnnConfig)
    seed: int = 0

    def canonical_text(self):
        """Canonical INI rendering: fixed section and key order."""
        buf = io.StringIO()
        buf.write("[analysis]\n")
        for f in fields(AnalysisConfig):
            buf.write("%s = %s\n" % (f.name, getattr(self.analysis, f.name)))
        buf.write("[lmnn]\n")
        for f in fields(LmnnConfig):
            buf.write("%s = %s\n" % (f.name, getattr(self.lmnn, f.name)))
        buf.write("[run]\nseed = %s\n" % self.seed)
        return buf.getvalue()

    def fingerprint(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.canonical_text())

    @classmethod
    def load(cls, path):
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        return cls.from_mapping(parser)

    @classmethod
    def from_mapping(cls, parser):
        def build(dc, section):
            kwargs = {}
            if section not in parser:
                return dc()
            sec = parser[section]
            for f in fields(dc):
                if f.name not in sec:
                    continue
                raw = sec[f.name]
                if f.type in ("int", int):
                    kwargs[f.name] = int(raw)
                elif f.type in ("float", float):
                    kwargs[f.name] = float(raw)
                elif f.type in ("bool", bool):
                    kwargs[f.name] = raw.strip().lower() in ("1", "true", "yes", "on")
                else:
                    kwargs[f.name] = raw
            return dc(**kwargs)

        seed = 0
        if "run" in parser and "seed" in parser["run"]:
            seed = int(parser["run"]["seed"])
        return cls(analysis=build(AnalysisConfig, "analysis"),
                   lmnn=build(LmnnConfig, "lmnn"),
                   seed=seed)

    def with_overrides(self, **analysis_overrides):
        return replace(self, analysis=replace(self.analysis, **analysis_overrides))
