"""Feature post-processing: the persistent feature store, median-based
logarithmic compression, and affine standardization.

A FeatureStore holds one feature row per clip, sorted by clip id, tagged
with the fingerprint of the configuration that produced it.  A Gaussianizer
is fitted on a training store only: per-path medians, then the per-path
mean and standard deviation of the log-compressed training values.  Test
data reuses those constants, so train/test leakage is structurally
impossible.

On-disk format ("SCF1" stores, "SCG1" gaussianizers): 4-byte magic, a
4-byte little-endian length, a UTF-8 JSON header, then row-major
little-endian float64 payload.
"""

import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureStore:
    """N x P feature matrix with clip-id row index and path column index."""

    fingerprint: str
    clip_ids: tuple
    paths: tuple            # one descriptor string per column
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if list(self.clip_ids) != sorted(self.clip_ids):
            raise ValueError("clip ids must be in lexicographic order")
        if len(set(self.clip_ids)) != len(self.clip_ids):
            raise ValueError("duplicate clip ids")
        if self.values.shape != (len(self.clip_ids), len(self.paths)):
            raise ValueError("value matrix shape %s does not match index"
                             % (self.values.shape,))

    @property
    def n_clips(self):
        return len(self.clip_ids)

    @property
    def n_paths(self):
        return len(self.paths)

    def row(self, clip_id):
        try:
            i = self.clip_ids.index(clip_id)
        except ValueError:
            raise KeyError("unknown clip id %r" % clip_id)
        return self.values[i]

    def subset(self, clip_ids):
        """Store restricted to the given clips (re-sorted)."""
        wanted = sorted(clip_ids)
        rows = np.stack([self.row(c) for c in wanted]) if wanted else \
            np.zeros((0, self.n_paths))
        return FeatureStore(self.fingerprint, tuple(wanted), self.paths, rows)

    def save(self, path):
        header = {"fingerprint": self.fingerprint,
                  "clip_ids": list(self.clip_ids),
                  "paths": list(self.paths),
                  "n": self.n_clips, "p": self.n_paths}
        write_envelope(path, b"SCF1", header, self.values)

    @classmethod
    def load(cls, path):
        header, payload = read_envelope(path, b"SCF1")
        values = payload.reshape(header["n"], header["p"])
        return cls(header["fingerprint"], tuple(header["clip_ids"]),
                   tuple(header["paths"]), values)


def build_store(rows, paths, fingerprint):
    """Assemble a store from {clip_id: vector} pairs."""
    items = sorted(rows.items())
    ids = tuple(k for k, _ in items)
    values = np.stack([np.asarray(v, dtype=np.float64) for _, v in items]) \
        if items else np.zeros((0, len(paths)))
    return FeatureStore(fingerprint, ids, tuple(paths), values)


# Per-path transform modes: nonnegative energy paths get the median-log
# compression; paths that were silent on all training data are zeroed;
# signed paths (the MFCC baselines) skip the log and are standardized
# directly, keeping one code path for every feature kind.
_MODE_ZERO = 0.0
_MODE_COMPRESS = 1.0
_MODE_LINEAR = 2.0


@dataclass(frozen=True)
class Gaussianizer:
    """Median-log compression followed by per-path standardization."""

    fingerprint: str
    epsilon: float
    medians: np.ndarray = field(repr=False)
    means: np.ndarray = field(repr=False)
    stds: np.ndarray = field(repr=False)
    modes: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.modes is None:
            object.__setattr__(self, "modes",
                               np.where(self.medians > 0, _MODE_COMPRESS,
                                        _MODE_ZERO))

    def save(self, path):
        header = {"fingerprint": self.fingerprint, "epsilon": self.epsilon,
                  "p": int(self.medians.shape[0])}
        payload = np.stack([self.medians, self.means, self.stds,
                            self.modes])
        write_envelope(path, b"SCG1", header, payload)

    @classmethod
    def load(cls, path):
        header, payload = read_envelope(path, b"SCG1")
        med, mean, std, modes = payload.reshape(4, header["p"])
        return cls(header["fingerprint"], header["epsilon"], med, mean,
                   std, modes)


def _transform(values, medians, epsilon, modes):
    out = np.zeros_like(values)
    comp = modes == _MODE_COMPRESS
    lin = modes == _MODE_LINEAR
    out[:, comp] = np.log1p(values[:, comp] / (epsilon * medians[comp]))
    out[:, lin] = values[:, lin]
    return out


def fit_gaussianizer(train, epsilon=1.0):
    """Per-path medians and post-log standardization stats from a
    training store."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if train.n_clips == 0:
        raise ValueError("empty training store")
    medians = np.median(train.values, axis=0)
    nonneg = (train.values >= 0).all(axis=0)
    modes = np.where(nonneg,
                     np.where(medians > 0, _MODE_COMPRESS, _MODE_ZERO),
                     _MODE_LINEAR)
    logged = _transform(train.values, medians, epsilon, modes)
    means = logged.mean(axis=0)
    stds = np.maximum(logged.std(axis=0), _STD_FLOOR)
    return Gaussianizer(train.fingerprint, epsilon, medians, means, stds,
                        modes)


def apply_gaussianizer(store, g):
    """Transformed copy of a store: log(1 + v/(eps*mu)) where the path is
    a nonnegative energy, identity where it is signed, then subtract the
    training mean and divide by the training standard deviation.

    Paths whose training median is zero are transformed to zero; a warning
    is emitted if such a path carries nonzero values here.
    """
    if store.n_paths != g.medians.shape[0]:
        raise ValueError("path count mismatch: store has %d, gaussianizer %d"
                         % (store.n_paths, g.medians.shape[0]))
    if store.fingerprint != g.fingerprint:
        raise ValueError("fingerprint mismatch: store %s vs gaussianizer %s"
                         % (store.fingerprint, g.fingerprint))
    logged = _transform(store.values, g.medians, g.epsilon, g.modes)
    dead = g.modes == _MODE_ZERO
    if dead.any() and np.any(store.values[:, dead] != 0):
        warnings.warn("zero-median paths carry nonzero values; zeroing them")
    live = ~dead
    out = np.zeros_like(logged)
    out[:, live] = (logged[:, live] - g.means[live]) / g.stds[live]
    return FeatureStore(store.fingerprint, store.clip_ids, store.paths, out)


def write_envelope(path, magic, header, array):
    """Binary artifact envelope: magic, length-prefixed JSON header,
    row-major little-endian float64 payload."""
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    data = np.ascontiguousarray(array, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(data.tobytes())


def read_envelope(path, magic):
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise ValueError("bad magic %r in %s (want %r)"
                             % (got, path, magic))
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n).decode("utf-8"))
        payload = np.frombuffer(fh.read(), dtype="<f8")
    return header, payload
