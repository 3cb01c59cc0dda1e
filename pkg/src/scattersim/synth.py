"""Deterministic synthetic audio fixtures: small corpora of AM tones,
chirps, and impulse trains with a planted cluster structure, for
end-to-end pipeline runs without real recordings."""

import os
from dataclasses import dataclass

import numpy as np

from .audio import AudioClip, write_wav
from .corpus import INSTRUMENTS, Corpus, CorpusEntry, parse_imt_name
from .perceptual import ClusterGraph

_PITCHES = ["C4", "D4", "E4", "F4", "G4", "A4", "B4",
            "C5", "D5", "E5", "F5", "G5", "A5", "B5"]


@dataclass(frozen=True)
class Prototype:
    """One planted cluster: a modulation recipe shared by its variants."""

    name: str
    carrier: float = 440.0          # Hz
    am_rate: float = 0.0            # Hz, 0 = no amplitude modulation
    chirp_slope: float = 0.0        # octaves per second, signed
    impulse_rate: float = 0.0       # Hz, 0 = sustained


DEFAULT_PROTOTYPES = (
    Prototype("am-slow", carrier=440.0, am_rate=4.0),
    Prototype("am-fast", carrier=440.0, am_rate=16.0),
    Prototype("chirp-up", carrier=220.0, chirp_slope=2.0),
    Prototype("impulsive", carrier=440.0, impulse_rate=8.0),
)


def render_prototype(proto, variant_rng, sample_rate=44100, duration=1.0):
    """One audio variant of a prototype, with mild randomized detuning."""
    n = int(round(sample_rate * duration))
    t = np.arange(n) / sample_rate
    carrier = proto.carrier * 2.0 ** variant_rng.uniform(-0.1, 0.1)
    phase0 = variant_rng.uniform(0.0, 2 * np.pi)
    if proto.chirp_slope:
        k = proto.chirp_slope
        phase = 2 * np.pi * carrier * (2.0 ** (k * t) - 1.0) \
            / (k * np.log(2.0))
    else:
        phase = 2 * np.pi * carrier * t
    x = np.sin(phase + phase0)
    if proto.am_rate:
        x *= 1.0 + 0.9 * np.cos(2 * np.pi * proto.am_rate * t
                                + variant_rng.uniform(0.0, 2 * np.pi))
    if proto.impulse_rate:
        period = 1.0 / proto.impulse_rate
        x *= np.exp(-(t % period) / (0.05 * period))
    fade = min(n // 20, 512)
    ramp = np.linspace(0.0, 1.0, fade)
    x[:fade] *= ramp
    x[-fade:] *= ramp[::-1]
    return x / max(np.abs(x).max(), 1e-12)


def make_synthetic_corpus(out_dir, prototypes=DEFAULT_PROTOTYPES,
                          per_cluster=10, seed=0, sample_rate=44100,
                          duration=1.0):
    """WAV files, a manifest, and the planted ground-truth cluster graph.

    Clip ids are valid IMT-style names (one instrument code per
    prototype, one pitch token per variant) so the corpus flows through
    the same manifest tooling as real data.  Deterministic given seed.
    """
    if len(prototypes) > len(INSTRUMENTS):
        raise ValueError("too many prototypes")
    if per_cluster > len(_PITCHES):
        raise ValueError("per_cluster above %d unsupported"
                         % len(_PITCHES))
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    clusters = []
    for k, proto in enumerate(prototypes):
        members = []
        for v in range(per_cluster):
            clip_id = "%s-ord-%s-mf" % (INSTRUMENTS[k], _PITCHES[v])
            rng = np.random.default_rng([seed, k, v])
            samples = render_prototype(proto, rng, sample_rate, duration)
            path = os.path.join(out_dir, clip_id + ".wav")
            write_wav(path, AudioClip(samples=samples,
                                      sample_rate=sample_rate,
                                      clip_id=clip_id))
            entries.append(CorpusEntry(clip_id, path,
                                       parse_imt_name(clip_id)))
            members.append(clip_id)
        clusters.append(members)
    corpus = Corpus(root=out_dir, entries=tuple(entries))
    graph = ClusterGraph.from_lists(clusters)
    corpus.save_manifest(os.path.join(out_dir, "manifest.jsonl"))
    graph.save(os.path.join(out_dir, "clusters.json"),
               provenance={"seed": seed,
                           "prototypes": [p.name for p in prototypes]})
    return corpus, graph
