"""Corpus ingest: IMT file-name grammar, the corpus manifest, cluster
expansion from stimulus level to clip level, and stratified splits.

File names follow the instrument-mute-technique convention, e.g.
"TpC+S-ord-C4-mf" (trumpet in C, straight mute, ordinary technique, C4,
mezzo forte) or "Vn-pont-C4-mf-4c" (violin, sul ponticello, 4th string).
The parser is strict about instrument and dynamics codes and permissive
about technique tokens.
"""

import json
import os
import random
import re
import warnings
from dataclasses import dataclass

from .perceptual import ClusterGraph

INSTRUMENTS = ("Vn", "Va", "Vc", "Cb", "Hp", "Gtr", "Acc", "Fl", "BbCl",
               "ASax", "Ob", "Bn", "TpC", "Hn", "TTbn", "BBTb")
MUTES = ("S", "SP", "C", "H", "W")       # straight, sordina piombo, cup,
                                         # harmon, wah
DYNAMICS = ("pp", "p", "mf", "f", "ff")

_PITCH_RE = re.compile(r"^[A-G][#b]?[0-8]$")
_STRING_RE = re.compile(r"^(\d+)c?$")

# The 78 stimuli of the free-sorting study.
CANONICAL_STIMULI = (
    "ASax-key-cl-C4-p", "ASax-ord-C4-mf", "ASax-ord-hi-reg-C6-mf",
    "ASax-slap-C4-mf", "ASax-slap-unp-C4-p",
    "BBTb-explo-slap-C#1-mf", "BBTb-pdl-tone-F1-mf", "BBTb-slap-F1-mf",
    "BBTb-slap-unp-mf-1",
    "BbCl-key-cl-C4-pp", "BbCl-ord-hi-reg-A6-ff",
    "Bn-key-cl-C3-mf", "Bn-ord-C4-mf",
    "Cb-pizz-bartok-C4-ff-1c", "Cb-pizz-lv-C4-mf-1c",
    "Cb-pizz-sec-C4-mf-1c", "Cb-pont-C4-mf-1c",
    "Fl-key-cl-C4-f", "Fl-ord-C4-mf", "Fl-tng-ram-C4-mf",
    "Gtr-ord-C4-mf-2c", "Gtr-ord-hi-reg-E5-mf-3c", "Gtr-pizz-C4-mf-2c",
    "Gtr-pizz-bartok-C4-ff-2c",
    "Hn-ord-C4-mf", "Hn-slap-C4-mf",
    "Hp-harm-fngr-C4-f", "Hp-ord-C4-m4", "Hp-pizz-bartok-C4-mf",
    "Hp-xyl-C4-p",
    "Ob-blow-no-reed-C4", "Ob-key-cl-C4-pp", "Ob-ord-C4-mf",
    "TTbn+C-ord-C4-mf", "TTbn+H-ord-C4-mf", "TTbn+S-ord-C4-mf",
    "TTbn+W-ord-closed-C4-mf", "TTbn+W-ord-open-C4-mf", "TTbn-ord-C4-mf",
    "TpC+C-ord-C4-mf", "TpC+H-ord-C4-mf", "TpC+S-ord-C4-mf",
    "TpC+W-ord-closed-C4-mf", "TpC+W-ord-open-C4-mf", "TpC-ord-C4-mf",
    "TpC-pdl-tone-F3-mf", "TpC-slap-C4-p",
    "Va+S-ord-C3-mf-3c", "Va+SP-ord-D4-mf-2c", "Va-art-harm-C5-mf-4c",
    "Va-legno-batt-C4-mf-3c", "Va-ord-C4-mf-3c",
    "Va-pizz-bartok-C4-ff-3c", "Va-pizz-lv-C4-mf-3c",
    "Va-pizz-sec-C4-mf-3c", "Va-pont-C4-mf-3c",
    "Vc+S-ord-C4-mf-1c", "Vc+SP-ord-C4-mf-1c", "Vc-art-harm-C4-mf",
    "Vc-legno-batt-C4-mf-1c", "Vc-legno-tratto-C4-mf-1c",
    "Vc-nonvib-C4-mf-1c", "Vc-ord-C4-mf-1c", "Vc-pizz-bartok-C4-ff-1c",
    "Vc-pizz-lv-C4-mf-1c", "Vc-pizz-sec-C4-mf-1c", "Vc-pont-C4-mf-2c",
    "Vc-tasto-C4-mf-1c",
    "Vn+S-ord-C4-mf-4c", "Vn+SP-ord-C4-mf-4c", "Vn-art-harm-G5-mf-4c",
    "Vn-legno-batt-C4-mf-4c", "Vn-nonvib-C4-mf-4c", "Vn-ord-C4-mf-4c",
    "Vn-pizz-bartok-C4-ff-4c", "Vn-pizz-lv-C4-mf-4c",
    "Vn-pizz-sec-C4-mf-4c", "Vn-pont-C4-mf-4c",
)


@dataclass(frozen=True)
class IMT:
    """Parsed instrument-mute-technique descriptor."""

    instrument: str
    mute: str = ""              # empty = no mute
    technique: str = ""         # hyphen-joined technique tokens
    pitch: str = ""             # scientific notation, may be empty
    dynamics: str = ""          # one of DYNAMICS, may be empty
    extra: str = ""             # stray tokens after pitch/dynamics
    string_token: str = ""      # literal string-number token ("4c", "1")

    def __post_init__(self):
        if self.instrument not in INSTRUMENTS:
            raise ValueError("unknown instrument %r" % self.instrument)
        if self.mute and self.mute not in MUTES:
            raise ValueError("unknown mute %r" % self.mute)
        if self.dynamics and self.dynamics not in DYNAMICS:
            raise ValueError("unknown dynamics %r" % self.dynamics)

    @property
    def string_number(self):
        m = _STRING_RE.match(self.string_token)
        return int(m.group(1)) if m else None

    @property
    def imt_key(self):
        """Identity used for cluster expansion: pitch, dynamics, and
        string are ignored."""
        return (self.instrument, self.mute, self.technique)

    def to_dict(self):
        return {"instrument": self.instrument, "mute": self.mute,
                "technique": self.technique, "pitch": self.pitch,
                "dynamics": self.dynamics, "extra": self.extra,
                "string": self.string_token}

    @classmethod
    def from_dict(cls, d):
        return cls(instrument=d["instrument"], mute=d.get("mute", ""),
                   technique=d.get("technique", ""), pitch=d.get("pitch", ""),
                   dynamics=d.get("dynamics", ""), extra=d.get("extra", ""),
                   string_token=d.get("string", ""))


def parse_imt_name(name):
    """Structured IMT from a hyphen/plus-delimited stimulus name.

    The first token carries instrument and optional "+mute"; among the
    remaining tokens, a scientific-pitch token becomes the pitch, a
    dynamics code becomes the dynamics, a trailing digit token the string
    number.  Unrecognized tokens before the pitch/dynamics are technique;
    later strays are kept separately so rendering reproduces the name.
    """
    base = os.path.splitext(os.path.basename(str(name)))[0]
    tokens = base.split("-")
    head = tokens[0]
    if "+" in head:
        instrument, mute = head.split("+", 1)
    else:
        instrument, mute = head, ""
    pitch = dynamics = string_token = ""
    technique, extra = [], []
    rest = tokens[1:]
    for i, tok in enumerate(rest):
        if not pitch and _PITCH_RE.match(tok):
            pitch = tok
        elif not dynamics and tok in DYNAMICS:
            dynamics = tok
        elif i == len(rest) - 1 and not string_token and _STRING_RE.match(tok):
            string_token = tok
        elif pitch or dynamics:
            extra.append(tok)
        else:
            technique.append(tok)
    return IMT(instrument=instrument, mute=mute,
               technique="-".join(technique), pitch=pitch,
               dynamics=dynamics, extra="-".join(extra),
               string_token=string_token)


def render_imt_name(imt):
    """Inverse of parse_imt_name for names in canonical token order."""
    head = imt.instrument + ("+" + imt.mute if imt.mute else "")
    parts = [head]
    if imt.technique:
        parts.append(imt.technique)
    if imt.pitch:
        parts.append(imt.pitch)
    if imt.dynamics:
        parts.append(imt.dynamics)
    if imt.extra:
        parts.append(imt.extra)
    if imt.string_token:
        parts.append(imt.string_token)
    return "-".join(parts)


@dataclass(frozen=True)
class CorpusEntry:
    clip_id: str
    path: str
    imt: IMT


@dataclass(frozen=True)
class Corpus:
    root: str
    entries: tuple

    def __post_init__(self):
        ids = [e.clip_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate clip ids in corpus")

    @property
    def clip_ids(self):
        return [e.clip_id for e in self.entries]

    def entry(self, clip_id):
        for e in self.entries:
            if e.clip_id == clip_id:
                return e
        raise KeyError("unknown clip id %r" % clip_id)

    def save_manifest(self, path):
        with open(path, "w") as fh:
            for e in sorted(self.entries, key=lambda e: e.clip_id):
                fh.write(json.dumps({"id": e.clip_id, "path": e.path,
                                     "imt": e.imt.to_dict()},
                                    sort_keys=True) + "\n")

    @classmethod
    def load_manifest(cls, path, root=""):
        entries = []
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                entries.append(CorpusEntry(obj["id"], obj["path"],
                                           IMT.from_dict(obj["imt"])))
        return cls(root=root or os.path.dirname(os.path.abspath(path)),
                   entries=tuple(entries))


def scan_corpus(root):
    """Corpus from a directory tree of WAV files named in IMT style."""
    entries = []
    for dirpath, _, files in sorted(os.walk(root)):
        for fname in sorted(files):
            if not fname.lower().endswith(".wav"):
                continue
            clip_id = os.path.splitext(fname)[0]
            imt = parse_imt_name(fname)
            entries.append(CorpusEntry(clip_id,
                                       os.path.join(dirpath, fname), imt))
    return Corpus(root=root, entries=tuple(entries))


def expand_clusters(stimulus_graph, corpus):
    """Clip-level cluster graph: every clip whose (instrument, mute,
    technique) matches a stimulus vertex inherits that vertex's cluster.

    Clips matching none of the stimulus IMTs are excluded.  A stimulus
    vertex with zero matching clips is a hard error.
    """
    by_key = {}
    for e in corpus.entries:
        by_key.setdefault(e.imt.imt_key, []).append(e.clip_id)
    clusters = []
    missing = []
    for cluster in stimulus_graph.clusters:
        clips = []
        for stim in sorted(cluster):
            key = parse_imt_name(stim).imt_key
            got = by_key.get(key, [])
            if not got:
                missing.append(stim)
            clips.extend(got)
        clusters.append(clips)
    if missing:
        raise ValueError("stimuli with no matching clips: %s"
                         % ", ".join(sorted(missing)))
    return ClusterGraph.from_lists(clusters)


def split_corpus(graph, fraction, seed=0):
    """Stratified train/test split of a clip-level cluster graph.

    Each cluster contributes round(fraction * size) clips to the test
    side, at least one clip staying in train; singleton clusters go
    entirely to train with a warning.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    rng = random.Random(seed)
    train, test = [], []
    for cluster in sorted(graph.clusters, key=lambda c: sorted(c)[0]):
        members = sorted(cluster)
        if len(members) == 1:
            warnings.warn("singleton cluster %r goes to train" % members[0])
            train.append(members)
            continue
        rng.shuffle(members)
        n_test = min(int(round(fraction * len(members))), len(members) - 1)
        test_part = sorted(members[:n_test])
        train_part = sorted(members[n_test:])
        if test_part:
            test.append(test_part)
        train.append(train_part)
    return ClusterGraph.from_lists(train), ClusterGraph.from_lists(test)
