"""End-to-end acceptance suite.

Each test checks one release criterion at its stated tolerance and prints
a single PASS/FAIL line, so the whole gate can be read off the captured
output (run with -s).  Oracles are implemented independently here rather
than imported from the unit suites.
"""

import functools
import random
import time

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from scattersim.audio import AudioClip
from scattersim.cli import feature_row
from scattersim.config import AnalysisConfig, LmnnConfig
from scattersim.features import (FeatureStore, apply_gaussianizer,
                                 build_store, fit_gaussianizer)
from scattersim.filterbank import (JointFilterbankSpec,
                                   TemporalFilterbankSpec,
                                   build_joint_filterbank,
                                   build_temporal_filterbank)
from scattersim.metric import (lmnn_loss_and_gradient, metric_distance,
                               target_neighbors, train_lmnn)
from scattersim.perceptual import (ClusterGraph, build_hypergraph,
                                   partition_hypergraph)
from scattersim.retrieval import evaluate, knn_query
from scattersim.scalogram import scalogram
from scattersim.scattering import (rate_scale_slice, scattering_vector,
                                   separable_scattering)
from scattersim.synth import Prototype, make_synthetic_corpus

# Compact analysis configuration shared by the signal-level and pipeline
# criteria: 5 octaves above 125 Hz at 16 kHz keeps single-clip extraction
# well under a second while exercising every stage.
SR = 16000


def fast_config(kind="jtfs", time_constant=1.0):
    return AnalysisConfig(sample_rate=SR, quality_factor=8,
                          octave_count=5, min_center_frequency=125.0,
                          time_constant=time_constant, beta_max=2.0,
                          rate_max=(32.0 if time_constant >= 0.5
                                    else 128.0),
                          feature_kind=kind)


def criterion(label):
    """Print one PASS/FAIL line per acceptance criterion."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print("FAIL  %s" % label)
                raise
            print("PASS  %s" % label)
        return wrapper
    return deco


def am_clip(fm, duration=1.0, carrier=440.0):
    t = np.arange(int(duration * SR)) / SR
    x = (1.0 + 0.9 * np.sin(2 * np.pi * fm * t)) \
        * np.sin(2 * np.pi * carrier * t)
    return AudioClip(x, SR, clip_id="am%g" % fm)


def chirp_clip(up=True, f0=180.0, f1=2880.0, duration=1.0):
    n = int(duration * SR)
    t = np.arange(n) / SR
    k = np.log(f1 / f0)
    phase = 2 * np.pi * f0 * (duration / k) * (np.exp(k * t / duration) - 1)
    x = np.sin(phase) * np.hanning(n)
    if not up:
        x = x[::-1].copy()
    return AudioClip(x, SR, clip_id="up" if up else "down")


@criterion("C1  filterbank admissibility and geometric grid (Q=12)")
def test_c01_filterbank_admissibility():
    start = time.perf_counter()
    spec = TemporalFilterbankSpec(12, 6, SR, 65.41)
    bank = build_temporal_filterbank(spec, n_fft=2 ** 15)
    for k in bank:
        assert abs(k.samples[0]) < 1e-10 * np.abs(k.samples).max()
    centers = np.array([k.center for k in bank])
    assert centers.shape == (72,)
    np.testing.assert_allclose(centers[1:] / centers[:-1], 2 ** (1 / 12),
                               rtol=1e-12)
    joint = build_joint_filterbank(
        JointFilterbankSpec(rates=(1.0, 4.0, 16.0),
                            scales=(-1.0, 0.0, 1.0)), 4096, 256)
    for tk, fk in joint:
        assert abs(tk.samples[0]) < 1e-10 * np.abs(tk.samples).max()
        if fk.center != 0.0:
            assert abs(fk.samples[0]) < 1e-10 * np.abs(fk.samples).max()
    assert time.perf_counter() - start < 1.0


@criterion("C2  scalogram localization at 440 Hz; zero in, zero out")
def test_c02_scalogram_localization():
    start = time.perf_counter()
    spec = TemporalFilterbankSpec(12, 5, SR, 125.0)
    t = np.arange(SR) / SR
    sine = AudioClip(np.sin(2 * np.pi * 440.0 * t), SR, clip_id="sine")
    scal = scalogram(sine, spec)
    energies = [b.values.sum() for b in scal.bands]
    best = scal.centers[int(np.argmax(energies))]
    assert abs(np.log2(best / 440.0)) <= 1.0 / 12.0
    zero = scalogram(AudioClip(np.zeros(SR), SR, clip_id="z"), spec)
    for band in zero.bands:
        assert np.all(band.values == 0.0)
    assert time.perf_counter() - start < 2.0


@criterion("C3  modulation-rate localization at 6 and 12 Hz")
def test_c03_modulation_localization():
    start = time.perf_counter()
    cfg = fast_config()
    for fm in (6.0, 12.0):
        sl = rate_scale_slice(am_clip(fm), cfg)
        m = sl.values.copy()
        m[:, list(sl.scales).index(0.0)] = 0.0  # ignore the low-pass slot
        ai, _ = np.unravel_index(np.argmax(m), m.shape)
        assert abs(np.log2(sl.rates[ai] / fm)) <= 0.5
    assert time.perf_counter() - start < 5.0


@criterion("C4  joint features separate chirp direction; separable do not")
def test_c04_chirp_direction():
    start = time.perf_counter()
    cfg = fast_config()
    up, down = chirp_clip(up=True), chirp_clip(up=False)
    ju = scattering_vector(up, cfg).values
    jd = scattering_vector(down, cfg).values
    su = separable_scattering(up, cfg).values
    sd = separable_scattering(down, cfg).values
    joint_rel = np.linalg.norm(ju - jd) / (
        0.5 * (np.linalg.norm(ju) + np.linalg.norm(jd)))
    sep_rel = np.linalg.norm(su - sd) / (
        0.5 * (np.linalg.norm(su) + np.linalg.norm(sd)))
    assert joint_rel > 0.5
    assert sep_rel < 0.1
    assert time.perf_counter() - start < 10.0


@criterion("C5  gaussianization standardizes training columns; bounded map")
def test_c05_gaussianization():
    rng = np.random.default_rng(11)
    ids = tuple("r%03d" % i for i in range(60))
    paths = tuple("p%02d" % j for j in range(12))
    train = FeatureStore("fp", ids, paths,
                         np.exp(rng.standard_normal((60, 12)) * 2.0))
    g = fit_gaussianizer(train)
    out = apply_gaussianizer(train, g)
    assert np.abs(out.values.mean(axis=0)).max() <= 1e-9
    assert np.abs(out.values.var(axis=0) - 1.0).max() <= 1e-6
    # The compression-plus-standardization map is Lipschitz with constant
    # max_j 1 / (epsilon * median_j * std_j); check the bound on 50 pairs.
    c = np.max(1.0 / (g.epsilon * g.medians * g.stds))
    for _ in range(50):
        x = np.exp(rng.standard_normal(12))[None, :]
        y = np.exp(rng.standard_normal(12))[None, :]
        gx = apply_gaussianizer(FeatureStore("fp", ("x",), paths, x),
                                g).values[0]
        gy = apply_gaussianizer(FeatureStore("fp", ("y",), paths, y),
                                g).values[0]
        assert np.linalg.norm(gx - gy) <= c * np.linalg.norm(x - y) + 1e-12


def _lmnn_instance(n=50, p=4, seed=7):
    rng = np.random.default_rng(seed)
    ids = tuple("c%03d" % i for i in range(n))
    paths = tuple("p%d" % j for j in range(p))
    values = rng.standard_normal((n, p))
    store = FeatureStore("fp", ids, paths, values)
    graph = ClusterGraph.from_lists(
        [ids[:n // 2], ids[n // 2:]])
    return store, graph, target_neighbors(store, 3)


def _count_triplets_brute(store, graph, nbrs):
    label = dict(graph.labels())
    total = 0
    for anchor, targets in zip(store.clip_ids, nbrs.neighbors):
        for _ in targets:
            for other in store.clip_ids:
                if label[other] != label[anchor]:
                    total += 1
    return total


@criterion("C6  LMNN gradient, monotone loss trace, triplet count")
def test_c06_lmnn():
    store, graph, nbrs = _lmnn_instance()
    rng = np.random.default_rng(3)
    lmap = np.eye(4) + 0.1 * rng.normal(size=(4, 4))
    _, grad = lmnn_loss_and_gradient(lmap, store, graph, nbrs)
    h = 1e-5
    fd = np.zeros_like(grad)
    for a in range(4):
        for b in range(4):
            lp, lm = lmap.copy(), lmap.copy()
            lp[a, b] += h
            lm[a, b] -= h
            fd[a, b] = (lmnn_loss_and_gradient(lp, store, graph, nbrs)[0]
                        - lmnn_loss_and_gradient(lm, store, graph,
                                                 nbrs)[0]) / (2 * h)
    assert np.abs(grad - fd).max() / max(np.abs(fd).max(), 1.0) < 1e-4
    # At L = 0 every (anchor, target, negative) triple sits exactly on the
    # unit margin, so the loss equals half the brute-force triplet count.
    loss0, _ = lmnn_loss_and_gradient(np.zeros((4, 4)), store, graph, nbrs)
    assert loss0 == pytest.approx(
        0.5 * _count_triplets_brute(store, graph, nbrs))
    mm = train_lmnn(store, graph, LmnnConfig(n_neighbors=3, max_iters=60))
    trace = mm.provenance["trace"]
    assert all(b <= a for a, b in zip(trace, trace[1:]))


@criterion("C7  retrieval matches the quadratic brute-force oracle exactly")
def test_c07_retrieval_oracle():
    rng = np.random.default_rng(17)
    n, p, r = 500, 16, 10
    ids = tuple("q%04d" % i for i in range(n))
    paths = tuple("f%02d" % j for j in range(p))
    store = FeatureStore("fp", ids, paths, rng.standard_normal((n, p)))
    lmap = rng.standard_normal((p, p)) * 0.3 + np.eye(p)
    labels = rng.integers(0, 6, size=n)
    graph = ClusterGraph.from_lists(
        [[ids[i] for i in np.where(labels == c)[0]] for c in range(6)])
    label = {cid: int(c) for cid, c in zip(ids, labels)}

    # Independent oracle: one explicit pass per query over all other rows.
    z = [lmap @ store.values[i] for i in range(n)]
    oracle_prec = []
    for i, qid in enumerate(ids):
        pairs = sorted((float(np.sqrt(((z[i] - z[j]) ** 2).sum())), ids[j])
                       for j in range(n) if j != i)
        top = pairs[:r]
        got = knn_query(store, lmap, qid, r)
        assert got.clip_ids == [cid for _, cid in top]
        oracle_prec.append(sum(1 for _, cid in top
                               if label[cid] == label[qid]) / r)
    report = evaluate(store, lmap, {"s": graph}, r)
    assert report.per_subject["s"] == float(np.mean(oracle_prec))
    assert report.ap == float(np.mean(oracle_prec))


BENCH_PROTOTYPES = (
    Prototype("am-slow", carrier=440.0, am_rate=4.0),
    Prototype("am-fast", carrier=440.0, am_rate=16.0),
    Prototype("chirp-up", carrier=180.0, chirp_slope=8.0),
    Prototype("chirp-down", carrier=2880.0, chirp_slope=-8.0),
)


@criterion("C8  planted benchmark: learned AP@5 >= 0.9 and >= identity")
def test_c08_end_to_end_benchmark(tmp_path):
    from scattersim.audio import read_wav

    start = time.perf_counter()
    corpus, graph = make_synthetic_corpus(
        tmp_path / "bench", BENCH_PROTOTYPES, per_cluster=10, seed=0,
        sample_rate=SR, duration=0.5)
    cfg = fast_config()
    rows, paths = {}, None
    for e in corpus.entries:
        clip = read_wav(e.path, target_rate=SR, clip_id=e.clip_id)
        paths, rows[e.clip_id] = feature_row(clip, cfg)
    store = build_store(rows, paths, "fp")
    g = fit_gaussianizer(store, epsilon=cfg.epsilon)
    gstore = apply_gaussianizer(store, g)
    mm = train_lmnn(gstore, graph, LmnnConfig(n_neighbors=5, max_iters=100))
    ap_learned = evaluate(gstore, mm.matrix, {"truth": graph}, 5).ap
    ap_identity = evaluate(gstore, np.eye(gstore.values.shape[1]),
                           {"truth": graph}, 5).ap
    elapsed = time.perf_counter() - start
    assert ap_learned >= 0.9
    assert ap_learned >= ap_identity
    assert elapsed < 60.0


def _planted_partition(n_clusters=4, size=10):
    verts = ["v%02d" % i for i in range(n_clusters * size)]
    truth = ClusterGraph.from_lists(
        [verts[i * size:(i + 1) * size] for i in range(n_clusters)])
    return truth, verts


def _noisy_copy(truth, verts, rng, swaps=2):
    labels = dict(truth.labels())
    for _ in range(swaps):
        a, b = rng.sample(verts, 2)
        labels[a], labels[b] = labels[b], labels[a]
    groups = {}
    for v, c in labels.items():
        groups.setdefault(c, set()).add(v)
    return ClusterGraph.from_lists(groups.values())


@criterion("C9  consensus recovers identical and noisy planted partitions")
def test_c09_consensus_recovery():
    truth, verts = _planted_partition(4, 10)
    h = build_hypergraph([truth] * 6)
    out, _ = partition_hypergraph(h, 4, seed=0)
    assert set(out.clusters) == set(truth.clusters)

    true_labels = truth.labels()
    scores = []
    for seed in range(20):
        rng = random.Random(seed)
        graphs = [_noisy_copy(truth, verts, rng, swaps=2)
                  for _ in range(12)]
        out, _ = partition_hypergraph(build_hypergraph(graphs), 4,
                                      seed=seed)
        got = out.labels()
        scores.append(adjusted_rand_score([true_labels[v] for v in verts],
                                          [got[v] for v in verts]))
    assert float(np.mean(scores)) >= 0.9
    assert sum(1 for s in scores if s >= 0.9) >= 16


def _ablation_clip(rng, carrier, am_rate=0.0, slope=0.0):
    """One clip whose cluster identity lives only in slow modulations.

    Every cluster shares the same masking amplitude modulation near
    35 Hz (random depth and detune), so coarse-T features see identical
    fast-rate statistics and only sub-25 Hz structure distinguishes the
    amplitude-modulated clusters.
    """
    n = SR  # 1 second
    t = np.arange(n) / SR
    c = carrier * 2.0 ** rng.uniform(-0.1, 0.1)
    if slope:
        phase = 2 * np.pi * c * (2.0 ** (slope * t) - 1.0) \
            / (slope * np.log(2.0))
    else:
        phase = 2 * np.pi * c * t
    x = np.sin(phase + rng.uniform(0, 2 * np.pi))
    if am_rate:
        x *= 1.0 + 0.9 * np.cos(2 * np.pi * am_rate * t
                                + rng.uniform(0, 2 * np.pi))
    x *= 1.0 + rng.uniform(0.4, 0.9) * np.cos(
        2 * np.pi * 35.0 * 2.0 ** rng.uniform(-0.35, 0.35) * t
        + rng.uniform(0, 2 * np.pi))
    fade = 512
    ramp = np.linspace(0.0, 1.0, fade)
    x[:fade] *= ramp
    x[-fade:] *= ramp[::-1]
    return x / np.abs(x).max()


ABLATION_RECIPES = (
    ("am2", dict(carrier=440.0, am_rate=2.0)),
    ("am5", dict(carrier=440.0, am_rate=5.0)),
    ("am12", dict(carrier=440.0, am_rate=12.5)),
    ("up", dict(carrier=180.0, slope=4.0)),
    ("down", dict(carrier=2880.0, slope=-4.0)),
)


def _ablation_ap(clips, graph, cfg):
    rows, paths = {}, None
    for clip in clips:
        paths, rows[clip.clip_id] = feature_row(clip, cfg)
    store = build_store(rows, paths, "fp")
    gstore = apply_gaussianizer(store, fit_gaussianizer(store))
    mm = train_lmnn(gstore, graph, LmnnConfig(n_neighbors=5, max_iters=100))
    return evaluate(gstore, mm.matrix, {"truth": graph}, 5).ap


@criterion("C10 ablation: jtfs/T=1s > separable > jtfs/T=25ms > MFCC")
def test_c10_ablation_ordering():
    clips, clusters = [], []
    for k, (name, kw) in enumerate(ABLATION_RECIPES):
        members = []
        for v in range(8):
            cid = "%s-%02d" % (name, v)
            rng = np.random.default_rng([7, k, v])
            clips.append(AudioClip(_ablation_clip(rng, **kw), SR,
                                   clip_id=cid))
            members.append(cid)
        clusters.append(members)
    graph = ClusterGraph.from_lists(clusters)

    ap = {"jtfs": _ablation_ap(clips, graph, fast_config("jtfs")),
          "separable": _ablation_ap(clips, graph,
                                    fast_config("separable")),
          "jtfs-25ms": _ablation_ap(clips, graph,
                                    fast_config("jtfs", 0.025)),
          "mfcc": _ablation_ap(clips, graph, fast_config("mfcc"))}
    print("      AP@5:", " ".join("%s=%.3f" % kv
                                  for kv in sorted(ap.items())))
    assert ap["jtfs"] >= ap["separable"] + 0.02
    assert ap["separable"] >= ap["jtfs-25ms"] + 0.02
    assert ap["jtfs-25ms"] >= ap["mfcc"] + 0.02
