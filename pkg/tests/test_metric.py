"""Tests for LMNN target neighbors, loss/gradient, and training."""

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from scattersim.config import LmnnConfig
from scattersim.features import build_store
from scattersim.metric import (MetricMatrix, NeighborIndex,
                               lmnn_loss_and_gradient, metric_distance,
                               target_neighbors, train_lmnn)
from scattersim.perceptual import ClusterGraph


def make_store(values, prefix="c"):
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    rows = {"%s%03d" % (prefix, i): v for i, v in enumerate(values)}
    paths = ["p%d" % j for j in range(values.shape[1])]
    return build_store(rows, paths, "fp")


def graph_for(store, labels):
    groups = {}
    for cid, lab in zip(store.clip_ids, labels):
        groups.setdefault(lab, []).append(cid)
    return ClusterGraph.from_lists(groups.values())


def brute_force_neighbors(store, r):
    d = cdist(store.values, store.values)
    out = []
    for i in range(len(store.clip_ids)):
        ranked = sorted(
            ((d[i, j], store.clip_ids[j])
             for j in range(len(store.clip_ids)) if j != i))
        out.append(tuple(cid for _, cid in ranked[:r]))
    return tuple(out)


class TestTargetNeighbors:
    def test_collinear(self):
        store = make_store([[0.0], [1.0], [3.0]])
        nbrs = target_neighbors(store, 1)
        assert nbrs.of("c000") == ("c001",)
        assert nbrs.of("c001") == ("c000",)
        assert nbrs.of("c002") == ("c001",)

    def test_asymmetry_witness(self):
        store = make_store([[0.0], [1.0], [1.9], [10.0]])
        nbrs = target_neighbors(store, 1)
        assert nbrs.of("c000") == ("c001",)
        assert "c000" not in nbrs.of("c001")

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        store = make_store(rng.normal(size=(200, 6)))
        nbrs = target_neighbors(store, 5)
        assert nbrs.neighbors == brute_force_neighbors(store, 5)

    def test_ties_broken_by_id(self):
        store = make_store([[0.0], [1.0], [-1.0], [5.0]])
        nbrs = target_neighbors(store, 2)
        assert nbrs.of("c000") == ("c001", "c002")

    def test_r_clamped(self):
        store = make_store([[0.0], [1.0], [2.0]])
        nbrs = target_neighbors(store, 10)
        assert all(len(row) == 2 for row in nbrs.neighbors)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            target_neighbors(make_store([[0.0]]), 1)

    def test_no_self_neighbors(self):
        with pytest.raises(ValueError):
            NeighborIndex(("a", "b"), (("a",), ("a",)), 1)


def count_triplets(store, graph, nbrs):
    label = dict(graph.labels())
    total = 0
    for cid, targets in zip(store.clip_ids, nbrs.neighbors):
        negs = sum(1 for other in store.clip_ids
                   if label[other] != label[cid])
        total += len(targets) * negs
    return total


class TestLossAndGradient:
    def setup_instance(self, n=20, p=4, clusters=2, seed=0):
        rng = np.random.default_rng(seed)
        values = rng.normal(size=(n, p))
        store = make_store(values)
        labels = [i % clusters for i in range(n)]
        graph = graph_for(store, labels)
        nbrs = target_neighbors(store, 3)
        return store, graph, nbrs

    def test_single_cluster_no_push(self):
        rng = np.random.default_rng(1)
        store = make_store(rng.normal(size=(12, 3)))
        graph = graph_for(store, [0] * 12)
        nbrs = target_neighbors(store, 3)
        lmap = rng.normal(size=(3, 3))
        loss, _ = lmnn_loss_and_gradient(lmap, store, graph, nbrs)
        pull = sum(
            np.linalg.norm(lmap @ (store.row(a) - store.row(b))) ** 2
            for a, row in zip(store.clip_ids, nbrs.neighbors) for b in row)
        assert loss == pytest.approx(0.5 * pull)

    def test_zero_map_counts_triplets(self):
        store, graph, nbrs = self.setup_instance()
        loss, _ = lmnn_loss_and_gradient(np.zeros((4, 4)), store, graph,
                                         nbrs)
        assert loss == pytest.approx(0.5 * count_triplets(store, graph,
                                                          nbrs))

    def test_triplet_count_brute_force(self):
        store, graph, nbrs = self.setup_instance(n=50, p=3, clusters=3,
                                                 seed=2)
        label = dict(graph.labels())
        expected = sum(
            1
            for cid, targets in zip(store.clip_ids, nbrs.neighbors)
            for _ in targets
            for other in store.clip_ids if label[other] != label[cid])
        loss, _ = lmnn_loss_and_gradient(np.zeros((3, 3)), store, graph,
                                         nbrs)
        assert loss == pytest.approx(0.5 * expected)

    def test_gradient_matches_finite_differences(self):
        store, graph, nbrs = self.setup_instance()
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
                fd[a, b] = (lmnn_loss_and_gradient(lp, store, graph,
                                                   nbrs)[0]
                            - lmnn_loss_and_gradient(lm, store, graph,
                                                     nbrs)[0]) / (2 * h)
        scale = max(np.abs(fd).max(), 1.0)
        assert np.abs(grad - fd).max() / scale < 1e-4

    def test_loss_nonnegative(self):
        store, graph, nbrs = self.setup_instance(seed=4)
        rng = np.random.default_rng(5)
        for _ in range(5):
            loss, _ = lmnn_loss_and_gradient(rng.normal(size=(4, 4)),
                                             store, graph, nbrs)
            assert loss >= 0.0

    def test_graph_mismatch_rejected(self):
        store, _, nbrs = self.setup_instance()
        other = ClusterGraph.from_lists([["zz1", "zz2"]])
        with pytest.raises(ValueError):
            lmnn_loss_and_gradient(np.eye(4), store, other, nbrs)

    def test_negatives_cap_keeps_nearest(self):
        store, graph, nbrs = self.setup_instance(n=30, seed=6)
        full, _ = lmnn_loss_and_gradient(np.eye(4), store, graph, nbrs)
        capped, _ = lmnn_loss_and_gradient(np.eye(4), store, graph, nbrs,
                                           negatives_cap=5)
        assert capped <= full + 1e-12


def planted_clusters(n_clusters, per_cluster, dim, spread=0.1, sep=8.0,
                     seed=0):
    rng = np.random.default_rng(seed)
    centers = sep * rng.normal(size=(n_clusters, dim))
    values, labels = [], []
    for k in range(n_clusters):
        values.append(centers[k]
                      + spread * rng.normal(size=(per_cluster, dim)))
        labels.extend([k] * per_cluster)
    store = make_store(np.concatenate(values))
    order = np.argsort(["c%03d" % i for i in range(len(labels))])
    return store, graph_for(store, [labels[i] for i in order])


def training_ap5(store, graph, lmap):
    z = store.values @ lmap.T
    d = cdist(z, z)
    np.fill_diagonal(d, np.inf)
    label = dict(graph.labels())
    hits = []
    for i, cid in enumerate(store.clip_ids):
        top = np.argsort(d[i], kind="stable")[:5]
        hits.append(np.mean([label[store.clip_ids[j]] == label[cid]
                             for j in top]))
    return float(np.mean(hits))


class TestTraining:
    def test_separated_gaussians_perfect_ap(self):
        store, graph = planted_clusters(2, 12, 10, seed=1)
        cfg = LmnnConfig(n_neighbors=5, max_iters=50)
        mm = train_lmnn(store, graph, cfg, fingerprint="fp")
        assert training_ap5(store, graph, mm.matrix) == 1.0
        assert (mm.provenance["final_loss"]
                <= mm.provenance["initial_loss"] + 1e-12)

    def test_margin_separated_fixed_point(self):
        store, graph = planted_clusters(2, 8, 4, spread=0.01, sep=50.0,
                                        seed=2)
        cfg = LmnnConfig(n_neighbors=3, max_iters=50)
        mm = train_lmnn(store, graph, cfg)
        assert mm.provenance["iterations"] <= 5
        assert training_ap5(store, graph, mm.matrix) == 1.0

    def test_noise_dims_downweighted(self):
        rng = np.random.default_rng(3)
        n_per, info, noise = 15, 2, 48
        centers = 6.0 * rng.normal(size=(4, info))
        blocks = []
        labels = []
        for k in range(4):
            sig = centers[k] + 0.2 * rng.normal(size=(n_per, info))
            nz = rng.normal(size=(n_per, noise))
            blocks.append(np.hstack([sig, nz]))
            labels.extend([k] * n_per)
        store = make_store(np.concatenate(blocks))
        order = np.argsort(["c%03d" % i for i in range(len(labels))])
        graph = graph_for(store, [labels[i] for i in order])
        cfg = LmnnConfig(n_neighbors=3, max_iters=120,
                         initial_step=1e-5)
        mm = train_lmnn(store, graph, cfg)
        col_norms = np.linalg.norm(mm.matrix, axis=0)
        assert (col_norms[info:].mean()
                < 0.5 * col_norms[:info].mean())

    def test_deterministic(self):
        store, graph = planted_clusters(3, 6, 5, spread=1.0, sep=3.0,
                                        seed=4)
        cfg = LmnnConfig(n_neighbors=3, max_iters=20)
        a = train_lmnn(store, graph, cfg)
        b = train_lmnn(store, graph, cfg)
        assert np.array_equal(a.matrix, b.matrix)


class TestMetricDistance:
    def test_identity_is_euclidean(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=(2, 7))
        assert metric_distance(np.eye(7), x, y) == pytest.approx(
            np.linalg.norm(x - y))

    def test_doubling(self):
        rng = np.random.default_rng(1)
        x, y = rng.normal(size=(2, 5))
        d1 = metric_distance(np.eye(5), x, y)
        d2 = metric_distance(2.0 * np.eye(5), x, y)
        assert d2 == pytest.approx(2.0 * d1)

    def test_matches_direct_oracle(self):
        rng = np.random.default_rng(2)
        lmap = rng.normal(size=(6, 6))
        x, y = rng.normal(size=(2, 6))
        oracle = float(np.sqrt(((lmap @ (x - y)) ** 2).sum()))
        assert abs(metric_distance(lmap, x, y) - oracle) < 1e-12

    def test_scalar_invariant_ranking(self):
        rng = np.random.default_rng(3)
        lmap = rng.normal(size=(4, 4))
        q = rng.normal(size=4)
        pts = rng.normal(size=(30, 4))
        d1 = [metric_distance(lmap, q, p) for p in pts]
        d2 = [metric_distance(3.7 * lmap, q, p) for p in pts]
        assert np.array_equal(np.argsort(d1, kind="stable"),
                              np.argsort(d2, kind="stable"))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            metric_distance(np.eye(3), np.zeros(3), np.zeros(4))


class TestMetricMatrixIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        mm = MetricMatrix(matrix=rng.normal(size=(9, 9)),
                          fingerprint="abc",
                          provenance={"r": 5, "iterations": 3})
        path = tmp_path / "metric.scl"
        mm.save(path)
        loaded = MetricMatrix.load(path)
        assert np.array_equal(loaded.matrix, mm.matrix)
        assert loaded.fingerprint == "abc"
        assert loaded.provenance["r"] == 5

    def test_non_finite_rejected(self):
        bad = np.eye(3)
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            MetricMatrix(matrix=bad, fingerprint="x")

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            MetricMatrix(matrix=np.zeros((2, 3)), fingerprint="x")
