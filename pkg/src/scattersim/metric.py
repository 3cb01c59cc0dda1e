"""Large-margin nearest-neighbor (LMNN) metric learning.

Learns a linear map L so that each clip's target neighbors (its nearest
Euclidean neighbors in the standardized feature space) are pulled close
while clips from other clusters are pushed outside a unit margin:

    E(L) = 1/2 E_pull(L) + 1/2 E_push(L)
    E_pull = sum over target pairs of ||L(x - y)||^2
    E_push = sum over triplets of max(0, 1 + ||L(x-y)||^2 - ||L(x-z)||^2)

with y a target neighbor of x and z a clip outside x's cluster.  Target
neighbors are computed once from Euclidean distances and frozen.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.spatial.distance import cdist

from .features import read_envelope, write_envelope

METRIC_MAGIC = b"SCL1"


@dataclass(frozen=True)
class NeighborIndex:
    """Frozen per-clip target-neighbor lists (Euclidean kNN)."""

    clip_ids: tuple
    neighbors: tuple            # tuple of tuples of clip ids, per clip
    r: int

    def __post_init__(self):
        if len(self.clip_ids) != len(self.neighbors):
            raise ValueError("neighbor list count mismatch")
        for cid, nbrs in zip(self.clip_ids, self.neighbors):
            if cid in nbrs:
                raise ValueError("self-neighbor for %r" % cid)

    def of(self, clip_id):
        return self.neighbors[self.clip_ids.index(clip_id)]


def target_neighbors(store, r):
    """Exact Euclidean R-nearest neighbors with ties broken by clip id.

    Each clip gets min(r, N-1) neighbors, ordered by ascending distance
    and, within equal distances, ascending clip id.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    n = len(store.clip_ids)
    if n < 2:
        raise ValueError("need at least two clips")
    d = cdist(store.values, store.values)
    neighbors = []
    for i in range(n):
        order = sorted((j for j in range(n) if j != i),
                       key=lambda j: (d[i, j], store.clip_ids[j]))
        neighbors.append(tuple(store.clip_ids[j]
                               for j in order[:min(r, n - 1)]))
    return NeighborIndex(clip_ids=tuple(store.clip_ids),
                         neighbors=tuple(neighbors), r=r)


def _labels_for(store, graph):
    label_of = dict(graph.labels())
    missing = [c for c in store.clip_ids if c not in label_of]
    if missing:
        raise ValueError("clips missing from cluster graph: %s"
                         % ", ".join(missing[:5]))
    return np.array([label_of[c] for c in store.clip_ids])


def _neighbor_matrix(store, nbrs):
    if tuple(store.clip_ids) != nbrs.clip_ids:
        raise ValueError("neighbor index built from a different store")
    pos = {c: i for i, c in enumerate(store.clip_ids)}
    return [[pos[c] for c in row] for row in nbrs.neighbors]


def lmnn_loss_and_gradient(lmap, store, graph, nbrs, negatives_cap=None,
                           rng=None):
    """LMNN loss and its gradient with respect to L.

    Both the pull term and the active (margin-violating) push triplets
    reduce to a weighted sum of outer products of row differences, so the
    gradient is assembled as L @ (X^T Lap X) with Lap a graph Laplacian
    over the weighted clip pairs.

    With negatives_cap set, only the cap nearest negatives per anchor
    (under the current L) enter the push term.
    """
    x = store.values
    n, p = x.shape
    if lmap.shape != (p, p):
        raise ValueError("L must be %dx%d" % (p, p))
    labels = _labels_for(store, graph)
    nbr_idx = _neighbor_matrix(store, nbrs)
    z = x @ lmap.T

    rows, cols, vals = [], [], []

    def add_pair(i, j, w):
        rows.append(i)
        cols.append(j)
        vals.append(w)

    e_pull = 0.0
    e_push = 0.0
    for i in range(n):
        targets = nbr_idx[i]
        if not targets:
            continue
        d2_t = ((z[targets] - z[i]) ** 2).sum(axis=1)
        e_pull += float(d2_t.sum())
        for j in targets:
            add_pair(i, j, 1.0)
        neg = np.flatnonzero(labels != labels[i])
        if neg.size == 0:
            continue
        d2_n = ((z[neg] - z[i]) ** 2).sum(axis=1)
        if negatives_cap is not None and neg.size > negatives_cap:
            keep = np.argsort(d2_n, kind="stable")[:negatives_cap]
            neg, d2_n = neg[keep], d2_n[keep]
        margins = 1.0 + d2_t[:, None] - d2_n[None, :]
        active = margins > 0.0
        if not active.any():
            continue
        e_push += float(margins[active].sum())
        per_target = active.sum(axis=1)
        per_neg = active.sum(axis=0)
        for j, w in zip(targets, per_target):
            if w:
                add_pair(i, j, float(w))
        for zi, w in zip(neg, per_neg):
            if w:
                add_pair(i, int(zi), -float(w))

    loss = 0.5 * e_pull + 0.5 * e_push
    if not rows:
        return loss, np.zeros((p, p))
    r = np.array(rows)
    c = np.array(cols)
    w = np.array(vals)
    lap = coo_matrix(
        (np.concatenate([w, w, -w, -w]),
         (np.concatenate([r, c, r, c]), np.concatenate([r, c, c, r]))),
        shape=(n, n)).tocsr()
    quad = x.T @ (lap @ x)
    return loss, lmap @ quad


@dataclass(frozen=True)
class MetricMatrix:
    """Learned linear map with training provenance."""

    matrix: np.ndarray
    fingerprint: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("L must be square")
        if not np.isfinite(m).all():
            raise ValueError("L has non-finite entries")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def save(self, path):
        header = {"dim": self.dim, "fingerprint": self.fingerprint,
                  "provenance": self.provenance}
        write_envelope(path, METRIC_MAGIC, header, self.matrix)

    @classmethod
    def load(cls, path):
        header, payload = read_envelope(path, METRIC_MAGIC)
        dim = header["dim"]
        return cls(matrix=payload.reshape(dim, dim),
                   fingerprint=header["fingerprint"],
                   provenance=header.get("provenance", {}))


def train_lmnn(store, graph, config, fingerprint=""):
    """Full-batch gradient descent on the LMNN loss from L = identity.

    Each iteration takes the steepest-descent step, halving the step size
    until the loss decreases; the loss trace is therefore non-increasing.
    Stops when the relative loss change falls below the tolerance or the
    iteration budget runs out.
    """
    n, p = store.values.shape
    nbrs = target_neighbors(store, config.n_neighbors)
    cap = (config.negatives_cap
           if n > config.negatives_cap_threshold else None)
    rng = np.random.default_rng(config.seed)

    lmap = np.eye(p)
    step = config.initial_step
    loss, grad = lmnn_loss_and_gradient(lmap, store, graph, nbrs,
                                        negatives_cap=cap, rng=rng)
    trace = [loss]
    iterations = 0
    for _ in range(config.max_iters):
        if not np.isfinite(loss):
            raise FloatingPointError("LMNN loss diverged (non-finite)")
        gnorm = np.abs(grad).max()
        if gnorm == 0.0:
            break
        new_loss = None
        while step * gnorm > 1e-15:
            candidate = lmap - step * grad
            cand_loss, cand_grad = lmnn_loss_and_gradient(
                candidate, store, graph, nbrs, negatives_cap=cap, rng=rng)
            if np.isfinite(cand_loss) and cand_loss <= loss:
                new_loss = cand_loss
                break
            step *= 0.5
        if new_loss is None:
            break
        lmap, grad = candidate, cand_grad
        drop = loss - new_loss
        loss = new_loss
        trace.append(loss)
        iterations += 1
        step *= 2.0
        if drop < config.tolerance * max(1.0, abs(loss)):
            break
    provenance = {"r": config.n_neighbors, "iterations": iterations,
                  "final_loss": loss, "initial_loss": trace[0],
                  "trace": trace, "seed": config.seed}
    return MetricMatrix(matrix=lmap, fingerprint=fingerprint,
                        provenance=provenance)


def metric_distance(lmap, x, y):
    """||L(x - y)||, the learned distance between two feature rows."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or lmap.shape[1] != x.shape[0]:
        raise ValueError("dimension mismatch")
    return float(np.linalg.norm(lmap @ (x - y)))
