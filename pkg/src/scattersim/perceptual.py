"""Free-sorting annotations, cluster graphs, and hypergraph consensus.

Each subject's annotation (a color per stimulus) becomes a cluster graph;
the per-subject clusters, pooled as hyperedges over the shared stimulus
set, form a hypergraph whose balanced partition into C0 clusters is the
consensus graph.

The partitioner greedily seeds clusters from the largest hyperedges, then
refines with single-vertex moves (Fiduccia-Mattheyses style) against the
objective

    J = sum_e (parts(e) - 1) + 0.5 * sum_c (n_c - N/C0)^2 / N

(connectivity-minus-one hyperedge cut plus a quadratic imbalance penalty).
Several random restarts are taken and the best local minimum kept.
"""

import json
import random
from collections import Counter
from dataclasses import dataclass, field

BALANCE_WEIGHT = 0.5
DEFAULT_RESTARTS = 16


@dataclass(frozen=True)
class Annotation:
    """One subject's free-sorting response: a color token per stimulus."""

    subject: str
    assignments: dict  # stimulus id -> color token

    def to_json(self):
        return json.dumps({"subject": self.subject,
                           "assignments": self.assignments},
                          sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(subject=str(obj["subject"]),
                   assignments={str(k): str(v)
                                for k, v in obj["assignments"].items()})


@dataclass(frozen=True)
class ClusterGraph:
    """Partition of a vertex set into disjoint nonempty clusters."""

    clusters: tuple  # tuple of frozensets

    def __post_init__(self):
        seen = set()
        for c in self.clusters:
            if not c:
                raise ValueError("empty cluster")
            if seen & c:
                raise ValueError("overlapping clusters")
            seen |= c

    @classmethod
    def from_lists(cls, lists):
        return cls(tuple(frozenset(c) for c in lists))

    @property
    def vertices(self):
        out = set()
        for c in self.clusters:
            out |= c
        return out

    @property
    def n_clusters(self):
        return len(self.clusters)

    def cluster_of(self, vertex):
        for c in self.clusters:
            if vertex in c:
                return c
        raise KeyError("vertex %r not in graph" % vertex)

    def labels(self):
        """Map vertex -> cluster index (clusters in sorted order for
        determinism)."""
        ordered = sorted(self.clusters, key=lambda c: sorted(c)[0])
        return {v: i for i, c in enumerate(ordered) for v in c}

    def to_json(self):
        return json.dumps(
            {"clusters": [sorted(c) for c in
                          sorted(self.clusters, key=lambda c: sorted(c)[0])]},
            indent=1)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls.from_lists(obj["clusters"])

    def save(self, path, provenance=None):
        obj = {"clusters": [sorted(c) for c in
                            sorted(self.clusters, key=lambda c: sorted(c)[0])]}
        if provenance:
            obj["provenance"] = provenance
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class Hypergraph:
    """Multiset of hyperedges (subject-tagged vertex subsets)."""

    vertices: frozenset
    edges: tuple  # tuple of (subject, frozenset)

    def __post_init__(self):
        for subject, e in self.edges:
            if not e:
                raise ValueError("empty hyperedge from subject %r" % subject)
            if not e <= self.vertices:
                raise ValueError("hyperedge from %r leaves the vertex set"
                                 % subject)


def annotation_to_graph(a, stimuli=None):
    """Color classes of a complete annotation, as a cluster graph."""
    if stimuli is not None:
        missing = set(stimuli) - set(a.assignments)
        extra = set(a.assignments) - set(stimuli)
        if missing or extra:
            raise ValueError(
                "annotation from %r does not cover the stimulus set "
                "(missing %s, extra %s)"
                % (a.subject, sorted(missing), sorted(extra)))
    groups = {}
    for stim, color in a.assignments.items():
        groups.setdefault(color, set()).add(stim)
    return ClusterGraph.from_lists(groups.values())


def build_hypergraph(graphs, subjects=None):
    """Pool per-subject clusters into one hyperedge multiset."""
    if not graphs:
        raise ValueError("no graphs")
    vertices = graphs[0].vertices
    for g in graphs[1:]:
        if g.vertices != vertices:
            raise ValueError("graphs do not share a vertex set")
    if subjects is None:
        subjects = ["s%02d" % i for i in range(len(graphs))]
    edges = [(s, c) for s, g in zip(subjects, graphs) for c in g.clusters]
    return Hypergraph(frozenset(vertices), tuple(edges))


def _objective(labels, edges, n_clusters, n_vertices):
    cut = 0
    for _, e in edges:
        cut += len({labels[v] for v in e}) - 1
    sizes = Counter(labels.values())
    target = n_vertices / n_clusters
    imbalance = sum((sizes.get(c, 0) - target) ** 2
                    for c in range(n_clusters)) / n_vertices
    return cut + BALANCE_WEIGHT * imbalance


def _greedy_seed(vertices, edges, c0):
    """Initial labels: largest hyperedges claim fresh clusters, spill
    into the emptiest."""
    n = len(vertices)
    target = n / c0
    labels = {}
    order = sorted(range(len(edges)), key=lambda i: (-len(edges[i][1]), i))
    sizes = [0] * c0
    next_cluster = 0
    for i in order:
        _, e = edges[i]
        free = [v for v in sorted(e) if v not in labels]
        if not free:
            continue
        if next_cluster < c0:
            c = next_cluster
            next_cluster += 1
        else:
            c = min(range(c0), key=lambda k: sizes[k])
        for v in free:
            if sizes[c] >= target + 1 and next_cluster >= c0:
                c = min(range(c0), key=lambda k: sizes[k])
            labels[v] = c
            sizes[c] += 1
    for v in sorted(vertices):
        if v not in labels:
            c = min(range(c0), key=lambda k: sizes[k])
            labels[v] = c
            sizes[c] += 1
    while next_cluster < c0:
        # Guarantee every cluster is seeded: steal from the largest.
        donor = max(range(c0), key=lambda k: sizes[k])
        v = sorted(v for v in labels if labels[v] == donor)[0]
        labels[v] = next_cluster
        sizes[donor] -= 1
        sizes[next_cluster] += 1
        next_cluster += 1
    return labels


def _subject_seed(vertices, edges, c0, rng):
    """Initial labels from one subject's own partition, adjusted to
    exactly c0 clusters by splitting the largest / merging the smallest."""
    subjects = sorted({s for s, _ in edges})
    subject = subjects[rng.randrange(len(subjects))]
    groups = [sorted(e) for s, e in edges if s == subject]
    covered = {v for g in groups for v in g}
    rest = sorted(set(vertices) - covered)
    if rest:
        groups.append(rest)
    while len(groups) > c0:
        groups.sort(key=len)
        a = groups.pop(0)
        groups[0] = sorted(groups[0] + a)
    while len(groups) < c0:
        groups.sort(key=len, reverse=True)
        big = groups.pop(0)
        half = len(big) // 2
        groups += [big[:half], big[half:]]
    return {v: c for c, g in enumerate(groups) for v in g}


def _partition_once(vertices, edges, c0, rng, labels):
    """Single-vertex move refinement to a local minimum of J."""
    n = len(vertices)
    target = n / c0
    labels = dict(labels)
    sizes = [0] * c0
    for c in labels.values():
        sizes[c] += 1

    edges_of = {v: [] for v in vertices}
    for i, (_, e) in enumerate(edges):
        for v in e:
            edges_of[v].append(i)

    j = _objective(labels, edges, c0, n)
    trace = [j]
    improved = True
    verts = sorted(vertices)
    while improved:
        improved = False
        rng.shuffle(verts)
        for v in verts:
            home = labels[v]
            if sizes[home] == 1:
                continue  # never empty a cluster
            # Candidate clusters: where v's hyperedges already live.
            cands = set()
            for i in edges_of[v]:
                cands |= {labels[u] for u in edges[i][1]}
            cands.add(min(range(c0), key=lambda k: sizes[k]))
            cands.discard(home)
            best_c, best_delta = home, 0.0
            for c in cands:
                delta = 0.0
                for i in edges_of[v]:
                    parts = Counter(labels[u] for u in edges[i][1])
                    before = len(parts)
                    after = before
                    if parts[home] == 1:
                        after -= 1
                    if parts.get(c, 0) == 0:
                        after += 1
                    delta += after - before
                delta += BALANCE_WEIGHT * (
                    ((sizes[home] - 1 - target) ** 2 + (sizes[c] + 1 - target) ** 2)
                    - ((sizes[home] - target) ** 2 + (sizes[c] - target) ** 2)) / n
                if delta < best_delta - 1e-12:
                    best_delta, best_c = delta, c
            if best_c != home:
                labels[v] = best_c
                sizes[home] -= 1
                sizes[best_c] += 1
                j += best_delta
                trace.append(j)
                improved = True
    return labels, j, trace


def partition_hypergraph(h, c0, seed=0, restarts=DEFAULT_RESTARTS):
    """Consensus partition: best local minimum of J over random restarts.

    Returns (graph, info) where info records the objective, the winning
    restart seed, and the objective trace (non-increasing)."""
    n = len(h.vertices)
    if not 1 <= c0 <= n:
        raise ValueError("cluster count %d out of range 1..%d" % (c0, n))
    best = None
    for r in range(restarts):
        rng = random.Random("%s:%s" % (seed, r))
        if r % 2 == 0:
            init = _greedy_seed(h.vertices, h.edges, c0)
        else:
            init = _subject_seed(h.vertices, h.edges, c0, rng)
        labels, j, trace = _partition_once(h.vertices, h.edges, c0, rng, init)
        if best is None or j < best[1] - 1e-12:
            best = (labels, j, trace, r)
    labels, j, trace, r = best
    groups = {}
    for v, c in labels.items():
        groups.setdefault(c, set()).add(v)
    graph = ClusterGraph.from_lists(groups.values())
    info = {"objective": j, "seed": seed, "winning_restart": r,
            "c0": c0, "trace": trace}
    return graph, info


def cluster_stats(graphs):
    """Histogram of per-graph cluster counts and of cluster sizes."""
    if not graphs:
        raise ValueError("no graphs")
    counts = Counter(g.n_clusters for g in graphs)
    sizes = Counter(len(c) for g in graphs for c in g.clusters)
    return {"cluster_counts": dict(counts), "cluster_sizes": dict(sizes)}


def stats_to_csv(stats):
    lines = ["kind,value,frequency"]
    for kind in ("cluster_counts", "cluster_sizes"):
        for value in sorted(stats[kind]):
            lines.append("%s,%d,%d" % (kind, value, stats[kind][value]))
    return "\n".join(lines) + "\n"
