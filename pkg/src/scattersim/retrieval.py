"""Nearest-neighbor retrieval under a learned metric and its evaluation.

A query clip (or an external feature row) retrieves the R closest clips
under ||L(x - y)||.  Quality is scored against per-subject cluster
graphs: p is the fraction of retrieved clips sharing the query's
cluster, P averages p over all queries for one subject, and AP averages
P across subjects.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RankedResult:
    """Ordered retrieval output for one query."""

    query_id: str               # empty for external feature rows
    results: tuple              # ((clip_id, distance), ...) ascending

    def __post_init__(self):
        dists = [d for _, d in self.results]
        if any(b < a for a, b in zip(dists, dists[1:])):
            raise ValueError("distances must be non-decreasing")
        if self.query_id and any(c == self.query_id
                                 for c, _ in self.results):
            raise ValueError("query present in its own results")

    @property
    def clip_ids(self):
        return [c for c, _ in self.results]


def knn_query(store, lmap, query, r):
    """Exact top-r retrieval; ties broken by ascending clip id.

    The query is either a stored clip id (excluded from its own results)
    or an external feature row of matching dimension.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    n, p = store.values.shape
    if isinstance(query, str):
        row = store.row(query)
        query_id = query
    else:
        row = np.asarray(query, dtype=np.float64)
        if row.shape != (p,):
            raise ValueError("query row must have dimension %d" % p)
        query_id = ""
    z = store.values @ lmap.T
    zq = lmap @ row
    dists = np.sqrt(((z - zq) ** 2).sum(axis=1))
    ranked = sorted(
        ((float(dists[i]), cid) for i, cid in enumerate(store.clip_ids)
         if cid != query_id))
    return RankedResult(query_id=query_id,
                        results=tuple((cid, d) for d, cid in ranked[:r]))


def precision_at_r(result, graph):
    """Fraction of retrieved clips in the query's cluster."""
    if not result.query_id:
        raise ValueError("precision needs a stored query id")
    label = dict(graph.labels())
    if result.query_id not in label:
        raise ValueError("query %r absent from graph" % result.query_id)
    home = label[result.query_id]
    hits = sum(1 for cid in result.clip_ids if label.get(cid) == home)
    return hits / len(result.results)


@dataclass(frozen=True)
class EvalReport:
    """Per-subject precision and its across-subject aggregate."""

    r: int
    per_subject: dict           # subject id -> mean precision
    ap: float
    std: float
    provenance: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({"r": self.r, "ap": self.ap, "std": self.std,
                           "per_subject": self.per_subject,
                           "provenance": self.provenance},
                          sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(r=obj["r"], per_subject=obj["per_subject"],
                   ap=obj["ap"], std=obj["std"],
                   provenance=obj.get("provenance", {}))

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject", "precision"])
            for subject in sorted(self.per_subject):
                writer.writerow([subject,
                                 "%.10g" % self.per_subject[subject]])


def evaluate(store, lmap, graphs, r, provenance=None):
    """Retrieval evaluation over every stored clip as a query.

    graphs maps subject ids to clip-level cluster graphs (a plain list
    gets positional subject names).  Every graph must cover the store.
    """
    if not graphs:
        raise ValueError("need at least one subject graph")
    if not isinstance(graphs, dict):
        graphs = {"subject%02d" % i: g for i, g in enumerate(graphs)}
    z = store.values @ lmap.T
    n = len(store.clip_ids)
    order = []
    for i in range(n):
        dists = np.sqrt(((z - z[i]) ** 2).sum(axis=1))
        ranked = sorted(((float(dists[j]), store.clip_ids[j])
                         for j in range(n) if j != i))
        order.append([cid for _, cid in ranked[:r]])
    per_subject = {}
    for subject, graph in sorted(graphs.items()):
        label = dict(graph.labels())
        missing = [c for c in store.clip_ids if c not in label]
        if missing:
            raise ValueError("graph for %r misses clips: %s"
                             % (subject, ", ".join(missing[:5])))
        precisions = []
        for i, cid in enumerate(store.clip_ids):
            home = label[cid]
            hits = sum(1 for other in order[i]
                       if label[other] == home)
            precisions.append(hits / len(order[i]))
        per_subject[subject] = float(np.mean(precisions))
    values = np.array(sorted(per_subject.values()))
    ap = float(values.mean())
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return EvalReport(r=r, per_subject=per_subject, ap=ap, std=std,
                      provenance=provenance or {})
