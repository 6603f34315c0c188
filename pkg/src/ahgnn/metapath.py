"""Meta-path enumeration, induced adjacency, and homophily analytics.

A meta-path is a type sequence T1-T2-...-Tk walkable in the schema; its
induced adjacency counts the walks between endpoint nodes, obtained by
chaining the per-step relation matrices.  Homophily ratios compare the
labels at the two endpoints of those induced edges.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graph import HeteroGraph, Schema
from .sparse import SparseMatrix, normalize_relation, spspmm


@dataclass(frozen=True)
class MetaPath:
    """A walkable node-type sequence; `steps` counts relation hops."""

    types: tuple[str, ...]

    def __post_init__(self):
        if not self.types:
            raise ValueError("meta-path needs at least one node type")

    @property
    def key(self) -> str:
        return "-".join(self.types)

    @property
    def steps(self) -> int:
        return len(self.types) - 1

    @staticmethod
    def from_key(key: str) -> "MetaPath":
        return MetaPath(tuple(key.split("-")))


def enumerate_metapaths(schema: Schema, start: str, max_len: int,
                        end: str | None = None,
                        include_trivial: bool = True) -> list[MetaPath]:
    """All schema-walkable paths from `start` with at most `max_len` steps.

    Paths come back in lexicographic key order (depth-first with sorted
    neighbor types).  `end` filters on the final node type; the trivial
    zero-step path is kept only when `include_trivial` and it passes the
    end filter.
    """
    if start not in schema.node_types:
        raise ValueError(f"unknown start type {start!r}")
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    out: list[MetaPath] = []

    def walk(prefix: tuple[str, ...]) -> None:
        steps = len(prefix) - 1
        if (steps > 0 or include_trivial) and (end is None or prefix[-1] == end):
            out.append(MetaPath(prefix))
        if steps == max_len:
            return
        for t in schema.neighbors(prefix[-1]):
            walk(prefix + (t,))

    walk((start,))
    return out


class PathProducts:
    """Chained relation products with prefix memoization.

    Products are always computed left-associated, so a memo hit returns
    bit-identical values to a cold computation.
    """

    def __init__(self, graph: HeteroGraph, normalized: bool):
        self.graph = graph
        self.normalized = normalized
        self._memo: dict[tuple[str, ...], SparseMatrix] = {}
        self._norm: dict[tuple[str, str], SparseMatrix] = {}

    def _step(self, src: str, dst: str) -> SparseMatrix:
        rel = self.graph.relation(src, dst)
        if not self.normalized:
            return rel
        if (src, dst) not in self._norm:
            self._norm[(src, dst)] = normalize_relation(rel)
        return self._norm[(src, dst)]

    def matrix(self, types: tuple[str, ...]) -> SparseMatrix:
        types = tuple(types)
        if len(types) == 1:
            return SparseMatrix.identity(self.graph.n(types[0]))
        if types not in self._memo:
            if len(types) == 2:
                self._memo[types] = self._step(types[0], types[1])
            else:
                self._memo[types] = spspmm(self.matrix(types[:-1]),
                                           self._step(types[-2], types[-1]))
        return self._memo[types]


def induced_adjacency(graph: HeteroGraph, path: MetaPath,
                      normalized: bool = False,
                      products: PathProducts | None = None) -> SparseMatrix:
    """Walk-count (or degree-normalized) adjacency induced by a meta-path."""
    for t in path.types:
        if t not in graph.counts:
            raise ValueError(f"meta-path names unknown type {t!r}")
    for a, b in zip(path.types, path.types[1:]):
        if (a, b) not in graph.relations:
            raise ValueError(f"meta-path step ({a!r}, {b!r}) has no relation")
    if products is None:
        products = PathProducts(graph, normalized)
    elif products.normalized != normalized:
        raise ValueError("products cache was built with a different normalization")
    return products.matrix(path.types)


def global_homophily(adj: SparseMatrix, labels: np.ndarray) -> float | None:
    """Fraction of induced edges joining same-labeled endpoints.

    Counts directed structural nonzeros, skips the diagonal and any
    endpoint labeled -1.  Returns None when no edge qualifies.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if adj.rows != labels.shape[0] or adj.cols != labels.shape[0]:
        raise ValueError("adjacency must be square over the labeled node set")
    r, c = adj.coords()
    keep = (r != c) & (labels[r] >= 0) & (labels[c] >= 0)
    total = int(keep.sum())
    if total == 0:
        return None
    same = int((labels[r[keep]] == labels[c[keep]]).sum())
    return same / total

def local_homophily(adj: SparseMatrix, labels: np.ndarray) -> np.ndarray:
    """Per-node same-label neighbor fraction; NaN where undefined."""
    labels = np.asarray(labels, dtype=np.int64)
    if adj.rows != labels.shape[0] or adj.cols != labels.shape[0]:
        raise ValueError("adjacency must be square over the labeled node set")
    r, c = adj.coords()
    keep = (r != c) & (labels[r] >= 0) & (labels[c] >= 0)
    r, c = r[keep], c[keep]
    n = adj.rows
    deg = np.bincount(r, minlength=n).astype(np.float64)
    same = np.bincount(r[labels[r] == labels[c]], minlength=n).astype(np.float64)
    out = np.full(n, np.nan)
    has = deg > 0
    out[has] = same[has] / deg[has]
    return out


def homophily_histogram(local: np.ndarray, bins: int = 5) -> np.ndarray:
    """Counts of defined local ratios in equal-width bins over [0, 1].

    Bins are left-inclusive; the last bin also includes 1.0.
    """
    vals = np.asarray(local, dtype=np.float64)
    vals = vals[~np.isnan(vals)]
    if np.any((vals < 0) | (vals > 1)):
        raise ValueError("local homophily values must lie in [0, 1]")
    idx = np.minimum((vals * bins).astype(np.int64), bins - 1)
    return np.bincount(idx, minlength=bins)


def graph_homophily(graph: HeteroGraph, max_len: int = 4) -> float:
    """Mean global homophily over target-to-target paths of 1..max_len steps.

    Paths with no qualifying edges are skipped; if no path qualifies at
    all, raises ValueError.
    """
    if max_len < 2:
        raise ValueError("max_len must be >= 2: target-to-target paths "
                         "need at least two steps")
    target = graph.target_type
    paths = enumerate_metapaths(graph.schema(), target, max_len,
                                end=target, include_trivial=False)
    if not paths:
        raise ValueError("schema admits no target-to-target meta-path")
    products = PathProducts(graph, normalized=False)
    vals = []
    for p in paths:
        h = global_homophily(induced_adjacency(graph, p, products=products),
                             graph.labels)
        if h is not None:
            vals.append(h)
    if not vals:
        raise ValueError("no target-to-target meta-path induces any "
                         "qualifying edge")
    return float(np.mean(vals))


@dataclass
class PathHomophily:
    key: str
    global_ratio: float | None
    n_edges: int
    histogram: np.ndarray


@dataclass
class HomophilyReport:
    paths: list[PathHomophily]
    graph_level: float
    max_len: int


def build_homophily_report(graph: HeteroGraph, max_len: int = 4) -> HomophilyReport:
    """Per-path global/local homophily plus the graph-level mean."""
    target = graph.target_type
    paths = enumerate_metapaths(graph.schema(), target, max_len,
                                end=target, include_trivial=False)
    products = PathProducts(graph, normalized=False)
    rows = []
    for p in paths:
        adj = induced_adjacency(graph, p, products=products)
        r, c = adj.coords()
        keep = (r != c) & (graph.labels[r] >= 0) & (graph.labels[c] >= 0)
        rows.append(PathHomophily(
            key=p.key,
            global_ratio=global_homophily(adj, graph.labels),
            n_edges=int(keep.sum()),
            histogram=homophily_histogram(local_homophily(adj, graph.labels)),
        ))
    return HomophilyReport(paths=rows,
                           graph_level=graph_homophily(graph, max_len),
                           max_len=max_len)


def write_homophily_csv(report: HomophilyReport, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        nbins = len(report.paths[0].histogram) if report.paths else 5
        w.writerow(["metapath", "global_h", "n_edges"]
                   + [f"bin{i}" for i in range(nbins)])
        for p in report.paths:
            h = "" if p.global_ratio is None else f"{p.global_ratio:.10g}"
            w.writerow([p.key, h, p.n_edges] + [int(x) for x in p.histogram])
        w.writerow(["graph_level", f"{report.graph_level:.10g}", "", *[""] * nbins])
