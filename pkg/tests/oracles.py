"""Independent brute-force reference implementations used across tests.

Everything here recomputes results with plain loops over dense copies,
deliberately avoiding the library's sparse kernels, so agreement is
evidence rather than tautology.
"""

import numpy as np

from ahgnn.graph import HeteroGraph
from ahgnn.sparse import SparseMatrix


def oracle_walk_counts(graph: HeteroGraph, types) -> np.ndarray:
    """Count typed walks node-by-node with a depth-first expansion."""
    mats = [graph.relations[(a, b)].to_dense()
            for a, b in zip(types, types[1:])]
    n0, nk = graph.n(types[0]), graph.n(types[-1])
    out = np.zeros((n0, nk))

    def walk(start, pos, cur, weight):
        if pos == len(mats):
            out[start, cur] += weight
            return
        m = mats[pos]
        for j in range(m.shape[1]):
            if m[cur, j] != 0:
                walk(start, pos + 1, j, weight * m[cur, j])

    for i in range(n0):
        walk(i, 0, i, 1.0)
    return out


def oracle_global_homophily(adj_dense, labels):
    num = den = 0
    n = len(labels)
    for i in range(n):
        for j in range(n):
            if i == j or adj_dense[i, j] == 0:
                continue
            if labels[i] < 0 or labels[j] < 0:
                continue
            den += 1
            num += int(labels[i] == labels[j])
    return None if den == 0 else num / den


def oracle_local_homophily(adj_dense, labels):
    n = len(labels)
    out = np.full(n, np.nan)
    for i in range(n):
        num = den = 0
        for j in range(n):
            if i == j or adj_dense[i, j] == 0:
                continue
            if labels[i] < 0 or labels[j] < 0:
                continue
            den += 1
            num += int(labels[i] == labels[j])
        if den:
            out[i] = num / den
    return out


def oracle_f1(preds, labels, num_classes):
    """Macro and micro F1 from an explicit confusion matrix."""
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, y in zip(preds, labels):
        cm[y, p] += 1
    f1s = []
    for c in range(num_classes):
        tp = cm[c, c]
        fp = cm[:, c].sum() - tp
        fn = cm[c, :].sum() - tp
        f1s.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    micro = float(np.trace(cm)) / float(cm.sum())
    return float(np.mean(f1s)), micro


def graphs_identical(a: HeteroGraph, b: HeteroGraph) -> bool:
    """Full content equality: types, counts, features, labels, splits, edges."""
    if list(a.node_types) != list(b.node_types) or a.counts != b.counts:
        return False
    if not all(np.array_equal(a.features[t], b.features[t])
               for t in a.node_types):
        return False
    if not (np.array_equal(a.labels, b.labels)
            and np.array_equal(a.splits, b.splits)):
        return False
    return set(a.relations) == set(b.relations) and all(
        a.relations[p].allclose(b.relations[p]) for p in a.relations)


def random_typed_graph(seed: int, max_nodes: int = 30) -> HeteroGraph:
    """Random small heterogeneous graph with 1-3 types and -1 labels mixed in."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    names = ["A", "B", "C"][:k]
    counts = {}
    budget = max_nodes
    for idx, t in enumerate(names):
        hi = max(2, budget - 2 * (k - idx - 1))
        n = int(rng.integers(2, min(10, hi) + 1))
        counts[t] = n
        budget -= n
    relations = {}
    for i in range(k):
        for j in range(i, k):
            a, b = names[i], names[j]
            if a != b and rng.random() < 0.2:
                continue  # sometimes leave a pair unconnected
            if a == b and rng.random() < 0.6:
                continue  # self-relations are rarer
            na, nb = counts[a], counts[b]
            n_edges = int(rng.integers(0, na * nb // 2 + 1))
            if n_edges == 0:
                relations[(a, b)] = SparseMatrix.empty(na, nb)
                continue
            r = rng.integers(0, na, size=n_edges)
            c = rng.integers(0, nb, size=n_edges)
            v = rng.integers(1, 4, size=n_edges).astype(float)
            relations[(a, b)] = SparseMatrix.from_coo(na, nb, r, c, v)
    num_classes = int(rng.integers(2, 5))
    labels = rng.integers(-1, num_classes, size=counts["A"])
    splits = rng.integers(0, 3, size=counts["A"])
    features = {t: rng.normal(size=(counts[t], int(rng.integers(1, 4))))
                for t in names}
    return HeteroGraph.create(names, counts, features, relations, "A",
                              labels, num_classes, splits)
