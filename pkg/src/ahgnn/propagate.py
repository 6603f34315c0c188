"""Precomputed multi-hop feature and label propagation.

All graph smoothing happens once, before any training: for every
meta-path from the target type we store the degree-normalized walk
products applied to raw features (hop 0 = the features themselves), and
for every meta-path returning to the target type we store the products
applied to one-hot train labels (hop 0 is omitted, it would leak the
training labels straight into the model input).  The resulting message
matrices go into a little-endian binary cache keyed by path strings and
fingerprinted against the dataset manifest.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import HeteroGraph
from .metapath import MetaPath, PathProducts, enumerate_metapaths
from .sparse import spmm

CACHE_MAGIC = b"AHGC"
CACHE_VERSION = 1


class CacheError(ValueError):
    """Raised for unreadable, truncated, or stale cache files."""


@dataclass
class MessageCache:
    """Hop-indexed message matrices for every feature and label path."""

    l1: int
    l2: int
    fingerprint: int
    feature_entries: dict[str, list[np.ndarray]]
    label_entries: dict[str, list[np.ndarray]] = field(default_factory=dict)

    @property
    def target_type(self) -> str:
        some_key = next(iter(self.feature_entries))
        return some_key.split("-")[0]

    @property
    def n_target(self) -> int:
        return next(iter(self.feature_entries.values()))[0].shape[0]

    @property
    def num_classes(self) -> int:
        if not self.label_entries:
            raise ValueError("cache holds no label entries")
        return next(iter(self.label_entries.values()))[0].shape[1]

    def take_rows(self, idx: np.ndarray) -> "MessageCache":
        """Row-sliced copy over a subset of target nodes."""
        return MessageCache(
            l1=self.l1, l2=self.l2, fingerprint=self.fingerprint,
            feature_entries={k: [h[idx] for h in v]
                             for k, v in self.feature_entries.items()},
            label_entries={k: [h[idx] for h in v]
                           for k, v in self.label_entries.items()},
        )

    def astype(self, dtype) -> "MessageCache":
        return MessageCache(
            l1=self.l1, l2=self.l2, fingerprint=self.fingerprint,
            feature_entries={k: [h.astype(dtype) for h in v]
                             for k, v in self.feature_entries.items()},
            label_entries={k: [h.astype(dtype) for h in v]
                           for k, v in self.label_entries.items()},
        )


def label_hop_indices(key: str, target: str) -> list[int]:
    """Step positions at which a label path revisits the target type."""
    types = key.split("-")
    return [l for l in range(1, len(types)) if types[l] == target]


def _feature_hops(graph: HeteroGraph, products: PathProducts,
                  path: MetaPath) -> list[np.ndarray]:
    hops = [graph.features[path.types[0]].copy()]
    for l in range(1, path.steps + 1):
        t = path.types[l]
        prefix = products.matrix(path.types[: l + 1])
        x = graph.features[t]
        if prefix.cols != x.shape[0]:
            raise ValueError(
                f"feature matrix for type {t!r} has {x.shape[0]} rows but the "
                f"walk product expects {prefix.cols}")
        hops.append(spmm(prefix, x))
    return hops


def _label_hops(graph: HeteroGraph, products: PathProducts,
                path: MetaPath, y: np.ndarray) -> list[np.ndarray]:
    return [spmm(products.matrix(path.types[: l + 1]), y)
            for l in label_hop_indices(path.key, path.types[0])]


def train_label_matrix(graph: HeteroGraph) -> np.ndarray:
    """One-hot labels over the train split, zero rows everywhere else."""
    y = np.zeros((graph.n_target, graph.num_classes), dtype=np.float64)
    mask = graph.train_mask & (graph.labels >= 0)
    y[np.nonzero(mask)[0], graph.labels[mask]] = 1.0
    return y


def _run_jobs(jobs, threads: int):
    # results keyed by path so the merge order never depends on scheduling
    if threads <= 1:
        return [fn() for fn in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn) for fn in jobs]
        return [f.result() for f in futures]


def propagate_features(graph: HeteroGraph, l1: int,
                       threads: int = 1) -> dict[str, list[np.ndarray]]:
    """Message matrices for every path of 0..l1 steps from the target."""
    if l1 < 1:
        raise ValueError("l1 must be >= 1")
    paths = enumerate_metapaths(graph.schema(), graph.target_type, l1)
    products = PathProducts(graph, normalized=True)
    for p in paths:  # warm the memo serially; products stay deterministic
        products.matrix(p.types)
    jobs = [(p.key, lambda p=p: _feature_hops(graph, products, p)) for p in paths]
    results = _run_jobs([fn for _, fn in jobs], threads)
    return {key: res for (key, _), res in zip(jobs, results)}


def propagate_labels(graph: HeteroGraph, l2: int,
                     threads: int = 1) -> dict[str, list[np.ndarray]]:
    """Propagated one-hot train labels for target-returning paths."""
    if l2 < 1:
        raise ValueError("l2 must be >= 1")
    if not np.any(graph.train_mask & (graph.labels >= 0)):
        raise ValueError("label propagation needs a nonempty labeled train split")
    target = graph.target_type
    paths = [p for p in enumerate_metapaths(graph.schema(), target, l2,
                                            end=target, include_trivial=False)]
    y = train_label_matrix(graph)
    products = PathProducts(graph, normalized=True)
    for p in paths:
        products.matrix(p.types)
    jobs = [(p.key, lambda p=p: _label_hops(graph, products, p, y)) for p in paths]
    results = _run_jobs([fn for _, fn in jobs], threads)
    return {key: res for (key, _), res in zip(jobs, results)}


def build_cache(graph: HeteroGraph, l1: int, l2: int,
                threads: int = 1) -> MessageCache:
    return MessageCache(
        l1=l1, l2=l2, fingerprint=graph.fingerprint,
        feature_entries=propagate_features(graph, l1, threads),
        label_entries=propagate_labels(graph, l2, threads),
    )


def _write_entry(f, kind: int, key: str, hops: list[np.ndarray]) -> None:
    kb = key.encode()
    f.write(struct.pack("<BI", kind, len(kb)))
    f.write(kb)
    f.write(struct.pack("<I", len(hops)))
    for h in hops:
        arr = np.ascontiguousarray(h, dtype="<f8")
        f.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        f.write(arr.tobytes())


def write_cache(cache: MessageCache, path) -> None:
    """Serialize messages to the binary cache format (deterministic bytes)."""
    path = Path(path)
    n = len(cache.feature_entries) + len(cache.label_entries)
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<IQII", CACHE_VERSION, cache.fingerprint,
                            cache.l1, cache.l2))
        f.write(struct.pack("<I", n))
        for key in sorted(cache.feature_entries):
            _write_entry(f, 0, key, cache.feature_entries[key])
        for key in sorted(cache.label_entries):
            _write_entry(f, 1, key, cache.label_entries[key])


def read_cache(path, expect_fingerprint: int | None = None,
               expect_l1: int | None = None,
               expect_l2: int | None = None) -> MessageCache:
    """Read a cache file, optionally enforcing freshness expectations."""
    path = Path(path)
    if not path.is_file():
        raise CacheError(f"cache file {path} not found")
    data = path.read_bytes()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise CacheError(f"cache file {path.name} is truncated")
        out = data[pos:pos + n]
        pos += n
        return out

    if take(4) != CACHE_MAGIC:
        raise CacheError(f"{path.name} is not a message cache (bad magic)")
    version, fingerprint, l1, l2 = struct.unpack("<IQII", take(20))
    if version != CACHE_VERSION:
        raise CacheError(f"unsupported cache version {version}")
    if expect_fingerprint is not None and fingerprint != expect_fingerprint:
        raise CacheError(
            "stale cache: dataset manifest changed since the cache was "
            "written; regenerate with `ahgnn precompute`")
    if (expect_l1 is not None and l1 != expect_l1) or \
       (expect_l2 is not None and l2 != expect_l2):
        raise CacheError(
            f"stale cache: built for L1={l1}, L2={l2}; regenerate with "
            "`ahgnn precompute`")
    (n_entries,) = struct.unpack("<I", take(4))
    feats: dict[str, list[np.ndarray]] = {}
    labs: dict[str, list[np.ndarray]] = {}
    for _ in range(n_entries):
        kind, klen = struct.unpack("<BI", take(5))
        key = take(klen).decode()
        (n_hops,) = struct.unpack("<I", take(4))
        hops = []
        for _ in range(n_hops):
            rows, cols = struct.unpack("<II", take(8))
            arr = np.frombuffer(take(rows * cols * 8), dtype="<f8")
            hops.append(arr.reshape(rows, cols).astype(np.float64))
        if kind == 0:
            feats[key] = hops
        elif kind == 1:
            labs[key] = hops
        else:
            raise CacheError(f"unknown cache entry kind {kind}")
    if pos != len(data):
        raise CacheError(f"cache file {path.name} has trailing bytes")
    if not feats:
        raise CacheError("cache holds no feature entries")
    return MessageCache(l1=l1, l2=l2, fingerprint=fingerprint,
                        feature_entries=feats, label_entries=labs)
