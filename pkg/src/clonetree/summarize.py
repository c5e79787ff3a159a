"""Posterior summaries: partial orders, co-clustering, genotypes, DOT."""

from __future__ import annotations

import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
)
DEFAULT_PRUNE = 0.1


def _post_burn_in(samples):
    post = [s for s in samples if not getattr(s, "burn_in", False)]
    return post


@dataclass
class PartialOrderGraph:
    nodes: list[str]
    edges: dict[tuple[str, str], float] = field(default_factory=dict)
    cluster_labels: dict[str, int] = field(default_factory=dict)

    def weight(self, p: str, q: str) -> float:
        return self.edges.get((p, q), 0.0)


def partial_order(samples: Sequence, snv_ids: Sequence[str] | None = None,
                  cluster_labels: dict[str, int] | None = None) -> PartialOrderGraph:
    """Edge weight P -> Q: share of samples where P's lineage is the parent of Q's.

    Burn-in samples are skipped. Parents are lineage parents (nearest
    occupied ancestor), so SNVs sharing a node never get an edge.
    """
    post = _post_burn_in(samples)
    if not post:
        raise ValueError("no post-burn-in samples")
    n = len(post[0].assignments)
    ids = list(snv_ids) if snv_ids is not None else [str(i) for i in range(n)]
    if len(ids) != n:
        raise ValueError("snv_ids length differs from the assignment vector")
    counts: Counter = Counter()
    for s in post:
        lin = s.lineage_parents()
        members: dict[int, list[int]] = {}
        for i, k in enumerate(s.assignments):
            members.setdefault(k, []).append(i)
        for k, p in lin.items():
            if p == -1:
                continue
            for i in members[p]:
                for j in members[k]:
                    counts[(i, j)] += 1
    total = len(post)
    edges = {(ids[i], ids[j]): c / total for (i, j), c in sorted(counts.items())}
    return PartialOrderGraph(ids, edges, dict(cluster_labels or {}))


def co_cluster_matrix(samples: Sequence) -> np.ndarray:
    """``C[i, j]`` = samples with i and j together minus samples with them apart."""
    if not samples:
        raise ValueError("no samples")
    z = np.array([s.assignments for s in samples])
    m = len(samples)
    same = np.zeros((z.shape[1], z.shape[1]), dtype=np.int64)
    for row in z:
        same += row[:, None] == row[None, :]
    return 2 * same - m


def cc_objective(c: np.ndarray, labels: Sequence[int]) -> float:
    """Sum of C_ij over pairs i < j placed in the same cluster."""
    lab = np.asarray(labels)
    y = lab[:, None] == lab[None, :]
    return float(np.sum(np.triu(np.where(y, c, 0), 1)))


def _canonical(labels) -> list[int]:
    seen: dict[int, int] = {}
    return [seen.setdefault(x, len(seen)) for x in labels]


def _pivot(c, rng):
    n = len(c)
    labels = [-1] * n
    rest = list(rng.permutation(n))
    k = 0
    while rest:
        p = rest[0]
        group = [i for i in rest if i == p or c[p, i] > 0]
        for i in group:
            labels[i] = k
        rest = [i for i in rest if labels[i] == -1]
        k += 1
    return labels


def _local_search(c, labels, max_rounds=100):
    # move single items to the best cluster (or a fresh one) until no gain
    labels = list(labels)
    n = len(c)
    for _ in range(max_rounds):
        moved = False
        for i in range(n):
            gain = {}
            for j in range(n):
                if j != i:
                    gain[labels[j]] = gain.get(labels[j], 0.0) + c[i, j]
            here = gain.get(labels[i], 0.0)
            best_label, best = labels[i], here
            for lab, g in sorted(gain.items()):
                if g > best:
                    best_label, best = lab, g
            if best < 0.0:
                best_label, best = max(labels) + 1, 0.0
            if best > here + 1e-12:
                labels[i] = best_label
                moved = True
        if not moved:
            break
    return _canonical(labels)


def correlation_cluster(c: np.ndarray, seed: int = 0, restarts: int = 10) -> list[int]:
    """Cluster labels approximately maximizing the correlation-clustering objective.

    Randomized pivoting followed by single-item moves, best of ``restarts``.
    Labels are canonical (first appearance order).
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or not np.allclose(c, c.T):
        raise ValueError("C must be a symmetric square matrix")
    if len(c) == 0:
        return []
    rng = np.random.default_rng(seed)
    best, best_obj = None, -math.inf
    for _ in range(max(1, restarts)):
        labels = _local_search(c, _pivot(c, rng))
        obj = cc_objective(c, labels)
        if obj > best_obj:
            best, best_obj = labels, obj
    return best


def indicator(labels: Sequence[int]) -> np.ndarray:
    lab = np.asarray(labels)
    return (lab[:, None] == lab[None, :]).astype(np.int8)


def genotype_posteriors(samples: Sequence, snv_ids: Sequence[str] | None = None) -> list[tuple[frozenset, float]]:
    """Posterior share of samples holding a lineage with exactly each cumulative SNV set.

    Sorted by decreasing probability, then by size and sorted member ids.
    """
    post = _post_burn_in(samples)
    if not post:
        raise ValueError("no post-burn-in samples")
    n = len(post[0].assignments)
    ids = list(snv_ids) if snv_ids is not None else [str(i) for i in range(n)]
    counts: Counter = Counter()
    for s in post:
        for g in set(s.lineage_genotypes().values()):
            counts[frozenset(ids[i] for i in g)] += 1
    total = len(post)
    table = [(g, c / total) for g, c in counts.items()]
    table.sort(key=lambda x: (-x[1], len(x[0]), sorted(x[0])))
    return table


def genotype_probability(table, genotype) -> float:
    target = frozenset(genotype)
    return next((p for g, p in table if g == target), 0.0)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def cluster_colors(labels: dict[str, int]) -> dict[int, str]:
    """Palette index by cluster size rank (ties by label); overflow wraps."""
    sizes = Counter(labels.values())
    ranked = sorted(sizes, key=lambda k: (-sizes[k], k))
    return {k: PALETTE[r % len(PALETTE)] for r, k in enumerate(ranked)}


def emit_dot(graph: PartialOrderGraph, prune: float = DEFAULT_PRUNE, max_width: float = 5.0) -> str:
    """Graphviz digraph text; edges below ``prune`` are dropped from display only."""
    if not 0.0 <= prune <= 1.0:
        raise ValueError("prune must lie in [0, 1]")
    colors = cluster_colors(graph.cluster_labels)
    out = io.StringIO()
    out.write("digraph partial_order {\n")
    out.write("  node [shape=box, style=rounded, penwidth=2];\n")
    for name in sorted(graph.nodes):
        attrs = ""
        if name in graph.cluster_labels:
            k = graph.cluster_labels[name]
            attrs = f" [color={_quote(colors[k])}, cluster={k}]"
        out.write(f"  {_quote(name)}{attrs};\n")
    for (p, q), w in sorted(graph.edges.items()):
        if w < prune or w <= 0.0:
            continue
        out.write(f"  {_quote(p)} -> {_quote(q)} [weight={w:.4f}, penwidth={w * max_width:.4f}];\n")
    out.write("}\n")
    return out.getvalue()


def consensus_labels(samples: Sequence, seed: int = 0) -> list[int]:
    """Correlation-clustered SNV groups from post-burn-in samples."""
    post = _post_burn_in(samples)
    if not post:
        raise ValueError("no post-burn-in samples")
    return correlation_cluster(co_cluster_matrix(post), seed=seed)
