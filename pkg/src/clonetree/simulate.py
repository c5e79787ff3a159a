"""Synthetic read counts from a known phylogeny, and scoring against it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import pearsonr
from sklearn.metrics import adjusted_rand_score

from .likelihood import DEFAULT_GENOTYPES, GenotypeState, SnvObservation, success_probability

CHAIN_PHI = (0.9, 0.75, 0.55, 0.4, 0.25)
FLAT_PHI = (1.0, 0.85, 0.6, 0.35, 0.2, 0.08)


@dataclass
class SimSpec:
    """Ground-truth tree: ``parents[k]`` (-1 for the top node) and ``phi[k][t]``."""

    parents: list[int]
    phi: list[list[float]]
    snvs_per_node: int = 9
    depth: int = 10_000
    mu_r: float = 0.999
    mu_v: float = 0.5
    seed: int = 0
    poisson_depth: bool = False
    poisson_counts: bool = False
    sample_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.parents) != len(self.phi):
            raise ValueError("parents and phi differ in length")
        if self.depth < 1 or self.snvs_per_node < 1:
            raise ValueError("depth and snvs_per_node must be positive")
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2 or np.any(phi < 0) or np.any(phi > 1):
            raise ValueError("phi must be a (nodes, samples) array in [0, 1]")
        for k in range(len(self.parents)):
            kids = [c for c, p in enumerate(self.parents) if p == k]
            if kids and np.any(phi[kids].sum(axis=0) > phi[k] + 1e-12):
                raise ValueError(f"children of node {k} exceed its frequency")
        tops = [k for k, p in enumerate(self.parents) if p == -1]
        if tops and np.any(phi[tops].sum(axis=0) > 1 + 1e-12):
            raise ValueError("top-level frequencies exceed 1")
        if not self.sample_ids:
            self.sample_ids = tuple(f"s{t}" for t in range(phi.shape[1]))

    @property
    def n_samples(self) -> int:
        return len(self.phi[0])


def chain_spec(depth: int = 10_000, seed: int = 0, **kw) -> SimSpec:
    """Five lineages in a line at 0.9 > 0.75 > 0.55 > 0.4 > 0.25."""
    return SimSpec(parents=[-1, 0, 1, 2, 3], phi=[[p] for p in CHAIN_PHI], depth=depth, seed=seed, **kw)


def flat_spec(depth: int = 10_000, seed: int = 0, **kw) -> SimSpec:
    """Six clusters at {1.0, 0.85, 0.6, 0.35, 0.2, 0.08}.

    The frequencies are compatible with many trees; a chain is used as the
    nominal truth, so only clustering and frequencies are meaningful to score.
    """
    return SimSpec(parents=[-1, 0, 1, 2, 3, 4], phi=[[p] for p in FLAT_PHI], depth=depth, seed=seed, **kw)


@dataclass
class Truth:
    snv_ids: list[str]
    nodes: list[int]
    phi: list[list[float]]  # per SNV, per sample
    parents: list[int] = field(default_factory=list)


def simulate(spec: SimSpec) -> tuple[list[SnvObservation], Truth]:
    rng = np.random.default_rng(spec.seed)
    geno = DEFAULT_GENOTYPES if spec.mu_v == 0.5 else (GenotypeState("AB", spec.mu_v, 1.0),)
    data, nodes, phis = [], [], []
    for k, node_phi in enumerate(spec.phi):
        count = int(rng.poisson(spec.snvs_per_node)) if spec.poisson_counts else spec.snvs_per_node
        for j in range(count):
            a, d = [], []
            for t, f in enumerate(node_phi):
                depth = max(1, int(rng.poisson(spec.depth))) if spec.poisson_depth else spec.depth
                p = success_probability(f, spec.mu_r, spec.mu_v)
                a.append(int(rng.binomial(depth, p)))
                d.append(depth)
            snv_id = f"n{k}_s{j}"
            data.append(SnvObservation(snv_id, tuple(a), tuple(d), (spec.mu_r,) * len(a), geno, spec.sample_ids))
            nodes.append(k)
            phis.append([float(f) for f in node_phi])
    return data, Truth([o.snv_id for o in data], nodes, phis, list(spec.parents))


@dataclass
class Score:
    pearson: float
    ari: float
    topology_match: bool
    pearson_defined: bool = True


def _pearson(x, y) -> tuple[float, bool]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan, False
    return float(pearsonr(x, y)[0]), True


def score(inferred, truth: Truth, labels=None) -> Score:
    """Compare a posterior sample with the simulation truth.

    ``labels`` overrides the sample's own node labels for the Rand index
    (e.g. a correlation-clustering summary).
    """
    inferred_phi = [inferred.phi[k] for k in inferred.assignments]
    r, ok = _pearson(inferred_phi, truth.phi)
    ari = float(adjusted_rand_score(truth.nodes, labels if labels is not None else inferred.assignments))
    return Score(r, ari, topology_matches(inferred, truth), ok)


def topology_matches(inferred, truth: Truth) -> bool:
    """Lineage parent maps agree after matching inferred nodes to true nodes by majority."""
    lin = inferred.lineage_parents()
    match = {}
    for k in lin:
        members = [truth.nodes[i] for i, z in enumerate(inferred.assignments) if z == k]
        vals, counts = np.unique(members, return_counts=True)
        match[k] = int(vals[np.argmax(counts)])
    if sorted(match.values()) != sorted(set(truth.nodes)):
        return False
    for k, p in lin.items():
        true_parent = truth.parents[match[k]]
        if (p == -1) != (true_parent == -1):
            return False
        if p != -1 and match[p] != true_parent:
            return False
    return True
