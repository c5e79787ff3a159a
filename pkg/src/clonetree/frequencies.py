"""Constraint-respecting lineage frequencies via auxiliary node weights.

Each node ``v`` owns a weight ``eta_v`` per sample with ``sum_v eta_v = 1``;
its population frequency is its own weight plus all descendants' weights,
so a parent always carries at least the summed frequency of its children.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .tssb import Node, TssbTree


@dataclass
class MhConfig:
    sigma: float = 100.0
    iterations: int = 5000
    reinit: bool = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


@dataclass
class FrequencyState:
    eta: dict[Node, np.ndarray]
    phi: dict[Node, np.ndarray]
    accepted: int = 0
    proposed: int = 0
    log_likelihood: float = float("nan")


def _state_of(tree: TssbTree) -> FrequencyState:
    nodes = tree.nodes()
    return FrequencyState({n: n.eta.copy() for n in nodes}, {n: n.phi.copy() for n in nodes})


def init_frequencies(tree: TssbTree, rng) -> FrequencyState:
    """Random (eta, phi) satisfying every tree constraint, by breadth-first splitting.

    The root takes a uniform share of the unit mass; each node's residual is
    split among its children by normalized uniforms. A leaf keeps its whole
    frequency as weight so the weights sum to one.
    """
    s = tree.n_samples
    root = tree.root
    root.phi = np.ones(s)
    root.eta = root.phi * rng.uniform(size=s)
    queue = deque([root])
    while queue:
        v = queue.popleft()
        if not v.children:
            v.eta = v.phi.copy()
            continue
        m = v.phi - v.eta
        r = np.array([rng.uniform(size=s) for _ in v.children])
        r = m * r / r.sum(axis=0)
        for c, rc in zip(v.children, r):
            c.phi = rc
            c.eta = c.phi * rng.uniform(size=s)
            queue.append(c)
    return _state_of(tree)


def eta_to_phi(tree: TssbTree, eta: dict[Node, np.ndarray]) -> dict[Node, np.ndarray]:
    """Frequencies from weights by one post-order accumulation."""
    phi = {}
    for node in reversed(tree.nodes()):
        acc = np.array(eta[node], dtype=float)
        for c in node.children:
            acc = acc + phi[c]
        phi[node] = acc
    return phi


def pack_tree(tree: TssbTree):
    """Breadth-first node list, parent columns, (S, K) weights, SNV -> column map."""
    nodes = tree.nodes()
    col = {n: k for k, n in enumerate(nodes)}
    parent = np.array([-1] + [col[n.parent] for n in nodes[1:]], dtype=np.int64)
    eta = np.ascontiguousarray(np.array([n.eta for n in nodes], dtype=float).reshape(len(nodes), -1).T)
    z = np.array([col[n] for n in tree.assignments], dtype=np.int64) if tree.assignments else np.zeros(0, np.int64)
    return nodes, parent, eta, z


def _store(tree: TssbTree, nodes: list[Node], eta: np.ndarray):
    for k, n in enumerate(nodes):
        n.eta = eta[:, k].copy()
    phi = eta_to_phi(tree, {n: n.eta for n in nodes})
    for n in nodes:
        n.phi = phi[n]


def mh_update_eta_multi(tree: TssbTree, table, config: MhConfig, rng, beta: float = 1.0) -> FrequencyState:
    """Joint Dirichlet-proposal MH over every sample's weights.

    Proposals ``eta'^t ~ Dirichlet(sigma * eta^t + 1)`` are drawn per sample
    and accepted or rejected together on the summed log ratio. With
    ``config.reinit`` the chain restarts from a fresh constraint-satisfying
    draw before its ``iterations`` steps. The weight
    prior is flat over the simplex, so only likelihood and Hastings terms
    enter. ``table`` is the packed likelihood (see ``likelihood.pack``);
    ``beta`` < 1 tempers it.
    """
    if any(a is None for a in tree.assignments):
        raise ValueError("every SNV must be assigned before updating frequencies")
    if config.reinit:
        init_frequencies(tree, rng)
    nodes, parent, eta, z = pack_tree(tree)
    seed = int(rng.integers(0, 2**63))
    accepted, llh = table.mh(z, parent, eta, float(config.sigma), int(config.iterations), seed, float(beta))
    _store(tree, nodes, eta)
    state = _state_of(tree)
    state.accepted = int(accepted)
    state.proposed = int(config.iterations)
    state.log_likelihood = float(llh)
    return state


def mh_update_eta(tree: TssbTree, table, config: MhConfig, rng, beta: float = 1.0) -> FrequencyState:
    """Single-sample MH update of the node weights."""
    if tree.n_samples != 1:
        raise ValueError("mh_update_eta expects one sample; use mh_update_eta_multi")
    return mh_update_eta_multi(tree, table, config, rng, beta)


def constraint_violations(tree: TssbTree, tol: float = 1e-9) -> list[str]:
    """Human-readable list of broken frequency invariants (empty when valid)."""
    problems = []
    nodes = tree.nodes()
    total = np.sum([n.eta for n in nodes], axis=0)
    if np.any(np.abs(total - 1.0) > tol):
        problems.append(f"sum of eta = {total}")
    if np.any(np.abs(tree.root.phi - 1.0) > tol):
        problems.append(f"root phi = {tree.root.phi}")
    for n in nodes:
        if np.any(n.eta < -tol):
            problems.append(f"{n!r}: negative eta")
        kids = np.sum([c.phi for c in n.children], axis=0) if n.children else 0.0
        if np.any(np.abs(n.phi - (n.eta + kids)) > tol):
            problems.append(f"{n!r}: phi != eta + children")
        if np.any(kids > n.phi + tol):
            problems.append(f"{n!r}: children exceed parent")
    return problems
