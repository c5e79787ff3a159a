"""Tree-structured stick-breaking prior with lazily instantiated nodes.

Each node ``e`` carries a stick ``nu`` (share of mass kept by the node
rather than passed to its subtree) and, below the root, a stick ``psi``
(share of the parent's subtree mass taken by this child among its later
siblings). Node mass is

    omega_e = nu_e * prod_{e' < e} (1 - nu_e') * branch_e'

where ``branch`` is the size-biased sibling product built from ``psi``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import betaln, expit

STICK_EPS = 1e-12
_ONE_MINUS = 1.0 - 2.0**-53


def _boundbeta(rng, a, b):
    return float(np.clip(rng.beta(a, b), STICK_EPS, 1.0 - STICK_EPS))


@dataclass
class Hyperparams:
    """Stick-breaking concentration parameters; ``alpha(j) = lam**j * alpha0``."""

    alpha0: float = 25.0
    gamma: float = 1.0
    lam: float = 0.25
    bounds: dict = field(
        default_factory=lambda: {"alpha0": (1.0, 50.0), "gamma": (1.0, 8.0), "lam": (0.25, 1.0)}
    )

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if not 0 < lo <= hi:
                raise ValueError(f"bad bounds for {name}: {(lo, hi)}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lam must lie in (0, 1]")
        if self.alpha0 <= 0 or self.gamma <= 0:
            raise ValueError("alpha0 and gamma must be positive")

    def alpha(self, depth: int) -> float:
        return self.lam**depth * self.alpha0


class Node:
    __slots__ = ("parent", "children", "nu", "psi", "eta", "phi", "snvs", "depth")

    def __init__(self, parent, nu, psi, n_samples):
        self.parent = parent
        self.children: list[Node] = []
        self.nu = nu
        self.psi = psi
        self.eta = np.zeros(n_samples)
        self.phi = np.zeros(n_samples)
        self.snvs: set[int] = set()
        self.depth = 0 if parent is None else parent.depth + 1

    @property
    def path(self) -> tuple[int, ...]:
        """1-based child indices from the root; ``()`` is the root."""
        out = []
        node = self
        while node.parent is not None:
            out.append(node.parent.children.index(node) + 1)
            node = node.parent
        return tuple(reversed(out))

    def __repr__(self):
        return f"Node{self.path}"


class TssbTree:
    """A finite instantiation of the infinite stick-breaking tree.

    ``assignments[i]`` is the node holding SNV ``i`` (or ``None``). With
    ``root_data=False`` the root is the wild-type population: its stick is
    pinned at 0 so it never receives SNVs.
    """

    def __init__(self, hyper: Hyperparams, n_samples: int, rng, max_depth: int = 15,
                 max_branch: int = 20, n_snvs: int = 0, root_data: bool = True):
        self.hyper = hyper
        self.n_samples = n_samples
        self.max_depth = max_depth
        self.max_branch = max_branch
        self.root_data = root_data
        nu = _boundbeta(rng, 1.0, hyper.alpha(0)) if root_data else 0.0
        self.root = Node(None, nu, 1.0, n_samples)
        self.root.eta[:] = 1.0
        self.root.phi[:] = 1.0
        self.assignments: list[Node | None] = [None] * n_snvs

    def nodes(self) -> list[Node]:
        """Nodes in breadth-first order, children in sibling order."""
        out = []
        queue = deque([self.root])
        while queue:
            node = queue.popleft()
            out.append(node)
            queue.extend(node.children)
        return out

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes())

    def get(self, index: tuple[int, ...]) -> Node:
        node = self.root
        for e in index:
            if e < 1 or e > len(node.children):
                raise KeyError(f"node {index} is not instantiated")
            node = node.children[e - 1]
        return node

    def assign(self, i: int, node: Node):
        old = self.assignments[i]
        if old is not None:
            old.snvs.discard(i)
        node.snvs.add(i)
        self.assignments[i] = node

    def spawn_child(self, parent: Node, rng) -> Node:
        """Append a child with prior sticks; carve its ``eta`` out of the parent's."""
        depth = parent.depth + 1
        nu = 1.0 if depth >= self.max_depth else _boundbeta(rng, 1.0, self.hyper.alpha(depth))
        child = Node(parent, nu, _boundbeta(rng, 1.0, self.hyper.gamma), self.n_samples)
        if self.n_samples:
            share = rng.uniform(0.0, 1.0, self.n_samples) * parent.eta
            child.eta = share
            child.phi = share.copy()
            parent.eta = parent.eta - share
        parent.children.append(child)
        return child


def _sibling_edges(node: Node) -> list[float]:
    edges = []
    rest = 1.0
    for child in node.children:
        rest *= 1.0 - child.psi
        edges.append(1.0 - rest)
    return edges


def node_masses(tree: TssbTree) -> tuple[dict[Node, float], float]:
    """Mass of every instantiated node, plus the mass left to uninstantiated ones."""
    masses = {}
    remainder = 0.0
    stack = [(tree.root, 1.0)]
    while stack:
        node, reach = stack.pop()
        masses[node] = reach * node.nu
        below = reach * (1.0 - node.nu)
        rest = 1.0
        for child in node.children:
            stack.append((child, below * rest * child.psi))
            rest *= 1.0 - child.psi
        remainder += below * rest
    return masses, remainder


def node_mass(tree: TssbTree, index: tuple[int, ...]) -> float:
    node = tree.root
    reach = 1.0
    for e in index:
        if e < 1 or e > len(node.children):
            raise KeyError(f"node {index} is not instantiated")
        reach *= 1.0 - node.nu
        for sib in node.children[: e - 1]:
            reach *= 1.0 - sib.psi
        node = node.children[e - 1]
        reach *= node.psi
    return reach * node.nu


def find_node(tree: TssbTree, u: float, rng) -> Node:
    """Map ``u`` in [0, 1) through the nested stick partition, growing the tree as needed."""
    node = tree.root
    while True:
        if u < node.nu:
            return node
        u = (u - node.nu) / (1.0 - node.nu)
        edges = _sibling_edges(node)
        while (not edges or u >= edges[-1]) and len(node.children) < tree.max_branch:
            tree.spawn_child(node, rng)
            edges = _sibling_edges(node)
        idx = next((j for j, e in enumerate(edges) if u < e), len(edges) - 1)
        lo = edges[idx - 1] if idx else 0.0
        u = min((u - lo) / (edges[idx] - lo), _ONE_MINUS)
        node = node.children[idx]


def _subtree_counts(tree: TssbTree) -> dict[Node, int]:
    counts = {}
    for node in reversed(tree.nodes()):
        counts[node] = len(node.snvs) + sum(counts[c] for c in node.children)
    return counts


def resample_sticks(tree: TssbTree, hyper: Hyperparams, rng) -> TssbTree:
    """Draw every stick from its Beta conditional given SNV counts."""
    counts = _subtree_counts(tree)
    for node in tree.nodes():
        own = len(node.snvs)
        if node is tree.root and not tree.root_data:
            node.nu = 0.0
        elif node.depth >= tree.max_depth:
            node.nu = 1.0
        else:
            node.nu = _boundbeta(rng, 1.0 + own, hyper.alpha(node.depth) + counts[node] - own)
        later = sum(counts[c] for c in node.children)
        for child in node.children:
            later -= counts[child]
            child.psi = _boundbeta(rng, 1.0 + counts[child], hyper.gamma + later)
    return tree


def _slice_bounded(logf, x0, lo, hi, rng, max_steps=200):
    # shrinkage slice sampler started from the whole bounded interval
    y = logf(x0) + np.log(rng.uniform())
    for _ in range(max_steps):
        x = rng.uniform(lo, hi)
        if logf(x) > y:
            return x
        if x < x0:
            lo = x
        else:
            hi = x
    return x0


def resample_hyperparams(tree: TssbTree, hyper: Hyperparams, rng) -> Hyperparams:
    """Slice-sample (alpha0, lam, gamma) under uniform priors on their bounds."""
    nodes = tree.nodes()
    nu_terms = [
        (n.depth, np.log1p(-n.nu))
        for n in nodes
        if n.depth < tree.max_depth and (tree.root_data or n is not tree.root)
    ]
    psi_terms = [np.log1p(-c.psi) for n in nodes for c in n.children]
    depths = np.array([d for d, _ in nu_terms], dtype=float)
    log1m_nu = np.array([v for _, v in nu_terms])
    log1m_psi = np.array(psi_terms)

    def ll_alpha(alpha0, lam):
        alphas = lam**depths * alpha0
        return float(np.sum(np.log(alphas) + (alphas - 1.0) * log1m_nu))

    def ll_gamma(gamma):
        return float(np.sum(np.log(gamma) + (gamma - 1.0) * log1m_psi))

    b = hyper.bounds
    alpha0 = _slice_bounded(lambda x: ll_alpha(x, hyper.lam), hyper.alpha0, *b["alpha0"], rng)
    lam = _slice_bounded(lambda x: ll_alpha(alpha0, x), hyper.lam, *b["lam"], rng)
    gamma = _slice_bounded(ll_gamma, hyper.gamma, *b["gamma"], rng)
    hyper.alpha0, hyper.lam, hyper.gamma = alpha0, lam, gamma
    return hyper


def cull(tree: TssbTree) -> TssbTree:
    """Drop trailing empty children (repeatedly), returning their ``eta`` to the parent.

    An empty child followed by an occupied sibling stays: it fixes that
    sibling's position in the stick order. After culling, every node's last
    child has data somewhere below it.
    """

    def prune(node):
        for child in node.children:
            prune(child)
        while node.children and not node.children[-1].children and not node.children[-1].snvs:
            node.eta = node.eta + node.children.pop().eta

    prune(tree.root)
    return tree


def _subtree(node: Node) -> list[Node]:
    out, stack = [], [node]
    while stack:
        v = stack.pop()
        out.append(v)
        stack.extend(v.children)
    return out


def log_collapsed_prior(tree: TssbTree) -> float:
    """log p(assignments | instantiated tree) with every stick integrated out.

    Each node contributes a Beta-function ratio for its ``nu`` stick and one
    per child for the ``psi`` sticks; empty subtrees contribute nothing.
    """
    h = tree.hyper
    counts = _subtree_counts(tree)
    total = 0.0
    for v in tree.nodes():
        own = len(v.snvs)
        if v.depth < tree.max_depth and (tree.root_data or v is not tree.root):
            a = h.alpha(v.depth)
            total += betaln(1.0 + own, a + counts[v] - own) - betaln(1.0, a)
        later = counts[v] - own
        for c in v.children:
            later -= counts[c]
            total += betaln(1.0 + counts[c], h.gamma + later) - betaln(1.0, h.gamma)
    return total


def _is_culled(tree: TssbTree) -> bool:
    counts = _subtree_counts(tree)
    return all(counts[v.children[-1]] for v in counts if v.children)


def _parents(tree: TssbTree) -> list[Node]:
    return [v for v in tree.nodes() if v.children]


def _removable(tree: TssbTree) -> list[Node]:
    return [v for v in tree.nodes() if v.parent is not None and not v.snvs and v.children]


def _too_deep(tree, sub, shift) -> bool:
    return max(v.depth for v in sub) + max(shift, 0) >= tree.max_depth


def _shift(sub, d):
    for v in sub:
        v.depth += d


def _runs(m: int) -> int:
    return m * (m + 1) // 2


def _hang(p: Node, x: Node, i: int, j: int):
    # children i..j of p move below x, which takes their place
    x.children = p.children[i:j + 1]
    p.children[i:j + 1] = [x]
    for c in x.children:
        c.parent = x


def _lift(x: Node) -> int:
    p = x.parent
    i = p.children.index(x)
    p.children[i:i + 1] = x.children
    for c in x.children:
        c.parent = p
    return i


def insert_or_remove(tree: TssbTree, rng) -> bool:
    """Metropolis-Hastings move adding or removing one empty internal node.

    Insertion picks a node ``p`` and a contiguous run of its children
    uniformly and hangs the run below a new empty node ``x`` in its place.
    ``x`` carves its weight from ``p``, so every frequency carrying data is
    unchanged and the likelihood cancels. Removal is the exact reverse: an
    empty non-root node is dropped and its children take its slot. Sticks
    are integrated out, so callers must redraw them (``resample_sticks``).
    """
    before = log_collapsed_prior(tree)
    if rng.uniform() < 0.5:
        parents = _parents(tree)
        if not parents:
            return False
        p = parents[int(rng.integers(len(parents)))]
        m = len(p.children)
        k = int(rng.integers(_runs(m)))
        i = 0
        while k >= m - i:
            k -= m - i
            i += 1
        j = i + k
        sub = [v for c in p.children[i:j + 1] for v in _subtree(c)]
        if _too_deep(tree, sub, +1) or not any(v.snvs for v in _subtree(p.children[j])):
            return False
        share = rng.uniform(0.0, 1.0, tree.n_samples) * p.eta
        log_q = np.log(len(parents)) + np.log(_runs(m))
        x = Node(p, 0.5, 0.5, tree.n_samples)
        _hang(p, x, i, j)
        _shift(sub, +1)
        log_q -= np.log(len(_removable(tree)))
        if np.log(rng.uniform()) < log_collapsed_prior(tree) - before + log_q:
            x.eta = share
            x.phi = share + np.sum([c.phi for c in x.children], axis=0)
            p.eta = p.eta - share
            return True
        _lift(x)
        _shift(sub, -1)
        return False

    removable = _removable(tree)
    if not removable:
        return False
    x = removable[int(rng.integers(len(removable)))]
    p = x.parent
    sub = [v for c in x.children for v in _subtree(c)]
    if _too_deep(tree, sub, 0):
        return False
    log_q = np.log(len(removable))
    n_kids = len(x.children)
    if len(p.children) - 1 + n_kids > tree.max_branch:
        return False
    i = _lift(x)
    _shift(sub, -1)
    log_q -= np.log(len(_parents(tree))) + np.log(_runs(len(p.children)))
    if np.log(rng.uniform()) < log_collapsed_prior(tree) - before + log_q:
        p.eta = p.eta + x.eta
        return True
    _hang(p, x, i, i + n_kids - 1)
    _shift(sub, +1)
    return False


def regraft(tree: TssbTree, rng) -> bool:
    """Metropolis-Hastings move of one subtree to a new parent, keeping every frequency.

    The new parent gives up the moved subtree's ``phi`` from its own weight
    and the old parent takes it back, so the likelihood is unchanged and the
    (stick-collapsed) prior alone decides. The subtree lands in a uniformly
    chosen sibling slot. Sticks must be redrawn afterwards.
    """
    nodes = tree.nodes()
    if len(nodes) < 3:
        return False
    s = nodes[1 + int(rng.integers(len(nodes) - 1))]
    sub = _subtree(s)
    inside = set(map(id, sub))
    old = s.parent
    targets = [n for n in nodes if id(n) not in inside and n is not old]
    if not targets:
        return False
    new = targets[int(rng.integers(len(targets)))]
    shift = new.depth + 1 - s.depth
    if _too_deep(tree, sub, shift) or _too_deep(tree, sub, 0):
        return False
    if np.any(new.eta < s.phi) or len(new.children) >= tree.max_branch:
        return False
    slot = int(rng.integers(len(new.children) + 1))
    old_slot = old.children.index(s)
    log_q = np.log(len(new.children) + 1) - np.log(len(old.children))
    before = log_collapsed_prior(tree)

    def move(src, dst, at, d):
        src.children.remove(s)
        dst.children.insert(at, s)
        s.parent = dst
        _shift(sub, d)

    move(old, new, slot, shift)
    if _is_culled(tree) and np.log(rng.uniform()) < log_collapsed_prior(tree) - before + log_q:
        old.eta = old.eta + s.phi
        new.eta = new.eta - s.phi
        return True
    move(new, old, old_slot, -shift)
    return False


_SPLIT_CLIP = 0.01


def _split_candidates(tree: TssbTree) -> list[Node]:
    return [v for v in tree.nodes() if v.parent is not None and v.snvs]


def _merge_candidates(tree: TssbTree) -> list[Node]:
    return [v for v in tree.nodes() if v.parent is not None and v.snvs and len(v.children) == 1]


def _upward_probs(table, snvs, upper, lower, beta):
    # chance each SNV is proposed for the upper node, clipped so every split stays reachable
    ids = sorted(snvs)
    gain = np.array([beta * (table.snv_loglik(i, upper.phi) - table.snv_loglik(i, lower.phi)) for i in ids])
    return ids, gain, np.clip(expit(gain), _SPLIT_CLIP, 1.0 - _SPLIT_CLIP)


def split_or_merge(tree: TssbTree, table, rng, beta: float = 1.0) -> bool:
    """Likelihood-guided Metropolis-Hastings move between a node and a new parent.

    Split picks an occupied node ``a``, slips a new node ``x`` in between
    ``a`` and its parent (weight carved from the parent, as in
    ``insert_or_remove``) and sends each of ``a``'s SNVs up to ``x`` with a
    probability tilted by the likelihood. Merge folds a one-child occupied
    node back into that child. New children only ever carve weight from
    their parent, so this is the way a cluster that should sit above its
    current node gets out. Sticks must be redrawn afterwards.
    """
    before = log_collapsed_prior(tree)
    if rng.uniform() < 0.5:
        cands = _split_candidates(tree)
        if not cands:
            return False
        a = cands[int(rng.integers(len(cands)))]
        p = a.parent
        sub = _subtree(a)
        if _too_deep(tree, sub, +1):
            return False
        share = rng.uniform(0.0, 1.0, tree.n_samples) * p.eta
        x = Node(p, 0.5, 0.5, tree.n_samples)
        x.eta, x.phi = share, share + a.phi
        ids, gain, q = _upward_probs(table, a.snvs, x, a, beta)
        up = rng.uniform(size=len(ids)) < q
        if not up.any():
            return False
        log_q = np.log(len(cands)) - np.sum(np.where(up, np.log(q), np.log1p(-q)))
        i = p.children.index(a)
        _hang(p, x, i, i)
        _shift(sub, +1)
        moved = [k for k, u in zip(ids, up) if u]
        for k in moved:
            tree.assign(k, x)
        log_q -= np.log(len(_merge_candidates(tree)))
        if _is_culled(tree) and np.log(rng.uniform()) < gain[up].sum() + log_collapsed_prior(tree) - before + log_q:
            p.eta = p.eta - share
            return True
        for k in moved:
            tree.assign(k, a)
        _lift(x)
        _shift(sub, -1)
        return False

    cands = _merge_candidates(tree)
    if not cands:
        return False
    x = cands[int(rng.integers(len(cands)))]
    a, p = x.children[0], x.parent
    ids, gain, q = _upward_probs(table, x.snvs | a.snvs, x, a, beta)
    up = np.array([x is tree.assignments[k] for k in ids])
    log_q = np.log(len(cands)) + np.sum(np.where(up, np.log(q), np.log1p(-q)))
    moved = sorted(x.snvs)
    sub = _subtree(a)
    i = _lift(x)
    _shift(sub, -1)
    for k in moved:
        tree.assign(k, a)
    log_q -= np.log(len(_split_candidates(tree)))
    if np.log(rng.uniform()) < -gain[up].sum() + log_collapsed_prior(tree) - before + log_q:
        p.eta = p.eta + x.eta
        return True
    for k in moved:
        tree.assign(k, x)
    _hang(p, x, i, i)
    _shift(sub, +1)
    return False
