"""Full MCMC over trees, assignments, sticks, hyperparameters and frequencies."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .frequencies import MhConfig, init_frequencies, mh_update_eta_multi
from .likelihood import SnvObservation, pack
from .tssb import (Hyperparams, TssbTree, cull, find_node, insert_or_remove, regraft, resample_hyperparams,
                   resample_sticks, split_or_merge)

logger = logging.getLogger(__name__)

DEFAULT_BOUNDS = {"alpha0": (1.0, 50.0), "gamma": (1.0, 8.0), "lam": (0.25, 1.0)}


@dataclass
class ChainConfig:
    iterations: int = 5000
    burn_in: int = 100
    mh: MhConfig = field(default_factory=MhConfig)
    seed: int = 0
    chains: int = 1
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    max_depth: int = 15
    max_branch: int = 20
    root_data: bool = False
    anneal: int | None = None
    beta0: float = 1e-3
    init: str = "single"
    structure_moves: int = 10

    def __post_init__(self):
        if self.iterations < 0 or self.burn_in < 0:
            raise ValueError("iterations and burn_in must be non-negative")
        if self.iterations and self.burn_in >= self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        if self.chains < 1:
            raise ValueError("need at least one chain")
        if self.anneal is None:
            self.anneal = 0
        if not 0 <= self.anneal <= max(self.burn_in, 0):
            raise ValueError("anneal must lie within the burn-in")
        if not 0.0 < self.beta0 <= 1.0:
            raise ValueError("beta0 must lie in (0, 1]")

    def beta(self, iteration: int) -> float:
        """Likelihood exponent: geometric ramp from beta0 to 1 over the first ``anneal`` iterations."""
        if iteration >= self.anneal:
            return 1.0
        return self.beta0 ** (1.0 - iteration / self.anneal)


@dataclass
class PosteriorSample:
    """One recorded chain state.

    Only the wild-type root and occupied nodes are stored, numbered so that
    parents precede children; ``parents[0] == -1`` is the root. ``phi`` and
    ``eta`` are indexed ``[node][sample]``.
    """

    iteration: int
    parents: list[int]
    assignments: list[int]
    phi: list[list[float]]
    eta: list[list[float]]
    cdllh: float
    burn_in: bool = False
    hyper: dict = field(default_factory=dict)
    mh_accepted: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorSample":
        return cls(**d)

    @property
    def n_nodes(self) -> int:
        return len(self.parents)

    def occupied(self) -> list[int]:
        return sorted(set(self.assignments))

    def lineage_parents(self) -> dict[int, int]:
        """Nearest occupied ancestor of every occupied node (-1 above the top)."""
        occ = set(self.assignments)
        out = {}
        for k in occ:
            p = self.parents[k]
            while p != -1 and p not in occ:
                p = self.parents[p]
            out[k] = p
        return out

    def lineage_genotypes(self) -> dict[int, frozenset[int]]:
        """Cumulative SNV set (as SNV indices) of every occupied node."""
        own: dict[int, set[int]] = {}
        for i, k in enumerate(self.assignments):
            own.setdefault(k, set()).add(i)
        lin = self.lineage_parents()
        out = {}
        for k in own:
            acc = set(own[k])
            p = lin[k]
            while p != -1:
                acc |= own[p]
                p = lin[p]
            out[k] = frozenset(acc)
        return out

    def is_chain(self) -> bool:
        lin = self.lineage_parents()
        kids: dict[int, int] = {}
        for k, p in lin.items():
            kids[p] = kids.get(p, 0) + 1
        return all(c == 1 for c in kids.values())


def _snapshot(tree: TssbTree, iteration: int, cdllh: float, burn_in: bool, accepted: int) -> PosteriorSample:
    # keep the root and occupied nodes; an empty node's weight folds into its
    # nearest kept ancestor, which leaves every kept frequency unchanged
    kept, eta = [], {}
    for n in tree.nodes():
        if n is tree.root or n.snvs:
            kept.append(n)
            eta[n] = n.eta.copy()
        else:
            a = n.parent
            while not (a is tree.root or a.snvs):
                a = a.parent
            eta[a] = eta[a] + n.eta
    col = {n: k for k, n in enumerate(kept)}

    def kept_parent(n):
        a = n.parent
        while a not in col:
            a = a.parent
        return col[a]

    return PosteriorSample(
        iteration=iteration,
        parents=[-1] + [kept_parent(n) for n in kept[1:]],
        assignments=[col[n] for n in tree.assignments],
        phi=[[float(x) for x in n.phi] for n in kept],
        eta=[[float(x) for x in eta[n]] for n in kept],
        cdllh=float(cdllh),
        burn_in=burn_in,
        hyper={"alpha0": tree.hyper.alpha0, "gamma": tree.hyper.gamma, "lam": tree.hyper.lam},
        mh_accepted=accepted,
    )


def resample_assignments(tree: TssbTree, table, rng, max_steps: int = 500, beta: float = 1.0) -> TssbTree:
    """Slice-sample each SNV's node over the stick partition of [0, 1).

    The slice is on the SNV's likelihood; the uniform position ``u`` carries
    the node-mass prior exactly. New nodes are instantiated on demand with
    weights carved from their parent's.
    """
    for i in range(len(tree.assignments)):
        old = tree.assignments[i]
        old_path = old.path
        level = beta * table.snv_loglik(i, old.phi) + math.log(rng.uniform())
        lo, hi = 0.0, 1.0
        for _ in range(max_steps):
            u = rng.uniform(lo, hi)
            node = find_node(tree, u, rng)
            if node is old or beta * table.snv_loglik(i, node.phi) > level:
                tree.assign(i, node)
                break
            if node.path < old_path:
                lo = u
            else:
                hi = u
    return tree


def validate_data(data: Sequence[SnvObservation]) -> int:
    if not data:
        raise ValueError("no SNVs to analyse")
    s = data[0].n_samples
    for obs in data:
        if obs.n_samples != s:
            raise ValueError(f"SNV {obs.snv_id} has {obs.n_samples} samples, expected {s}")
    return s


def run_chain(data: Sequence[SnvObservation], config: ChainConfig, seed=None,
              callback: Callable[[PosteriorSample], None] | None = None) -> list[PosteriorSample]:
    """Run one chain and return every iteration's sample, burn-in flagged.

    Per iteration: assignments, cull, sticks, hyperparameters, frequencies.
    During the first ``config.anneal`` (burn-in) iterations the likelihood is
    tempered so the tree can reorganize; recorded ``cdllh`` is always untempered.
    """
    n_samples = validate_data(data)
    if config.iterations == 0:
        return []
    rng = np.random.default_rng(config.seed if seed is None else seed)
    table = pack(data)
    hyper = Hyperparams(bounds=dict(config.bounds))
    hyper.alpha0 = min(max(hyper.alpha0, hyper.bounds["alpha0"][0]), hyper.bounds["alpha0"][1])
    hyper.gamma = min(max(hyper.gamma, hyper.bounds["gamma"][0]), hyper.bounds["gamma"][1])
    hyper.lam = min(max(hyper.lam, hyper.bounds["lam"][0]), hyper.bounds["lam"][1])
    tree = TssbTree(hyper, n_samples, rng, config.max_depth, config.max_branch,
                    n_snvs=len(data), root_data=config.root_data)
    if config.init == "prior":
        for i in range(len(data)):
            tree.assign(i, find_node(tree, rng.uniform(), rng))
        cull(tree)
    else:
        start = tree.spawn_child(tree.root, rng)
        for i in range(len(data)):
            tree.assign(i, start)
    init_frequencies(tree, rng)

    samples = []
    for it in range(config.iterations):
        beta = config.beta(it)
        resample_assignments(tree, table, rng, beta=beta)
        cull(tree)
        for _ in range(config.structure_moves):
            insert_or_remove(tree, rng)
            regraft(tree, rng)
            split_or_merge(tree, table, rng, beta)
        resample_sticks(tree, hyper, rng)
        resample_hyperparams(tree, hyper, rng)
        state = mh_update_eta_multi(tree, table, config.mh, rng, beta)
        sample = _snapshot(tree, it, state.log_likelihood, it < config.burn_in, state.accepted)
        samples.append(sample)
        if callback is not None:
            callback(sample)
        if (it + 1) % 500 == 0:
            logger.info("iteration %d: %d nodes, cdllh %.3f", it + 1, sample.n_nodes, sample.cdllh)
    return samples


def chain_seeds(seed: int, chains: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(chains)


def run_chains(data, config: ChainConfig, jobs: int = 1) -> list[list[PosteriorSample]]:
    seeds = chain_seeds(config.seed, config.chains)
    if jobs <= 1 or config.chains == 1:
        return [run_chain(data, config, seed=s) for s in seeds]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_chain, data, config, s) for s in seeds]
        return [f.result() for f in futures]


def select_chain(chains: list[list[PosteriorSample]]) -> int:
    """Index of the chain with the highest mean post-burn-in log-likelihood."""
    def score(samples):
        post = [s.cdllh for s in samples if not s.burn_in]
        return float(np.mean(post)) if post else -math.inf

    scores = [score(c) for c in chains]
    return int(np.argmax(scores))


def autocorrelation(trace: Sequence[float], max_lag: int) -> list[float]:
    """Normalized empirical autocorrelation for lags 0..max_lag."""
    x = np.asarray(trace, dtype=float)
    if len(x) <= max_lag:
        raise ValueError("trace must be longer than max_lag")
    x = x - x.mean()
    var = float(np.dot(x, x))
    if var == 0.0:
        return [1.0] + [0.0] * max_lag
    return [float(np.dot(x[: len(x) - k], x[k:]) / var) for k in range(max_lag + 1)]


def best_sample(samples: Sequence[PosteriorSample]) -> PosteriorSample:
    """Post-burn-in sample with the highest log-likelihood; earliest wins ties."""
    best = None
    for s in samples:
        if s.burn_in:
            continue
        if best is None or s.cdllh > best.cdllh:
            best = s
    if best is None:
        raise ValueError("no post-burn-in samples")
    return best
