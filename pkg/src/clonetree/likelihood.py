"""Read-count observation model with genotypes marginalized analytically."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import LikelihoodTable

DEFAULT_MU_R = 0.999
DEFAULT_ERROR_RATE = 1.0 - DEFAULT_MU_R


def mu_v_from_label(label: str, error_rate: float = DEFAULT_ERROR_RATE) -> float:
    """Reference-allele fraction of a variant genotype, floored at the error rate.

    >>> mu_v_from_label("AB")
    0.5
    >>> mu_v_from_label("B")
    0.001
    """
    if not label:
        raise ValueError("empty genotype label")
    n_ref = label.count("A")
    return max(n_ref / len(label), error_rate)


@dataclass(frozen=True)
class GenotypeState:
    label: str
    mu_v: float
    delta: float = 1.0

    def __post_init__(self):
        if not self.label or set(self.label) - {"A", "B"}:
            raise ValueError(f"genotype label must be over {{A,B}}: {self.label!r}")
        if "B" not in self.label:
            raise ValueError(f"variant genotype must carry a B allele: {self.label!r}")
        if not 0.0 <= self.mu_v <= 1.0:
            raise ValueError(f"mu_v out of [0,1]: {self.mu_v}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive: {self.delta}")

    @classmethod
    def from_label(cls, label: str, delta: float = 1.0, error_rate: float = DEFAULT_ERROR_RATE):
        return cls(label, mu_v_from_label(label, error_rate), delta)


DEFAULT_GENOTYPES = (GenotypeState.from_label("AB", 1.0),)


@dataclass(frozen=True)
class SnvObservation:
    """Read counts for one SNV across ``S`` samples.

    ``a`` counts reference reads, ``d`` total depth. Genotype states are a
    property of the SNV and shared by every sample.
    """

    snv_id: str
    a: tuple[int, ...]
    d: tuple[int, ...]
    mu_r: tuple[float, ...] = ()
    genotype_states: tuple[GenotypeState, ...] = DEFAULT_GENOTYPES
    sample_ids: tuple[str, ...] = field(default=(), compare=True)

    def __post_init__(self):
        a = tuple(int(x) for x in self.a)
        d = tuple(int(x) for x in self.d)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "d", d)
        if len(a) != len(d) or not a:
            raise ValueError(f"{self.snv_id}: need matching, non-empty a and d")
        mu_r = tuple(float(m) for m in self.mu_r) or (DEFAULT_MU_R,) * len(a)
        object.__setattr__(self, "mu_r", mu_r)
        object.__setattr__(self, "genotype_states", tuple(self.genotype_states))
        if not self.sample_ids:
            object.__setattr__(self, "sample_ids", tuple(f"s{t}" for t in range(len(a))))
        if len(mu_r) != len(a) or len(self.sample_ids) != len(a):
            raise ValueError(f"{self.snv_id}: per-sample fields differ in length")
        for ai, di in zip(a, d):
            if di < 1 or not 0 <= ai <= di:
                raise ValueError(f"{self.snv_id}: need 0 <= a <= d and d >= 1, got a={ai}, d={di}")
        for m in mu_r:
            if not 0.0 < m <= 1.0:
                raise ValueError(f"{self.snv_id}: mu_r must lie in (0, 1], got {m}")
        if not self.genotype_states:
            raise ValueError(f"{self.snv_id}: no genotype states")

    @property
    def n_samples(self) -> int:
        return len(self.a)

    @property
    def b(self) -> tuple[int, ...]:
        return tuple(di - ai for ai, di in zip(self.a, self.d))


def success_probability(phi: float, mu_r: float, mu_v_g: float) -> float:
    """Per-read probability of a reference allele at variant fraction ``phi``."""
    return (1.0 - phi) * mu_r + phi * mu_v_g


def log_genotype_weights(genotype_states: Sequence[GenotypeState]) -> np.ndarray:
    deltas = [g.delta for g in genotype_states]
    if not deltas:
        raise ValueError("empty genotype list")
    if any(not dl > 0 for dl in deltas):
        raise ValueError("genotype pseudo-counts must be positive")
    lg = [math.lgamma(dl) for dl in deltas]
    total_lg = sum(lg)
    log_den = math.lgamma(sum(deltas) + 1.0)
    raw = np.array([total_lg - lg[g] + math.lgamma(deltas[g] + 1.0) - log_den for g in range(len(deltas))])
    m = raw.max()
    return raw - (m + math.log(np.exp(raw - m).sum()))


def genotype_weights(genotype_states: Sequence[GenotypeState]) -> np.ndarray:
    """Dirichlet-compound-categorical weights of each genotype, normalized to sum to 1."""
    return np.exp(log_genotype_weights(genotype_states))


def log_binom_coeff(d: int, a: int) -> float:
    return math.lgamma(d + 1.0) - math.lgamma(a + 1.0) - math.lgamma(d - a + 1.0)


def snv_log_likelihood(obs: SnvObservation, sample: int, phi: float) -> float:
    """log sum_g w_g Binomial(a; d, p_g(phi)) for one SNV in one sample."""
    a = obs.a[sample]
    b = obs.d[sample] - a
    log_w = log_genotype_weights(obs.genotype_states)
    terms = []
    for lw, g in zip(log_w, obs.genotype_states):
        p = success_probability(phi, obs.mu_r[sample], g.mu_v)
        term = lw
        if a > 0:
            term = term + (a * math.log(p) if p > 0.0 else -math.inf)
        if b > 0:
            term = term + (b * math.log1p(-p) if p < 1.0 else -math.inf)
        terms.append(term)
    m = max(terms)
    if m == -math.inf:
        return -math.inf
    return log_binom_coeff(obs.d[sample], a) + m + math.log(sum(math.exp(t - m) for t in terms))


def complete_data_log_likelihood(tree, data: Sequence[SnvObservation]) -> float:
    """Sum of per-(SNV, sample) log-likelihoods at each SNV's node frequencies.

    ``tree.assignments[i]`` is the node holding SNV ``i``; nodes expose ``phi``.
    """
    total = 0.0
    for i, obs in enumerate(data):
        node = tree.assignments[i] if i < len(tree.assignments) else None
        if node is None:
            raise ValueError(f"SNV {obs.snv_id} is unassigned")
        for t in range(obs.n_samples):
            total += snv_log_likelihood(obs, t, float(node.phi[t]))
    return total


def pack(data: Sequence[SnvObservation]):
    """Pack observations into the backend's likelihood table."""
    n = len(data)
    s = data[0].n_samples if n else 0
    if any(obs.n_samples != s for obs in data):
        raise ValueError("inconsistent sample counts across SNVs")
    g_max = max((len(obs.genotype_states) for obs in data), default=1)
    a = np.zeros((n, s))
    d = np.zeros((n, s))
    mu_r = np.zeros((n, s))
    log_binom = np.zeros((n, s))
    mu_v = np.full((n, g_max), 0.5)
    log_w = np.full((n, g_max), -np.inf)
    n_geno = np.zeros(n, dtype=np.int64)
    for i, obs in enumerate(data):
        a[i] = obs.a
        d[i] = obs.d
        mu_r[i] = obs.mu_r
        log_binom[i] = [log_binom_coeff(dd, aa) for aa, dd in zip(obs.a, obs.d)]
        k = len(obs.genotype_states)
        n_geno[i] = k
        mu_v[i, :k] = [g.mu_v for g in obs.genotype_states]
        log_w[i, :k] = log_genotype_weights(obs.genotype_states)
    return LikelihoodTable(a, d, mu_r, mu_v, log_w, n_geno, log_binom)
