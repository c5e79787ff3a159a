"""Sum and crossing rules over frequency triplets, plus a posterior audit.

A triplet holds per-sample frequencies of an established ancestor ``A``
and two descendants ``B`` and ``C``. Verdicts only fire on strict
violations beyond ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

DEFAULT_TOL = 0.02
AUDIT_TOL = 1e-9


class Verdict(str, Enum):
    CHAIN_FORCED = "chain_forced"
    BRANCH_FORCED = "branch_forced"
    AMBIGUOUS = "ambiguous"
    INCONSISTENT = "inconsistent"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class FrequencyTriplet:
    f_a: tuple[float, ...]
    f_b: tuple[float, ...]
    f_c: tuple[float, ...]

    def __post_init__(self):
        vecs = [tuple(float(x) for x in np.atleast_1d(v)) for v in (self.f_a, self.f_b, self.f_c)]
        for name, v in zip("abc", vecs):
            object.__setattr__(self, f"f_{name}", v)
        if not vecs[0] or len({len(v) for v in vecs}) != 1:
            raise ValueError("triplet vectors must be non-empty and equally long")
        if any(not 0.0 <= x <= 1.0 for v in vecs for x in v):
            raise ValueError("frequencies must lie in [0, 1]")

    @classmethod
    def wild_type(cls, f_b, f_c) -> "FrequencyTriplet":
        """Triplet under the mock wild-type ancestor (frequency 1 everywhere)."""
        f_b = tuple(np.atleast_1d(np.asarray(f_b, dtype=float)))
        return cls((1.0,) * len(f_b), f_b, f_c)

    @property
    def n_samples(self) -> int:
        return len(self.f_a)

    def arrays(self):
        return np.array(self.f_a), np.array(self.f_b), np.array(self.f_c)


def _ancestry_ok(t: FrequencyTriplet, tol: float) -> bool:
    a, b, c = t.arrays()
    return bool(np.all(b <= a + tol) and np.all(c <= a + tol))


def _check_tol(tol):
    if not tol >= 0:
        raise ValueError("tol must be non-negative")


def sum_rule(triplet: FrequencyTriplet, tol: float = DEFAULT_TOL) -> Verdict:
    """CHAIN_FORCED when B and C cannot both hang directly off A in some sample."""
    _check_tol(tol)
    if not _ancestry_ok(triplet, tol):
        return Verdict.INCONSISTENT
    a, b, c = triplet.arrays()
    return Verdict.CHAIN_FORCED if np.any(b + c > a + tol) else Verdict.AMBIGUOUS


def crossing_rule(triplet: FrequencyTriplet, tol: float = DEFAULT_TOL) -> Verdict:
    """BRANCH_FORCED when B and C swap frequency order between two samples."""
    _check_tol(tol)
    if triplet.n_samples < 2:
        raise ValueError("the crossing rule needs at least two samples")
    if not _ancestry_ok(triplet, tol):
        return Verdict.INCONSISTENT
    _, b, c = triplet.arrays()
    crossed = np.any(b > c + tol) and np.any(c > b + tol)
    return Verdict.BRANCH_FORCED if crossed else Verdict.AMBIGUOUS


def analyse(triplet: FrequencyTriplet, tol: float = DEFAULT_TOL) -> dict[str, Verdict]:
    out = {"sum": sum_rule(triplet, tol)}
    if triplet.n_samples >= 2:
        out["crossing"] = crossing_rule(triplet, tol)
    return out


@dataclass(frozen=True)
class Violation:
    iteration: int
    parent: int
    children: tuple[int, int]
    sample: int
    excess: float

    def __str__(self):
        b, c = self.children
        return (f"iteration {self.iteration}: nodes {b} and {c} under node {self.parent} "
                f"exceed it by {self.excess:.3g} in sample {self.sample}")


def audit_posterior(samples: Sequence, data=None, tol: float = AUDIT_TOL) -> list[Violation]:
    """Check the sum rule on every sibling pair of occupied lineages.

    Siblings are read off the lineage parents (nearest occupied ancestor), so
    empty intermediate nodes do not hide a violation. Checking the pair with
    the largest frequencies per sample covers every SNV triplet with that
    ancestry. Top-level lineages are checked against the wild-type frequency
    of 1. ``data`` is accepted for interface symmetry and unused: frequencies
    live in the samples themselves.
    """
    if not samples:
        raise ValueError("no samples to audit")
    _check_tol(tol)
    out = []
    for s in samples:
        phi = np.asarray(s.phi, dtype=float)
        if phi.ndim != 2:
            phi = phi.reshape(len(s.parents), -1)
        kids: dict[int, list[int]] = {}
        for k, p in sorted(s.lineage_parents().items()):
            kids.setdefault(p, []).append(k)
        for p, group in sorted(kids.items()):
            if len(group) < 2:
                continue
            f_a = np.ones(phi.shape[1]) if p == -1 else phi[p]
            for t in range(phi.shape[1]):
                top = sorted(group, key=lambda k: (-phi[k, t], k))[:2]
                excess = phi[top[0], t] + phi[top[1], t] - f_a[t]
                if excess > tol:
                    out.append(Violation(s.iteration, p, (top[0], top[1]), t, float(excess)))
    return out


def cluster_triplets(freqs: dict[str, Sequence[float]], tol: float = DEFAULT_TOL):
    """Rule report over every (A, B, C) of named frequency vectors with A above B and C.

    A mock wild-type ancestor named ``wildtype`` is always available as ``A``.
    Yields ``(a, b, c, verdicts)`` with ``b < c`` by name.
    """
    names = sorted(freqs)
    vec = {n: np.atleast_1d(np.asarray(freqs[n], dtype=float)) for n in names}
    s = len(next(iter(vec.values()))) if vec else 0
    ancestors = ["wildtype"] + names
    vec_a = dict(vec, wildtype=np.ones(s))
    for a in ancestors:
        for i, b in enumerate(names):
            for c in names[i + 1:]:
                if a in (b, c):
                    continue
                if np.any(vec[b] > vec_a[a] + tol) or np.any(vec[c] > vec_a[a] + tol):
                    continue
                t = FrequencyTriplet(tuple(vec_a[a]), tuple(vec[b]), tuple(vec[c]))
                yield a, b, c, analyse(t, tol)
