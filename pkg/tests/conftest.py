import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from clonetree.gibbs import PosteriorSample
from clonetree.tssb import Hyperparams, TssbTree

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def build_tree(parents, eta=None, n_samples=1, root_data=True, seed=0, snvs=None):
    """Tree with explicit topology; ``parents[0] == -1`` and parents precede children.

    ``eta`` is (K,) or (K, S); ``snvs[i]`` is the node index of SNV ``i``.
    Sticks are set to 0.5 so nothing about them is implied.
    """
    rng = np.random.default_rng(seed)
    tree = TssbTree(Hyperparams(), n_samples, rng, root_data=root_data, n_snvs=len(snvs or []))
    nodes = [tree.root]
    for k, p in enumerate(parents[1:], start=1):
        child = tree.spawn_child(nodes[p], rng)
        child.nu, child.psi = 0.5, 0.5
        nodes.append(child)
    if eta is not None:
        eta = np.asarray(eta, dtype=float).reshape(len(parents), -1)
        for n, e in zip(nodes, eta):
            n.eta = e.copy()
        for n in reversed(tree.nodes()):
            n.phi = n.eta + sum((c.phi for c in n.children), np.zeros(n_samples))
    for i, k in enumerate(snvs or []):
        tree.assign(i, nodes[k])
    return tree, nodes


def sample_from(parents, assignments, phi=None, iteration=0, cdllh=0.0, burn_in=False):
    k = len(parents)
    phi = phi if phi is not None else [[1.0]] * k
    return PosteriorSample(iteration=iteration, parents=list(parents), assignments=list(assignments),
                           phi=[list(map(float, p)) for p in phi], eta=[[0.0]] * k,
                           cdllh=cdllh, burn_in=burn_in)


@pytest.fixture
def figure2_samples():
    """Two equally weighted trees over SNVs A, B, C.

    First: A above both B and C. Second: the line A -> B -> C.
    """
    branching = sample_from([-1, 0, 1, 1], [1, 2, 3], iteration=0)
    chain = sample_from([-1, 0, 1, 2], [1, 2, 3], iteration=1)
    return [branching, chain]
