import math

import numpy as np
import pytest

from clonetree.simulate import CHAIN_PHI, FLAT_PHI, SimSpec, chain_spec, flat_spec, score, simulate
from conftest import sample_from


def test_clonal_variant_without_reference_allele_gives_zero_ref_reads():
    data, _ = simulate(SimSpec(parents=[-1], phi=[[1.0]], mu_r=1.0, mu_v=0.0, depth=500, snvs_per_node=20))
    assert all(obs.a == (0,) for obs in data)


def test_simulate_is_deterministic():
    assert simulate(chain_spec(seed=4)) == simulate(chain_spec(seed=4))
    assert simulate(chain_spec(seed=4))[0] != simulate(chain_spec(seed=5))[0]


def test_presets():
    data, truth = simulate(flat_spec())
    assert sorted({round(p[0], 2) for p in truth.phi}) == sorted(FLAT_PHI)
    assert len(data) == 9 * len(FLAT_PHI)
    assert all(obs.d == (10_000,) for obs in data)
    _, chain = simulate(chain_spec())
    assert chain.parents == [-1, 0, 1, 2, 3]
    assert [chain.phi[9 * k][0] for k in range(5)] == list(CHAIN_PHI)


def test_reads_concentrate_around_success_probability():
    inside = total = 0
    for depth in (1000, 10_000):
        for k, phi in enumerate(np.linspace(0.05, 1.0, 10)):
            spec = SimSpec(parents=[-1], phi=[[phi]], depth=depth, seed=k, snvs_per_node=10_000)
            p = (1 - phi) * spec.mu_r + phi * spec.mu_v
            band = 4 * math.sqrt(p * (1 - p) / depth)
            data, _ = simulate(spec)
            inside += sum(abs(obs.a[0] / obs.d[0] - p) < band for obs in data)
            total += len(data)
    assert inside / total >= 0.9999


def test_poisson_options():
    data, _ = simulate(SimSpec(parents=[-1, 0], phi=[[0.9], [0.4]], poisson_depth=True, poisson_counts=True, seed=1))
    assert len({obs.d for obs in data}) > 1


@pytest.mark.parametrize("bad", [
    dict(parents=[-1, 0], phi=[[0.5], [0.6]]),
    dict(parents=[-1, -1], phi=[[0.7], [0.6]]),
    dict(parents=[-1], phi=[[0.5]], depth=0),
    dict(parents=[-1], phi=[[1.5]]),
])
def test_inconsistent_specs_rejected(bad):
    with pytest.raises(ValueError):
        SimSpec(**bad)


# scoring ----------------------------------------------------------------------------

def _truth_sample(truth):
    # node k of the truth becomes sample node k + 1 under a wild-type root
    parents = [-1] + [p + 1 for p in truth.parents]
    phi = [[1.0]] + [truth.phi[truth.nodes.index(k)] for k in range(len(truth.parents))]
    return sample_from(parents, [k + 1 for k in truth.nodes], phi=phi)


def test_perfect_inference_scores_one():
    _, truth = simulate(chain_spec(snvs_per_node=3))
    s = score(_truth_sample(truth), truth)
    assert s.pearson == pytest.approx(1.0)
    assert s.ari == 1.0
    assert s.topology_match


def test_merged_clusters():
    # four SNVs in two true clusters, inferred as one node at the pooled frequency
    _, truth = simulate(SimSpec(parents=[-1, 0], phi=[[0.8], [0.4]], snvs_per_node=2))
    merged = sample_from([-1, 0], [1, 1, 1, 1], phi=[[1.0], [0.6]])
    s = score(merged, truth)
    assert s.ari < 1.0
    assert not s.pearson_defined and math.isnan(s.pearson)
    assert not s.topology_match
    split = sample_from([-1, 0, 1], [2, 2, 1, 1], phi=[[1.0], [0.4], [0.8]])
    relabelled = score(split, truth)
    assert relabelled.pearson == pytest.approx(1.0)
    assert relabelled.ari == 1.0
    assert not relabelled.topology_match


def test_random_assignments_have_zero_ari_on_average():
    _, truth = simulate(flat_spec(snvs_per_node=5))
    rng = np.random.default_rng(0)
    aris = []
    for _ in range(400):
        z = [int(x) for x in rng.integers(1, 7, len(truth.nodes))]
        aris.append(score(sample_from([-1] + [0] * 6, z, phi=[[1.0]] * 7), truth).ari)
    assert abs(np.mean(aris)) < 4 * np.std(aris) / math.sqrt(len(aris))


def test_labels_override_for_ari():
    _, truth = simulate(SimSpec(parents=[-1, 0], phi=[[0.8], [0.4]], snvs_per_node=2))
    s = sample_from([-1, 0, 1], [1, 1, 2, 2], phi=[[1.0], [0.8], [0.4]])
    assert score(s, truth, labels=[0, 1, 0, 1]).ari < 0
