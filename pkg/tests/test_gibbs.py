import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

import oracles
from clonetree.frequencies import MhConfig
from clonetree.gibbs import (
    ChainConfig,
    PosteriorSample,
    autocorrelation,
    best_sample,
    resample_assignments,
    run_chain,
    select_chain,
)
from clonetree.likelihood import GenotypeState, SnvObservation, pack
from clonetree.simulate import flat_spec, simulate
from clonetree.tssb import Hyperparams, TssbTree, cull, find_node
from conftest import build_tree, sample_from

FAST_MH = MhConfig(iterations=300)


# assignments -----------------------------------------------------------------

def test_single_support_point_keeps_assignment():
    tree, nodes = build_tree([-1], [1.0], snvs=[0])
    tree.root.nu = 1.0
    table = pack([SnvObservation("x", (500,), (1000,))])
    rng = np.random.default_rng(0)
    for _ in range(50):
        resample_assignments(tree, table, rng)
        assert tree.assignments[0] is tree.root
    assert len(tree.nodes()) == 1


def _two_point_frequencies(obs, sweeps, seed):
    tree, nodes = build_tree([-1, 0], [0.5, 0.5], snvs=[0])
    tree.max_branch = 1
    tree.root.nu = 0.4
    nodes[1].psi, nodes[1].nu = 1.0 - 1e-12, 1.0
    table = pack([obs])
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(sweeps):
        resample_assignments(tree, table, rng)
        hits += tree.assignments[0] is nodes[1]
    lik = [table.snv_loglik(0, n.phi) for n in nodes]
    expected = oracles.two_point_assignment(lik, [0.4, 0.6])
    return hits / sweeps, expected[1]


def test_two_point_conditional_deep_reads():
    got, expected = _two_point_frequencies(SnvObservation("x", (7500,), (10_000,)), 10_000, 1)
    assert got == pytest.approx(expected, abs=0.02)


def test_two_point_conditional_balanced():
    # few reads so both nodes keep real posterior mass
    got, expected = _two_point_frequencies(SnvObservation("x", (3,), (4,)), 10_000, 2)
    assert 0.2 < expected < 0.8
    assert got == pytest.approx(expected, abs=0.02)


# chains ----------------------------------------------------------------------

def _flat_data(n, s=1):
    one = (1,) * s
    return [SnvObservation(f"f{i}", one, one, (1.0,) * s, (GenotypeState("AB", 1.0),)) for i in range(n)]


def test_zero_iterations():
    assert run_chain(_flat_data(2), ChainConfig(iterations=0, burn_in=0)) == []


def test_fixed_seed_is_bit_identical():
    data, _ = simulate(flat_spec(depth=500, seed=1, snvs_per_node=2))
    cfg = ChainConfig(iterations=25, burn_in=5, mh=FAST_MH, seed=3)
    a = [s.to_dict() for s in run_chain(data, cfg)]
    b = [s.to_dict() for s in run_chain(data, cfg)]
    assert a == b


def test_inconsistent_sample_counts_rejected():
    data = [SnvObservation("x", (1,), (2,)), SnvObservation("y", (1, 1), (2, 2))]
    with pytest.raises(ValueError):
        run_chain(data, ChainConfig(iterations=2, burn_in=1))


@pytest.mark.parametrize("kw", [dict(iterations=10, burn_in=10), dict(chains=0), dict(burn_in=10, anneal=20),
                                dict(iterations=-1)])
def test_chain_config_validation(kw):
    with pytest.raises(ValueError):
        ChainConfig(**kw)


def test_recorded_samples_satisfy_invariants():
    data, _ = simulate(flat_spec(depth=2000, seed=2, snvs_per_node=3))
    samples = run_chain(data, ChainConfig(iterations=60, burn_in=10, mh=FAST_MH, seed=1))
    assert len(samples) == 60
    assert [s.burn_in for s in samples] == [True] * 10 + [False] * 50
    for s in samples:
        eta, phi = np.array(s.eta), np.array(s.phi)
        assert eta.sum(axis=0) == pytest.approx(np.ones(eta.shape[1]), abs=1e-9)
        assert phi[0] == pytest.approx(np.ones(phi.shape[1]), abs=1e-9)
        for k in range(1, s.n_nodes):
            assert s.parents[k] < k
        for k in range(s.n_nodes):
            kids = [c for c in range(s.n_nodes) if s.parents[c] == k]
            assert phi[k] == pytest.approx(eta[k] + phi[kids].sum(axis=0), abs=1e-9)
        assert set(s.assignments) == set(range(1, s.n_nodes))


def test_six_cluster_data_co_assigns_true_clusters():
    data, truth = simulate(flat_spec(seed=1))
    samples = run_chain(data, ChainConfig(iterations=400, burn_in=100, mh=MhConfig(iterations=1000), seed=1))
    post = [s for s in samples if not s.burn_in]
    z = np.array([s.assignments for s in post])
    nodes = np.array(truth.nodes)
    for k in set(truth.nodes):
        members = np.flatnonzero(nodes == k)
        for i in members:
            for j in members:
                if i < j:
                    assert np.mean(z[:, i] == z[:, j]) > 0.9


def _forward_lineage_counts(n_snvs, hyper, draws, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(draws):
        tree = TssbTree(Hyperparams(hyper.alpha0, hyper.gamma, hyper.lam), 1, rng, n_snvs=n_snvs, root_data=False)
        for i in range(n_snvs):
            tree.assign(i, find_node(tree, rng.uniform(), rng))
        out.append(len({id(n) for n in tree.assignments}))
    return np.array(out)


def test_prior_only_chain_matches_forward_simulation():
    # constant likelihood: the whole sampler must reproduce the prior law of lineage counts
    n = 4
    h = Hyperparams(alpha0=3.0, gamma=2.0, lam=0.5)
    bounds = {"alpha0": (3.0, 3.0), "gamma": (2.0, 2.0), "lam": (0.5, 0.5)}
    cfg = ChainConfig(iterations=3000, burn_in=100, mh=MhConfig(iterations=5), bounds=bounds, seed=7)
    chain = np.array([len(s.occupied()) for s in run_chain(_flat_data(n), cfg) if not s.burn_in])[::5]
    forward = _forward_lineage_counts(n, h, 4000, seed=8)
    table = np.array([[np.sum(chain == k), np.sum(forward == k)] for k in range(1, n + 1)])
    table = table[table.sum(axis=1) > 0]
    assert stats.chi2_contingency(table).pvalue > 0.001


# diagnostics ------------------------------------------------------------------

def test_acf_lag_zero_is_one():
    assert autocorrelation([1.0, 3.0, 2.0, 5.0], 2)[0] == pytest.approx(1.0)


def test_acf_white_noise():
    x = np.random.default_rng(0).normal(size=10_000)
    assert np.all(np.abs(autocorrelation(x, 20)[1:]) < 0.05)


def test_acf_ar1():
    rng = np.random.default_rng(1)
    x = np.zeros(20_000)
    for t in range(1, len(x)):
        x[t] = 0.9 * x[t - 1] + rng.normal()
    assert autocorrelation(x, 1)[1] == pytest.approx(0.9, abs=0.03)


def test_acf_constant_trace():
    assert autocorrelation([2.0] * 10, 3) == [1.0, 0.0, 0.0, 0.0]


def test_acf_needs_long_trace():
    with pytest.raises(ValueError):
        autocorrelation([1.0, 2.0], 2)


def _s(it, ll, burn=False):
    return sample_from([-1, 0], [1], iteration=it, cdllh=ll, burn_in=burn)


def test_best_sample_single():
    s = _s(0, -3.0)
    assert best_sample([s]) is s


def test_best_sample_argmax():
    samples = [_s(0, -10.0), _s(1, -5.0), _s(2, -7.0)]
    assert best_sample(samples).iteration == 1


def test_best_sample_tie_goes_to_earlier():
    assert best_sample([_s(3, -5.0), _s(4, -5.0)]).iteration == 3


def test_best_sample_skips_burn_in():
    assert best_sample([_s(0, 0.0, burn=True), _s(1, -2.0)]).iteration == 1


@given(st.lists(st.floats(-1e6, 0.0), min_size=1, max_size=40))
def test_best_cdllh_non_decreasing(lls):
    samples = [_s(i, v) for i, v in enumerate(lls)]
    best = [best_sample(samples[: j + 1]).cdllh for j in range(len(samples))]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))


def test_select_chain_by_mean_post_burn_in():
    a = [_s(0, 100.0, burn=True), _s(1, -5.0)]
    b = [_s(0, -50.0, burn=True), _s(1, -3.0)]
    assert select_chain([a, b]) == 1


# lineage bookkeeping ------------------------------------------------------------

def test_lineage_parents_skip_empty_nodes():
    s = PosteriorSample(0, [-1, 0, 1, 2], [1, 3], [[1.0]] * 4, [[0.0]] * 4, 0.0)
    assert s.lineage_parents() == {1: -1, 3: 1}
    assert s.lineage_genotypes() == {1: frozenset({0}), 3: frozenset({0, 1})}
    assert s.is_chain()


def test_round_trip_dict():
    s = _s(5, -1.5)
    assert PosteriorSample.from_dict(s.to_dict()) == s


def test_annealing_schedule():
    cfg = ChainConfig(iterations=100, burn_in=50, anneal=10, beta0=1e-3)
    assert cfg.beta(0) == pytest.approx(1e-3)
    assert cfg.beta(10) == 1.0
    assert all(cfg.beta(i) <= cfg.beta(i + 1) for i in range(20))
    assert math.isclose(ChainConfig().beta(0), 1.0)


def test_prior_initialization_runs():
    data, _ = simulate(flat_spec(depth=300, seed=0, snvs_per_node=2))
    samples = run_chain(data, ChainConfig(iterations=5, burn_in=1, mh=FAST_MH, init="prior"))
    assert len(samples) == 5


def test_cull_after_prior_draws_keeps_assigned_nodes():
    rng = np.random.default_rng(0)
    tree = TssbTree(Hyperparams(), 1, rng, n_snvs=5, root_data=False)
    for i in range(5):
        tree.assign(i, find_node(tree, rng.uniform(), rng))
    cull(tree)
    kept = set(map(id, tree.nodes()))
    assert all(id(n) in kept for n in tree.assignments)
