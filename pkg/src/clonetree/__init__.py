"""Clonal evolution trees from somatic SNV read counts.

A tree-structured stick-breaking prior over lineages, a binomial read-count
likelihood marginalized over genotypes, and an MCMC sampler whose posterior
is summarized as partial-order graphs, SNV clusters and a best tree.
"""

from ._backend import BACKEND
from .frequencies import MhConfig, eta_to_phi, init_frequencies, mh_update_eta, mh_update_eta_multi
from .gibbs import ChainConfig, PosteriorSample, autocorrelation, best_sample, run_chain, run_chains, select_chain
from .io import parse_input, read_samples, write_samples
from .likelihood import GenotypeState, SnvObservation, complete_data_log_likelihood, genotype_weights, snv_log_likelihood
from .rules import FrequencyTriplet, Verdict, audit_posterior, crossing_rule, sum_rule
from .simulate import SimSpec, chain_spec, flat_spec, score, simulate
from .summarize import (
    PartialOrderGraph,
    consensus_labels,
    correlation_cluster,
    emit_dot,
    genotype_posteriors,
    partial_order,
)
from .tssb import Hyperparams, TssbTree

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChainConfig",
    "FrequencyTriplet",
    "GenotypeState",
    "Hyperparams",
    "MhConfig",
    "PartialOrderGraph",
    "PosteriorSample",
    "SimSpec",
    "SnvObservation",
    "TssbTree",
    "Verdict",
    "audit_posterior",
    "autocorrelation",
    "best_sample",
    "chain_spec",
    "complete_data_log_likelihood",
    "consensus_labels",
    "correlation_cluster",
    "crossing_rule",
    "emit_dot",
    "eta_to_phi",
    "flat_spec",
    "genotype_posteriors",
    "genotype_weights",
    "init_frequencies",
    "mh_update_eta",
    "mh_update_eta_multi",
    "parse_input",
    "partial_order",
    "read_samples",
    "run_chain",
    "run_chains",
    "score",
    "select_chain",
    "simulate",
    "snv_log_likelihood",
    "sum_rule",
    "write_samples",
]
