"""Command-line entry point: ``clonetree {infer,simulate,rules,summarize,diagnose}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
OUT_ENV = "CLONETREE_OUT_DIR"
DEFAULT_OUT = "clonetree-out"

log = logging.getLogger("clonetree")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _unit(text):
    x = float(text)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return x


def _positive(text):
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return x


def _bounds(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    if not 0 < lo <= hi:
        raise argparse.ArgumentTypeError(f"need 0 < LO <= HI, got {text!r}")
    return lo, hi


def _out_dir(args) -> Path:
    path = Path(args.out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    path.mkdir(parents=True, exist_ok=True)
    return path


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="clonetree", description="Clonal evolution trees from somatic SNV read counts.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def out(sp):
        sp.add_argument("--out-dir", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")

    inf = sub.add_parser("infer", help="run MCMC and summarize the posterior")
    inf.add_argument("input", help="read-count TSV")
    inf.add_argument("--iterations", type=int, default=5000)
    inf.add_argument("--burn-in", type=int, default=100)
    inf.add_argument("--mh-iterations", type=int, default=5000)
    inf.add_argument("--sigma", type=_positive, default=100.0, help="Dirichlet proposal concentration")
    inf.add_argument("--chains", type=int, default=1)
    inf.add_argument("--jobs", type=int, default=1, help="parallel chains")
    inf.add_argument("--seed", type=int, default=0)
    inf.add_argument("--prune", type=_unit, default=0.1, help="hide partial-order edges below this weight")
    inf.add_argument("--tol", type=_unit, default=1e-9, help="tolerance of the posterior constraint audit")
    inf.add_argument("--alpha0-bounds", type=_bounds, default=(1.0, 50.0))
    inf.add_argument("--gamma-bounds", type=_bounds, default=(1.0, 8.0))
    inf.add_argument("--lambda-bounds", type=_bounds, default=(0.25, 1.0))
    inf.add_argument("--anneal", type=int, default=0, help="tempered iterations at the start of burn-in")
    inf.add_argument("--structure-moves", type=int, default=10, help="rounds of tree-rearranging moves per iteration")
    out(inf)

    sim = sub.add_parser("simulate", help="write a synthetic dataset and its truth")
    sim.add_argument("--preset", choices=("chain", "flat"), default="chain")
    sim.add_argument("--depth", type=int, default=10_000)
    sim.add_argument("--snvs-per-node", type=int, default=9)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--poisson-depth", action="store_true")
    sim.add_argument("--poisson-counts", action="store_true")
    out(sim)

    rul = sub.add_parser("rules", help="sum and crossing rule report")
    rul.add_argument("input", help="frequency TSV (name, sample_id, frequency) or read-count TSV")
    rul.add_argument("--clusters", help="snv_id/cluster TSV to pool read counts by cluster")
    rul.add_argument("--tol", type=_unit, default=0.02)
    out(rul)

    summ = sub.add_parser("summarize", help="re-aggregate an existing samples file")
    summ.add_argument("samples")
    summ.add_argument("--prune", type=_unit, default=0.1)
    summ.add_argument("--seed", type=int, default=0, help="correlation-clustering seed")
    out(summ)

    diag = sub.add_parser("diagnose", help="log-likelihood autocorrelation per chain")
    diag.add_argument("samples")
    diag.add_argument("--max-lag", type=int, default=100)
    out(diag)
    return p


def _summarize(sf, out: Path, prune: float, seed: int):
    from . import io, summarize
    from .gibbs import best_sample

    samples = sf.samples
    post = [s for s in samples if not s.burn_in]
    if not post:
        raise DataError("samples file has no post-burn-in samples")
    labels = summarize.consensus_labels(post, seed=seed)
    graph = summarize.partial_order(post, sf.snv_ids, dict(zip(sf.snv_ids, labels)))
    io.write_text(out / "partial_order.dot", summarize.emit_dot(graph, prune))
    io.write_clusters(out / "clusters.tsv", sf.snv_ids, labels)
    io.write_genotypes(out / "genotypes.tsv", summarize.genotype_posteriors(post, sf.snv_ids))
    best = best_sample(samples)
    io.write_text(out / "best_tree.txt", io.best_tree_report(best, sf.snv_ids, sf.sample_ids))
    return best


def cmd_infer(args) -> int:
    from . import io
    from .frequencies import MhConfig
    from .gibbs import ChainConfig, run_chains, select_chain
    from .rules import audit_posterior

    try:
        data = io.parse_input(args.input)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    if not data:
        raise DataError(f"{args.input} holds no SNVs; nothing to infer")
    try:
        config = ChainConfig(
            iterations=args.iterations, burn_in=args.burn_in,
            mh=MhConfig(sigma=args.sigma, iterations=args.mh_iterations),
            seed=args.seed, chains=args.chains,
            bounds={"alpha0": args.alpha0_bounds, "gamma": args.gamma_bounds, "lam": args.lambda_bounds},
            anneal=args.anneal, structure_moves=args.structure_moves,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args)
    chains = run_chains(data, config, jobs=args.jobs)
    selected = select_chain(chains)
    snv_ids = [o.snv_id for o in data]
    sample_ids = list(data[0].sample_ids)
    cfg = {"iterations": args.iterations, "burn_in": args.burn_in, "mh_iterations": args.mh_iterations,
           "sigma": args.sigma, "chains": args.chains, "seed": args.seed, "anneal": config.anneal,
           "structure_moves": args.structure_moves, "bounds": {k: list(v) for k, v in config.bounds.items()}}
    io.write_samples(out / "samples.jsonl", snv_ids, sample_ids, chains, selected, cfg)
    io.write_trace(out / "trace.tsv", chains)
    sf = io.SamplesFile(snv_ids, sample_ids, chains, selected, cfg)
    best = _summarize(sf, out, args.prune, args.seed)
    post = [s for c in chains for s in c if not s.burn_in]
    violations = audit_posterior(post, data, tol=args.tol) if post else []
    for v in violations[:20]:
        log.warning("constraint violation: %s", v)
    print(f"chain {selected} selected; best tree at iteration {best.iteration}: "
          f"{len(best.occupied())} lineages, {'chain' if best.is_chain() else 'branching'}, "
          f"cdllh {best.cdllh:.3f}; outputs in {out}")
    if violations:
        raise RuntimeError(f"{len(violations)} constraint violation(s) in the posterior")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from . import io
    from .simulate import chain_spec, flat_spec, simulate

    make = chain_spec if args.preset == "chain" else flat_spec
    try:
        spec = make(depth=args.depth, seed=args.seed, snvs_per_node=args.snvs_per_node,
                    poisson_depth=args.poisson_depth, poisson_counts=args.poisson_counts)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    data, truth = simulate(spec)
    out = _out_dir(args)
    io.write_dataset(out / "data.tsv", data)
    io.write_truth(out / "truth.tsv", truth, spec.sample_ids)
    print(f"{len(data)} SNVs written to {out / 'data.tsv'}")
    return EXIT_OK


def _estimate(a, d, mu_r, mu_v):
    # frequency whose success probability matches the observed reference fraction
    return float(np.clip((mu_r - a / d) / (mu_r - mu_v), 0.0, 1.0))


def cmd_rules(args) -> int:
    import csv

    from . import io
    from .rules import cluster_triplets

    try:
        with open(args.input, newline="") as fh:
            header = next(csv.reader(fh, delimiter="\t"), [])
        if "frequency" in header:
            freqs, _ = io.read_frequency_table(args.input)
        else:
            data = io.parse_input(args.input)
            groups = io.read_labels(args.clusters) if args.clusters else {o.snv_id: o.snv_id for o in data}
            pooled: dict[str, list] = {}
            for o in data:
                if o.snv_id not in groups:
                    raise DataError(f"{o.snv_id} has no cluster label")
                acc = pooled.setdefault(groups[o.snv_id], [np.zeros(o.n_samples), np.zeros(o.n_samples), o])
                acc[0] += o.a
                acc[1] += o.d
            freqs = {}
            for name, (a, d, o) in pooled.items():
                mu_v = o.genotype_states[0].mu_v
                freqs[name] = [_estimate(a[t], d[t], o.mu_r[t], mu_v) for t in range(len(a))]
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    rows = list(cluster_triplets(freqs, args.tol))
    out = _out_dir(args)
    io.write_rules(out / "rules.tsv", rows)
    forced = sum(1 for *_, v in rows if "forced" in str(v["sum"]) or "forced" in str(v.get("crossing", "")))
    print(f"{len(rows)} triplets, {forced} with a forced verdict; report in {out / 'rules.tsv'}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    from . import io

    try:
        sf = io.read_samples(args.samples)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    out = _out_dir(args)
    best = _summarize(sf, out, args.prune, args.seed)
    print(f"best tree at iteration {best.iteration}; outputs in {out}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    from . import io
    from .gibbs import autocorrelation

    try:
        sf = io.read_samples(args.samples)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    rows = []
    for k, chain in enumerate(sf.chains):
        trace = [s.cdllh for s in chain if not s.burn_in]
        lag = min(args.max_lag, len(trace) - 1)
        if lag < 0:
            continue
        rows += [(k, j, v) for j, v in enumerate(autocorrelation(trace, lag))]
    out = _out_dir(args)
    io.write_acf(out / "acf.tsv", rows)
    io.write_trace(out / "trace.tsv", sf.chains)
    print(f"autocorrelation for {len(sf.chains)} chain(s) in {out / 'acf.tsv'}")
    return EXIT_OK


COMMANDS = {"infer": cmd_infer, "simulate": cmd_simulate, "rules": cmd_rules,
            "summarize": cmd_summarize, "diagnose": cmd_diagnose}


def _fail(tag: str, message: str, code: int) -> int:
    print(f"clonetree: {tag}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand (" + ", ".join(COMMANDS) + ")")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage-error", str(exc), EXIT_USAGE)
    except DataError as exc:
        return _fail("data-error", str(exc), EXIT_DATA)
    except KeyboardInterrupt:
        return _fail("runtime-error", "interrupted", EXIT_RUNTIME)
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        return _fail("runtime-error", f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
