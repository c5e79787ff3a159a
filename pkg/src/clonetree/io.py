"""Tab-separated inputs and outputs, and the line-delimited samples file."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .gibbs import PosteriorSample
from .likelihood import DEFAULT_GENOTYPES, DEFAULT_MU_R, GenotypeState, SnvObservation

SCHEMA = "clonetree.samples"
SCHEMA_VERSION = 1
REQUIRED = ("snv_id", "sample_id", "ref_reads", "depth")


def fixture(name: str) -> Path:
    """Path of a bundled dataset, e.g. ``fixture("su070.tsv")``."""
    path = Path(str(resources.files("clonetree") / "data" / name))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture {name!r}")
    return path


class ParseError(ValueError):
    """Malformed input. ``code`` is stable and machine-readable."""

    def __init__(self, code: str, message: str, line: int | None = None):
        self.code = code
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message} [{code}]")


def parse_genotype_spec(text: str, line: int | None = None) -> tuple[GenotypeState, ...]:
    """``"B:1,AB:1"`` -> genotype states; blank means the heterozygous default."""
    text = (text or "").strip()
    if not text:
        return DEFAULT_GENOTYPES
    out = []
    for entry in text.split(","):
        label, sep, delta = entry.strip().partition(":")
        try:
            out.append(GenotypeState.from_label(label.strip(), float(delta) if sep else 1.0))
        except ValueError as exc:
            raise ParseError("bad_genotype", f"cannot parse genotype entry {entry!r}: {exc}", line) from None
    if len({g.label for g in out}) != len(out):
        raise ParseError("bad_genotype", f"repeated genotype label in {text!r}", line)
    return tuple(out)


def format_genotype_spec(states: Sequence[GenotypeState]) -> str:
    return ",".join(f"{g.label}:{g.delta:g}" for g in states)


def _int(value, field, line):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ParseError("bad_number", f"{field} is not an integer: {value!r}", line) from None


def parse_input(path) -> list[SnvObservation]:
    """Read a long-format read-count table into per-SNV observations.

    Rows are grouped by ``snv_id``; every SNV must be observed in every
    sample. SNVs keep first-appearance order and samples keep the order in
    which they were first seen.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        header = reader.fieldnames
        if header is None:
            warnings.warn(f"{path} is empty", stacklevel=2)
            return []
        missing = [c for c in REQUIRED if c not in header]
        if missing:
            raise ParseError("missing_column", f"missing column(s): {', '.join(missing)}", 1)
        rows: dict[str, dict[str, tuple]] = {}
        genotypes: dict[str, tuple[str, int]] = {}
        samples: dict[str, None] = {}
        for line, row in enumerate(reader, start=2):
            if None in row or any(row.get(c) in (None, "") for c in REQUIRED):
                raise ParseError("bad_row", "wrong number of fields", line)
            snv, sample = row["snv_id"], row["sample_id"]
            a = _int(row["ref_reads"], "ref_reads", line)
            d = _int(row["depth"], "depth", line)
            if d < 1 or a < 0:
                raise ParseError("bad_number", f"need depth >= 1 and ref_reads >= 0, got a={a}, d={d}", line)
            if a > d:
                raise ParseError("a_exceeds_d", f"ref_reads {a} exceeds depth {d} for {snv}/{sample}", line)
            mu_r_text = (row.get("mu_r") or "").strip()
            try:
                mu_r = float(mu_r_text) if mu_r_text else DEFAULT_MU_R
            except ValueError:
                raise ParseError("bad_number", f"mu_r is not a number: {mu_r_text!r}", line) from None
            if not 0.0 < mu_r <= 1.0:
                raise ParseError("bad_number", f"mu_r must lie in (0, 1], got {mu_r}", line)
            spec = (row.get("genotype") or "").strip()
            parse_genotype_spec(spec, line)
            if snv in genotypes and genotypes[snv][0] != spec:
                raise ParseError("bad_genotype", f"genotype for {snv} differs from line {genotypes[snv][1]}", line)
            genotypes.setdefault(snv, (spec, line))
            per = rows.setdefault(snv, {})
            if sample in per:
                raise ParseError("duplicate_row", f"{snv}/{sample} appears twice", line)
            per[sample] = (a, d, mu_r)
            samples.setdefault(sample, None)
    if not rows:
        warnings.warn(f"{path} has a header but no rows", stacklevel=2)
        return []
    sample_ids = tuple(samples)
    data = []
    for snv, per in rows.items():
        absent = [s for s in sample_ids if s not in per]
        if absent:
            raise ParseError("missing_sample", f"{snv} has no row for sample(s) {', '.join(absent)}")
        spec, line = genotypes[snv]
        data.append(SnvObservation(
            snv,
            tuple(per[s][0] for s in sample_ids),
            tuple(per[s][1] for s in sample_ids),
            tuple(per[s][2] for s in sample_ids),
            parse_genotype_spec(spec, line),
            sample_ids,
        ))
    return data


def write_dataset(path, data: Sequence[SnvObservation]):
    """Inverse of ``parse_input``; optional columns are always written."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(REQUIRED + ("mu_r", "genotype"))
        for obs in data:
            spec = format_genotype_spec(obs.genotype_states)
            for t, sample in enumerate(obs.sample_ids):
                w.writerow([obs.snv_id, sample, obs.a[t], obs.d[t], repr(obs.mu_r[t]), spec])


def write_truth(path, truth, sample_ids: Sequence[str]):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["snv_id", "true_node", "true_parent"] + [f"true_phi_{s}" for s in sample_ids])
        for snv, node, phi in zip(truth.snv_ids, truth.nodes, truth.phi):
            w.writerow([snv, node, truth.parents[node]] + [repr(float(p)) for p in phi])


def read_truth(path):
    from .simulate import Truth

    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    phi_cols = [c for c in rows[0] if c.startswith("true_phi_")] if rows else []
    parents: dict[int, int] = {}
    for r in rows:
        parents[int(r["true_node"])] = int(r["true_parent"])
    return Truth(
        [r["snv_id"] for r in rows],
        [int(r["true_node"]) for r in rows],
        [[float(r[c]) for c in phi_cols] for r in rows],
        [parents[k] for k in range(max(parents) + 1)] if parents else [],
    )


def read_labels(path) -> dict[str, str]:
    """Two-column ``snv_id``/``cluster`` table."""
    with Path(path).open(newline="") as fh:
        return {r["snv_id"]: r["cluster"] for r in csv.DictReader(fh, delimiter="\t")}


# samples file ---------------------------------------------------------------

@dataclass
class SamplesFile:
    snv_ids: list[str]
    sample_ids: list[str]
    chains: list[list[PosteriorSample]]
    selected: int = 0
    config: dict | None = None

    @property
    def samples(self) -> list[PosteriorSample]:
        return self.chains[self.selected]


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def write_samples(path, snv_ids, sample_ids, chains, selected=0, config=None):
    with Path(path).open("w") as fh:
        header = {"schema": SCHEMA, "version": SCHEMA_VERSION, "snv_ids": list(snv_ids),
                  "sample_ids": list(sample_ids), "chains": len(chains), "selected_chain": selected,
                  "config": config or {}}
        fh.write(_dumps(header) + "\n")
        for k, chain in enumerate(chains):
            for s in chain:
                fh.write(_dumps(dict(s.to_dict(), chain=k)) + "\n")


def read_samples(path) -> SamplesFile:
    with Path(path).open() as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError:
            raise ParseError("bad_samples", "first line is not a JSON header", 1) from None
        if header.get("schema") != SCHEMA:
            raise ParseError("bad_samples", f"not a {SCHEMA} file", 1)
        if header.get("version") != SCHEMA_VERSION:
            raise ParseError("bad_samples", f"unsupported schema version {header.get('version')}", 1)
        chains: list[list[PosteriorSample]] = [[] for _ in range(int(header["chains"]))]
        for line, text in enumerate(fh, start=2):
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
                k = rec.pop("chain")
                chains[k].append(PosteriorSample.from_dict(rec))
            except (json.JSONDecodeError, KeyError, TypeError, IndexError) as exc:
                raise ParseError("bad_samples", f"malformed sample record ({exc})", line) from None
    return SamplesFile(header["snv_ids"], header["sample_ids"], chains,
                       int(header.get("selected_chain", 0)), header.get("config"))


# tabular reports -------------------------------------------------------------

def _writer(fh):
    return csv.writer(fh, delimiter="\t", lineterminator="\n")


def write_trace(path, chains: Sequence[Sequence[PosteriorSample]]):
    with Path(path).open("w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["chain", "iteration", "burn_in", "cdllh", "nodes", "lineages", "mh_accepted"])
        for k, chain in enumerate(chains):
            for s in chain:
                w.writerow([k, s.iteration, int(s.burn_in), repr(s.cdllh), s.n_nodes, len(s.occupied()), s.mh_accepted])


def write_clusters(path, snv_ids, labels):
    with Path(path).open("w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["snv_id", "cluster"])
        for snv, k in zip(snv_ids, labels):
            w.writerow([snv, k])


def write_genotypes(path, table):
    with Path(path).open("w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["probability", "size", "genotype"])
        for g, p in table:
            w.writerow([f"{p:.6f}", len(g), ",".join(sorted(g))])


def best_tree_report(sample: PosteriorSample, snv_ids, sample_ids) -> str:
    """Plain-text description of one tree over its occupied lineages."""
    lin = sample.lineage_parents()
    order = sorted(lin)
    name = {k: f"L{j}" for j, k in enumerate(order)}
    shape = "chain" if sample.is_chain() else "branching"
    members: dict[int, list[str]] = {}
    for i, k in enumerate(sample.assignments):
        members.setdefault(k, []).append(snv_ids[i])
    lines = [
        f"iteration\t{sample.iteration}",
        f"cdllh\t{sample.cdllh!r}",
        f"lineages\t{len(order)}",
        f"shape\t{shape}",
        "",
        "\t".join(["lineage", "parent"] + [f"phi_{s}" for s in sample_ids] + ["snvs"]),
    ]
    for k in order:
        parent = "wildtype" if lin[k] == -1 else name[lin[k]]
        phis = [f"{p:.4f}" for p in sample.phi[k]]
        lines.append("\t".join([name[k], parent] + phis + [",".join(members[k])]))
    return "\n".join(lines) + "\n"


def write_text(path, text: str):
    Path(path).write_text(text)


def write_acf(path, rows: Iterable[tuple[int, int, float]]):
    with Path(path).open("w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["chain", "lag", "acf"])
        for k, lag, v in rows:
            w.writerow([k, lag, f"{v:.6f}"])


def read_frequency_table(path) -> tuple[dict[str, list[float]], list[str]]:
    """``name``/``sample_id``/``frequency`` rows -> per-name vectors in sample order."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None or not {"name", "sample_id", "frequency"} <= set(reader.fieldnames):
            raise ParseError("missing_column", "need columns name, sample_id, frequency", 1)
        vals: dict[str, dict[str, float]] = {}
        samples: dict[str, None] = {}
        for line, row in enumerate(reader, start=2):
            try:
                f = float(row["frequency"])
            except (TypeError, ValueError):
                raise ParseError("bad_number", f"frequency is not a number: {row['frequency']!r}", line) from None
            if not 0.0 <= f <= 1.0:
                raise ParseError("bad_number", f"frequency outside [0, 1]: {f}", line)
            vals.setdefault(row["name"], {})[row["sample_id"]] = f
            samples.setdefault(row["sample_id"], None)
    order = list(samples)
    out = {}
    for name, per in vals.items():
        absent = [s for s in order if s not in per]
        if absent:
            raise ParseError("missing_sample", f"{name} has no frequency for {', '.join(absent)}")
        out[name] = [per[s] for s in order]
    return out, order


def write_rules(path, rows):
    with Path(path).open("w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["ancestor", "b", "c", "sum_rule", "crossing_rule"])
        for a, b, c, verdicts in rows:
            w.writerow([a, b, c, verdicts["sum"], verdicts.get("crossing", "n/a")])
