import json
import warnings

import pytest

from clonetree import io
from clonetree.cli import EXIT_DATA, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from clonetree.likelihood import GenotypeState, SnvObservation
from clonetree.simulate import chain_spec, simulate
from conftest import sample_from

HEADER = "snv_id\tsample_id\tref_reads\tdepth\n"


def _write(tmp_path, text, name="in.tsv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# parsing ---------------------------------------------------------------------------

def test_su070_fixture():
    data = io.parse_input(io.fixture("su070.tsv"))
    assert len(data) == 10
    first = data[0]
    assert (first.snv_id, first.a, first.d) == ("CACNA1H", (12_775,), (24_860,))
    assert first.genotype_states == (GenotypeState("AB", 0.5, 1.0),)
    assert first.mu_r == (0.999,)


def test_su048_fixture():
    data = io.parse_input(io.fixture("su048.tsv"))
    assert [o.snv_id for o in data][:2] == ["TET2-E1357stop", "SMC1A"]


def test_missing_fixture():
    with pytest.raises(FileNotFoundError):
        io.fixture("nope.tsv")


def test_header_only_file_warns_and_is_empty(tmp_path):
    with pytest.warns(UserWarning):
        assert io.parse_input(_write(tmp_path, HEADER)) == []


def test_blank_file_warns(tmp_path):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert io.parse_input(_write(tmp_path, "")) == []
    assert caught


@pytest.mark.parametrize("body,code,line", [
    ("x\ts\t11\t10\n", "a_exceeds_d", 2),
    ("x\ts\tten\t10\n", "bad_number", 2),
    ("x\ts\t1\t0\n", "bad_number", 2),
    ("x\ts\t1\t10\nx\ts\t2\t10\n", "duplicate_row", 3),
    ("x\ts\t1\n", "bad_row", 2),
    ("x\ts1\t1\t10\ny\ts2\t1\t10\n", "missing_sample", None),
])
def test_parse_errors(tmp_path, body, code, line):
    with pytest.raises(io.ParseError) as err:
        io.parse_input(_write(tmp_path, HEADER + body))
    assert err.value.code == code
    assert err.value.line == line
    if line is not None:
        assert f"line {line}" in str(err.value)


def test_missing_column(tmp_path):
    with pytest.raises(io.ParseError) as err:
        io.parse_input(_write(tmp_path, "snv_id\tsample_id\tdepth\nx\ts\t3\n"))
    assert err.value.code == "missing_column"


@pytest.mark.parametrize("spec", ["C:1", "AB:x", "AB:-1", "AA:1", "AB:1,AB:2"])
def test_bad_genotype_specs(spec):
    with pytest.raises(io.ParseError) as err:
        io.parse_genotype_spec(spec, 4)
    assert err.value.code == "bad_genotype"


def test_genotype_grammar():
    states = io.parse_genotype_spec("B:1, AB:2.5")
    assert [(g.label, g.delta) for g in states] == [("B", 1.0), ("AB", 2.5)]
    assert [g.mu_v for g in states] == pytest.approx([0.001, 0.5])
    assert io.parse_genotype_spec("") == io.parse_genotype_spec("AB:1")
    assert io.format_genotype_spec(states) == "B:1,AB:2.5"


def test_genotype_must_agree_across_samples(tmp_path):
    text = "snv_id\tsample_id\tref_reads\tdepth\tgenotype\nx\ts1\t1\t5\tB:1\nx\ts2\t1\t5\tAB:1\n"
    with pytest.raises(io.ParseError) as err:
        io.parse_input(_write(tmp_path, text))
    assert err.value.code == "bad_genotype"


def test_optional_columns(tmp_path):
    text = "snv_id\tsample_id\tref_reads\tdepth\tmu_r\tgenotype\nx\ts1\t1\t5\t0.99\tB:1,AB:1\nx\ts2\t2\t6\t\tB:1,AB:1\n"
    (obs,) = io.parse_input(_write(tmp_path, text))
    assert obs.mu_r == (0.99, 0.999)
    assert obs.sample_ids == ("s1", "s2")
    assert len(obs.genotype_states) == 2


def test_simulate_round_trip(tmp_path):
    data, truth = simulate(chain_spec(seed=2, snvs_per_node=3))
    path = tmp_path / "d.tsv"
    io.write_dataset(path, data)
    assert io.parse_input(path) == data
    io.write_truth(tmp_path / "t.tsv", truth, data[0].sample_ids)
    assert io.read_truth(tmp_path / "t.tsv") == truth


def test_odd_values_round_trip(tmp_path):
    obs = SnvObservation("x y", (0, 7), (1, 7), (0.1 + 0.2, 1.0),
                         (GenotypeState.from_label("B", 0.3), GenotypeState.from_label("AAB", 2.0)), ("p", "q"))
    io.write_dataset(tmp_path / "d.tsv", [obs])
    assert io.parse_input(tmp_path / "d.tsv") == [obs]


def test_samples_file_round_trip(tmp_path):
    chains = [[sample_from([-1, 0], [1], iteration=i, cdllh=-1.5 * i) for i in range(3)],
              [sample_from([-1, 0, 1], [2], iteration=0, burn_in=True)]]
    path = tmp_path / "s.jsonl"
    io.write_samples(path, ["a"], ["s0"], chains, selected=1, config={"seed": 3})
    sf = io.read_samples(path)
    assert sf.chains == chains
    assert (sf.snv_ids, sf.sample_ids, sf.selected, sf.config) == (["a"], ["s0"], 1, {"seed": 3})
    assert json.loads(path.read_text().splitlines()[0])["version"] == io.SCHEMA_VERSION


def test_samples_file_rejects_foreign_input(tmp_path):
    with pytest.raises(io.ParseError):
        io.read_samples(_write(tmp_path, "hello\n", "s.jsonl"))
    with pytest.raises(io.ParseError):
        io.read_samples(_write(tmp_path, json.dumps({"schema": io.SCHEMA, "version": 99}) + "\n", "s.jsonl"))


# command line -----------------------------------------------------------------------

def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_usage_errors(capsys, tmp_path):
    code, _, err = _run(capsys)
    assert code == EXIT_USAGE and err.startswith("clonetree: usage-error:")
    code, _, err = _run(capsys, "bogus")
    assert code == EXIT_USAGE
    code, _, err = _run(capsys, "infer", io.fixture("su070.tsv"), "--iterations", 5, "--burn-in", 10,
                        "--out-dir", tmp_path)
    assert code == EXIT_USAGE
    code, _, _ = _run(capsys, "infer", io.fixture("su070.tsv"), "--prune", 2)
    assert code == EXIT_USAGE


def test_data_errors(capsys, tmp_path):
    code, _, err = _run(capsys, "infer", tmp_path / "absent.tsv", "--out-dir", tmp_path)
    assert code == EXIT_DATA and "data-error" in err
    bad = _write(tmp_path, HEADER + "x\ts\t11\t10\n")
    code, _, err = _run(capsys, "infer", bad, "--out-dir", tmp_path)
    assert code == EXIT_DATA and "a_exceeds_d" in err
    with pytest.warns(UserWarning):
        code, _, _ = _run(capsys, "infer", _write(tmp_path, HEADER, "empty.tsv"), "--out-dir", tmp_path)
    assert code == EXIT_DATA


def test_runtime_errors_have_their_own_code(capsys, tmp_path, monkeypatch):
    import clonetree.gibbs

    def boom(*a, **k):
        raise MemoryError("out of memory")
    monkeypatch.setattr(clonetree.gibbs, "run_chains", boom)
    code, _, err = _run(capsys, "infer", io.fixture("su070.tsv"), "--out-dir", tmp_path)
    assert code == EXIT_RUNTIME and err.startswith("clonetree: runtime-error:")


def _infer(capsys, tmp_path, data, name, *extra):
    out = tmp_path / name
    code, _, err = _run(capsys, "infer", data, "--iterations", 30, "--burn-in", 5, "--mh-iterations", 200,
                        "--seed", 4, "--out-dir", out, *extra)
    assert code == EXIT_OK, err
    return out


def test_infer_outputs_and_determinism(capsys, tmp_path):
    a = _infer(capsys, tmp_path, io.fixture("su070.tsv"), "a")
    b = _infer(capsys, tmp_path, io.fixture("su070.tsv"), "b")
    names = {"samples.jsonl", "trace.tsv", "best_tree.txt", "partial_order.dot", "clusters.tsv", "genotypes.tsv"}
    assert names <= {p.name for p in a.iterdir()}
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n
    assert len(io.read_samples(a / "samples.jsonl").samples) == 30


def test_two_chains(capsys, tmp_path):
    out = _infer(capsys, tmp_path, io.fixture("su048.tsv"), "c", "--chains", 2)
    sf = io.read_samples(out / "samples.jsonl")
    assert len(sf.chains) == 2 and sf.selected in (0, 1)
    trace = (out / "trace.tsv").read_text().splitlines()
    assert len(trace) == 1 + 60


def test_summarize_is_byte_identical(capsys, tmp_path):
    run = _infer(capsys, tmp_path, io.fixture("su070.tsv"), "run")
    outs = []
    for name in ("s1", "s2"):
        code, _, _ = _run(capsys, "summarize", run / "samples.jsonl", "--out-dir", tmp_path / name)
        assert code == EXIT_OK
        outs.append(tmp_path / name)
    for f in ("partial_order.dot", "clusters.tsv", "genotypes.tsv", "best_tree.txt"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
        assert (outs[0] / f).read_bytes() == (run / f).read_bytes()


def test_summarize_rejects_bad_file(capsys, tmp_path):
    code, _, err = _run(capsys, "summarize", _write(tmp_path, "{}\n", "s.jsonl"), "--out-dir", tmp_path)
    assert code == EXIT_DATA and "bad_samples" in err


def test_diagnose(capsys, tmp_path):
    run = _infer(capsys, tmp_path, io.fixture("su070.tsv"), "run")
    code, _, _ = _run(capsys, "diagnose", run / "samples.jsonl", "--max-lag", 5, "--out-dir", tmp_path / "d")
    assert code == EXIT_OK
    rows = (tmp_path / "d" / "acf.tsv").read_text().splitlines()
    assert rows[0] == "chain\tlag\tacf" and rows[1] == "0\t0\t1.000000" and len(rows) == 7


def test_simulate_command(capsys, tmp_path):
    code, _, _ = _run(capsys, "simulate", "--preset", "flat", "--seed", 3, "--out-dir", tmp_path)
    assert code == EXIT_OK
    data = io.parse_input(tmp_path / "data.tsv")
    assert len(data) == 54
    assert len(io.read_truth(tmp_path / "truth.tsv").nodes) == 54


def test_rules_on_figure1c_frequencies(capsys, tmp_path):
    rows = ["name\tsample_id\tfrequency"]
    for name, f in {"A": (0.8, 0.8), "B": (0.6, 0.2), "C": (0.4, 0.4)}.items():
        rows += [f"{name}\ts{t}\t{v}" for t, v in enumerate(f)]
    path = _write(tmp_path, "\n".join(rows) + "\n", "f.tsv")
    code, _, _ = _run(capsys, "rules", path, "--tol", 0, "--out-dir", tmp_path / "r")
    assert code == EXIT_OK
    report = (tmp_path / "r" / "rules.tsv").read_text().splitlines()
    assert "A\tB\tC\tchain_forced\tbranch_forced" in report


def test_rules_pools_read_counts_by_cluster(capsys, tmp_path):
    code, _, _ = _run(capsys, "rules", io.fixture("su070.tsv"), "--clusters", io.fixture("su070_clusters.tsv"),
                      "--out-dir", tmp_path)
    assert code == EXIT_OK
    report = (tmp_path / "rules.tsv").read_text().splitlines()
    assert report[0] == "ancestor\tb\tc\tsum_rule\tcrossing_rule"
    assert "wildtype\tA\tB\tchain_forced\tn/a" in report
