import json
import math
import subprocess
import sys

import numpy as np
import pytest

from lcr import cli, results
from lcr.graph import read_edge_list
from lcr.model import dyad_probability_matrices, load_params


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def graph_file(tmp_path, capsys):
    path = tmp_path / "g.tsv"
    code, _, _ = run(capsys, "simulate", "--n", 300, "--gamma", "dense", "--rho", 0.5,
                     "--seed", 4, "--output", path)
    assert code == 0
    return path


def test_simulate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    for p in (a, b):
        assert run(capsys, "simulate", "--n", 50, "--seed", 7, "--output", p)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_very_negative_gamma_is_empty(capsys):
    code, out, _ = run(capsys, "simulate", "--n", 30, "--gamma", -50)
    assert code == 0
    assert [ln for ln in out.splitlines() if not ln.startswith("#")] == []


def test_simulate_density(tmp_path, capsys):
    path, ppath = tmp_path / "g.tsv", tmp_path / "p.json"
    run(capsys, "simulate", "--n", 500, "--gamma", "dense", "--seed", 1, "--output", path,
        "--params-out", ppath)
    g, _ = read_edge_list(path)
    params = load_params(ppath)
    om = dyad_probability_matrices(params)
    p_edge = om["10"] + om["11"]
    np.fill_diagonal(p_edge, 0.0)
    pairs = 500 * 499
    dens = g.adjacency.nnz / pairs
    # edges i->j and j->i of one dyad are correlated; bound the variance by
    # dyad-level sums of the two indicators
    iu = np.triu_indices(500, 1)
    s = p_edge[iu] + p_edge.T[iu]
    second = 2 * om["11"][iu] + s  # E[(x_ij + x_ji)^2]
    sd = math.sqrt(float(np.sum(second - s ** 2))) / pairs
    assert abs(dens - p_edge.sum() / pairs) <= 3 * sd
    # the nominal density n^(-1/4) ignores heterogeneity, so only a loose match
    assert abs(dens / 500 ** -0.25 - 1) < 0.2


def test_estimate_and_test_documents(graph_file, capsys):
    code, out, _ = run(capsys, "estimate", graph_file, "--seed", 4)
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "estimate"
    results.validate(doc)
    code, out, _ = run(capsys, "test", graph_file, "--seed", 4)
    doc = json.loads(out)
    results.validate(doc)
    res = doc["result"]
    assert code == 0 and res["status"] == "ok"
    for key in ("rho_star", "sigma_hat", "psi_star", "phi_star", "p_value_psi"):
        assert isinstance(res[key], float)
    prov = doc["provenance"]
    assert prov["seed"] == 4 and prov["pair_id"] == 1 and len(prov["input_hash"]) == 64
    assert prov["config"]["subcommand"] == "test"


def test_estimate_accuracy_across_seeds(tmp_path, capsys):
    hits = 0
    seeds = range(20)
    for s in seeds:
        path = tmp_path / f"g{s}.tsv"
        run(capsys, "simulate", "--n", 1000, "--gamma", "dense", "--rho", 0.5, "--seed", s,
            "--output", path)
        code, out, _ = run(capsys, "estimate", path)
        hits += abs(json.loads(out)["result"]["rho_star"] - 0.5) <= 0.05
    assert hits >= 19


def test_empty_graph_degenerate_exit(tmp_path, capsys):
    path = tmp_path / "e.tsv"
    path.write_text("# n=10\n")
    code, out, _ = run(capsys, "test", path)
    assert code == cli.EXIT_DEGENERATE
    assert json.loads(out)["result"]["status"] == "degenerate-counts"


def test_parse_error_exit_and_line(tmp_path, capsys):
    path = tmp_path / "bad.tsv"
    path.write_text("0\t1\n0\t1\t2\n")
    code, _, err = run(capsys, "estimate", path)
    assert code == 3 and "line 2" in err
    assert run(capsys, "estimate", tmp_path / "missing.tsv")[0] == 3


def test_capacity_error_exit(capsys):
    code, _, err = run(capsys, "pairs", "--m", 9)
    assert code == 4


def test_pairs_table(capsys):
    code, out, _ = run(capsys, "pairs")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "pair_id\ta\tb\tc0" and lines[1] == "1\t11,00,01,00\t10,10,00,10\t1"
    assert run(capsys, "pairs", "--m", 3)[1] == "pair_id\ta\tb\tc0\n"


def test_oracle_check_pass_and_mutation(capsys):
    code, out, _ = run(capsys, "oracle-check", "--graphs", 20, "--trials", 10)
    assert code == 0 and out.count("PASS") == 4
    code, out, _ = run(capsys, "oracle-check", "--graphs", 20, "--trials", 10,
                       "--mutation", "complement-off-by-one")
    assert code == 1 and "FAIL  fast-vs-brute" in out


def test_mle_subcommand(graph_file, capsys):
    code, out, _ = run(capsys, "mle", graph_file, "--lrt")
    doc = json.loads(out)
    results.validate(doc)
    assert code == 0 and doc["result"]["converged"] is True
    assert doc["result"]["lrt"]["p_value"] is not None


def test_config_file_overridden_by_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 20, "seed": 3}))
    a = run(capsys, "simulate", "--config", cfg)[1]
    b = run(capsys, "simulate", "--config", cfg, "--n", 25)[1]
    assert "# n=20" in a and "# n=25" in b
    bad = tmp_path / "bad.json"
    bad.write_text("{\n nope")
    assert run(capsys, "simulate", "--config", bad)[0] == 3


def test_experiment_and_bench(capsys, tmp_path):
    code, out, _ = run(capsys, "experiment", "estimation", "--n", 60, "--reps", 2,
                       "--rho", "zero,half", "--no-mle")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 3 and lines[0].startswith("cell\tseed\t")
    rows = tmp_path / "rows.tsv"
    code, out, _ = run(capsys, "experiment", "null", "--n", 60, "--reps", 3,
                       "--rows-output", rows)
    assert code == 0 and rows.read_text().startswith("normal_quantile\tpsi")
    code, out, _ = run(capsys, "bench", "--n-grid", "80,160", "--format", "json")
    assert code == 0 and len(json.loads(out)["cells"]) == 2


def test_experiment_threads_byte_identical(capsys):
    args = ("experiment", "power", "--n", 80, "--reps", 5, "--rho", "0,0.5", "--seed", 2)
    outs = {t: run(capsys, *args, "--threads", t)[1] for t in (1, 4)}
    assert outs[1] == outs[4]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lcr", "pairs"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("pair_id")
