import json
import math

import numpy as np
import pytest

from lcr import experiments as ex
from lcr.cycles import PAIRS_M4
from lcr.errors import DomainError


def test_rules_resolve():
    d = ex.ExperimentDesign(500, "moderate", "log-log", reps=3)
    assert d.gamma_value == pytest.approx(-math.log(500) / 2)
    assert d.rho_value == pytest.approx(math.log(math.log(500)))
    assert ex.ExperimentDesign(500, "sparse").gamma_value == pytest.approx(
        -math.log(500) + math.log(math.log(500)))
    assert ex.ExperimentDesign(100, -1.25, 0.3).gamma_value == -1.25
    with pytest.raises(DomainError):
        ex.ExperimentDesign(100, "bogus")
    with pytest.raises(DomainError):
        ex.ExperimentDesign(100, reps=-1)


def test_design_roundtrip():
    d = ex.ExperimentDesign(300, "dense", "half", reps=7, seed=9, theta=0.2)
    assert ex.ExperimentDesign.from_dict(json.loads(json.dumps(d.to_dict()))) == d


def test_replications_independent_of_order():
    d = ex.ExperimentDesign(60, "dense", 0.5, reps=5, seed=3)
    p1, g1 = ex.draw_graph(d, 2, 4)
    ex.draw_graph(d, 2, 0)
    p2, g2 = ex.draw_graph(d, 2, 4)
    assert g1 == g2 and p1 == p2
    assert ex.draw_graph(d, 1, 4)[1] != g1


def test_heterogeneity_centered_and_fixed_option():
    d = ex.ExperimentDesign(80, "dense", 0.0, reps=2, seed=1)
    p0, _ = ex.draw_params(d, 0, 0)
    p1, _ = ex.draw_params(d, 0, 1)
    assert abs(p0.alpha.sum()) < 1e-9 and abs(p0.beta.sum()) < 1e-9
    assert not np.array_equal(p0.alpha, p1.alpha)
    f = ex.ExperimentDesign(80, "dense", 0.0, reps=2, seed=1, fixed_heterogeneity=True)
    q0, s0 = ex.draw_params(f, 0, 0)
    q1, s1 = ex.draw_params(f, 0, 1)
    assert np.array_equal(q0.alpha, q1.alpha) and s0 != s1


def test_estimation_table_small_cell():
    d = ex.ExperimentDesign(100, "dense", 0.5, reps=6, seed=2)
    rep = ex.run_estimation_table([d], with_mle=True, keep_rows=True)
    cell = rep.cells[0]
    assert cell["cell"] == 0 and cell["seed"] == 2
    assert cell["lcr_mae"] >= 0 and cell["lcr_se"] is not None
    assert 0 <= cell["mle_nonexistence"] <= 1
    assert cell["mle_excluded"] == sum(not r["mle_exists"] for r in rep.rows)
    assert len(rep.rows) == 6


def test_power_study_reports_rates_with_errors():
    rep = ex.run_power_study(120, "dense", [0.0, 1.0], reps=4, seed=5)
    for c in rep.cells:
        assert 0 <= c["reject_psi"] <= 1 and c["reject_psi_se"] is not None
    with pytest.raises(DomainError):
        ex.run_power_study(120, "dense", [0.0], rho0=0.5, reps=1, with_lrt=True)


def test_null_calibration_single_rep_flagged():
    rep = ex.run_null_calibration(80, "dense", 0.0, reps=1, seed=0)
    cell = rep.cells[0]
    assert cell["status"] == "too-few-replications" and cell["ks_pvalue"] is None
    assert len(rep.rows) == 1 and rep.rows[0]["normal_quantile"] == 0.0


def test_normal_qq_sorted():
    q, v = ex.normal_qq([3.0, -1.0, 0.5])
    assert list(v) == [-1.0, 0.5, 3.0]
    assert q[1] == 0.0 and q[0] == -q[2]


def test_variance_check_fields():
    rep = ex.run_variance_check(120, "moderate", 0.0, reps=4, seed=1)
    c = rep.cells[0]
    assert c["v_ratio_mean"] > 0 and 0 <= c["frac_in_band"] <= 1
    assert c["var_u_over_v"] is not None


def test_misspec_zero_theta_matches_plain_estimates():
    rep = ex.run_misspec_bias(100, "dense", 0.5, [0.0], reps=3, seed=4, keep_rows=True)
    plain = ex.run_estimation_table([ex.ExperimentDesign(100, "dense", 0.5, 3, 4, theta=0.0)],
                                    with_mle=False, keep_rows=True)
    assert [r["rho_star"] for r in rep.rows] == [r["rho_star"] for r in plain.rows]


def test_pair_comparison():
    assert ex.run_pair_comparison(ex.ExperimentDesign(100, reps=0)).cells == []
    rep = ex.run_pair_comparison(ex.ExperimentDesign(100, "dense", 0.0, reps=4, seed=1))
    assert [c["pair_id"] for c in rep.cells] == [p.pair_id for p in PAIRS_M4]
    assert all(c["mse"] >= 0 for c in rep.cells)


def test_bench_empty_grid():
    rep = ex.bench_counting([])
    assert rep.cells == [] and rep.to_tsv() == ""


def test_bench_small_grid():
    rep = ex.bench_counting([100, 200], mean_degree=5)
    assert [c["n"] for c in rep.cells] == [100, 200]
    assert rep.meta["fitted_exponent"] is not None


def test_report_formats():
    rep = ex.ExperimentReport("x", cells=[{"a": 1.5, "b": None, "c": True}])
    assert rep.to_tsv() == "a\tb\tc\n1.5\tNA\t1\n"
    doc = json.loads(rep.to_json())
    assert doc["cells"] == [{"a": 1.5, "b": None, "c": True}]


def test_reports_identical_across_thread_counts():
    d = ex.ExperimentDesign(80, "dense", 0.5, reps=6, seed=11)
    texts = {t: ex.run_power_study(80, "dense", [0.5], reps=6, seed=11, threads=t).to_json()
             for t in (1, 3)}
    assert texts[1] == texts[3]
    tables = {t: ex.run_estimation_table([d], with_mle=False, threads=t, keep_rows=True)
              for t in (1, 4)}
    assert tables[1].to_tsv("rows") == tables[4].to_tsv("rows")
