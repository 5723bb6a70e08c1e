"""Seeded Monte Carlo harness.

A design fixes ``n``, a density rule for ``gamma``, a value or rule for
``rho``, a replication count and a master seed.  Replication ``rep`` of cell
``cell`` uses ``SeedSequence([seed, cell, rep])``: its first child draws the
degree heterogeneity ``alpha ~ N(0, 1)``, ``beta ~ U(-1, 1)`` (centered
empirically), its second child seeds the graph sampler.  Replications are
independent of each other and of scheduling, so reports are identical for
any worker count.

Wall-clock timings are kept in ``ExperimentReport.timings`` and are not part
of the report text unless asked for.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import inference, mle
from .cycles import DEFAULT_PAIR, PAIRS_M4, GraphOperands, count_all_pairs
from .errors import DomainError
from .model import MisspecParams, ModelParams, sample, sample_misspecified
from .results import to_jsonable

GAMMA_RULES = {
    "dense": lambda n: -math.log(n) / 4,
    "moderate": lambda n: -math.log(n) / 2,
    "sparse": lambda n: -math.log(n) + math.log(math.log(n)),
}
RHO_RULES = {
    "neg-quarter-log": lambda n: -math.log(n) / 4,
    "zero": lambda n: 0.0,
    "half": lambda n: 0.5,
    "log-log": lambda n: math.log(math.log(n)),
    "quarter-log": lambda n: math.log(n) / 4,
}


def _resolve(rule, table, n):
    if isinstance(rule, (int, float)):
        return float(rule)
    if rule in table:
        return table[rule](n)
    try:
        return float(rule)
    except (TypeError, ValueError):
        raise DomainError(f"unknown rule {rule!r}; choose from {sorted(table)} or a number") from None


@dataclass(frozen=True)
class ExperimentDesign:
    """One simulation scenario.

    ``gamma`` and ``rho`` are rule names (see ``GAMMA_RULES``,
    ``RHO_RULES``) or numbers.  ``fixed_heterogeneity`` draws ``alpha`` and
    ``beta`` once per cell instead of once per replication, which keeps the
    population variance fixed across replications.
    """

    n: int
    gamma: object = "dense"
    rho: object = "zero"
    reps: int = 100
    seed: int = 0
    theta: float | None = None
    fixed_heterogeneity: bool = False

    def __post_init__(self):
        if int(self.n) < 4:
            raise DomainError("n must be at least 4")
        if int(self.reps) < 0:
            raise DomainError("reps must be nonnegative")
        _resolve(self.gamma, GAMMA_RULES, self.n)
        _resolve(self.rho, RHO_RULES, self.n)

    @property
    def gamma_value(self):
        return _resolve(self.gamma, GAMMA_RULES, self.n)

    @property
    def rho_value(self):
        return _resolve(self.rho, RHO_RULES, self.n)

    @property
    def density(self):
        """Nominal density ``tau_n``: ``n^-1/4``, ``n^-1/2``, ``log(n)/n`` for the named rules."""
        return math.exp(self.gamma_value)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# replication index reserved for heterogeneity shared by a whole cell
_CELL_KEY = 2 ** 32 - 1


def replicate_seeds(seed, cell, rep):
    """``(heterogeneity generator, graph seed)`` for one replication."""
    het, graph = np.random.SeedSequence([int(seed), int(cell), int(rep)]).spawn(2)
    return np.random.default_rng(het), int(graph.generate_state(1, np.uint64)[0])


def draw_params(design, cell, rep):
    """Model parameters and graph seed of one replication."""
    rng, gseed = replicate_seeds(design.seed, cell, rep)
    if design.fixed_heterogeneity:
        rng, _ = replicate_seeds(design.seed, cell, _CELL_KEY)
    n = design.n
    alpha = rng.standard_normal(n)
    beta = rng.uniform(-1.0, 1.0, n)
    params = ModelParams(n, design.rho_value, design.gamma_value, alpha, beta)
    return params, gseed


def draw_graph(design, cell, rep):
    params, gseed = draw_params(design, cell, rep)
    if design.theta:
        return params, sample_misspecified(MisspecParams(params, design.theta), gseed)
    return params, sample(params, gseed)


@dataclass
class ExperimentReport:
    """Cell summaries (``cells``), optional per-replication ``rows`` and
    per-component wall-clock ``timings``."""

    kind: str
    cells: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_tsv(self, which="cells", include_timing=False):
        data = self.cells if which == "cells" else self.rows
        if not data:
            return ""
        cols = list(data[0].keys())
        out = io.StringIO()
        out.write("\t".join(cols) + "\n")
        for row in data:
            out.write("\t".join(_fmt(row.get(c)) for c in cols) + "\n")
        if include_timing and self.timings:
            out.write("# timings " + json.dumps(self.timings, sort_keys=True) + "\n")
        return out.getvalue()

    def to_json(self, include_rows=False, include_timing=False):
        doc = {"kind": self.kind, "meta": to_jsonable(self.meta), "cells": to_jsonable(self.cells)}
        if include_rows:
            doc["rows"] = to_jsonable(self.rows)
        if include_timing:
            doc["timings"] = to_jsonable(self.timings)
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _mean_se(xs):
    """Mean and Monte Carlo standard error (``None`` when undefined)."""
    xs = [float(x) for x in xs]
    m = len(xs)
    if m == 0:
        return None, None
    mean = math.fsum(xs) / m
    if m < 2:
        return mean, None
    var = math.fsum((x - mean) ** 2 for x in xs) / (m - 1)
    return mean, math.sqrt(var / m)


def _rate_se(flags):
    flags = [bool(f) for f in flags]
    m = len(flags)
    if m == 0:
        return None, None
    p = sum(flags) / m
    return p, math.sqrt(p * (1 - p) / m)


class _Clock:
    def __init__(self):
        self.t = {}

    def add(self, key, dt):
        self.t[key] = self.t.get(key, 0.0) + dt

    def merge(self, other):
        for k, v in other.items():
            self.add(k, v)


def _run_reps(fn, design, cell, threads):
    """Apply ``fn(design, cell, rep)`` to every replication, in rep order."""
    reps = range(design.reps)
    if threads <= 1 or design.reps <= 1:
        return [fn(design, cell, r) for r in reps]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(design, cell, r), reps))


def _timed(clock, key, f, *a, **k):
    t0 = time.perf_counter()
    out = f(*a, **k)
    clock[key] = clock.get(key, 0.0) + time.perf_counter() - t0
    return out


# -- replication kernels --------------------------------------------------------

def _rep_estimate(design, cell, rep, with_mle=False, with_test=False, rho0=0.0,
                  level=0.05, with_lrt=False, with_theory=False):
    clock = {}
    params, g = _timed(clock, "sample", draw_graph, design, cell, rep)
    rho = design.rho_value
    ops = GraphOperands(g) if g.n >= 4 else None
    est = _timed(clock, "count", inference.estimate, g, DEFAULT_PAIR, "auto", ops)
    row = {"cell": cell, "rep": rep, "Qa": est.Qa, "Qb": est.Qb, "rho_hat": est.rho_hat,
           "rho_star": est.rho_star, "abs_err": None if est.rho_star is None else abs(est.rho_star - rho),
           "status": est.status}
    if with_test:
        psi = phi = v_hat = w_hat = None
        if est.status == "ok":
            var = _timed(clock, "variance", inference.variance_and_snr, g, est, "plugin", "auto", ops)
            v_hat, w_hat = var.v_hat, var.w_hat
            if var.snr_hat is not None:
                psi = var.snr_hat * (est.rho_star - rho0)
            if var.snr_hat_simple is not None:
                phi = var.snr_hat_simple * (est.rho_hat - rho0)
        z = inference.normal_critical_value(level)
        row.update({"psi": psi, "phi": phi, "reject_psi": None if psi is None else abs(psi) >= z,
                    "reject_phi": None if phi is None else abs(phi) >= z,
                    "v_hat": v_hat, "w_hat": w_hat, "u_n": est.u_statistic(rho)})
    if with_theory:
        # a number is a precomputed population variance shared by the cell
        if with_theory is True:
            v_exact = _timed(clock, "theory", inference.theory_diagnostics, params).v_exact
        else:
            v_exact = float(with_theory)
        row.update({"v_exact": v_exact, "v_ratio": None if row.get("v_hat") is None
                    else row["v_hat"] / v_exact})
    if with_mle:
        f = _timed(clock, "mle", mle.fit, g)
        row.update({"mle_exists": f.converged,
                    "mle_abs_err": abs(f.params_hat.rho - rho) if f.converged else None})
    if with_lrt:
        lr = _timed(clock, "lrt", mle.lrt, g)
        row.update({"lrt_stat": lr.statistic,
                    "reject_lrt": None if lr.statistic is None else lr.p_value <= level})
    return row, clock


def _collect(results, clock):
    rows = []
    for row, t in results:
        rows.append(row)
        clock.merge(t)
    return rows


def _design_meta(designs):
    return {"designs": [d.to_dict() for d in designs]}


# -- experiments --------------------------------------------------------------

def run_estimation_table(designs, with_mle=True, threads=1, keep_rows=False):
    """Mean ``|rho_star - rho|`` and, where the MLE exists, ``|rho_mle - rho|``."""
    clock = _Clock()
    report = ExperimentReport("estimation", meta=_design_meta(designs))
    for cell, d in enumerate(designs):
        rows = _collect(_run_reps(lambda dd, c, r: _rep_estimate(dd, c, r, with_mle=with_mle),
                                  d, cell, threads), clock)
        errs = [r["abs_err"] for r in rows if r["abs_err"] is not None]
        mae, se = _mean_se(errs)
        summary = {"cell": cell, "seed": d.seed, "n": d.n, "gamma": d.gamma_value,
                   "rho": d.rho_value, "reps": d.reps, "lcr_mae": mae, "lcr_se": se,
                   "lcr_degenerate": sum(r["status"] != "ok" for r in rows)}
        if with_mle:
            merrs = [r["mle_abs_err"] for r in rows if r["mle_exists"]]
            mm, ms = _mean_se(merrs)
            nonexist, nse = _rate_se([not r["mle_exists"] for r in rows])
            summary.update({"mle_mae": mm, "mle_se": ms, "mle_excluded": d.reps - len(merrs),
                            "mle_nonexistence": nonexist, "mle_nonexistence_se": nse})
        report.cells.append(summary)
        if keep_rows:
            report.rows.extend(rows)
    report.timings = clock.t
    return report


def run_power_study(n, gamma, rho_grid, rho0=0.0, level=0.05, reps=100, seed=0,
                    with_lrt=False, threads=1, keep_rows=False):
    """Rejection rates of ``psi_star``, ``phi_star`` and (optionally) the LRT."""
    if with_lrt and rho0 != 0:
        raise DomainError("the likelihood-ratio column needs rho0 = 0")
    designs = [ExperimentDesign(n, gamma, rho, reps, seed) for rho in rho_grid]
    clock = _Clock()
    report = ExperimentReport("power", meta={**_design_meta(designs), "rho0": rho0, "level": level})
    for cell, d in enumerate(designs):
        fn = lambda dd, c, r: _rep_estimate(dd, c, r, with_test=True, rho0=rho0, level=level,
                                            with_lrt=with_lrt)
        rows = _collect(_run_reps(fn, d, cell, threads), clock)
        rp, rps = _rate_se([r["reject_psi"] for r in rows if r["reject_psi"] is not None])
        rf, rfs = _rate_se([r["reject_phi"] for r in rows if r["reject_phi"] is not None])
        summary = {"cell": cell, "seed": seed, "n": n, "gamma": d.gamma_value, "rho": d.rho_value,
                   "reps": reps,
                   "reject_psi": rp, "reject_psi_se": rps, "reject_phi": rf, "reject_phi_se": rfs,
                   "degenerate": sum(r["reject_psi"] is None for r in rows)}
        if with_lrt:
            ok = [r["reject_lrt"] for r in rows if r["reject_lrt"] is not None]
            rl, rls = _rate_se(ok)
            summary.update({"reject_lrt": rl, "reject_lrt_se": rls, "lrt_missing": reps - len(ok)})
        report.cells.append(summary)
        if keep_rows:
            report.rows.extend(rows)
    report.timings = clock.t
    return report


def normal_qq(values):
    """Sorted values paired with standard-normal quantiles at ``(k - 1/2)/m``."""
    v = np.sort(np.asarray(values, dtype=float))
    m = v.size
    q = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m) if m else np.zeros(0)
    return q, v


def run_null_calibration(n, gamma, rho, reps, seed=0, level=0.05, threads=1,
                         fixed_heterogeneity=False):
    """``psi_star`` under the null: Q-Q data, KS distance and p-value, level."""
    d = ExperimentDesign(n, gamma, rho, reps, seed, fixed_heterogeneity=fixed_heterogeneity)
    rho0 = d.rho_value
    clock = _Clock()
    fn = lambda dd, c, r: _rep_estimate(dd, c, r, with_test=True, rho0=rho0, level=level)
    rows = _collect(_run_reps(fn, d, 0, threads), clock)
    psi = [r["psi"] for r in rows if r["psi"] is not None]
    q, v = normal_qq(psi)
    ks_stat = ks_p = None
    status = "ok"
    if len(psi) >= 2:
        ks = stats.kstest(psi, "norm")
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
    else:
        status = "too-few-replications"
    rate, se = _rate_se([abs(x) >= inference.normal_critical_value(level) for x in psi])
    report = ExperimentReport("null-calibration", meta=_design_meta([d]))
    report.cells.append({"cell": 0, "seed": seed, "n": n, "gamma": d.gamma_value, "rho": rho0,
                         "reps": reps,
                         "used": len(psi), "ks_stat": ks_stat, "ks_pvalue": ks_p,
                         "reject_rate": rate, "reject_rate_se": se, "status": status})
    report.rows = [{"normal_quantile": float(a), "psi": float(b)} for a, b in zip(q, v)]
    report.timings = clock.t
    return report


def run_variance_check(n, gamma, rho, reps, seed=0, band=0.1, threads=1,
                       fixed_heterogeneity=True):
    """``V_hat / V_n`` per replication and the empirical ``Var(U_n) / V_n``."""
    d = ExperimentDesign(n, gamma, rho, reps, seed, fixed_heterogeneity=fixed_heterogeneity)
    clock = _Clock()
    theory = True
    if fixed_heterogeneity and reps:
        t0 = time.perf_counter()
        theory = inference.theory_diagnostics(draw_params(d, 0, 0)[0]).v_exact
        clock.add("theory", time.perf_counter() - t0)
    fn = lambda dd, c, r: _rep_estimate(dd, c, r, with_test=True, rho0=dd.rho_value,
                                        with_theory=theory)
    rows = _collect(_run_reps(fn, d, 0, threads), clock)
    ratios = [r["v_ratio"] for r in rows if r["v_ratio"] is not None]
    inband, ise = _rate_se([abs(x - 1) <= band for x in ratios])
    u = np.array([r["u_n"] for r in rows], dtype=float)
    emp = None
    if fixed_heterogeneity and u.size >= 2:
        emp = float(np.var(u, ddof=1) / rows[0]["v_exact"])
    mr, mse = _mean_se(ratios)
    report = ExperimentReport("variance-check", meta=_design_meta([d]))
    report.cells.append({"cell": 0, "seed": seed, "n": n, "gamma": d.gamma_value,
                         "rho": d.rho_value, "reps": reps, "v_ratio_mean": mr, "v_ratio_se": mse, "frac_in_band": inband,
                         "frac_in_band_se": ise, "band": band, "var_u_over_v": emp})
    report.rows = rows
    report.timings = clock.t
    return report


def run_misspec_bias(n, gamma, rho, theta_grid, reps, seed=0, threads=1, keep_rows=False):
    """Mean ``|rho_star - rho|`` when graphs come from the two-community model."""
    designs = [ExperimentDesign(n, gamma, rho, reps, seed, theta=float(t)) for t in theta_grid]
    clock = _Clock()
    report = ExperimentReport("misspecification", meta=_design_meta(designs))
    for cell, d in enumerate(designs):
        rows = _collect(_run_reps(_rep_estimate, d, cell, threads), clock)
        errs = [r["abs_err"] for r in rows if r["abs_err"] is not None]
        signed = [r["rho_star"] - d.rho_value for r in rows if r["rho_star"] is not None]
        mae, se = _mean_se(errs)
        bias, bse = _mean_se(signed)
        report.cells.append({"cell": cell, "seed": seed, "n": n, "gamma": d.gamma_value,
                             "rho": d.rho_value, "theta": d.theta, "reps": reps, "mae": mae, "mae_se": se,
                             "bias": bias, "bias_se": bse})
        if keep_rows:
            report.rows.extend(rows)
    report.timings = clock.t
    return report


def _rep_pairs(design, cell, rep, pairs):
    clock = {}
    _, g = _timed(clock, "sample", draw_graph, design, cell, rep)
    counts = _timed(clock, "count", count_all_pairs, g, pairs)
    return counts, clock


def run_pair_comparison(design, pairs=PAIRS_M4, threads=1):
    """Per-pair MSE of the thresholded estimator and empirical SNR on shared graphs.

    The empirical SNR of pair ``k`` is ``mean(Q(a)) / sd(Q(a) - e^(c0 rho) Q(b))``.
    """
    report = ExperimentReport("pair-comparison", meta=_design_meta([design]))
    if design.reps == 0:
        return report
    clock = _Clock()
    results = _run_reps(lambda d, c, r: _rep_pairs(d, c, r, pairs), design, 0, threads)
    rho = design.rho_value
    thr = 2 * math.log(design.n)
    per_pair = [[] for _ in pairs]
    for counts, t in results:
        clock.merge(t)
        for k, (qa, qb) in enumerate(counts):
            per_pair[k].append((qa, qb))
    for k, p in enumerate(pairs):
        sq, us, qas = [], [], []
        for qa, qb in per_pair[k]:
            if qa > 0 and qb > 0:
                est = inference.hard_threshold((math.log(qa) - math.log(qb)) / p.c0, thr)
            elif qa == 0 and qb == 0:
                est = 0.0
            else:
                est = -thr if qa == 0 else thr
            sq.append((est - rho) ** 2)
            us.append(qa - math.exp(p.c0 * rho) * qb)
            qas.append(qa)
        mse, mse_se = _mean_se(sq)
        sd_u = float(np.std(us, ddof=1)) if len(us) > 1 else None
        snr = (math.fsum(qas) / len(qas)) / sd_u if sd_u else None
        report.cells.append({"cell": 0, "seed": design.seed, "pair_id": p.pair_id, "a": str(p.a), "b": str(p.b), "c0": p.c0,
                             "n": design.n, "gamma": design.gamma_value, "rho": rho,
                             "reps": design.reps, "mse": mse, "mse_se": mse_se,
                             "empirical_snr": snr})
    report.timings = clock.t
    return report


def bench_counting(n_grid, mean_degree=None, gamma="dense", rho=0.0, seed=0, repeats=1):
    """Wall-clock of counting plus variance estimation across ``n``.

    With ``mean_degree`` set, ``gamma`` is chosen per ``n`` so the expected
    number of out-neighbours stays near that value; otherwise the ``gamma``
    rule is applied.  The fitted exponent is the slope of ``log time`` on
    ``log n``.
    """
    report = ExperimentReport("bench", meta={"n_grid": list(n_grid), "mean_degree": mean_degree,
                                             "gamma": gamma, "rho": rho, "seed": seed})
    if not n_grid:
        return report
    ts = []
    for cell, n in enumerate(n_grid):
        g_rule = math.log(mean_degree / n) if mean_degree else gamma
        d = ExperimentDesign(int(n), g_rule, rho, 1, seed)
        _, g = draw_graph(d, cell, 0)
        best = math.inf
        best_parts = None
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            ops = GraphOperands(g)
            est = inference.estimate(g, DEFAULT_PAIR, "auto", ops)
            t1 = time.perf_counter()
            if est.status == "ok":
                inference.variance_hat(g, est.rho_hat, "plugin", "auto", ops)
            t2 = time.perf_counter()
            if t2 - t0 < best:
                best, best_parts = t2 - t0, (t1 - t0, t2 - t1, ops.backend)
        ts.append(best)
        deg = g.adjacency.nnz / n
        report.cells.append({"cell": cell, "seed": seed, "n": int(n), "mean_out_degree": deg, "backend": best_parts[2],
                             "count_s": best_parts[0], "variance_s": best_parts[1],
                             "total_s": best})
    exponent = None
    if len(ts) >= 2:
        exponent = float(np.polyfit(np.log(np.asarray(n_grid, float)), np.log(ts), 1)[0])
    report.meta["fitted_exponent"] = exponent
    return report
