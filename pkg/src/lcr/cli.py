"""Command-line interface.

Subcommands: simulate, estimate, test, mle, pairs, oracle-check,
experiment, bench.  Options may also come from a JSON file given with
``--config``; keys are option names with ``-`` replaced by ``_`` and
explicit flags win.

Exit codes: 0 success, 1 other error, 2 invalid argument, 3 parse error,
4 capacity error, 5 result computed but degenerate (flagged in the
document).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

from . import __version__, experiments, inference, mle, oracles, results
from .cycles import PAIRS_M4, get_pair, pair_search, pair_table
from .errors import DomainError, LcrError, ParseError
from .graph import read_edge_list, write_edge_list
from .model import MisspecParams, ModelParams, load_params, sample, sample_misspecified, save_params

EXIT_OK = 0
EXIT_DEGENERATE = 5

log = logging.getLogger("lcr")


@dataclass
class CliConfig:
    """Resolved options of one invocation (flags over config file over defaults)."""

    subcommand: str
    options: dict = field(default_factory=dict)

    def snapshot(self):
        return {"subcommand": self.subcommand,
                **{k: v for k, v in self.options.items() if k not in ("func", "config")}}


# -- output helpers -----------------------------------------------------------

def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise LcrError(f"cannot write {path}: {exc.strerror}") from None


def _emit_doc(kind, result, cfg, input_hash=None, pair_id=None):
    prov = results.provenance(input_hash, cfg.options.get("seed"), pair_id, cfg.snapshot())
    doc = results.document(kind, result, prov)
    _emit(results.dumps(doc), cfg.options.get("output"))
    return doc


def _read_graph(path):
    if not os.path.exists(path):
        raise ParseError(f"no such file: {path}")
    graph, labels = read_edge_list(path)
    return graph, labels


# -- subcommands --------------------------------------------------------------

def cmd_simulate(cfg):
    o = cfg.options
    if o.get("params"):
        params = load_params(o["params"])
    else:
        n = o["n"]
        d = experiments.ExperimentDesign(n, o["gamma"], o["rho"], 1, o["seed"], o.get("theta"))
        if o["homogeneous"]:
            base = ModelParams.homogeneous(n, d.rho_value, d.gamma_value)
        else:
            base, _ = experiments.draw_params(d, 0, 0)
        params = MisspecParams(base, o["theta"]) if o.get("theta") else base
    if isinstance(params, MisspecParams):
        g = sample_misspecified(params, o["seed"])
    else:
        g = sample(params, o["seed"])
    if o["output"] in (None, "-"):
        write_edge_list(g, sys.stdout)
    else:
        try:
            write_edge_list(g, o["output"])
        except OSError as exc:
            raise LcrError(f"cannot write {o['output']}: {exc.strerror}") from None
    if o.get("params_out"):
        save_params(params, o["params_out"])
    log.info("n=%d edges=%d digest=%s", g.n, int(g.adjacency.nnz), g.digest())
    return EXIT_OK


def cmd_estimate(cfg):
    o = cfg.options
    g, _ = _read_graph(o["input"])
    pair = get_pair(o["pair"])
    est = inference.estimate(g, pair, o["backend"])
    _emit_doc("estimate", est, cfg, g.digest(), pair.pair_id)
    return EXIT_DEGENERATE if est.degenerate else EXIT_OK


def cmd_test(cfg):
    o = cfg.options
    g, _ = _read_graph(o["input"])
    res = inference.test(g, o["rho0"], o["level"], o["variance_method"], o["backend"])
    est = res.estimate
    out = {
        "status": res.status,
        "rho0": res.rho0,
        "level": res.level,
        "Qa": est.Qa,
        "Qb": est.Qb,
        "rho_hat": est.rho_hat,
        "rho_star": est.rho_star,
        "sigma_hat": res.sigma_hat,
        "psi_star": res.psi_star,
        "phi_star": res.phi_star,
        "p_value_psi": res.p_value_psi,
        "p_value_phi": res.p_value_phi,
        "reject_psi": res.reject_psi,
        "reject_phi": res.reject_phi,
        "confidence_interval": res.confidence_interval(),
        "variance": res.variance,
        "estimate_status": est.status,
    }
    _emit_doc("test", out, cfg, g.digest(), est.pair_id)
    return EXIT_OK if res.status == "ok" else EXIT_DEGENERATE


def _solver(o):
    return mle.SolverConfig(tol=o["tol"], max_iter=o["max_iter"], bound=o["bound"])


def cmd_mle(cfg):
    o = cfg.options
    g, _ = _read_graph(o["input"])
    f = mle.fit(g, _solver(o))
    out = {"status": f.status, "converged": f.converged, "iterations": f.iterations,
           "log_likelihood": f.log_likelihood, "grad_max_norm": f.grad_max_norm,
           "max_abs_param": f.max_abs_param,
           "existence_verdict": f.existence.verdict,
           "existence_flags": [int(i) for i in f.existence_flags.nonzero()[0]],
           "rho": f.params_hat.rho if f.params_hat is not None else None,
           "gamma": f.params_hat.gamma if f.params_hat is not None else None}
    if o["full"] and f.params_hat is not None:
        out["alpha"] = f.params_hat.alpha
        out["beta"] = f.params_hat.beta
    if o["lrt"]:
        out["lrt"] = mle.lrt(g, 0.0, _solver(o))
    _emit_doc("mle", out, cfg, g.digest())
    degenerate = not f.converged or (o["lrt"] and out["lrt"].statistic is None)
    return EXIT_DEGENERATE if degenerate else EXIT_OK


def cmd_pairs(cfg):
    o = cfg.options
    found = PAIRS_M4 if o["m"] is None else pair_search(o["m"])
    rows = pair_table(found)
    if o["format"] == "json":
        out = {"m": o["m"] or 4,
               "pairs": [{"a": a, "b": b, "c0": c0, "pair_id": k} for a, b, c0, k in rows]}
        _emit_doc("pairs", out, cfg)
    else:
        text = "pair_id\ta\tb\tc0\n" + "".join(f"{k}\t{a}\t{b}\t{c0}\n" for a, b, c0, k in rows)
        _emit(text, o.get("output"))
    return EXIT_OK


def cmd_oracle_check(cfg):
    o = cfg.options
    checks = oracles.run_oracle_suite(o["graphs"], o["trials"], o["seed"], o["mutation"])
    if o["format"] == "json":
        _emit_doc("oracle-check", {"checks": checks}, cfg)
    else:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail} ({c.seconds:.2f} s)\n"
                 for c in checks]
        _emit("".join(lines), o.get("output"))
    return EXIT_OK if all(c.passed for c in checks) else 1


def _designs(o):
    if o.get("design"):
        with open(o["design"], encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, line=exc.lineno) from None
        items = doc if isinstance(doc, list) else doc.get("designs", [doc])
        try:
            return [experiments.ExperimentDesign.from_dict(d) for d in items]
        except TypeError as exc:
            raise ParseError(f"bad design entry: {exc}") from None
    return [experiments.ExperimentDesign(o["n"], o["gamma"], r, o["reps"], o["seed"], o.get("theta"))
            for r in o["rho"]]


def cmd_experiment(cfg):
    o = cfg.options
    kind, threads = o["kind"], o["threads"]
    designs = _designs(o)
    d0 = designs[0]
    if kind == "estimation":
        rep = experiments.run_estimation_table(designs, not o["no_mle"], threads, o["rows"])
    elif kind == "power":
        rep = experiments.run_power_study(d0.n, d0.gamma, [d.rho for d in designs], o["rho0"],
                                          o["level"], d0.reps, d0.seed, o["lrt"], threads, o["rows"])
    elif kind == "null":
        rep = experiments.run_null_calibration(d0.n, d0.gamma, d0.rho, d0.reps, d0.seed,
                                               o["level"], threads)
    elif kind == "variance":
        rep = experiments.run_variance_check(d0.n, d0.gamma, d0.rho, d0.reps, d0.seed,
                                             threads=threads)
    elif kind == "misspec":
        rep = experiments.run_misspec_bias(d0.n, d0.gamma, d0.rho, o["theta_grid"], d0.reps,
                                           d0.seed, threads, o["rows"])
    elif kind == "pairs":
        rep = experiments.run_pair_comparison(d0, PAIRS_M4, threads)
    else:  # pragma: no cover - argparse restricts choices
        raise DomainError(f"unknown experiment {kind!r}")
    _write_report(rep, o)
    return EXIT_OK


def _write_report(rep, o):
    if o["format"] == "json":
        _emit(rep.to_json(include_rows=o.get("rows", False), include_timing=o["timings"]),
              o.get("output"))
    else:
        _emit(rep.to_tsv("cells", o["timings"]), o.get("output"))
        if o.get("rows_output"):
            _emit(rep.to_tsv("rows"), o["rows_output"])


def cmd_bench(cfg):
    o = cfg.options
    rep = experiments.bench_counting(o["n_grid"], o["mean_degree"], o["gamma"], o["rho"],
                                     o["seed"], o["repeats"])
    if o["format"] == "json":
        _emit(rep.to_json(), o.get("output"))
    else:
        expo = rep.meta.get("fitted_exponent")
        _emit(rep.to_tsv() + f"# fitted exponent {'NA' if expo is None else f'{expo:.3f}'}\n",
              o.get("output"))
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _rule(text):
    """Named rule or number."""
    try:
        return float(text)
    except ValueError:
        return text


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _rules(text):
    return [_rule(x.strip()) for x in text.split(",") if x.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="lcr", description="Reciprocity inference for directed networks "
                                "by cycle-count ratios.")
    p.add_argument("--version", action="version", version=f"lcr {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults")
    common.add_argument("--output", "-o", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--verbose", "-v", action="count", default=0)
    common.add_argument("--threads", type=int, default=1, help="worker cap for replications")
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("simulate", parents=[common], help="sample a graph")
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--gamma", type=_rule, default="dense",
                   help=f"{sorted(experiments.GAMMA_RULES)} or a number")
    s.add_argument("--rho", type=_rule, default=0.0,
                   help=f"{sorted(experiments.RHO_RULES)} or a number")
    s.add_argument("--theta", type=float, default=None, help="two-community perturbation")
    s.add_argument("--homogeneous", action="store_true", help="alpha = beta = 0")
    s.add_argument("--params", help="read parameters from a JSON file instead")
    s.add_argument("--params-out", help="write the parameters used")
    s.set_defaults(func=cmd_simulate)

    graph_in = argparse.ArgumentParser(add_help=False)
    graph_in.add_argument("input", help="edge-list file")
    graph_in.add_argument("--backend", choices=("auto", "dense", "sparse"), default="auto")

    s = sub.add_parser("estimate", parents=[common, graph_in], help="log cycle-count ratio")
    s.add_argument("--pair", type=int, default=1, choices=(1, 2, 3))
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("test", parents=[common, graph_in], help="test rho = rho0")
    s.add_argument("--rho0", type=float, default=0.0)
    s.add_argument("--level", type=float, default=0.05)
    s.add_argument("--variance-method", choices=inference.VARIANCE_METHODS, default="plugin")
    s.set_defaults(func=cmd_test)

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tol", type=float, default=mle.SolverConfig.tol)
    solver.add_argument("--max-iter", type=int, default=mle.SolverConfig.max_iter)
    solver.add_argument("--bound", type=float, default=mle.SolverConfig.bound)

    s = sub.add_parser("mle", parents=[common, graph_in, solver], help="maximum-likelihood fit")
    s.add_argument("--lrt", action="store_true", help="also run the likelihood-ratio test of rho = 0")
    s.add_argument("--full", action="store_true", help="include alpha and beta")
    s.set_defaults(func=cmd_mle)

    s = sub.add_parser("pairs", parents=[common], help="list cancellation pairs")
    s.add_argument("--m", type=int, default=None, help="search this cycle length")
    s.add_argument("--format", choices=("tsv", "json"), default="tsv")
    s.set_defaults(func=cmd_pairs)

    s = sub.add_parser("oracle-check", parents=[common], help="run the small-n self-checks")
    s.add_argument("--graphs", type=int, default=200)
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--mutation", choices=("complement-off-by-one",), default=None,
                   help="inject a defect to confirm the checks catch it")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_oracle_check)

    report = argparse.ArgumentParser(add_help=False)
    report.add_argument("--format", choices=("tsv", "json"), default="tsv")
    report.add_argument("--timings", action="store_true", help="append wall-clock timings")

    s = sub.add_parser("experiment", parents=[common, report], help="Monte Carlo study")
    s.add_argument("kind", choices=("estimation", "power", "null", "variance", "misspec", "pairs"))
    s.add_argument("--design", help="JSON file with one design or a list of designs")
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--gamma", type=_rule, default="dense")
    s.add_argument("--rho", type=_rules, default=[0.0], help="comma-separated rules or numbers")
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--theta", type=float, default=None)
    s.add_argument("--theta-grid", type=_floats, default=[0.0, 0.5])
    s.add_argument("--rho0", type=float, default=0.0)
    s.add_argument("--level", type=float, default=0.05)
    s.add_argument("--lrt", action="store_true")
    s.add_argument("--no-mle", action="store_true")
    s.add_argument("--rows", action="store_true", help="keep per-replication rows")
    s.add_argument("--rows-output", help="TSV path for per-replication rows")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("bench", parents=[common, report], help="timing of counting and variance")
    s.add_argument("--n-grid", type=_ints, default=[500, 1000, 2000, 4000])
    s.add_argument("--mean-degree", type=float, default=10.0,
                   help="fixed expected out-degree; 0 uses --gamma")
    s.add_argument("--gamma", type=_rule, default="dense")
    s.add_argument("--rho", type=float, default=0.0)
    s.add_argument("--repeats", type=int, default=1)
    s.set_defaults(func=cmd_bench)
    return p


def _load_config(path):
    if not os.path.exists(path):
        raise ParseError(f"no such config file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def parse(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        # re-parse with the file's values as defaults so explicit flags win
        defaults = _load_config(args.config)
        sub_parser = parser._subparsers._group_actions[0].choices[args.subcommand]
        sub_parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    opts = vars(args)
    if opts.get("mean_degree") == 0:
        opts["mean_degree"] = None
    return CliConfig(args.subcommand, opts)


def main(argv=None):
    try:
        cfg = parse(argv)
    except LcrError as exc:
        print(f"lcr: error: {exc}", file=sys.stderr)
        return exc.exit_code
    verbosity = cfg.options.get("verbose", 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(verbosity, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return cfg.options["func"](cfg)
    except LcrError as exc:
        print(f"lcr: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
