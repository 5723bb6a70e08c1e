"""Small-n self-checks of the counting machinery.

Each check compares a fast routine with a literal one, or a structural fact
with its enumeration, and returns a :class:`CheckResult`.  ``mutation``
forwards a deliberate defect to :class:`lcr.cycles.GraphOperands` so the
suite can show that it notices.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .cycles import (
    DEFAULT_PAIR,
    PAIRS_M4,
    GraphOperands,
    brute_force_count,
    expected_count,
    fast_count_pair,
    pair_class_key,
    pair_search,
)
from .model import ModelParams, sample


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def random_params(rng, n):
    """Heterogeneous parameters over a wide density range."""
    return ModelParams(n, rng.normal(), rng.uniform(-1.5, 0.8),
                       rng.normal(size=n), rng.uniform(-1.0, 1.0, n))


def _timed(name, f):
    t0 = time.perf_counter()
    ok, detail = f()
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


def check_fast_vs_brute(graphs=200, seed=0, n_range=(8, 14), mutation=None,
                        backends=("sparse", "dense")):
    """Exact equality of fast and literal counts for all three m = 4 pairs."""
    def run():
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        bad = []
        for k in range(graphs):
            n = int(rng.integers(n_range[0], n_range[1] + 1))
            g = sample(random_params(rng, n), int(rng.integers(2 ** 32)))
            for pair in PAIRS_M4:
                want = (brute_force_count(g, pair.a), brute_force_count(g, pair.b))
                for be in backends:
                    got = fast_count_pair(g, pair, ops=GraphOperands(g, be, mutation))
                    if got != want:
                        bad.append((k, pair.pair_id, be, got, want))
        return not bad, f"{graphs} graphs x {len(PAIRS_M4)} pairs x {len(backends)} backends; " \
                        f"{len(bad)} mismatches" + (f", first {bad[0]}" if bad else "")
    return _timed("fast-vs-brute", run)


def check_ratio_identity(trials=50, seed=0, n_range=(5, 14), rtol=1e-10):
    """``E[Q(a)] / E[Q(b)] = e^(c0 rho)`` for random parameters."""
    def run():
        rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
        worst = 0.0
        for k in range(trials):
            n = int(rng.integers(n_range[0], n_range[1] + 1))
            p = random_params(rng, n)
            pair = PAIRS_M4[k % len(PAIRS_M4)]
            ratio = expected_count(p, pair.a) / expected_count(p, pair.b)
            want = math.exp(pair.c0 * p.rho)
            worst = max(worst, abs(ratio / want - 1))
        return worst <= rtol, f"{trials} parameter draws; max relative error {worst:.3g}"
    return _timed("ratio-identity", run)


def check_odd_lengths(ms=(3, 5, 7)):
    """No cancellation pair exists for odd cycle length."""
    def run():
        sizes = {m: len(pair_search(m)) for m in ms}
        return all(v == 0 for v in sizes.values()), f"class counts {sizes}"
    return _timed("odd-length-empty", run)


def check_m4_classes():
    """Three classes at m = 4, containing the default pair, with c0 = 1, 2, 1."""
    def run():
        found = pair_search(4)
        keys = {pair_class_key(p.a, p.b): p.c0 for p in found}
        ours = {pair_class_key(p.a, p.b): p.c0 for p in PAIRS_M4}
        ok = (len(found) == 3 and keys == ours
              and pair_class_key(DEFAULT_PAIR.a, DEFAULT_PAIR.b) in keys
              and sorted(keys.values()) == [1, 1, 2])
        return ok, f"{len(found)} classes with c0 {sorted(keys.values())}"
    return _timed("m4-classes", run)


def run_oracle_suite(graphs=200, trials=50, seed=0, mutation=None):
    return [
        check_fast_vs_brute(graphs, seed, mutation=mutation),
        check_ratio_identity(trials, seed),
        check_odd_lengths(),
        check_m4_classes(),
    ]
