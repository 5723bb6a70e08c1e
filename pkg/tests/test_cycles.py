import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcr import (
    DEFAULT_PAIR,
    PAIRS_M4,
    CyclePattern,
    ModelParams,
    brute_force_count,
    expected_count,
    fast_count,
    fast_count_pair,
    from_edge_list,
    is_cancellation_pair,
    monomial,
    omega_tilde_entry,
    pair_search,
    plr,
    sample,
)
from lcr.cycles import GraphOperands, lemma_family, pair_class_key, pair_table
from lcr.errors import CapacityError, DomainError
from lcr.model import PlrQuantities
from lcr.oracles import random_params

CODES = ("00", "10", "01", "11")


def literal_tilde_product(pattern, nodes, q, rho):
    m = len(nodes)
    v = 1.0
    for k, c in enumerate(pattern.codes):
        v *= omega_tilde_entry(q, rho, c, nodes[k], nodes[(k + 1) % m])
    return v


# -- pattern algebra ----------------------------------------------------------

def test_pattern_parse_and_str():
    p = CyclePattern.parse("11,00,01,00")
    assert p.codes == ("11", "00", "01", "00")
    assert str(p) == "11,00,01,00"
    with pytest.raises(DomainError):
        CyclePattern("11,00")
    with pytest.raises(DomainError):
        CyclePattern("11,00,02")


def test_all_empty_pattern_monomial_is_trivial():
    mono = monomial("00,00,00,00")
    assert mono.mu_exp == (0, 0, 0, 0) and mono.nu_exp == (0, 0, 0, 0) and mono.rho_power == 0


def test_default_pattern_monomial_by_hand():
    # 11 on 1->2 gives mu nu at both ends; 01 on 3->4 gives nu at 3 and mu at 4
    mono = monomial("11,00,01,00")
    assert mono.rho_power == 1
    assert mono.mu_exp == (1, 1, 0, 1)
    assert mono.nu_exp == (1, 1, 1, 0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(CODES), min_size=3, max_size=6), st.integers(0, 2 ** 32 - 1))
def test_monomial_matches_literal_product(codes, seed):
    rng = np.random.default_rng(seed)
    pat = CyclePattern(tuple(codes))
    n = 8
    mu, nu = rng.uniform(0.1, 3, n), rng.uniform(0.1, 3, n)
    q = PlrQuantities(mu, nu, mu * nu)
    rho = rng.normal()
    nodes = rng.choice(n, pat.m, replace=False)
    got = monomial(pat).evaluate(mu[nodes], nu[nodes], rho)
    assert got == pytest.approx(literal_tilde_product(pat, nodes, q, rho), rel=1e-12)


def test_is_cancellation_pair_examples():
    assert is_cancellation_pair(DEFAULT_PAIR.a, DEFAULT_PAIR.a) is None
    assert is_cancellation_pair(DEFAULT_PAIR.a, DEFAULT_PAIR.b) == 1
    assert is_cancellation_pair(DEFAULT_PAIR.b, DEFAULT_PAIR.a) is None
    for p in PAIRS_M4:
        assert is_cancellation_pair(p.a, p.b) == p.c0


def test_no_odd_length_three_pair():
    pats = [CyclePattern(c) for c in itertools.product(CODES, repeat=3)]
    assert not any(is_cancellation_pair(a, b) for a in pats for b in pats)


def test_unequal_lengths_rejected():
    with pytest.raises(DomainError):
        is_cancellation_pair("11,00,01,00", "10,10,10")


@pytest.mark.parametrize("m", [3, 5, 7])
def test_pair_search_odd_is_empty(m):
    assert pair_search(m) == []


def test_pair_search_m4_three_classes():
    found = pair_search(4)
    assert len(found) == 3
    assert sorted(p.c0 for p in found) == [1, 1, 2]
    keys = {pair_class_key(p.a, p.b) for p in found}
    assert pair_class_key(DEFAULT_PAIR.a, DEFAULT_PAIR.b) in keys
    assert keys == {pair_class_key(p.a, p.b) for p in PAIRS_M4}


@pytest.mark.parametrize("m", [4, 6])
def test_pair_search_matches_constructive_family(m):
    found = {pair_class_key(p.a, p.b) for p in pair_search(m)}
    family = {pair_class_key(p.a, p.b) for p in lemma_family(m)}
    assert found == family
    for p in lemma_family(m):
        assert is_cancellation_pair(p.a, p.b) == p.c0


def test_pair_search_range_enforced():
    with pytest.raises(CapacityError):
        pair_search(9)
    with pytest.raises(CapacityError):
        pair_search(2)


def test_pair_table_rows():
    rows = pair_table(PAIRS_M4)
    assert rows[0] == ("11,00,01,00", "10,10,00,10", 1, 1)


# -- literal counts ------------------------------------------------------------

def test_brute_force_trivial_values():
    g = from_edge_list([], 5)
    assert brute_force_count(g, "00,00,00,00") == 120
    assert brute_force_count(g, DEFAULT_PAIR.a) == 0


def test_brute_force_capacity():
    with pytest.raises(CapacityError):
        brute_force_count(from_edge_list([], 15), DEFAULT_PAIR.a)


def test_brute_force_matches_itertools_enumeration():
    g = sample(ModelParams.homogeneous(7, 0.5, -0.3), 4)
    for pat in (DEFAULT_PAIR.a, CyclePattern("10,01,11,00")):
        want = sum(
            all(g.dyad_state(t[k], t[(k + 1) % 4]) == c for k, c in enumerate(pat.codes))
            for t in itertools.permutations(range(7), 4)
        )
        assert brute_force_count(g, pat) == want


# -- fast counts -------------------------------------------------------------------

def test_fast_count_trivial_graphs():
    assert fast_count_pair(from_edge_list([], 8)) == (0, 0)
    full = from_edge_list([(i, j) for i in range(6) for j in range(6) if i != j], 6)
    for p in PAIRS_M4:
        assert fast_count_pair(full, p) == (0, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["sparse", "dense"]))
def test_fast_count_equals_brute_force(seed, backend):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    g = sample(random_params(rng, n), seed)
    ops = GraphOperands(g, backend)
    for p in PAIRS_M4:
        assert fast_count_pair(g, p, ops=ops) == (brute_force_count(g, p.a), brute_force_count(g, p.b))
    # patterns outside the pair list exercise the repeated-node corrections
    for codes in ("10,01,10,01", "11,11,11,11", "00,00,00,00", "01,10,00,11"):
        assert fast_count(g, codes, _ops=ops) == brute_force_count(g, codes)


def test_fast_count_all_patterns_one_graph():
    g = sample(random_params(np.random.default_rng(1), 9), 1)
    ops = GraphOperands(g, "sparse")
    for codes in itertools.product(CODES, repeat=4):
        assert fast_count(g, codes, _ops=ops) == brute_force_count(g, codes)


def test_backends_agree_at_moderate_n():
    g = sample(random_params(np.random.default_rng(2), 150), 2)
    got = {be: [fast_count_pair(g, p, be) for p in PAIRS_M4] for be in ("sparse", "dense")}
    assert got["sparse"] == got["dense"]


def test_mutation_breaks_exactness():
    g = sample(random_params(np.random.default_rng(3), 10), 3)
    good = GraphOperands(g, "sparse")
    bad = GraphOperands(g, "sparse", mutation="complement-off-by-one")
    want = brute_force_count(g, DEFAULT_PAIR.a)
    assert fast_count(g, DEFAULT_PAIR.a, _ops=good) == want
    assert fast_count(g, DEFAULT_PAIR.a, _ops=bad) != want
    with pytest.raises(DomainError):
        GraphOperands(g, mutation="nonsense")


def test_fast_count_relabel_invariant():
    g = sample(random_params(np.random.default_rng(4), 60), 4)
    perm = np.random.default_rng(5).permutation(60)
    h = g.relabel(perm)
    for p in PAIRS_M4:
        assert fast_count_pair(g, p) == fast_count_pair(h, p)


@pytest.mark.parametrize("backend", ["sparse", "dense"])
def test_gather_product_matches_dense_product(backend):
    g = sample(random_params(np.random.default_rng(6), 40), 6)
    ops = GraphOperands(g, backend)
    a10 = g.type_matrix("10").toarray()
    u = g.support.toarray()
    rng = np.random.default_rng(7)
    rows, cols = rng.integers(0, 40, 300), rng.integers(0, 40, 300)
    assert np.array_equal(ops.gather_product("10", "U", rows, cols, chunk_nnz=50),
                          (a10 @ u)[rows, cols])


# -- expected counts ---------------------------------------------------------------

def test_ratio_identity_random_parameters():
    rng = np.random.default_rng(8)
    for k in range(12):
        p = random_params(rng, int(rng.integers(5, 13)))
        pair = PAIRS_M4[k % 3]
        ratio = expected_count(p, pair.a) / expected_count(p, pair.b)
        assert ratio == pytest.approx(math.exp(pair.c0 * p.rho), rel=1e-10)


def test_ratio_one_at_zero_reciprocity():
    p = ModelParams(9, 0.0, -0.5, np.linspace(-1, 1, 9), np.linspace(1, -1, 9))
    for pair in PAIRS_M4:
        assert expected_count(p, pair.a) / expected_count(p, pair.b) == pytest.approx(1.0, rel=1e-12)


def test_expected_count_matches_monte_carlo_mean():
    p = ModelParams(8, 0.4, 0.2, np.linspace(-0.5, 0.5, 8), np.zeros(8))
    want = expected_count(p, "00,00,00,00")
    xs = np.array([brute_force_count(sample(p, s), "00,00,00,00") for s in range(2000)], float)
    se = xs.std(ddof=1) / math.sqrt(xs.size)
    assert abs(xs.mean() - want) <= 4 * se


def test_expected_count_capacity():
    with pytest.raises(CapacityError):
        expected_count(ModelParams.homogeneous(61), DEFAULT_PAIR.a)
