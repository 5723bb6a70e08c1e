import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcr import DirectedGraph, ModelParams, from_edge_list, read_edge_list, sample, write_edge_list
from lcr.errors import DomainError, ParseError


def dense_types(g):
    """Independent dense view: (A^10, A^01, A^11, A^00) from the edge list."""
    n = g.n
    a = np.zeros((n, n), dtype=int)
    for s, t in g.to_edge_list().tolist():
        a[s, t] = 1
    a11 = a * a.T
    a10 = a * (1 - a.T)
    a00 = (1 - a) * (1 - a.T) - np.eye(n, dtype=int)
    return a10, a10.T, a11, a00


def test_empty_graph_all_dyads_empty():
    g = from_edge_list([], 5)
    assert g.edge_type_count("00") == 20
    assert g.edge_type_count("11") == 0
    assert all(g.dyad_state(i, j) == "00" for i in range(5) for j in range(5) if i != j)


def test_reciprocal_edge_makes_mutual_dyad():
    g = from_edge_list([(0, 1), (1, 0)], 3)
    assert g.dyad_state(0, 1) == "11"
    assert g.dyad_state(1, 0) == "11"
    assert g.edge_type_count("11") == 2


def test_duplicates_collapse_and_are_counted():
    g = from_edge_list([(0, 1), (0, 1)], 3)
    assert g.dyad_state(0, 1) == "10"
    assert g.dyad_state(1, 0) == "01"
    assert g.ingest.n_duplicates == 1


def test_self_loops_dropped():
    g = from_edge_list([(0, 0), (1, 2)], 3)
    assert g.ingest.n_self_loops == 1
    assert g.to_edge_list().tolist() == [[1, 2]]


def test_out_of_range_id_reports_position():
    with pytest.raises(ParseError) as exc:
        from_edge_list([(0, 1), (0, 7)], 3)
    assert exc.value.line == 2


def test_single_one_way_degrees():
    d = from_edge_list([(0, 1)], 4).degrees()
    assert d.out_deg.tolist() == [1, 0, 0, 0]
    assert d.in_deg.tolist() == [0, 1, 0, 0]
    assert d.recip_deg.tolist() == [0, 0, 0, 0]
    assert d.d_max == 1


def test_empty_degrees_zero():
    d = from_edge_list([], 4).degrees()
    assert not d.out_deg.any() and not d.in_deg.any() and not d.recip_deg.any()


def test_counts_match_dense_enumeration_n50():
    g = sample(ModelParams(50, 0.7, -1.5, np.linspace(-1, 1, 50), np.linspace(1, -1, 50)), 11)
    a10, a01, a11, a00 = dense_types(g)
    assert g.edge_type_count("10") == a10.sum()
    assert g.edge_type_count("01") == a01.sum()
    assert g.edge_type_count("11") == a11.sum()
    assert g.edge_type_count("00") == a00.sum()
    for code, m in (("10", a10), ("01", a01), ("11", a11)):
        assert np.array_equal(g.type_matrix(code).toarray(), m)


def test_degrees_match_dense_oracle_n100():
    g = sample(ModelParams(100, 0.3, -2.0, np.zeros(100), np.zeros(100)), 5)
    a10, a01, a11, _ = dense_types(g)
    d = g.degrees()
    assert np.array_equal(d.out_deg, a10.sum(axis=1))
    assert np.array_equal(d.in_deg, a01.sum(axis=1))
    assert np.array_equal(d.recip_deg, a11.sum(axis=1))


def test_a00_is_never_materialized():
    with pytest.raises(DomainError):
        from_edge_list([(0, 1)], 3).type_matrix("00")


def test_invalid_code_rejected():
    with pytest.raises(DomainError):
        from_edge_list([(0, 1)], 3).edge_type_count("12")


def test_adjacency_view_consistent_with_states():
    g = from_edge_list([(0, 1), (1, 0), (2, 3)], 4)
    a = g.adjacency.toarray()
    for i in range(4):
        for j in range(4):
            if i != j:
                assert a[i, j] == int(g.dyad_state(i, j)[0])


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 12).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                             max_size=40))))
def test_edge_list_roundtrip(args):
    n, edges = args
    g = from_edge_list(edges, n)
    buf = io.StringIO()
    write_edge_list(g, buf)
    buf.seek(0)
    h, labels = read_edge_list(buf)
    assert labels is None
    assert h == g
    assert h.digest() == g.digest()


def test_relabel_preserves_type_counts_and_is_invertible():
    g = sample(ModelParams.homogeneous(30, 1.0, -1.0), 2)
    perm = np.random.default_rng(0).permutation(30)
    h = g.relabel(perm)
    for c in ("00", "10", "11"):
        assert h.edge_type_count(c) == g.edge_type_count(c)
    assert h.relabel(np.argsort(perm)) == g


def test_read_labels_mapped_in_order_of_appearance():
    g, labels = read_edge_list(io.StringIO("alice\tbob\nbob\talice\ncarol\tbob\n"))
    assert labels == ["alice", "bob", "carol"]
    assert g.dyad_state(0, 1) == "11"
    assert g.dyad_state(2, 1) == "10"


def test_header_sets_node_count():
    g, _ = read_edge_list(io.StringIO("# n=10\n0\t1\n"))
    assert g.n == 10


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError) as exc:
        read_edge_list(io.StringIO("# comment\n0\t1\n1 2 3\n"))
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_constructor_validates_storage():
    with pytest.raises(DomainError):
        DirectedGraph(3, [1], [0], [1])
    with pytest.raises(DomainError):
        DirectedGraph(3, [0, 0], [1, 1], [1, 2])
