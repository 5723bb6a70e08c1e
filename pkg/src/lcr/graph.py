"""Dyad-state storage for simple directed graphs.

A graph on ``n`` nodes is held as three parallel arrays over the unordered
pairs ``i < j`` whose state is not ``00``.  The state code ``"10"`` means the
edge ``i -> j`` only, ``"01"`` means ``j -> i`` only and ``"11"`` a mutual
pair.  The edge-type matrices ``A^10, A^01, A^11`` are derived lazily as
sparse arrays; ``A^00`` is never materialized.
"""

from __future__ import annotations

import hashlib
import io
import logging
import os
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ParseError

log = logging.getLogger(__name__)

EDGE_TYPES = ("00", "10", "01", "11")
TRANSPOSE = {"00": "00", "10": "01", "01": "10", "11": "11"}

# internal integer encoding: bit 0 = forward edge i->j, bit 1 = backward j->i
_STATE_OF_CODE = {"00": 0, "10": 1, "01": 2, "11": 3}
_CODE_OF_STATE = {v: k for k, v in _STATE_OF_CODE.items()}
_HEADER_N = re.compile(r"#\s*n\s*=\s*(\d+)")


def check_code(code):
    if code not in _STATE_OF_CODE:
        raise DomainError(f"unknown edge type {code!r}; expected one of {EDGE_TYPES}")
    return code


@dataclass(frozen=True)
class IngestStats:
    """Bookkeeping from :func:`from_edge_list`."""

    n_edges_read: int = 0
    n_duplicates: int = 0
    n_self_loops: int = 0


@dataclass(frozen=True)
class DegreeSummary:
    """Per-node counts of incident dyads by type.

    ``out_deg[i]`` counts ``j`` with ``A^10_ij = 1`` (one-way edge leaving
    ``i``), ``in_deg[i]`` counts ``j`` with ``A^01_ij = 1`` (one-way edge
    entering ``i``) and ``recip_deg[i]`` counts mutual partners.
    """

    out_deg: np.ndarray
    in_deg: np.ndarray
    recip_deg: np.ndarray
    d_max: int


class DirectedGraph:
    """Immutable simple directed graph stored by dyad state.

    Parameters
    ----------
    n : int
        Number of nodes; ids are ``0..n-1``.
    rows, cols : array_like of int
        Endpoints of each stored dyad with ``rows < cols``.
    states : array_like of int
        Dyad state per pair, 1 (``10``), 2 (``01``) or 3 (``11``).
    """

    def __init__(self, n, rows=(), cols=(), states=(), ingest=None):
        n = int(n)
        if n < 0:
            raise DomainError("n must be non-negative")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        states = np.asarray(states, dtype=np.int8).ravel()
        if not (rows.shape == cols.shape == states.shape):
            raise DomainError("rows, cols and states must have equal length")
        if rows.size:
            if rows.min() < 0 or cols.max() >= n:
                raise DomainError("node id out of range")
            if np.any(rows >= cols):
                raise DomainError("dyads must be stored with rows < cols")
            if np.any((states < 1) | (states > 3)):
                raise DomainError("stored states must be 10, 01 or 11")
            order = np.lexsort((cols, rows))
            rows, cols, states = rows[order], cols[order], states[order]
            key = rows * n + cols
            if np.any(key[1:] == key[:-1]):
                raise DomainError("duplicate dyad")
        for a in (rows, cols, states):
            a.setflags(write=False)
        self._n = n
        self._rows = rows
        self._cols = cols
        self._states = states
        self.ingest = ingest if ingest is not None else IngestStats()

    # -- basic accessors -------------------------------------------------
    @property
    def n(self):
        return self._n

    @property
    def dyads(self):
        """Tuple ``(rows, cols, states)`` of the stored non-empty dyads."""
        return self._rows, self._cols, self._states

    def dyad_state(self, i, j):
        """State code of the ordered pair ``(i, j)``."""
        if i == j or not (0 <= i < self._n and 0 <= j < self._n):
            raise DomainError(f"invalid pair ({i}, {j})")
        lo, hi = (i, j) if i < j else (j, i)
        key = self._rows * self._n + self._cols
        pos = np.searchsorted(key, lo * self._n + hi)
        if pos < key.size and key[pos] == lo * self._n + hi:
            s = int(self._states[pos])
        else:
            s = 0
        if i > j and s in (1, 2):
            s = 3 - s
        return _CODE_OF_STATE[s]

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return (
            self._n == other._n
            and np.array_equal(self._rows, other._rows)
            and np.array_equal(self._cols, other._cols)
            and np.array_equal(self._states, other._states)
        )

    __hash__ = None

    def __repr__(self):
        counts = {c: self.edge_type_count(c) for c in ("10", "11")}
        return (f"DirectedGraph(n={self._n}, one_way={counts['10']}, "
                f"mutual_pairs={counts['11'] // 2})")

    # -- derived views ---------------------------------------------------
    def to_edge_list(self):
        """Directed edges as an ``(m, 2)`` integer array, sorted."""
        fwd = (self._states & 1).astype(bool)
        bwd = (self._states & 2).astype(bool)
        src = np.concatenate([self._rows[fwd], self._cols[bwd]])
        dst = np.concatenate([self._cols[fwd], self._rows[bwd]])
        order = np.lexsort((dst, src))
        return np.column_stack([src[order], dst[order]])

    def _csr(self, r, c):
        data = np.ones(r.size, dtype=np.int64)
        m = sp.csr_array((data, (r, c)), shape=(self._n, self._n))
        m.sort_indices()
        return m

    @cached_property
    def _type_mats(self):
        r, c, s = self._rows, self._cols, self._states
        one = s == 1
        two = s == 2
        mut = s == 3
        a10 = self._csr(np.concatenate([r[one], c[two]]), np.concatenate([c[one], r[two]]))
        a11 = self._csr(np.concatenate([r[mut], c[mut]]), np.concatenate([c[mut], r[mut]]))
        return {"10": a10, "01": a10.T.tocsr(), "11": a11}

    def type_matrix(self, code):
        """Sparse 0/1 matrix ``A^code`` for ``code`` in ``10, 01, 11``."""
        check_code(code)
        if code == "00":
            raise DomainError("A^00 is never materialized; use the complement identities")
        return self._type_mats[code]

    @cached_property
    def adjacency(self):
        """Sparse adjacency matrix ``A`` (``A_ij = 1`` for an edge ``i -> j``)."""
        return (self._type_mats["10"] + self._type_mats["11"]).tocsr()

    @cached_property
    def support(self):
        """Symmetric 0/1 matrix marking every non-empty dyad."""
        m = self._type_mats
        return (m["10"] + m["01"] + m["11"]).tocsr()

    def edge_type_count(self, code):
        """Number of ordered pairs ``i != j`` whose dyad has type ``code``."""
        check_code(code)
        s = self._states
        n_one = int(np.count_nonzero((s == 1) | (s == 2)))
        n_mut = int(np.count_nonzero(s == 3))
        if code in ("10", "01"):
            return n_one
        if code == "11":
            return 2 * n_mut
        return self._n * (self._n - 1) - 2 * n_one - 2 * n_mut

    def degrees(self):
        m = self._type_mats
        out_deg = np.asarray(m["10"].sum(axis=1)).ravel().astype(np.int64)
        in_deg = np.asarray(m["01"].sum(axis=1)).ravel().astype(np.int64)
        recip = np.asarray(m["11"].sum(axis=1)).ravel().astype(np.int64)
        d_max = 0
        if self._n:
            d_max = int(max(out_deg.max(), in_deg.max(), recip.max()))
        return DegreeSummary(out_deg, in_deg, recip, d_max)

    def relabel(self, perm):
        """Graph with node ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if perm.shape != (self._n,) or not np.array_equal(np.sort(perm), np.arange(self._n)):
            raise DomainError("perm must be a permutation of range(n)")
        e = self.to_edge_list()
        return from_edge_list(perm[e] if e.size else e, self._n)

    def digest(self):
        """SHA-256 of the canonical dyad arrays (used for provenance)."""
        h = hashlib.sha256()
        h.update(str(self._n).encode())
        for a in (self._rows, self._cols, self._states):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def from_edge_list(edges, n):
    """Build a graph from directed ``(source, target)`` pairs.

    Duplicate edges collapse; self-loops are dropped and counted.  An edge
    present in both directions yields a mutual dyad.
    """
    e = np.asarray(edges, dtype=np.int64)
    if e.size == 0:
        e = e.reshape(0, 2)
    if e.ndim != 2 or e.shape[1] != 2:
        raise DomainError("edges must be a sequence of (source, target) pairs")
    n = int(n)
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = int(np.flatnonzero((e < 0).any(axis=1) | (e >= n).any(axis=1))[0])
        raise ParseError(f"node id out of range [0, {n})", line=bad + 1)
    loops = e[:, 0] == e[:, 1]
    n_loops = int(loops.sum())
    e = e[~loops]
    keys = np.unique(e[:, 0] * n + e[:, 1])
    n_dup = int(e.shape[0] - keys.size)
    src, dst = keys // n, keys % n
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    bit = np.where(src < dst, 1, 2).astype(np.int8)
    pair = lo * n + hi
    upair, inv = np.unique(pair, return_inverse=True)
    states = np.zeros(upair.size, dtype=np.int8)
    np.bitwise_or.at(states, inv, bit)
    stats = IngestStats(int(e.shape[0] + n_loops), n_dup, n_loops)
    if n_loops:
        log.warning("dropped %d self-loop(s)", n_loops)
    return DirectedGraph(n, upair // n, upair % n, states, ingest=stats)


# -- edge-list files ------------------------------------------------------

def read_edge_list(path_or_file, n=None):
    """Parse a tab-separated edge list.

    Lines are ``source<TAB>target``; blank lines and lines starting with
    ``#`` are skipped.  If every id is an integer the ids are used directly
    (``n`` defaults to a ``# n=<count>`` header, else ``max id + 1``); otherwise ids are treated as labels
    and mapped to ``0..n-1`` in order of first appearance.

    Returns
    -------
    graph : DirectedGraph
    labels : list of str or None
        Index-to-label map when labels were used.
    """
    if isinstance(path_or_file, (str, os.PathLike)):
        with open(path_or_file, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = path_or_file.read()
    raw = []
    header_n = None
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.strip()
        if line.startswith("#"):
            m = _HEADER_N.match(line)
            if m and header_n is None:
                header_n = int(m.group(1))
            continue
        if not line:
            continue
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise ParseError("expected 'source<TAB>target'", line=lineno)
        raw.append((lineno, parts[0].strip(), parts[1].strip()))

    def _is_int(s):
        try:
            int(s)
        except ValueError:
            return False
        return True

    if n is None:
        n = header_n
    labels = None
    if all(_is_int(a) and _is_int(b) for _, a, b in raw):
        pairs = [(int(a), int(b)) for _, a, b in raw]
        top = max((max(a, b) for a, b in pairs), default=-1) + 1
        if n is None:
            n = top
        for (lineno, _, _), (a, b) in zip(raw, pairs):
            if a < 0 or b < 0 or a >= n or b >= n:
                raise ParseError(f"node id out of range [0, {n})", line=lineno)
    else:
        index = {}
        pairs = []
        for _, a, b in raw:
            for lab in (a, b):
                if lab not in index:
                    index[lab] = len(index)
            pairs.append((index[a], index[b]))
        labels = list(index)
        if n is None:
            n = len(labels)
        elif n < len(labels):
            raise ParseError(f"{len(labels)} labels exceed n={n}")
    return from_edge_list(pairs, n), labels


def write_edge_list(graph, path_or_file, labels=None):
    """Write ``graph`` in the tab-separated edge-list format."""
    e = graph.to_edge_list()
    lines = [f"# n={graph.n}\n"]
    for s, t in e:
        if labels is None:
            lines.append(f"{s}\t{t}\n")
        else:
            lines.append(f"{labels[s]}\t{labels[t]}\n")
    if isinstance(path_or_file, (str, os.PathLike)):
        with open(path_or_file, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
    else:
        path_or_file.writelines(lines)
