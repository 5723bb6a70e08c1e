"""Generalized cycle patterns and their counts.

A pattern ``a = (a_1, ..., a_m)`` assigns an edge type to each step of the
tour ``i_1 -> i_2 -> ... -> i_m -> i_1``.  Its raw count on a graph is

    G(a) = sum over distinct (i_1, ..., i_m) of A^{a_1}_{i_1 i_2} ... A^{a_m}_{i_m i_1}

with no division by the pattern's automorphism multiplicity; every statistic
built on top uses this raw sum.

Two patterns form a cancellation pair when the products of the rank-one
factors along the tour agree node by node up to ``e^(c0 rho)``; the ratio of
their expected counts is then exactly ``e^(c0 rho)`` whatever the nuisance
parameters are.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels as K
from .errors import CapacityError, DomainError
from .graph import EDGE_TYPES, TRANSPOSE, check_code
from .model import dyad_probability_matrices

BRUTE_FORCE_MAX_N = 14
EXPECTED_COUNT_MAX_N = 60
PAIR_SEARCH_RANGE = (3, 8)


@dataclass(frozen=True)
class CyclePattern:
    codes: tuple

    def __post_init__(self):
        codes = self.codes
        if isinstance(codes, str):
            codes = codes.split(",")
        codes = tuple(str(c).strip() for c in codes)
        if len(codes) < 3:
            raise DomainError("a cycle pattern needs at least 3 edges")
        for c in codes:
            check_code(c)
        object.__setattr__(self, "codes", codes)

    @property
    def m(self):
        return len(self.codes)

    def __str__(self):
        return ",".join(self.codes)

    @classmethod
    def parse(cls, text):
        """Read the comma-separated form, e.g. ``"11,00,01,00"``."""
        return cls(text)

    def rotate(self, s):
        return CyclePattern(self.codes[s:] + self.codes[:s])

    def reverse(self):
        """Same cycle traversed backwards (each step transposed)."""
        return CyclePattern(tuple(TRANSPOSE[c] for c in reversed(self.codes)))


@dataclass(frozen=True)
class CycleMonomial:
    """Exponents of ``mu``, ``nu`` (per tour position) and of ``e^rho``."""

    mu_exp: tuple
    nu_exp: tuple
    rho_power: int

    def evaluate(self, mu, nu, rho):
        """Value at node factors ``mu``, ``nu`` listed in tour order."""
        mu = np.asarray(mu, dtype=float)
        nu = np.asarray(nu, dtype=float)
        return float(np.exp(rho * self.rho_power)
                     * np.prod(mu ** np.array(self.mu_exp))
                     * np.prod(nu ** np.array(self.nu_exp)))


@dataclass(frozen=True)
class CancellationPair:
    a: CyclePattern
    b: CyclePattern
    c0: int
    pair_id: int = 0

    def __str__(self):
        return f"({self.a}) / ({self.b}), c0={self.c0}"


def _as_pattern(p):
    return p if isinstance(p, CyclePattern) else CyclePattern(p)


def monomial(pattern):
    """Symbolic product of the rank-one edge factors along the tour.

    Step ``k`` goes from position ``k`` to ``k+1``.  A forward bit
    contributes ``mu`` at the tail and ``nu`` at the head; a backward bit
    contributes ``mu`` at the head and ``nu`` at the tail; a mutual step
    additionally contributes one power of ``e^rho``.
    """
    pattern = _as_pattern(pattern)
    m = pattern.m
    mu = [0] * m
    nu = [0] * m
    rho = 0
    for k, code in enumerate(pattern.codes):
        fwd, bwd = int(code[0]), int(code[1])
        nxt = (k + 1) % m
        mu[k] += fwd
        nu[nxt] += fwd
        mu[nxt] += bwd
        nu[k] += bwd
        rho += fwd * bwd
    return CycleMonomial(tuple(mu), tuple(nu), rho)


def is_cancellation_pair(a, b):
    """Return ``c0 > 0`` if ``(a, b)`` cancels, else ``None``."""
    a, b = _as_pattern(a), _as_pattern(b)
    if a.m != b.m:
        raise DomainError("patterns must have equal length")
    ma, mb = monomial(a), monomial(b)
    if ma.mu_exp != mb.mu_exp or ma.nu_exp != mb.nu_exp:
        return None
    c0 = ma.rho_power - mb.rho_power
    return c0 if c0 > 0 else None


def pair_images(a, b):
    """All images of ``(a, b)`` under simultaneous rotation and reversal."""
    a, b = _as_pattern(a), _as_pattern(b)
    out = []
    for x, y in ((a, b), (a.reverse(), b.reverse())):
        for s in range(a.m):
            out.append((x.rotate(s).codes, y.rotate(s).codes))
    return out


def pair_class_key(a, b):
    """Canonical representative of the isomorphism class of ``(a, b)``."""
    return min(pair_images(a, b))


def pair_search(m):
    """All cancellation pairs of length ``m``, one per isomorphism class.

    Patterns are bucketed by their ``mu``/``nu`` exponent signature, so the
    search over all ``4^m x 4^m`` ordered pairs reduces to pairs within a
    bucket.  Classes are taken modulo simultaneous rotation of both
    patterns and reversal of the tour direction (which transposes each
    step).  Returns a list sorted by canonical key.
    """
    lo, hi = PAIR_SEARCH_RANGE
    if not (lo <= m <= hi):
        raise CapacityError(f"pair search supports {lo} <= m <= {hi}")
    buckets = defaultdict(list)
    for codes in itertools.product(EDGE_TYPES, repeat=m):
        mono = monomial(CyclePattern(codes))
        buckets[(mono.mu_exp, mono.nu_exp)].append((codes, mono.rho_power))
    classes = {}
    for members in buckets.values():
        for a, ra in members:
            for b, rb in members:
                if ra > rb:
                    key = pair_class_key(a, b)
                    classes.setdefault(key, ra - rb)
    out = []
    for k, key in enumerate(sorted(classes), start=1):
        out.append(CancellationPair(CyclePattern(key[0]), CyclePattern(key[1]), classes[key], k))
    return out


def lemma_family(m):
    """Constructive family of cancellation pairs for even ``m``.

    For bits ``x, y`` of length ``N = m/2`` with ``sum(x) > sum(y)``:
    ``a = (1x_1, y_1 0, ..., 1x_N, y_N 0)`` and
    ``b = (0x_1, y_1 1, ..., 0x_N, y_N 1)``, with ``c0 = sum(x) - sum(y)``.
    """
    if m % 2:
        return []
    half = m // 2
    out = []
    for x in itertools.product((0, 1), repeat=half):
        for y in itertools.product((0, 1), repeat=half):
            c0 = sum(x) - sum(y)
            if c0 <= 0:
                continue
            a, b = [], []
            for xi, yi in zip(x, y):
                a += [f"1{xi}", f"{yi}0"]
                b += [f"0{xi}", f"{yi}1"]
            out.append(CancellationPair(CyclePattern(tuple(a)), CyclePattern(tuple(b)), c0))
    return out


# The three m = 4 classes.  Pair 1 is the default estimator's pair; pairs 2
# and 3 are representatives of the remaining classes with positions aligned
# so the identity holds term by term.
PAIRS_M4 = (
    CancellationPair(CyclePattern(("11", "00", "01", "00")),
                     CyclePattern(("10", "10", "00", "10")), 1, 1),
    CancellationPair(CyclePattern(("11", "00", "11", "00")),
                     CyclePattern(("10", "10", "10", "10")), 2, 2),
    CancellationPair(CyclePattern(("11", "01", "11", "00")),
                     CyclePattern(("10", "11", "10", "10")), 1, 3),
)
DEFAULT_PAIR = PAIRS_M4[0]


def get_pair(pair_id):
    try:
        return PAIRS_M4[int(pair_id) - 1]
    except (IndexError, ValueError):
        raise DomainError(f"unknown pair id {pair_id!r}; choose 1, 2 or 3") from None


# -- oracles ----------------------------------------------------------------

def _dense_type(graph, code):
    n = graph.n
    if code == "00":
        u = graph.support.toarray()
        out = 1 - u
        np.fill_diagonal(out, 0)
        return out.astype(np.int64)
    return graph.type_matrix(code).toarray().astype(np.int64)


def _distinct_mask4(n):
    idx = np.arange(n)
    i, j, k, l = np.ix_(idx, idx, idx, idx)
    return ((i != j) & (i != k) & (i != l) & (j != k) & (j != l) & (k != l))


def brute_force_count(graph, pattern):
    """Literal sum over distinct ordered tuples (``n <= 14`` for ``m = 4``)."""
    pattern = _as_pattern(pattern)
    n = graph.n
    if pattern.m != 4:
        limit = {3: 60, 5: 9, 6: 7}.get(pattern.m, 0)
        if n > limit:
            raise CapacityError(f"brute force for m={pattern.m} supports n <= {limit}")
        mats = [_dense_type(graph, c) for c in pattern.codes]
        total = 0
        for tup in itertools.permutations(range(n), pattern.m):
            v = 1
            for k, mat in enumerate(mats):
                v *= mat[tup[k], tup[(k + 1) % pattern.m]]
                if not v:
                    break
            total += v
        return int(total)
    if n > BRUTE_FORCE_MAX_N:
        raise CapacityError(f"brute force supports n <= {BRUTE_FORCE_MAX_N}")
    if n < 4:
        return 0
    a1, a2, a3, a4 = (_dense_type(graph, c) for c in pattern.codes)
    t = (a1[:, :, None, None] * a2[None, :, :, None]
         * a3[None, None, :, :] * a4.T[:, None, None, :])
    return int((t * _distinct_mask4(n)).sum())


def expected_count(params, pattern):
    """Exact ``E[G(a)]`` by direct summation (``n <= 60`` for ``m = 4``)."""
    pattern = _as_pattern(pattern)
    if pattern.m != 4:
        raise DomainError("expected_count is implemented for m = 4")
    n = params.n
    if n > EXPECTED_COUNT_MAX_N:
        raise CapacityError(f"expected_count supports n <= {EXPECTED_COUNT_MAX_N}")
    om = dyad_probability_matrices(params)
    w1, w2, w3, w4 = (om[c] for c in pattern.codes)
    idx = np.arange(n)
    jj, kk, ll = np.ix_(idx, idx, idx)
    base = (jj != kk) & (jj != ll) & (kk != ll)
    total = 0.0
    for i in range(n):
        # t[j, k, l] = w1[i, j] w2[j, k] w3[k, l] w4[l, i]
        t = w1[i][:, None, None] * w2[:, :, None] * w3[None, :, :] * w4[:, i][None, None, :]
        mask = base & (jj != i) & (kk != i) & (ll != i)
        total += float(t[mask].sum())
    return total


# -- fast counting ------------------------------------------------------------

def choose_backend(graph):
    """``"dense"`` when a dense GEMM beats sparse products, else ``"sparse"``."""
    n = graph.n
    if n == 0:
        return "sparse"
    deg = np.diff(graph.support.indptr).astype(np.float64)
    sparse_work = float(deg @ deg)
    # measured: count plus variance costs about 2.7e-7 s per unit of
    # sum(deg^2) sparse and about 1.6e-10 s per n^3 dense
    return "dense" if sparse_work * 2000.0 > float(n) ** 3 else "sparse"


# deliberate defects for exercising the oracle checks
MUTATIONS = ("complement-off-by-one",)


class GraphOperands:
    """Type matrices of one graph in the requested storage, with a shared
    product cache.

    ``mats`` holds ``A^10``, ``A^01``, ``A^11`` and the symmetric support
    ``U``; dense storage uses :func:`lcr._kernels.dense_dtype`.  Counting and
    variance estimation on the same graph share one instance so products are
    computed once.
    """

    def __init__(self, graph, backend="auto", mutation=None):
        if mutation is not None and mutation not in MUTATIONS:
            raise DomainError(f"unknown mutation {mutation!r}; choose from {MUTATIONS}")
        self.mutation = mutation
        if backend == "auto":
            backend = choose_backend(graph)
        if backend not in ("dense", "sparse"):
            raise DomainError(f"unknown backend {backend!r}")
        self.graph = graph
        self.n = graph.n
        self.backend = backend
        mats = {c: graph.type_matrix(c) for c in ("10", "01", "11")}
        mats["U"] = graph.support
        if backend == "dense":
            dt = K.dense_dtype(graph.n)
            mats = {k: v.toarray().astype(dt) for k, v in mats.items()}
        self.mats = mats
        self.ws = K.Workspace(graph.n)
        self.ws.set_transpose(mats["10"], mats["01"])
        self.ws.set_transpose(mats["11"], mats["11"])
        self.ws.set_transpose(mats["U"], mats["U"])
        self.row_sums = {c: np.asarray(graph.type_matrix(c).sum(axis=1)).ravel().astype(np.int64)
                         for c in ("10", "01", "11")}

    def expand(self, code):
        """Signed terms whose sum is ``A^code``."""
        if code == "00":
            # the mutation hook deliberately breaks the expansion so oracle
            # checks can demonstrate that they detect it
            eye = -2 if self.mutation == "complement-off-by-one" else -1
            return [(1, K.J), (eye, K.I), (-1, self.mats["U"])]
        return [(1, self.mats[code])]

    def type_row_sums(self, code):
        if code == "00":
            n = self.n
            return (n - 1) - (self.row_sums["10"] + self.row_sums["01"] + self.row_sums["11"])
        return self.row_sums[code]

    def matmul(self, x, y):
        """Cached product of two operands given by key or matrix."""
        x = self.mats[x] if isinstance(x, str) else x
        y = self.mats[y] if isinstance(y, str) else y
        return self.ws.matmul(x, y)

    def gather(self, m, rows, cols):
        """Entries ``m[rows, cols]`` as ``int64``; ``m`` may be an operand key."""
        if isinstance(m, str):
            m = self.mats[m]
        if rows.size == 0:
            return np.zeros(0, dtype=np.int64)
        if sp.issparse(m):
            m = m.tocsr()
            vals = m[rows, cols]
            vals = vals.toarray() if sp.issparse(vals) else np.asarray(vals)
            return vals.ravel().astype(np.int64)
        return np.rint(m[rows, cols]).astype(np.int64)

    def gather_product(self, x, y, rows, cols, chunk_nnz=4_000_000):
        """Entries of ``x @ y`` at ``(rows, cols)`` as ``int64``.

        Dense operands gather from the cached product.  Sparse operands
        never form the product: each entry is the dot product of row
        ``rows[k]`` of ``x`` with column ``cols[k]`` of ``y``, evaluated in
        chunks of at most about ``chunk_nnz`` stored entries.
        """
        if self.backend == "dense":
            return self.gather(self.matmul(x, y), rows, cols)
        x = (self.mats[x] if isinstance(x, str) else x).tocsr()
        yt = (self.mats[y] if isinstance(y, str) else y).T.tocsr()
        out = np.zeros(rows.size, dtype=np.int64)
        if rows.size == 0:
            return out
        per_row = (x.nnz + yt.nnz) / max(1, self.n) + 1
        step = max(1, int(chunk_nnz / per_row))
        for s in range(0, rows.size, step):
            e = min(rows.size, s + step)
            prod = x[rows[s:e]].multiply(yt[cols[s:e]])
            out[s:e] = np.asarray(prod.sum(axis=1)).ravel().astype(np.int64)
        return out


def _coincidence_terms(codes, ops, graph):
    """Contribution of tuples with ``i1 = i3`` or ``i2 = i4`` to the trace.

    Such a tuple revisits a dyad on consecutive steps, which only survives
    when the second step has the transposed type of the first; the sum is
    then expressed through row sums of the type matrices.
    """
    a1, a2, a3, a4 = codes
    t = TRANSPOSE
    total = 0
    # i1 = i3: steps (1, 2) and (3, 4) each retrace one dyad from i1
    if a2 == t[a1] and a4 == t[a3]:
        total += int(ops.type_row_sums(a1) @ ops.type_row_sums(a3))
    # i2 = i4: steps (2, 3) retrace from i2, steps (4, 1) close at i2
    if a3 == t[a2] and a1 == t[a4]:
        total += int(ops.type_row_sums(a2) @ ops.type_row_sums(a4))
    # both: all four steps on one dyad, counted twice above
    if a2 == t[a1] and a3 == a1 and a4 == t[a1]:
        total -= graph.edge_type_count(a1)
    return total


def fast_count(graph, pattern, backend="auto", _ops=None):
    """Exact ``G(a)`` for a length-4 pattern via trace expansions.

    Each ``A^00`` is written as ``J - I - U`` (``U`` the symmetric support),
    the product is expanded, and every term is evaluated with the
    primitives in :mod:`lcr._kernels`.  Tuples with a repeated node survive
    in the trace only when a step retraces the previous dyad; those terms
    are subtracted explicitly.
    """
    pattern = _as_pattern(pattern)
    if pattern.m != 4:
        raise DomainError("fast counting is specialized to m = 4")
    if graph.n < 4:
        return 0
    ops = _ops if _ops is not None else GraphOperands(graph, backend)
    combos = list(itertools.product(*(ops.expand(c) for c in pattern.codes)))
    # longest products first so shorter terms can reuse them
    combos.sort(key=lambda cb: -sum(not isinstance(f, str) for _, f in cb))
    total = 0
    for combo in combos:
        sign = 1
        for s, _ in combo:
            sign *= s
        total += sign * K.cyclic_trace([f for _, f in combo], ops.ws)
    return total - _coincidence_terms(pattern.codes, ops, graph)


def fast_count_pair(graph, pair=DEFAULT_PAIR, backend="auto", ops=None):
    """``(Q(a), Q(b))`` for a cancellation pair of length 4."""
    if graph.n < 4:
        return (0, 0)
    ops = ops if ops is not None else GraphOperands(graph, backend)
    return (fast_count(graph, pair.a, _ops=ops), fast_count(graph, pair.b, _ops=ops))


def count_all_pairs(graph, pairs=PAIRS_M4, backend="auto", ops=None):
    """Counts for several pairs sharing one workspace."""
    if graph.n < 4:
        return [(0, 0) for _ in pairs]
    ops = ops if ops is not None else GraphOperands(graph, backend)
    return [(fast_count(graph, p.a, _ops=ops), fast_count(graph, p.b, _ops=ops))
            for p in pairs]


def pair_table(pairs):
    """Rows ``(pattern a, pattern b, c0, class id)`` for display or export."""
    return [(str(p.a), str(p.b), p.c0, p.pair_id) for p in pairs]
