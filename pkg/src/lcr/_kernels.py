"""Trace primitives for products of 0/1 matrices, all-ones ``J`` and ``I``.

Operands are either ``scipy.sparse`` CSR arrays with integer entries or
dense floating arrays holding exact small integers.  Dense GEMM in single
precision is exact while every partial sum stays below ``2**24``: entries of
a product of two 0/1 matrices are at most ``n``, and of three at most
``n**2``, so single precision is used for ``n <= DENSE_F32_MAX_N`` and
double precision above.  Reductions are done in ``float64`` (exact below
``2**53``) or ``int64``.
"""

import numpy as np
import scipy.sparse as sp

J = "J"
I = "I"

DENSE_F32_MAX_N = 4096


def dense_dtype(n):
    return np.float32 if n <= DENSE_F32_MAX_N else np.float64


def _transpose(x):
    return x.T.tocsr() if sp.issparse(x) else x.T


class Workspace:
    """Memoizes matrix products within one graph's computations.

    Transpose relations between operands (``A^10`` and ``A^01``; ``A^11``
    and the support are symmetric) let ``x @ y`` be served as the transpose
    of a cached ``y' @ x'``.
    """

    def __init__(self, n):
        self.n = n
        self._prod = {}
        self._t = {}
        self._keep = []
        self.gemms = 0

    def set_transpose(self, x, xt):
        self._t[id(x)] = xt
        self._t[id(xt)] = x
        self._keep.extend((x, xt))

    def lookup(self, x, y):
        hit = self._prod.get((id(x), id(y)))
        if hit is None:
            xt, yt = self._t.get(id(x)), self._t.get(id(y))
            if xt is not None and yt is not None:
                other = self._prod.get((id(yt), id(xt)))
                if other is not None:
                    hit = _transpose(other)
                    self._store(x, y, hit)
        return hit

    def _store(self, x, y, p):
        self._prod[(id(x), id(y))] = p
        self._keep.extend((x, y, p))

    def matmul(self, x, y):
        hit = self.lookup(x, y)
        if hit is None:
            hit = x @ y
            self.gemms += 1
            if sp.issparse(hit):
                hit = hit.tocsr()
            self._store(x, y, hit)
        return hit

    def product(self, mats):
        out = mats[0]
        for m in mats[1:]:
            out = self.matmul(out, m)
        return out


def ones_form(mats, n):
    """``1' M_1 M_2 ... M_r 1`` as an exact integer."""
    if not mats:
        return n
    v = np.ones(n, dtype=np.int64)
    for m in mats:
        if sp.issparse(m):
            v = m.T @ v
        else:
            v = np.rint(np.einsum("i,ij->j", v, m, dtype=np.float64)).astype(np.int64)
    return int(v.sum())


def trace_pair(x, y):
    """``trace(x @ y)`` = sum of ``x * y.T``."""
    if sp.issparse(x) and sp.issparse(y):
        return int(x.multiply(y.T).sum())
    if sp.issparse(x):
        x, y = y, x
    if sp.issparse(y):
        yt = y.T.tocoo()
        vals = x[yt.row, yt.col].astype(np.float64)
        return int(round(float(vals @ yt.data.astype(np.float64))))
    return int(round(float(np.einsum("ij,ji->", x, y, dtype=np.float64))))


def _pick(options, ws):
    """First option whose products are all cached, else the most cached one."""
    best, best_hits = options[0], -1
    for opt in options:
        hits = sum(ws.lookup(*p) is not None for p in opt[0])
        if hits == len(opt[0]):
            return opt
        if hits > best_hits:
            best, best_hits = opt, hits
    return best


def trace_product(mats, ws):
    """``trace(M_1 ... M_r)`` for ``r`` in 1..4, reusing cached products."""
    r = len(mats)
    if r == 1:
        m = mats[0]
        return int(m.diagonal().sum()) if sp.issparse(m) else int(round(float(np.trace(m))))
    if r == 2:
        return trace_pair(mats[0], mats[1])
    if r == 3:
        x, y, z = mats
        ((a, b),), rest = _pick([(((x, y),), z), (((y, z),), x), (((z, x),), y)], ws)
        return trace_pair(ws.matmul(a, b), rest)
    if r == 4:
        w, x, y, z = mats
        ((a, b), (c, d)), _ = _pick([(((w, x), (y, z)), None), (((x, y), (z, w)), None)], ws)
        return trace_pair(ws.matmul(a, b), ws.matmul(c, d))
    raise ValueError("at most four factors supported")


def cyclic_trace(factors, ws):
    """Trace of a product whose factors are matrices, ``J`` or ``I``.

    ``I`` factors drop out; ``J = 1 1'`` cuts the cycle into segments, each
    contributing ``1' (segment) 1``; with no ``J`` the trace is taken.
    """
    seq = [f for f in factors if not (isinstance(f, str) and f == I)]
    if not seq:
        return ws.n
    js = [k for k, f in enumerate(seq) if isinstance(f, str) and f == J]
    if not js:
        return trace_product(seq, ws)
    last = js[-1]
    seq = seq[last + 1:] + seq[:last + 1]
    total = 1
    seg = []
    for f in seq:
        if isinstance(f, str):
            total *= ones_form(seg, ws.n)
            seg = []
        else:
            seg.append(f)
    return total
