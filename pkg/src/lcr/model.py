"""The p1 model: parameters, dyad probabilities and samplers.

Each unordered dyad ``{i, j}`` takes one of four joint outcomes
``(A_ij, A_ji)`` with log-weights

    00: 0
    10: gamma + alpha_i + beta_j
    01: gamma + alpha_j + beta_i
    11: 2 gamma + alpha_i + beta_j + alpha_j + beta_i + rho

normalized per dyad.  Dyads are independent.

Sampling uses one PCG64 stream per row: dyad ``(i, j)`` with ``i < j`` draws
the ``(j - i - 1)``-th uniform of the stream seeded by
``SeedSequence(seed).spawn(n)[i]``.  The result therefore does not depend on
how rows are scheduled across workers.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError
from .graph import DirectedGraph, check_code

PARAM_BOUND = 50.0
PARAMS_SCHEMA = "lcr.params/1"


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """Parameters ``theta = (rho, gamma, alpha, beta)`` of the p1 model.

    ``alpha`` and ``beta`` are recentered to sum to zero on construction; the
    removed means are added to ``gamma`` so every dyad probability is
    unchanged.  The applied shifts are kept in ``alpha_shift`` and
    ``beta_shift``.
    """

    n: int
    rho: float
    gamma: float
    alpha: np.ndarray
    beta: np.ndarray
    alpha_shift: float = field(default=0.0, compare=False)
    beta_shift: float = field(default=0.0, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 3:
            raise DomainError("n must be at least 3")
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        beta = np.asarray(self.beta, dtype=float).ravel()
        if alpha.shape != (n,) or beta.shape != (n,):
            raise DomainError("alpha and beta must have length n")
        vals = np.concatenate([[self.rho, self.gamma], alpha, beta])
        if not np.all(np.isfinite(vals)):
            raise DomainError("parameters must be finite")
        if np.max(np.abs(vals)) > PARAM_BOUND:
            raise DomainError(f"parameters must satisfy |value| <= {PARAM_BOUND}")
        a_mean = float(alpha.mean())
        b_mean = float(beta.mean())
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "gamma", float(self.gamma) + a_mean + b_mean)
        object.__setattr__(self, "alpha", _frozen(alpha - a_mean))
        object.__setattr__(self, "beta", _frozen(beta - b_mean))
        object.__setattr__(self, "alpha_shift", self.alpha_shift + a_mean)
        object.__setattr__(self, "beta_shift", self.beta_shift + b_mean)

    @classmethod
    def homogeneous(cls, n, rho=0.0, gamma=0.0):
        return cls(n, rho, gamma, np.zeros(n), np.zeros(n))

    def replace(self, **changes):
        kw = dict(n=self.n, rho=self.rho, gamma=self.gamma, alpha=self.alpha, beta=self.beta)
        kw.update(changes)
        return ModelParams(**kw)

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (self.n == other.n and self.rho == other.rho and self.gamma == other.gamma
                and np.array_equal(self.alpha, other.alpha)
                and np.array_equal(self.beta, other.beta))

    __hash__ = None


@dataclass(frozen=True)
class MisspecParams:
    """Two-community perturbation of the p1 model.

    Dyads inside a community get ``theta`` added to both directed
    log-weights and ``2 theta`` to the mutual one.
    """

    base: ModelParams
    theta: float = 0.0
    community: np.ndarray = None

    def __post_init__(self):
        n = self.base.n
        comm = self.community
        if comm is None:
            comm = (np.arange(n) >= n // 2).astype(np.int8)
        comm = np.asarray(comm).astype(np.int8).ravel()
        if comm.shape != (n,) or np.any((comm != 0) & (comm != 1)):
            raise DomainError("community must be n labels in {0, 1}")
        if self.theta != 0 and np.unique(comm).size < 2:
            raise DomainError("both communities must be present when theta != 0")
        if not np.isfinite(self.theta) or abs(self.theta) > PARAM_BOUND:
            raise DomainError("theta out of range")
        comm.setflags(write=False)
        object.__setattr__(self, "community", comm)
        object.__setattr__(self, "theta", float(self.theta))


@dataclass(frozen=True)
class PlrQuantities:
    """Node factors ``mu_i = e^(gamma/2 + alpha_i)``, ``nu_i = e^(gamma/2 + beta_i)``
    and ``eta = mu * nu``."""

    mu: np.ndarray
    nu: np.ndarray
    eta: np.ndarray


@dataclass(frozen=True)
class DyadDistribution:
    p00: float
    p10: float
    p01: float
    p11: float

    def as_tuple(self):
        return (self.p00, self.p10, self.p01, self.p11)


def plr(params):
    """Pseudo low-rank factors of ``params``."""
    mu = np.exp(params.gamma / 2 + params.alpha)
    nu = np.exp(params.gamma / 2 + params.beta)
    return PlrQuantities(_frozen(mu), _frozen(nu), _frozen(mu * nu))


def _check_pair(n, i, j):
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise DomainError(f"need distinct nodes in [0, {n}); got ({i}, {j})")


def omega_tilde_entry(q, rho, code, i, j):
    """Entry ``(i, j)`` of the rank-one factor of ``Omega^code``."""
    check_code(code)
    _check_pair(len(q.mu), i, j)
    if code == "00":
        return 1.0
    if code == "10":
        return float(q.mu[i] * q.nu[j])
    if code == "01":
        return float(q.mu[j] * q.nu[i])
    return float(np.exp(rho) * q.eta[i] * q.eta[j])


def omega_entry(q, rho, code, i, j):
    """Probability that dyad ``(i, j)`` has type ``code``."""
    check_code(code)
    _check_pair(len(q.mu), i, j)
    total = sum(omega_tilde_entry(q, rho, c, i, j) for c in ("00", "10", "01", "11"))
    return omega_tilde_entry(q, rho, code, i, j) / total


def _log_weights(params, i, j, theta_delta=0.0):
    """Log-weights of the 10, 01, 11 outcomes; broadcasts over ``i`` and ``j``."""
    a, b, g = params.alpha, params.beta, params.gamma
    w10 = g + a[i] + b[j] + theta_delta
    w01 = g + a[j] + b[i] + theta_delta
    w11 = w10 + w01 + params.rho
    return w10, w01, w11


def _softmax4(w10, w01, w11):
    m = np.maximum(np.maximum(w10, w01), np.maximum(w11, 0.0))
    e00 = np.exp(-m)
    e10 = np.exp(w10 - m)
    e01 = np.exp(w01 - m)
    e11 = np.exp(w11 - m)
    z = e00 + e10 + e01 + e11
    return e00 / z, e10 / z, e01 / z, e11 / z


def dyad_distribution(params, i, j):
    """Exact joint distribution of ``(A_ij, A_ji)``."""
    _check_pair(params.n, i, j)
    p = _softmax4(*_log_weights(params, i, j))
    return DyadDistribution(*(float(x) for x in p))


def dyad_probability_matrices(params, theta=0.0, community=None):
    """Dense ``n x n`` matrices ``Omega^a`` for the four codes (zero diagonal)."""
    n = params.n
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    delta = 0.0
    if theta:
        c = np.asarray(community)
        delta = theta * (c[:, None] == c[None, :])
    p00, p10, p01, p11 = _softmax4(*_log_weights(params, i, j, delta))
    out = {}
    for code, p in (("00", p00), ("10", p10), ("01", p01), ("11", p11)):
        p = np.array(p, dtype=float)
        np.fill_diagonal(p, 0.0)
        out[code] = p
    return out


def row_streams(seed, n):
    """Per-row generators used by the samplers."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def _sample(params, seed, theta=0.0, community=None):
    n = params.n
    rows, cols, states = [], [], []
    streams = row_streams(seed, n)
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        u = streams[i].random(j.size)
        delta = 0.0
        if theta:
            delta = theta * (community[j] == community[i])
        p00, p10, p01, _ = _softmax4(*_log_weights(params, i, j, delta))
        c1 = p00
        c2 = c1 + p10
        c3 = c2 + p01
        s = (u >= c1).astype(np.int8) + (u >= c2) + (u >= c3)
        # s: 0 -> 00, 1 -> 10, 2 -> 01, 3 -> 11
        keep = s > 0
        rows.append(np.full(int(keep.sum()), i, dtype=np.int64))
        cols.append(j[keep])
        states.append(s[keep].astype(np.int8))
    if rows:
        return DirectedGraph(n, np.concatenate(rows), np.concatenate(cols), np.concatenate(states))
    return DirectedGraph(n)


def sample(params, seed):
    """Draw a graph from the p1 model; deterministic in ``seed``."""
    return _sample(params, seed)


def sample_misspecified(params, seed):
    """Draw from the two-community model; ``theta = 0`` matches :func:`sample`."""
    if params.theta == 0:
        return _sample(params.base, seed)
    return _sample(params.base, seed, params.theta, params.community)


# -- parameter files ------------------------------------------------------

def params_to_dict(params):
    """JSON-ready mapping for ``ModelParams`` or ``MisspecParams``."""
    base = params.base if isinstance(params, MisspecParams) else params
    doc = {
        "schema": PARAMS_SCHEMA,
        "n": base.n,
        "rho": base.rho,
        "gamma": base.gamma,
        "alpha": base.alpha.tolist(),
        "beta": base.beta.tolist(),
    }
    if isinstance(params, MisspecParams):
        doc["theta"] = params.theta
        doc["community"] = params.community.tolist()
    return doc


def params_from_dict(doc):
    if doc.get("schema") != PARAMS_SCHEMA:
        raise ParseError(f"unsupported parameter schema {doc.get('schema')!r}")
    try:
        base = ModelParams(doc["n"], doc["rho"], doc["gamma"], doc["alpha"], doc["beta"])
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}") from None
    if "theta" in doc or "community" in doc:
        return MisspecParams(base, doc.get("theta", 0.0), doc.get("community"))
    return base


def save_params(params, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params_to_dict(params), fh, indent=1)
        fh.write("\n")


def load_params(path):
    if not os.path.exists(path):
        raise ParseError(f"no such parameter file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from None
    return params_from_dict(doc)
