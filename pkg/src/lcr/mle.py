"""Maximum-likelihood fit of the full p1 model and the likelihood-ratio test.

The log-likelihood is an exponential family in ``(rho, gamma, alpha, beta)``
with sufficient statistics (mutual dyads, edges, out-degrees, in-degrees),
so the score is "observed minus expected" and the negative Hessian is the
covariance of those statistics.  Both are assembled in ``O(n^2)`` from the
per-dyad probabilities.

The solver works in the gauge ``gamma = 0, beta[0] = 0`` (the model only
depends on ``alpha_i + beta_j`` sums) and takes damped Newton steps with
backtracking, so the likelihood never decreases.  The result is mapped back
to centered ``alpha``, ``beta`` with the means absorbed into ``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from .errors import DomainError
from .model import ModelParams, PARAM_BOUND


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 500
    bound: float = 30.0
    max_halvings: int = 40


@dataclass(frozen=True)
class ExistenceCheck:
    """Per-node degree-boundary flags.

    A node whose out- or in-degree is ``0`` or ``n - 1`` pushes its
    parameter to infinity, so any flag means the MLE does not exist; no
    flag leaves existence ``"unknown"`` (the full conditions are polyhedral
    and not checked).
    """

    out_boundary: np.ndarray
    in_boundary: np.ndarray

    @property
    def flags(self):
        return self.out_boundary | self.in_boundary

    @property
    def verdict(self):
        return "nonexistent" if bool(self.flags.any()) else "unknown"


@dataclass(frozen=True)
class MleFit:
    params_hat: ModelParams | None
    converged: bool
    iterations: int
    max_abs_param: float
    log_likelihood: float
    grad_max_norm: float
    existence: ExistenceCheck
    status: str = "ok"

    @property
    def existence_flags(self):
        return self.existence.flags


@dataclass(frozen=True)
class LrtResult:
    statistic: float | None
    p_value: float | None
    reference: str = "chi2(1), conjectured"
    status: str = "ok"


def existence_check(graph):
    """Flag nodes whose out- or in-degree is ``0`` or ``n - 1``."""
    a = graph.adjacency
    out = np.asarray(a.sum(axis=1)).ravel()
    inn = np.asarray(a.sum(axis=0)).ravel()
    n = graph.n
    return ExistenceCheck((out == 0) | (out == n - 1), (inn == 0) | (inn == n - 1))


# -- likelihood pieces ------------------------------------------------------

class _Data:
    def __init__(self, graph):
        n = graph.n
        a = graph.adjacency.toarray().astype(np.float64)
        self.n = n
        self.a = a
        self.out = a.sum(axis=1)
        self.inn = a.sum(axis=0)
        self.edges = a.sum()
        self.mutual = float(graph.edge_type_count("11")) / 2
        self.iu = np.triu_indices(n, 1)
        # dyad states on the upper triangle
        self.x10 = a[self.iu] * (1 - a.T[self.iu])
        self.x01 = (1 - a[self.iu]) * a.T[self.iu]
        self.x11 = a[self.iu] * a.T[self.iu]


def _dyad_probs(rho, alpha, beta, n):
    """Full ``n x n`` matrices ``P`` (edge ``i -> j``) and ``p11``."""
    w = alpha[:, None] + beta[None, :]
    wt = w.T
    w11 = w + wt + rho
    m = np.maximum(np.maximum(w, wt), np.maximum(w11, 0.0))
    e0 = np.exp(-m)
    e10 = np.exp(w - m)
    e01 = np.exp(wt - m)
    e11 = np.exp(w11 - m)
    z = e0 + e10 + e01 + e11
    p11 = e11 / z
    p = (e10 + e11) / z
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(p11, 0.0)
    return p, p11


def _loglik(d, rho, alpha, beta):
    i, j = d.iu
    w10 = alpha[i] + beta[j]
    w01 = alpha[j] + beta[i]
    w11 = w10 + w01 + rho
    lse = np.logaddexp(np.logaddexp(0.0, w10), np.logaddexp(w01, w11))
    return float(np.sum(d.x10 * w10 + d.x01 * w01 + d.x11 * w11 - lse))


def _score_and_info(d, rho, alpha, beta, fit_rho):
    """Score and Fisher information in the coordinates ``(rho?, alpha, beta[1:])``."""
    n = d.n
    p, p11 = _dyad_probs(rho, alpha, beta, n)
    g_alpha = d.out - p.sum(axis=1)
    g_beta = d.inn - p.sum(axis=0)
    v = p * (1 - p)
    c = p11 - p * p.T
    np.fill_diagonal(c, 0.0)
    f_aa = np.diag(v.sum(axis=1)) + c
    f_bb = np.diag(v.sum(axis=0)) + c
    f_ab = v + np.diag(c.sum(axis=1))
    info = np.block([[f_aa, f_ab], [f_ab.T, f_bb]])
    grad = np.concatenate([g_alpha, g_beta])
    if fit_rho:
        dd = p11 * (1 - p)
        g_rho = d.mutual - p11.sum() / 2
        f_rr = float((p11 * (1 - p11)).sum() / 2)
        f_ra = np.concatenate([dd.sum(axis=1), dd.sum(axis=0)])
        info = np.block([[np.array([[f_rr]]), f_ra[None, :]], [f_ra[:, None], info]])
        grad = np.concatenate([[g_rho], grad])
    # gauge: drop beta[0]
    k = (1 if fit_rho else 0) + n
    keep = np.ones(grad.size, dtype=bool)
    keep[k] = False
    return grad, grad[keep], info[np.ix_(keep, keep)], keep


def _unpack(x, n, fit_rho, rho_fixed):
    off = 1 if fit_rho else 0
    rho = float(x[0]) if fit_rho else rho_fixed
    alpha = x[off:off + n]
    beta = np.concatenate([[0.0], x[off + n:]])
    return rho, alpha, beta


def fit(graph, config=SolverConfig(), rho_fixed=None):
    """Maximize the p1 likelihood; ``rho_fixed`` freezes ``rho`` at that value.

    Non-convergence is reported in the result, never raised.  Graphs that
    fail :func:`existence_check` return immediately with
    ``converged=False``.
    """
    n = graph.n
    if n < 3:
        raise DomainError("need at least 3 nodes")
    ex = existence_check(graph)
    if ex.verdict == "nonexistent":
        return MleFit(None, False, 0, math.inf, math.nan, math.nan, ex, "nonexistent")
    d = _Data(graph)
    fit_rho = rho_fixed is None
    dens = d.edges / (n * (n - 1))
    start = math.log(dens / (1 - dens)) / 2 if 0 < dens < 1 else 0.0
    x = np.concatenate([[0.0] if fit_rho else [], np.full(n, start), np.full(n - 1, start)])
    rho0 = 0.0 if fit_rho else float(rho_fixed)

    ll = _loglik(d, *_unpack(x, n, fit_rho, rho0))
    status = "max-iter"
    it = 0
    gmax = math.inf
    for it in range(1, config.max_iter + 1):
        rho, alpha, beta = _unpack(x, n, fit_rho, rho0)
        _, g, info, _ = _score_and_info(d, rho, alpha, beta, fit_rho)
        gmax = float(np.max(np.abs(g)))
        if gmax <= config.tol:
            status = "ok"
            it -= 1
            break
        try:
            step = linalg.solve(info, g, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = linalg.lstsq(info, g)[0]
        # Once the predicted gain is below the rounding noise of the
        # log-likelihood, comparisons are meaningless: take the full step.
        noise = 1e3 * np.finfo(float).eps * (abs(ll) + 1.0)
        if float(g @ step) <= noise:
            cand = x + step
            ll_new = _loglik(d, *_unpack(cand, n, fit_rho, rho0))
        else:
            t = 1.0
            for _ in range(config.max_halvings):
                cand = x + t * step
                ll_new = _loglik(d, *_unpack(cand, n, fit_rho, rho0))
                if ll_new >= ll:
                    break
                t /= 2
            else:
                status = "stalled"
                break
        x, ll = cand, ll_new
        if np.max(np.abs(x)) > config.bound:
            status = "diverged"
            break
    rho, alpha, beta = _unpack(x, n, fit_rho, rho0)
    converged = status == "ok"
    params = None
    max_abs = float(max(abs(rho), np.max(np.abs(alpha)), np.max(np.abs(beta))))
    if max_abs <= PARAM_BOUND:
        params = ModelParams(n, rho, 0.0, alpha, beta)
        max_abs = float(max(abs(params.rho), abs(params.gamma),
                            np.max(np.abs(params.alpha)), np.max(np.abs(params.beta))))
    return MleFit(params, converged, it, max_abs, ll, gmax, ex, status)


def lrt(graph, rho0=0.0, config=SolverConfig()):
    """Likelihood-ratio statistic for ``rho = 0`` with its ``chi2(1)`` p-value."""
    if rho0 != 0:
        raise DomainError("the likelihood-ratio test is available for rho0 = 0 only")
    full = fit(graph, config)
    if not full.converged:
        return LrtResult(None, None, status="unrestricted-fit-failed")
    null = fit(graph, config, rho_fixed=0.0)
    if not null.converged:
        return LrtResult(None, None, status="restricted-fit-failed")
    stat = max(0.0, 2.0 * (full.log_likelihood - null.log_likelihood))
    return LrtResult(stat, float(stats.chi2.sf(stat, 1)))
