"""Log cycle-count ratio estimation, variance estimation and tests for rho."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .cycles import DEFAULT_PAIR, GraphOperands, fast_count_pair
from .errors import DomainError
from .model import dyad_probability_matrices, plr

THEORY_EXACT_MAX_N = 2500


def hard_threshold(x, t):
    """``x`` if ``|x| <= t`` else ``sign(x) * t``."""
    return x if abs(x) <= t else math.copysign(t, x)


def normal_two_sided_p(z):
    """``P(|N(0,1)| >= |z|)`` computed as ``erfc(|z| / sqrt 2)``."""
    return float(special.erfc(abs(z) / math.sqrt(2.0)))


def normal_critical_value(level):
    """``z_{level/2}``, the upper ``level/2`` quantile of ``N(0,1)``."""
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    return float(stats.norm.isf(level / 2))


@dataclass(frozen=True)
class LcrResult:
    """Counts and the log-ratio estimate for one graph.

    ``status`` is ``"ok"``, ``"saturated"`` (one count is zero; ``rho_star``
    sits at the threshold endpoint and ``rho_hat`` is ``None``) or
    ``"undefined"`` (both counts zero; no estimate).
    """

    Qa: int
    Qb: int
    rho_hat: float | None
    rho_star: float | None
    threshold: float
    pair_id: int
    c0: int
    n: int
    status: str = "ok"

    @property
    def degenerate(self):
        return self.status != "ok"

    def u_statistic(self, rho):
        """``Q(a) - e^(c0 rho) Q(b)``."""
        return self.Qa - math.exp(self.c0 * rho) * self.Qb


@dataclass(frozen=True)
class VarianceEstimates:
    """Plug-in variance of ``U_n`` and the implied signal-to-noise ratios.

    ``snr_hat`` and ``snr_hat_simple`` are ``None`` when the matching
    variance is zero (``status`` then names the degenerate piece).
    """

    v_hat: float
    w_hat: float
    snr_hat: float | None
    snr_hat_simple: float | None
    status: str = "ok"


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    rho0: float
    level: float
    critical_value: float
    psi_star: float | None
    phi_star: float | None
    p_value_psi: float | None
    p_value_phi: float | None
    reject_psi: bool | None
    reject_phi: bool | None
    estimate: LcrResult = field(repr=False, default=None)
    variance: VarianceEstimates = field(repr=False, default=None)
    status: str = "ok"

    @property
    def sigma_hat(self):
        """``sqrt(V_hat)``, the reported scale of ``U_n``."""
        return math.sqrt(self.variance.v_hat) if self.variance else None

    def confidence_interval(self):
        """Normal-theory interval ``rho_star -/+ z / SNR_hat``."""
        if self.status != "ok":
            return None
        half = self.critical_value / self.variance.snr_hat
        r = self.estimate.rho_star
        return (r - half, r + half)


def estimate(graph, pair=DEFAULT_PAIR, backend="auto", ops=None):
    """Log cycle-count ratio estimate of ``rho`` with threshold ``2 ln n``."""
    qa, qb = fast_count_pair(graph, pair, backend, ops)
    n = graph.n
    thr = 2.0 * math.log(n) if n > 1 else 0.0
    if qa > 0 and qb > 0:
        rho_hat = (math.log(qa) - math.log(qb)) / pair.c0
        return LcrResult(qa, qb, rho_hat, hard_threshold(rho_hat, thr), thr, pair.pair_id, pair.c0, n)
    if qa == 0 and qb == 0:
        return LcrResult(qa, qb, None, None, thr, pair.pair_id, pair.c0, n, "undefined")
    rho_star = -thr if qa == 0 else thr
    return LcrResult(qa, qb, None, rho_star, thr, pair.pair_id, pair.c0, n, "saturated")


# -- plug-in pieces -----------------------------------------------------------

VARIANCE_METHODS = ("plugin", "sparse")


class _Totals:
    """Degree vectors and global totals of one graph."""

    def __init__(self, ops):
        g = ops.graph
        self.out = ops.row_sums["10"]
        self.inn = ops.row_sums["01"]
        self.mut = ops.row_sums["11"]
        self.t10 = int(self.out.sum())
        self.t11 = int(self.mut.sum())
        a10 = g.type_matrix("10")
        u = g.support
        # (A o)_j and (A' in)_i with A = A^10
        self.a_out = a10 @ self.out
        self.at_in = a10.T @ self.inn
        self.u_out = u @ self.out
        self.u_inn = u @ self.inn
        self.u_mut = u @ self.mut


def _plugin_entries(ops, code, rows, cols):
    """Entries of ``(I + U) Y (I + U)`` for ``Y = A^code`` at ``(rows, cols)``."""
    yu = ops.matmul(code, "U")
    if ops.backend == "dense":
        m = ops.mats[code] + yu
        return ops.gather(m + ops.matmul("U", m), rows, cols)
    return (ops.gather(code, rows, cols) + ops.gather(yu, rows, cols)
            + ops.gather_product("U", code, rows, cols)
            + ops.gather_product("U", yu, rows, cols))


def rst_terms(graph, rows, cols, method="plugin", ops=None):
    """``(r, s, t)`` estimates at the ordered pairs ``(rows[k], cols[k])``.

    ``method="sparse"`` sums the observed ``01``/``11``/``10`` indicators
    over ``k != l`` outside ``{i, j}`` with every non-edge factor set to one;
    it is defined at every pair.  ``method="plugin"`` keeps the observed
    ``00`` indicators as factors, so each term is unbiased for its
    population counterpart; it is defined where ``i -> j`` is an edge
    (mutual or one-way), which are the only pairs the variance needs.
    """
    if method not in VARIANCE_METHODS:
        raise DomainError(f"unknown variance method {method!r}")
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    ops = ops if ops is not None else GraphOperands(graph)
    d = _Totals(ops)
    i, j = rows, cols
    a_ij = ops.gather("10", i, j)
    a_ji = ops.gather("10", j, i)
    p2 = ops.gather(ops.matmul("10", "10"), j, i)
    t = (d.a_out[j] - a_ji * d.out[i] + d.at_in[i] - a_ji * d.inn[j]
         + (d.out[j] - a_ji) * (d.inn[i] - a_ji) - 3 * p2)
    if method == "sparse":
        m_ij = ops.gather("11", i, j)
        r = d.t10 - (d.inn[i] + d.out[i] + d.inn[j] + d.out[j]) + a_ij + a_ji
        s = d.t11 - 2 * d.mut[i] - 2 * d.mut[j] + 2 * m_ij
        return r, s, t
    if np.any(a_ij + ops.gather("11", i, j) == 0):
        raise DomainError("plug-in terms are defined only where i -> j is an edge")
    # columns sums of A^01 are the one-way out-degrees, row sums the in-degrees
    r = (d.t10 - d.out[i] - d.u_out[i] - d.inn[j] - d.u_inn[j]
         + _plugin_entries(ops, "01", j, i))
    s = (d.t11 - d.mut[i] - d.u_mut[i] - d.mut[j] - d.u_mut[j]
         + _plugin_entries(ops, "11", j, i))
    # (P U + U P + A U A)_ji with A = A^10 and P = A^2
    p = ops.matmul("10", "10")
    if ops.backend == "dense":
        z = ops.matmul("U", "10")
        h = ops.gather(ops.matmul(p, "U") + ops.matmul(z, "10") + ops.matmul("10", z), j, i)
        return r, s, t - h
    h = (ops.gather_product(p, "U", j, i) + ops.gather_product("U", p, j, i)
         + ops.gather_product(ops.matmul("10", "U"), "10", j, i))
    return r, s, t - h


def rst_hat(graph, i, j, method="sparse"):
    """``(r, s, t)`` estimates for one ordered pair; see :func:`rst_terms`."""
    n = graph.n
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise DomainError(f"need distinct nodes in [0, {n}); got ({i}, {j})")
    r, s, t = rst_terms(graph, [i], [j], method)
    return int(r[0]), int(s[0]), int(t[0])


def variance_hat(graph, rho_hat, method="plugin", backend="auto", ops=None):
    """Estimate of ``Var(U_n)`` for the default pair.

    ``V_hat = sum over mutual ordered pairs of 2 r^2
    + sum over one-way edges of (s - e^rho_hat t)^2``; ``W_hat`` keeps only
    the first sum.  ``method`` selects how ``r, s, t`` are estimated (see
    :func:`rst_terms`).  The ``"sparse"`` forms drop every non-edge factor,
    which overstates the variance unless the graph is very sparse; the
    default ``"plugin"`` forms do not.
    """
    if rho_hat is None or not math.isfinite(rho_hat):
        raise DomainError("rho_hat must be finite")
    ops = ops if ops is not None else GraphOperands(graph, backend)
    m = graph.type_matrix("11").tocoo()
    e = graph.type_matrix("10").tocoo()
    rows = np.concatenate([m.row, e.row]).astype(np.int64)
    cols = np.concatenate([m.col, e.col]).astype(np.int64)
    r, s, t = rst_terms(graph, rows, cols, method, ops)
    k = m.row.size
    w_hat = float(np.sum(2.0 * r[:k].astype(np.float64) ** 2))
    resid = s[k:].astype(np.float64) - math.exp(rho_hat) * t[k:].astype(np.float64)
    v_hat = w_hat + float(np.sum(resid ** 2))
    status = "ok" if v_hat > 0 else "zero-variance"
    return VarianceEstimates(v_hat, w_hat, None, None, status)


def variance_and_snr(graph, result, method="plugin", backend="auto", ops=None):
    """``variance_hat`` at ``result.rho_hat`` with the SNR fields filled in."""
    v = variance_hat(graph, result.rho_hat, method, backend, ops)
    snr = result.Qa / math.sqrt(v.v_hat) if v.v_hat > 0 else None
    snr_s = result.Qa / math.sqrt(v.w_hat) if v.w_hat > 0 else None
    status = "ok" if snr is not None else "zero-variance"
    return VarianceEstimates(v.v_hat, v.w_hat, snr, snr_s, status)


def test(graph, rho0=0.0, level=0.05, method="plugin", backend="auto"):
    """Two-sided tests of ``rho = rho0`` with the default pair.

    ``psi_star = SNR_hat (rho_star - rho0)`` and the simplified
    ``phi_star = snr_hat (rho_hat - rho0)`` are referred to ``N(0, 1)``.
    Degenerate counts or variances give a result with ``status`` set and no
    decision.
    """
    z = normal_critical_value(level)
    ops = GraphOperands(graph, backend) if graph.n >= 4 else None
    est = estimate(graph, DEFAULT_PAIR, backend, ops)
    if est.status != "ok":
        return TestResult(rho0, level, z, None, None, None, None, None, None,
                          est, None, "degenerate-counts")
    var = variance_and_snr(graph, est, method, backend, ops)
    psi = phi = p_psi = p_phi = rej_psi = rej_phi = None
    if var.snr_hat is not None:
        psi = var.snr_hat * (est.rho_star - rho0)
        p_psi = normal_two_sided_p(psi)
        rej_psi = abs(psi) >= z
    if var.snr_hat_simple is not None:
        phi = var.snr_hat_simple * (est.rho_hat - rho0)
        p_phi = normal_two_sided_p(phi)
        rej_phi = abs(phi) >= z
    status = "ok" if psi is not None else "degenerate-variance"
    return TestResult(rho0, level, z, psi, phi, p_psi, p_phi, rej_psi, rej_phi, est, var, status)


test.__test__ = False  # not a pytest function


# -- population quantities ------------------------------------------------------

@dataclass(frozen=True)
class TheoryConfig:
    """Finite-sample renderings of the asymptotic conditions."""

    small: float = 0.2
    large: float = 5.0
    sp2_band: tuple = (1 / 3, 3.0)
    regime_margin: float = 5.0
    exact_max_n: int = THEORY_EXACT_MAX_N


@dataclass(frozen=True)
class TheoryDiagnostics:
    mode: str
    expected_qa: float
    expected_qb: float
    v_exact: float
    w_exact: float
    snr_exact: float
    v_asymptotic: float
    expected_qa_asymptotic: float
    r_n: float
    r_n_minus: float
    rho_tilde: float
    c_mu_nu_eta: float
    regime: str
    g1_ok: bool
    g2_ok: bool
    sp1_ok: bool
    sp2_ok: bool | None


def _excluded_triple(x, y, z):
    """``T_ij = sum_{k != l, k, l not in {i, j}} x_jk y_kl z_li`` for zero-diagonal inputs."""
    m = x @ y @ z
    d_yz = np.einsum("ij,ji->i", y, z)
    d_xy = np.einsum("ij,ji->i", x, y)
    out = m.T - x.T * d_yz[:, None] - d_xy[None, :] * z.T + x.T * y * z.T
    np.fill_diagonal(out, 0.0)
    return out


def population_rst(params):
    """Exact ``(r, s, t)`` matrices and the ``Omega`` matrices of ``params``."""
    om = dyad_probability_matrices(params)
    o00, o10, o01, o11 = om["00"], om["10"], om["01"], om["11"]
    r = _excluded_triple(o00, o01, o00)
    s = _excluded_triple(o00, o11, o00)
    t = (_excluded_triple(o10, o10, o00) + _excluded_triple(o00, o10, o10)
         + _excluded_triple(o10, o00, o10))
    return r, s, t, om


def theory_diagnostics(params, config=TheoryConfig()):
    """Population variance, SNR, rate quantities, regime and condition flags."""
    q = plr(params)
    mu, nu, eta = q.mu, q.nu, q.eta
    rho = params.rho
    er = math.exp(rho)
    l1_mu, l1_nu, l1_eta = mu.sum(), nu.sum(), eta.sum()
    mu_eta, nu_eta = float(mu @ eta), float(nu @ eta)

    eqa_asym = er * l1_eta ** 2 * l1_mu * l1_nu
    v_asym = (2 * er * l1_eta ** 2 * l1_mu ** 2 * l1_nu ** 2
              + er ** 2 * mu_eta * nu_eta * l1_mu ** 2 * l1_nu ** 2
              + 3 * er ** 2 * mu_eta * l1_eta ** 2 * l1_mu * l1_nu ** 2
              + 3 * er ** 2 * nu_eta * l1_eta ** 2 * l1_mu ** 2 * l1_nu
              - 3 * er ** 2 * l1_eta ** 4 * l1_mu * l1_nu)

    if params.n <= config.exact_max_n:
        mode = "exact"
        r, s, t, om = population_rst(params)
        w = float(np.sum(2 * r ** 2 * om["11"]))
        v = w + float(np.sum((s - er * t) ** 2 * om["10"]))
        eqa = float(np.sum(om["11"] * r))
        eqb = float(np.sum(om["10"] * _excluded_triple(om["10"], om["00"], om["10"])))
    else:
        mode = "asymptotic"
        v, eqa, eqb = v_asym, eqa_asym, eqa_asym / er
        w = 2 * er * l1_eta ** 2 * l1_mu ** 2 * l1_nu ** 2

    r_n = max(1 / (er * l1_eta ** 2), mu_eta * nu_eta / l1_eta ** 4)
    rho_tilde = math.log(l1_eta ** 2 / (mu_eta * nu_eta))
    c = l1_eta ** 4 / (mu_eta * nu_eta * l1_mu * l1_nu)
    ratio = er / math.exp(rho_tilde)
    if ratio <= 1 / config.regime_margin:
        regime = "S"
    elif ratio >= config.regime_margin:
        regime = "L2"
    else:
        regime = "L1"
    r_n_minus = 1 / (er * l1_eta ** 2) if regime == "S" else 1 / (l1_mu * l1_nu)

    g1 = max(mu.max(), nu.max(), math.exp(rho / 2) * eta.max()) < config.small
    g2 = math.exp(rho / 2) * l1_eta > config.large and l1_eta > config.large
    sp1 = (mu.max() ** 2 * nu.max() ** 2) / (mu_eta * nu_eta) < config.small
    sp2 = None
    if regime != "S":
        lo, hi = config.sp2_band
        sp2 = lo <= l1_mu / l1_nu <= hi
    snr = eqa / math.sqrt(v) if v > 0 else math.inf
    return TheoryDiagnostics(mode, eqa, eqb, v, w, snr, v_asym, eqa_asym, r_n, r_n_minus,
                             rho_tilde, c, regime, bool(g1), bool(g2), bool(sp1), sp2)
