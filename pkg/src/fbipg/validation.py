"""Property suites run by ``fbipg validate``.

Each suite returns a list of :class:`Check` results; ``Check.line()`` gives
``PASS|FAIL <id> <params> k=<k> lhs=<v> rhs=<v>`` where ``k`` is the grid
point with the smallest margin (or the first failing one).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rates
from .harness import (audit_trace, compute_oracle, gen_least_squares,
                      least_squares_spec, pointwise_diagnostics)
from .problem import BilevelProblem, assemble_problem
from . import functions as fn
from .solver import FBiPGConfig, run_fbipg

__all__ = ["Check", "SUITES", "run_suite", "suite_lemmas", "suite_inequalities",
           "suite_holder", "suite_pointwise"]

A_GRID = (2, 3, 5)
GAMMA_GRID = (0.5, 1.0, 1.3, 1.5, 2.0, 3.0)


@dataclass
class Check:
    name: str
    params: dict
    k: int
    lhs: float
    rhs: float
    ok: bool

    def line(self):
        parts = ["PASS" if self.ok else "FAIL", self.name]
        parts += [f"{k}={v}" for k, v in self.params.items()]
        parts += [f"k={self.k}", f"lhs={self.lhs!r}", f"rhs={self.rhs!r}"]
        return " ".join(parts)


def _grid_check(name, params, ks, lhs, rhs, tol=0.0, strict=False):
    """Collapse an inequality over a grid into one Check (lhs <= rhs + tol)."""
    ks, lhs, rhs = np.asarray(ks), np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), lhs.shape)
    margin = rhs + tol - lhs
    bad = margin <= 0 if strict else margin < 0
    i = int(np.flatnonzero(bad)[0]) if bad.any() else int(np.argmin(margin))
    return Check(name, params, int(ks[i]), float(lhs[i]), float(rhs[i]), not bad.any())


def _eps(v):
    return 8 * np.finfo(float).eps * (1.0 + np.abs(v))


# ---------------------------------------------------------------------------


def suite_lemmas(seed=0):
    """Brute-force checks of the sequence identities and sum bounds."""
    out = []
    # power-sum bound
    for r in (0.3, 0.5, 1.3, 2.0, 3.0):
        for n1 in ((2, 5, 100) if r > 1 else (1, 2, 5, 100)):
            n2s = np.unique(np.r_[n1, np.geomspace(n1, 10**5, 30).astype(int)])
            terms = np.arange(n1, 10**5 + 1, dtype=float) ** (-r)
            partial = np.cumsum(terms)[n2s - n1]
            bound = [rates.techsum_bound(n1, int(n2), r) for n2 in n2s]
            out.append(_grid_check("techsum", {"r": r, "n1": n1}, n2s, partial, bound,
                                   _eps(partial)))
    out.append(_grid_check("techsum_inf", {"r": 2.0, "n1": 2}, [10**6],
                           [math.fsum(np.arange(2, 10**6 + 1, dtype=float) ** -2.0)],
                           [rates.techsum_bound(2, math.inf, 2.0)]))

    kmax = 10**4
    ks = np.arange(1, kmax + 1)
    for a in A_GRID:
        t = (np.arange(-1, kmax + 1) + a) / a
        t[0] = 0.0                                  # t_{-1}
        for g in GAMMA_GRID:
            p = {"a": a, "gamma": g}
            alpha = (np.arange(-1, kmax + 1) + a) ** (-float(g))
            alpha[0] = 0.0                          # alpha_{-1}
            # sum_{s<k} alpha_s t_s against the three-case bound
            cums = np.cumsum(alpha[1:-1] * t[1:-1])
            bound = np.array([rates.sum_alpha_t_bound(int(k), a, g) for k in ks])
            out.append(_grid_check("sum_alpha_t", p, ks, cums, bound, _eps(cums)))
            # eta_k > 0 and the telescoping identity
            eta = np.array([rates.eta_k(int(k), a, g) for k in ks])
            out.append(_grid_check("eta_positive", p, ks, -eta, np.zeros_like(eta), strict=True))
            # index j of alpha/t holds k = j - 1
            prev = alpha[1:kmax + 1] * t[1:kmax + 1] ** 2
            ident = prev - alpha[2:] * t[2:] ** 2 + alpha[2:] * t[2:]
            # both sides difference terms of size alpha_{k-1} t_{k-1}^2
            out.append(_grid_check("eta_identity", p, ks, np.abs(eta - ident),
                                   1e-12 * (1.0 + prev)))
            if g == 1.0:
                out.append(_grid_check("eta_gamma1", p, ks, np.abs(eta - (a - 1) / a**2),
                                       np.full(kmax, 1e-12)))
            if 1 < g < 2:
                out.append(_grid_check("boundeta", p, np.r_[0, ks],
                                       np.r_[rates.eta_k(0, a, g), eta],
                                       0.5 * (np.r_[0, ks] + 1.0) ** (1 - g), strict=True))
        d = np.array([rates.d_k(int(k), a) for k in ks])
        out.append(_grid_check("d_nonneg", {"a": a}, ks, -d, np.zeros_like(d), _eps(d)))
        lam = np.array([rates.lambda_k(int(k), a) for k in ks])
        out.append(_grid_check("lambda_nonneg", {"a": a}, ks, -lam, np.zeros_like(lam)))
        out.append(Check("lambda_lt_1", {"a": a}, int(ks[np.argmax(lam)]), float(lam.max()), 1.0,
                         bool(lam.max() < 1.0)))
        out.append(Check("lambda_1", {"a": a}, 1, rates.lambda_k(1, a), 0.0,
                         rates.lambda_k(1, a) == 0.0))
        pis = [rates.pi(s, k, a) for s in range(1, 6) for k in range(0, s)]
        out.append(Check("pi_empty", {"a": a}, 0, float(max(abs(v - 1) for v in pis)), 0.0,
                         all(v == 1.0 for v in pis)))
        out.append(Check("eta_0", {"a": a}, 0, rates.eta_k(0, a, 1.5), 0.0,
                         rates.eta_k(0, a, 1.5) == 0.0))

    # t_k^2 - t_k <= t_{k-1}^2 for both t sequences up to 1e5
    K = 10**5
    for a in A_GRID:
        t = (np.arange(0, K + 1) + a) / a
        lhs = t[1:] ** 2 - t[1:]
        out.append(_grid_check("t_explicit", {"a": a}, np.arange(1, K + 1), lhs, t[:-1] ** 2,
                               _eps(lhs)))
    tf = np.empty(K + 1)
    tf[0] = 1.0
    for k in range(K):
        tf[k + 1] = rates.t_fista(tf[k])
    lhs = tf[1:] ** 2 - tf[1:]
    out.append(_grid_check("t_fista", {}, np.arange(1, K + 1), lhs, tf[:-1] ** 2, _eps(lhs)))

    # truncated product sum, a > 2
    for a in (3, 4, 5):
        for s in (1, 2, 3, 5, 10, 100, 1000):
            part = rates.sumtechnical_partial(s, a, 10**5)
            out.append(Check("sumtechnical", {"a": a, "s": s}, 10**5, part,
                             2.5 * a * rates.t_explicit(s - 1, a),
                             rates.sumtechnical_check(s, a, 10**5)))
    return out


def _small_instance(seed):
    A, b, _ = gen_least_squares(8, 12, seed, True, 3)
    p = assemble_problem(least_squares_spec(A, b))
    return p, compute_oracle(p)


def suite_inequalities(seed=0, iters=2000):
    """Per-iteration and cumulative inequalities along FBi-PG runs."""
    p, oracle = _small_instance(seed)
    out = []
    for g in (1.3, 1.5, 3.0):
        for a in (2, 3):
            trace = run_fbipg(p, FBiPGConfig(gamma=g, a=a, iters=iters, audit=True,
                                             seed=seed), oracle)
            out.extend(_from_report(trace.audit))
    return out


def suite_holder(seed=0, iters=2000):
    """Error-bound regime bounds on a full-column-rank instance."""
    A, b, _ = gen_least_squares(20, 10, seed, True, 3)
    p = assemble_problem(least_squares_spec(A, b))
    oracle = compute_oracle(p)
    out = []
    for a in (2, 3):
        for g in (1.3, 1.5):
            trace = run_fbipg(p, FBiPGConfig(gamma=g, a=a, iters=iters), oracle)
            params = rates.RateParams(a=a, gamma=g, beta=p.beta, R2=oracle.R2,
                                      delta_omega=oracle.omega_xprime - oracle.omega_star_inf,
                                      tau=oracle.tau, rho=oracle.rho)
            out.extend(_from_report(audit_trace(trace, oracle, params, "holder")))
    return out


def suite_pointwise(seed=0, iters=10**5):
    """Tail diagnostics for gamma = 1.5, a = 3 on a 1-D and a small instance."""
    one_d = BilevelProblem(fn.SquaredL2(1.0, np.array([1.0])), fn.Zero(1), fn.Zero(1),
                           fn.L1(1.0), 1.0, 1, omega_star=0.0)

    class _OneD:
        phi_star, x_prime, omega_xprime, omega_star_inf = 0.0, np.array([1.0]), 1.0, 0.0

    p, oracle = _small_instance(seed)
    out = []
    for label, prob, orc in (("1d", one_d, _OneD()), ("ls", p, oracle)):
        trace = run_fbipg(prob, FBiPGConfig(gamma=1.5, a=3, iters=iters,
                                            keep_iterates=True), orc)
        d = pointwise_diagnostics(trace)
        prm = {"a": 3, "gamma": 1.5, "instance": label}
        K = d["K"]
        out.append(Check("tail_deviation", prm, K, d["tail_dev"], 1e-3, d["tail_dev"] <= 1e-3))
        out.append(Check("mu_oscillation", prm, K, d["mu_osc"], 1e-6, d["mu_osc"] <= 1e-6))
        out.append(Check("tdelta_growth", prm, K, d["tdelta_growth"], 1e-6 * d["tdelta_value"],
                         d["tdelta_growth"] <= 1e-6 * d["tdelta_value"]))
    return out


def _from_report(report):
    out = []
    for name, t in report.tallies.items():
        if t.worst is None:
            continue
        k, lhs, rhs = t.failed_at[0] if t.failed_at else t.worst[1:]
        out.append(Check(name, dict(report.params), k, lhs, rhs, t.failures == 0))
    return out


SUITES = {"lemmas": suite_lemmas, "inequalities": suite_inequalities,
          "holder": suite_holder, "pointwise": suite_pointwise}


def run_suite(name, seed=0):
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](seed=seed)
