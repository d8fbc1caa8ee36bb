"""Synthetic data, ground-truth oracles, trace auditing and experiment runs."""

import itertools
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import functions as fn
from . import rates
from .exceptions import EstimationError, UnsupportedError
from .problem import load_problem
from .solver import AuditReport, FBiPGConfig, run_fbipg, run_fista_fixed

__all__ = [
    "OracleReport", "ExperimentConfig", "gen_least_squares", "gen_logistic",
    "compute_phi_star", "compute_outer_opt", "certify_outer_opt", "compute_tau",
    "compute_oracle", "audit_trace", "pointwise_diagnostics", "digits_vs_omega",
    "regime_for", "run_experiment", "least_squares_spec",
]

REGIMES = ("fast", "sub2", "gamma1", "holder", "fixed")


def _rng(seed):
    # PCG64 is the documented generator for every seeded component
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# generators


def gen_least_squares(N, n, seed, consistent=True, sparsity=None, noise=0.1):
    """Gaussian design with a planted sparse signal.

    Returns ``(A, b, x_planted)``; ``x_planted`` has ``sparsity`` entries
    equal to +1 or -1.  Without ``consistent`` the targets get additive
    Gaussian noise of standard deviation ``noise``.
    """
    if N < 1 or n < 1:
        raise ValueError("N and n must be positive")
    sparsity = min(n, 5) if sparsity is None else int(sparsity)
    if not 0 <= sparsity <= n:
        raise ValueError("sparsity must lie in [0, n]")
    rng = _rng(seed)
    A = rng.standard_normal((N, n))
    x = np.zeros(n)
    support = rng.choice(n, size=sparsity, replace=False)
    x[support] = rng.choice([-1.0, 1.0], size=sparsity)
    b = A @ x
    if not consistent:
        b = b + noise * rng.standard_normal(N)
    return A, b, x


def gen_logistic(N, m, seed):
    """Gaussian features with labels drawn from a planted logistic model.

    Returns ``(A, z, w_planted)``.  The planted direction is scaled so the
    margins ``A @ w`` have unit standard deviation.
    """
    if N < 1 or m < 1:
        raise ValueError("N and m must be positive")
    rng = _rng(seed)
    A = rng.standard_normal((N, m))
    w = rng.standard_normal(m)
    w /= max(np.std(A @ w), 1e-12)
    p = 1.0 / (1.0 + np.exp(-(A @ w)))
    z = (rng.random(N) < p).astype(float)
    return A, z, w


def least_squares_spec(A, b, weight=1.0):
    """Problem JSON object for ``(1/2N)||Ax - b||^2`` with an l1 outer term."""
    A = np.asarray(A, dtype=float)
    return {
        "dim": int(A.shape[1]),
        "inner_smooth": {"kind": "least_squares", "A": A.tolist(),
                         "b": np.asarray(b, dtype=float).tolist()},
        "inner_prox": {"kind": "zero"},
        "outer_smooth": {"kind": "zero"},
        "outer_prox": {"kind": "l1", "weight": float(weight)},
    }


# ---------------------------------------------------------------------------
# oracles


@dataclass
class OracleReport:
    phi_star: float = None
    x_prime: np.ndarray = None
    omega_xprime: float = None
    omega_star_inf: float = None
    tau: float = None
    rho: float = None
    R2: float = None
    method: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def as_dict(self):
        xp = None if self.x_prime is None else [float(v) for v in self.x_prime]
        return {"phi_star": self.phi_star, "omega_star_inf": self.omega_star_inf,
                "x_prime": xp, "omega_xprime": self.omega_xprime, "tau": self.tau,
                "rho": self.rho, "R2": self.R2}


def _plain_least_squares(problem):
    return (problem.inner_smooth.kind == "least_squares"
            and problem.inner_prox.kind == "zero" and not problem.is_lifted)


def _projected_target(A, b):
    """Projection of b onto range(A) and the minimum-norm least-squares point."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > s[0] * max(A.shape) * np.finfo(float).eps)) if s.size else 0
    Ur = U[:, :r]
    b_proj = Ur @ (Ur.T @ b)
    x_ls = Vt[:r].T @ ((Ur.T @ b) / s[:r])
    return b_proj, x_ls, r, s[:r]


def _inner_fista(problem, max_iter, window=1000, tol=1e-13):
    """FISTA on phi alone; stops once the value is stationary over ``window`` steps."""
    beta = problem.inner_smooth.lipschitz
    if not beta > 0:
        beta = problem.beta
    step = 1.0 / beta
    g = problem.inner_prox
    x = np.zeros(problem.dim)
    x_prev = x.copy()
    t = 1.0
    best = problem.inner_value(x)
    history = [best]
    for k in range(1, max_iter + 1):
        t_next = rates.t_fista(t)
        y = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_prev, x = x, g.prox(y - step * problem.inner_smooth.grad(y), step)
        t = t_next
        val = problem.inner_value(x)
        best = min(best, val)
        if k % window == 0:
            history.append(best)
            if history[-2] - history[-1] <= tol * (1.0 + abs(best)):
                break
    drift = history[-2] - history[-1] if len(history) > 1 else 0.0
    return best, drift, x


def compute_phi_star(problem, mode="auto", max_iter=10**6):
    """Optimal inner value.

    ``closed_form`` needs a least-squares inner term with ``g = 0``.
    ``long_run`` runs FISTA on the inner problem alone and subtracts the
    last observed drift, so the result sits below the computed minimum.
    """
    if mode not in ("auto", "closed_form", "long_run"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "closed_form" or (mode == "auto" and _plain_least_squares(problem)):
        if not _plain_least_squares(problem):
            raise UnsupportedError("closed_form needs a least-squares inner term with g = zero")
        f = problem.inner_smooth
        b_proj, _, _, _ = _projected_target(f.A, f.b)
        r = f.b - b_proj
        return float(r @ r) / (2.0 * f.N)
    best, drift, _ = _inner_fista(problem, max_iter)
    return best - max(drift, 0.0)


def _check_outer_structure(problem):
    if not (_plain_least_squares(problem) and problem.outer_smooth.kind == "zero"
            and problem.outer_prox.kind == "l1"):
        raise UnsupportedError(
            "outer oracle needs least_squares inner, g = zero, sigma = zero, psi = l1")


def compute_outer_opt(problem, max_dim=20):
    """Minimum-l1 point of the inner solution set by basic-solution enumeration.

    Returns ``(x_prime, omega_xprime, rho)`` with ``rho`` the norm of the
    sign-pattern subgradient of the outer term at ``x_prime``.
    """
    _check_outer_structure(problem)
    if problem.dim > max_dim:
        raise UnsupportedError(f"enumeration oracle is limited to n <= {max_dim}")
    f = problem.inner_smooth
    A = np.asarray(f.A)
    b_proj, x_ls, r, _ = _projected_target(A, f.b)
    n = A.shape[1]
    scale = 1.0 + np.linalg.norm(b_proj)
    best, best_l1 = None, math.inf
    if r == 0:
        best = np.zeros(n)
    elif r == n:
        best = x_ls
    else:
        for cols in itertools.combinations(range(n), r):
            As = A[:, cols]
            xs, _, rank, _ = np.linalg.lstsq(As, b_proj, rcond=None)
            if rank < r or np.linalg.norm(As @ xs - b_proj) > 1e-9 * scale:
                continue
            l1 = float(np.sum(np.abs(xs)))
            if l1 < best_l1 - 1e-12 * (1.0 + l1):
                best_l1 = l1
                best = np.zeros(n)
                best[list(cols)] = xs
    return _outer_report(problem, best)


def _outer_report(problem, x):
    w = problem.outer_prox.weight
    thresh = 1e-10 * (1.0 + np.max(np.abs(x))) if x.size else 0.0
    x = np.where(np.abs(x) <= thresh, 0.0, x)
    nnz = int(np.count_nonzero(x))
    return x, problem.outer_value(x), w * math.sqrt(nnz)


def certify_outer_opt(problem, candidate, margin=1e-9):
    """Verify that ``candidate`` is the minimum-l1 point of the inner solution set.

    Uses a dual certificate: with support S and signs s, the least-norm y
    solving ``A_S^T y = s`` must satisfy ``|A_j^T y| < 1`` off the support
    and ``A_S`` must have full column rank.  Raises ``UnsupportedError``
    when the certificate cannot be produced.
    """
    _check_outer_structure(problem)
    f = problem.inner_smooth
    A = np.asarray(f.A)
    x = np.asarray(candidate, dtype=float)
    b_proj, _, _, _ = _projected_target(A, f.b)
    if np.linalg.norm(A @ x - b_proj) > 1e-9 * (1.0 + np.linalg.norm(b_proj)):
        raise UnsupportedError("candidate is not an inner minimizer")
    S = np.flatnonzero(x)
    if S.size == 0:
        return _outer_report(problem, x)
    As = A[:, S]
    if np.linalg.matrix_rank(As) < S.size:
        raise UnsupportedError("support columns are linearly dependent")
    y = np.linalg.pinv(As.T) @ np.sign(x[S])
    if not np.allclose(As.T @ y, np.sign(x[S]), atol=1e-9):
        raise UnsupportedError("no dual vector matches the sign pattern")
    off = np.setdiff1d(np.arange(A.shape[1]), S)
    if off.size and np.max(np.abs(A[:, off].T @ y)) >= 1.0 - margin:
        raise UnsupportedError("dual certificate fails off the support")
    return _outer_report(problem, x)


def compute_tau(problem):
    """Error-bound constant ``sigma_min+(A)^2 / (2N)`` of a least-squares inner term."""
    if not _plain_least_squares(problem):
        raise UnsupportedError("tau oracle needs a least-squares inner term with g = zero")
    f = problem.inner_smooth
    _, _, r, s = _projected_target(np.asarray(f.A), f.b)
    if r == 0:
        raise UnsupportedError("A is zero")
    return float(s[r - 1] ** 2) / (2.0 * f.N)


def compute_oracle(problem, x0=None, candidate=None, phi_star_mode="auto",
                   max_iter=10**6):
    """Collect every ground-truth quantity that is computable for ``problem``."""
    rep = OracleReport(omega_star_inf=problem.omega_star)
    rep.phi_star = compute_phi_star(problem, phi_star_mode, max_iter=max_iter)
    rep.method["phi_star"] = ("closed_form" if phi_star_mode != "long_run"
                              and _plain_least_squares(problem) else "long_run")
    xp = None
    try:
        if problem.dim <= 20:
            xp, om, rho = compute_outer_opt(problem)
            rep.method["x_prime"] = "enumeration"
        elif candidate is not None:
            xp, om, rho = certify_outer_opt(problem, candidate)
            rep.method["x_prime"] = "dual_certificate"
        else:
            raise UnsupportedError("no candidate to certify for n > 20")
        rep.x_prime, rep.omega_xprime, rep.rho = xp, om, rho
    except UnsupportedError as exc:
        rep.warnings.append(f"x_prime unavailable: {exc}")
    try:
        rep.tau = compute_tau(problem)
        rep.method["tau"] = "svd"
    except UnsupportedError:
        pass
    if rep.x_prime is not None:
        x0 = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float)
        d = x0 - rep.x_prime
        rep.R2 = float(d @ d)
    if rep.omega_star_inf is None:
        rep.warnings.append("omega_star unknown: give 'omega_star' in the problem file")
    return rep


# ---------------------------------------------------------------------------
# trace auditing


def regime_for(algo, gamma, holder_ok=False):
    """Default audit regime for a run."""
    if algo == "fista-fixed":
        return "fixed"
    if gamma > 2:
        return "fast"
    if gamma == 1:
        return "gamma1"
    if 1 < gamma < 2 and holder_ok:
        return "holder"
    return "sub2"


def _regime_matches(regime, gamma, algo):
    if regime == "fixed":
        return algo == "fista-fixed"
    if algo == "fista-fixed":
        return False
    return {"fast": gamma > 2, "sub2": 0 < gamma <= 2, "gamma1": gamma == 1,
            "holder": 1 < gamma < 2}[regime]


def audit_trace(trace, oracle, params, regime, tol=1e-8):
    """Check a trace against the bounds of ``regime`` at every recorded k >= 1.

    ``params`` is a :class:`~fbipg.rates.RateParams`; its ``gamma`` must be
    the run's gamma.  Gap columns of the trace must have been filled, that
    is the run must have been given the same oracle.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    algo = trace.meta.get("algo", "fbipg")
    gamma = trace.meta.get("gamma")
    if not _regime_matches(regime, gamma if gamma is not None else params.gamma, algo):
        raise ValueError(f"regime {regime!r} does not apply to algo={algo} gamma={gamma}")
    if algo == "fbipg" and trace.meta.get("t_mode") != "explicit":
        raise ValueError("rate bounds apply to the explicit t-sequence only")
    if oracle is None or oracle.phi_star is None:
        raise ValueError("audit_trace needs an oracle with phi_star")

    shown = ({"alpha": trace.meta.get("alpha")} if regime == "fixed"
             else {"a": params.a, "gamma": params.gamma})
    report = AuditReport(regime, shown)
    ks = np.asarray(trace["k"])
    phi_gap = trace["phi_gap"]
    om = trace["omega"]
    om_xp = oracle.omega_xprime
    a, g = params.a, params.gamma

    def chk(name, k, lhs, bound):
        report.check(name, int(k), float(lhs), float(bound), tol * (1.0 + abs(bound)))

    if regime == "fixed":
        K = int(trace.meta["K"])
        alpha = trace.meta["alpha"]
        i = int(np.flatnonzero(ks == K)[0])
        R_K = 2.0 * params.beta * params.R2 / (K + 1) ** 2
        inner, outer = rates.generic_fixed_bounds(R_K, alpha, params.delta_omega)
        phi_xp = trace.problem.inner_value(_in_space(trace.problem, oracle.x_prime))
        chk("fixed_inner", K, trace["phi"][i] - phi_xp, inner)
        chk("fixed_outer", K, om[i] - om_xp, outer)
        return report

    if regime == "holder":
        C = rates.holder_constant_C(params)
    for i, k in enumerate(ks):
        if k < 1:
            continue
        if regime == "fast":
            chk("inner_fast", k, phi_gap[i], rates.inner_bound_fast(k, params))
        elif regime == "sub2":
            chk("inner_sub2", k, phi_gap[i], rates.inner_bound(k, params))
            if g < 2:
                chk("outer_best", k, trace["omega_best"][i] - om_xp,
                    rates.outer_bound(k, params))
        elif regime == "gamma1":
            inner, outer = rates.simul_bounds_gamma1(k, params)
            chk("gamma1_inner", k, trace["phi_tilde"][i] - oracle.phi_star, inner)
            chk("gamma1_outer", k, trace["omega_tilde"][i] - om_xp, outer)
        elif regime == "holder":
            b1, b2, b3 = a * C / (k + 1) ** 2, C / (a * a * (k + 1)), C / (k + 1) ** (2 - g)
            chk("holder_i", k, phi_gap[i], b1)
            chk("holder_ii", k, om_xp - om[i], b2)
            chk("holder_iii", k, om[i] - om_xp, b3)
        if 1 < g < 2:
            rhs = 0.5 * (k + 1) ** (1 - g)
            lhs = rates.eta_k(int(k), a, g)
            report.check("boundeta", int(k), lhs, rhs, 0.0)
    if 1 < g < 2 and a > 2:
        diag = pointwise_diagnostics(trace)
        report.check("tdelta_growth", int(ks[-1]), diag["tdelta_growth"],
                     1e-6 * diag["tdelta_value"], 0.0)
    return report


def _in_space(problem, x):
    x = np.asarray(x, dtype=float)
    if problem.is_lifted and x.shape[0] == problem.lifted_from:
        return np.concatenate([x, x])
    return x


def pointwise_diagnostics(trace):
    """Tail behaviour of a run over its final decade ``[K/10, K]``.

    Returns ``tail_dev`` (max over recorded k >= K/2 of ``||x^k - x^K||``,
    needs stored iterates), ``mu_osc`` (range of mu_k), ``tdelta_growth``
    and ``tdelta_value``.
    """
    ks = np.asarray(trace["k"])
    K = int(ks[-1])
    dec = ks >= K / 10
    out = {"K": K}
    td = trace["tdelta_sum"]
    out["tdelta_value"] = float(td[-1])
    out["tdelta_growth"] = float(td[-1] - td[dec][0])
    mu = trace["mu_k"][dec]
    out["mu_osc"] = float(np.max(mu) - np.min(mu)) if np.all(np.isfinite(mu)) else math.nan
    if trace.iterates is not None:
        half = ks >= K / 2
        dev = trace.iterates[half] - trace.iterates[-1]
        out["tail_dev"] = float(np.max(np.linalg.norm(dev, axis=1)))
    else:
        out["tail_dev"] = math.nan
    return out


def digits_vs_omega(trace):
    """Points ``(-log10 phi_gap, omega)`` kept where the digits reach a new maximum."""
    gap = trace["phi_gap"]
    om = trace["omega"]
    pts = []
    best = -math.inf
    for d, o in zip(gap, om):
        if not (d > 0 and math.isfinite(o)):
            continue
        digits = -math.log10(d)
        if digits > best:
            best = digits
            pts.append([digits, float(o)])
    return pts


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    problem: str
    runs: list
    K: int
    seed: int = 0
    out: str = "experiment_out"
    trace_every: int = 1
    workers: int = 1
    candidate: str = None          # optional CSV of a point to certify as x'
    phi_star_mode: str = "auto"

    def __post_init__(self):
        if not self.runs:
            raise ValueError("experiment needs at least one run")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        for r in self.runs:
            algo = r.get("algo")
            if algo not in ("fbipg", "fista-fixed"):
                raise ValueError(f"unknown algo {algo!r}")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        base = os.path.dirname(os.path.abspath(path))
        for key in ("problem", "candidate", "out"):
            v = raw.get(key)
            if isinstance(v, str) and not os.path.isabs(v):
                raw[key] = os.path.join(base, v)
        return cls(**raw)


def _alpha_value(spec, K):
    if isinstance(spec, str):
        s = spec.replace(" ", "")
        if s == "1/K":
            return 1.0 / K
        return float(s)
    return float(spec)


def _one_run(problem, oracle, params_base, run, K, stride, seed):
    algo = run["algo"]
    if algo == "fbipg":
        cfg = FBiPGConfig(gamma=float(run["gamma"]), a=int(run.get("a", 2)),
                          t_mode=run.get("t_mode", "explicit"), iters=K,
                          trace_stride=stride, lift_mode=run.get("lift", "auto"),
                          audit=bool(run.get("audit", False)), seed=seed)
        trace = run_fbipg(problem, cfg, oracle)
    else:
        trace = run_fista_fixed(problem, _alpha_value(run.get("alpha", "1/K"), K), K,
                                oracle=oracle, trace_stride=stride, seed=seed)
    result = {"algo": algo, "gamma": trace.meta["gamma"], "a": trace.meta["a"],
              "alpha": trace.meta["alpha"], "K": K,
              "final_phi_gap": _num(trace.last("phi_gap")),
              "final_omega": _num(trace.last("omega")), "slope_phi_gap": None,
              "audit": {"regime": None, "passes": 0, "failures": 0}}
    try:
        result["slope_phi_gap"] = rates.fit_loglog_slope(trace, "phi_gap", max(1, K // 100), K)
    except EstimationError:
        pass
    ready = (oracle is not None and oracle.x_prime is not None
             and oracle.omega_star_inf is not None and params_base is not None
             and (algo == "fista-fixed" or trace.meta["t_mode"] == "explicit")
             and not trace.meta["lifted"])
    if ready:
        holder_ok = oracle.tau is not None and oracle.rho is not None
        regime = regime_for(algo, trace.meta["gamma"] or 0.0, holder_ok)
        params = rates.RateParams(
            a=trace.meta["a"] or 2, gamma=trace.meta["gamma"] or 1.0, **params_base)
        rep = audit_trace(trace, oracle, params, regime)
        if trace.audit is not None:
            for name, t in trace.audit.tallies.items():
                rep.tallies[name] = t
        result["audit"] = rep.as_dict()
    result["digits_vs_omega"] = digits_vs_omega(trace)
    return trace, result


def _num(v):
    return None if v is None or not math.isfinite(v) else float(v)


def run_experiment(config):
    """Run every configured solver on one problem; write traces and ``summary.json``.

    ``config`` is an :class:`ExperimentConfig` or a path to its JSON file.
    Returns the output directory.
    """
    if isinstance(config, (str, os.PathLike)):
        config = ExperimentConfig.from_json(config)
    problem = load_problem(config.problem)
    os.makedirs(config.out, exist_ok=True)
    candidate = fn.load_vector(config.candidate) if config.candidate else None

    summary_warnings = []
    try:
        oracle = compute_oracle(problem, candidate=candidate, phi_star_mode=config.phi_star_mode)
        summary_warnings.extend(oracle.warnings)
    except UnsupportedError as exc:
        oracle = None
        summary_warnings.append(f"oracle unavailable: {exc}")
        warnings.warn(summary_warnings[-1])

    params_base = None
    if oracle is not None and oracle.x_prime is not None and oracle.omega_star_inf is not None:
        params_base = {"beta": problem.beta, "R2": oracle.R2,
                       "delta_omega": max(oracle.omega_xprime - oracle.omega_star_inf, 0.0),
                       "tau": oracle.tau, "rho": oracle.rho}

    def job(i):
        run = config.runs[i]
        trace, result = _one_run(problem, oracle, params_base, run, config.K,
                                 config.trace_every, config.seed + i)
        sub = os.path.join(config.out, f"run_{i:02d}")
        os.makedirs(sub, exist_ok=True)
        trace.to_csv(os.path.join(sub, "trace.csv"))
        return result

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(job, range(len(config.runs))))
    else:
        results = [job(i) for i in range(len(config.runs))]

    summary = oracle.as_dict() if oracle is not None else OracleReport().as_dict()
    summary["beta"] = problem.beta
    summary["runs"] = results
    summary["warnings"] = summary_warnings
    with open(os.path.join(config.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return config.out
