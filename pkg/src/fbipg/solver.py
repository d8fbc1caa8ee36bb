"""FBi-PG iterations, the fixed-alpha FISTA baseline, traces and auditing.

One iteration of FBi-PG at index k, with ``alpha_k = (k + a)^(-gamma)``::

    y^k     = x^k + (t_{k-1} - 1) / t_k * (x^k - x^{k-1})
    x^{k+1} = prox_{(g + alpha_k psi)/beta}(y^k - grad(f + alpha_k sigma)(y^k) / beta)

starting from ``x^{-1} = x^0``, ``t_{-1} = 0`` and ``t_0 = 1``.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import rates
from .exceptions import ConfigurationError, NumericError
from .problem import combined_prox, lift

__all__ = [
    "FBiPGConfig", "SolverState", "IterateTrace", "AuditReport",
    "momentum_point", "fbipg_step", "run_fbipg", "run_fista_fixed",
    "TRACE_COLUMNS", "T_MODES", "LIFT_MODES",
]

TRACE_COLUMNS = ("k", "alpha_k", "t_k", "phi", "phi_gap", "omega", "omega_best",
                 "omega_ergodic", "omega_tilde", "F_k_gap", "step_norm",
                 "tdelta_sum", "mu_k")
# kept in memory only; the CSV header is fixed
_HIDDEN_COLUMNS = ("phi_tilde",)

T_MODES = {"explicit": "explicit", "fista": "fista", "fista_recursion": "fista"}
LIFT_MODES = ("off", "auto", "force")


@dataclass
class FBiPGConfig:
    gamma: float = 1.5
    a: int = 2
    t_mode: str = "explicit"
    iters: int = 1000
    trace_stride: int = 1
    lift_mode: str = "auto"
    audit: bool = False
    seed: int = 0
    x0: np.ndarray = None
    keep_iterates: bool = False
    n_probes: int = 5

    def __post_init__(self):
        if not (isinstance(self.gamma, (int, float)) and self.gamma > 0
                and math.isfinite(self.gamma)):
            raise ValueError("gamma must be a positive number")
        if int(self.a) != self.a or self.a < 2:
            raise ValueError("a must be an integer >= 2")
        self.a = int(self.a)
        if self.t_mode not in T_MODES:
            raise ValueError(f"t_mode must be one of {sorted(T_MODES)}")
        self.t_mode = T_MODES[self.t_mode]
        if int(self.iters) != self.iters or self.iters < 0:
            raise ValueError("iters must be a nonnegative integer")
        self.iters = int(self.iters)
        if int(self.trace_stride) != self.trace_stride or self.trace_stride < 1:
            raise ValueError("trace_stride must be a positive integer")
        self.trace_stride = int(self.trace_stride)
        if self.lift_mode not in LIFT_MODES:
            raise ValueError(f"lift_mode must be one of {LIFT_MODES}")


@dataclass
class SolverState:
    """State at iteration index k (the iterate ``x_k`` is x^k)."""

    k: int
    x_k: np.ndarray
    x_prev: np.ndarray
    t_k: float
    t_prev: float
    alpha_k: float
    ergodic_sum: np.ndarray
    omega_best: float = math.inf
    tdelta_sum: float = 0.0

    @classmethod
    def initial(cls, x0, a, gamma):
        x0 = np.array(x0, dtype=float)
        return cls(0, x0, x0.copy(), 1.0, 0.0, rates.alpha_k(0, a, gamma),
                   np.zeros_like(x0))


def momentum_point(x_k, x_prev, t_k, t_prev):
    """y = x_k + (t_prev - 1) / t_k * (x_k - x_prev)."""
    if t_k < 1:
        raise ValueError("t_k must be >= 1")
    lam = (t_prev - 1.0) / t_k
    if lam == 0.0:
        return np.array(x_k, dtype=float)
    return x_k + lam * (x_k - x_prev)


def fbipg_step(state, problem, config):
    """Advance ``state`` by one FBi-PG iteration and return the new state."""
    k = state.k
    alpha = rates.alpha_k(k, config.a, config.gamma)
    step = 1.0 / problem.beta
    y = momentum_point(state.x_k, state.x_prev, state.t_k, state.t_prev)
    v = y - step * problem.grad_smooth(y, alpha)
    x_new = combined_prox(problem.inner_prox, problem.outer_prox, alpha, v, step)
    if x_new is None:
        raise ConfigurationError(
            "the prox of g + alpha*psi has no closed form here; lift the problem")
    if not np.all(np.isfinite(x_new)):
        raise NumericError(k + 1)
    t_new = (rates.t_explicit(k + 1, config.a) if config.t_mode == "explicit"
             else rates.t_fista(state.t_k))
    diff = x_new - state.x_k
    return SolverState(
        k=k + 1, x_k=x_new, x_prev=state.x_k, t_k=t_new, t_prev=state.t_k,
        alpha_k=rates.alpha_k(k + 1, config.a, config.gamma),
        ergodic_sum=state.ergodic_sum + x_new,
        omega_best=min(state.omega_best, problem.outer_value(x_new)),
        tdelta_sum=state.tdelta_sum + state.t_k * 0.5 * float(diff @ diff),
    )


# ---------------------------------------------------------------------------
# audit bookkeeping


@dataclass
class _Tally:
    passes: int = 0
    failures: int = 0
    worst: tuple = None           # (excess, k, lhs, rhs)
    failed_at: list = field(default_factory=list)

    def add(self, k, lhs, rhs, tol):
        excess = lhs - rhs
        ok = excess <= tol
        if ok:
            self.passes += 1
        else:
            self.failures += 1
            if len(self.failed_at) < 20:
                self.failed_at.append((k, lhs, rhs))
        if self.worst is None or excess > self.worst[0]:
            self.worst = (excess, k, lhs, rhs)
        return ok


class AuditReport:
    """Pass/fail tallies of inequality checks, keyed by check id."""

    def __init__(self, regime=None, params=None):
        self.regime = regime
        self.params = params or {}
        self.tallies = {}
        self.notes = []

    def check(self, name, k, lhs, rhs, tol):
        return self.tallies.setdefault(name, _Tally()).add(int(k), float(lhs), float(rhs), tol)

    @property
    def passes(self):
        return sum(t.passes for t in self.tallies.values())

    @property
    def failures(self):
        return sum(t.failures for t in self.tallies.values())

    @property
    def ok(self):
        return self.failures == 0

    def lines(self):
        """One ``PASS|FAIL <id> <params> k=.. lhs=.. rhs=..`` line per check id."""
        ptxt = " ".join(f"{k}={v}" for k, v in self.params.items())
        out = []
        for name, t in self.tallies.items():
            if t.worst is None:
                continue
            # report the first failure if any, otherwise the tightest case
            if t.failed_at:
                k, lhs, rhs = t.failed_at[0]
            else:
                _, k, lhs, rhs = t.worst
            status = "PASS" if t.failures == 0 else "FAIL"
            out.append(f"{status} {name} {ptxt} k={k} lhs={lhs!r} rhs={rhs!r}".replace("  ", " "))
        return out

    def as_dict(self):
        return {"regime": self.regime, "passes": self.passes, "failures": self.failures}


# ---------------------------------------------------------------------------
# traces


class IterateTrace:
    """Column-oriented record of a run.

    ``trace["phi_gap"]`` returns a column as a float array (NaN where a
    metric is absent).  ``x_final`` is the last iterate of the problem that
    was actually iterated on (``problem``), which is the lifted one when
    lifting was applied.
    """

    def __init__(self, columns, meta, x_final, problem=None, iterates=None, audit=None):
        self.columns = columns
        self.meta = meta
        self.x_final = x_final
        self.problem = problem
        self.iterates = iterates
        self.audit = audit

    def __getitem__(self, name):
        return self.columns[name]

    def __contains__(self, name):
        return name in self.columns

    def __len__(self):
        return len(self.columns["k"])

    def last(self, name):
        return float(self.columns[name][-1])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            cols = [self.columns[c] for c in TRACE_COLUMNS]
            for i in range(len(self)):
                row = []
                for j, col in enumerate(cols):
                    v = col[i]
                    if j == 0:
                        row.append(str(int(v)))
                    elif math.isnan(v):
                        row.append("")
                    else:
                        row.append(repr(float(v)))
                w.writerow(row)

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header")
        cols = {}
        for j, name in enumerate(header):
            vals = [float(r[j]) if r[j] != "" else math.nan for r in body]
            cols[name] = np.array(vals, dtype=float)
        cols["k"] = cols["k"].astype(int)
        return cls(cols, {}, None)


class _Recorder:
    def __init__(self, K, stride, keep_iterates, dim):
        ks = list(range(0, K + 1, stride))
        if ks[-1] != K:
            ks.append(K)
        self.ks = np.array(ks, dtype=int)
        m = len(ks)
        self.cols = {c: np.full(m, np.nan) for c in TRACE_COLUMNS + _HIDDEN_COLUMNS}
        self.cols["k"] = self.ks.copy()
        self.iterates = np.empty((m, dim)) if keep_iterates else None
        self.i = 0

    def due(self, k):
        return self.i < len(self.ks) and self.ks[self.i] == k

    def put(self, x, **vals):
        i = self.i
        for name, v in vals.items():
            if v is not None:
                self.cols[name][i] = v
        if self.iterates is not None:
            self.iterates[i] = x
        self.i += 1


class _KahanSum:
    __slots__ = ("s", "c")

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, v):
        y = v - self.c
        t = self.s + y
        self.c = (t - self.s) - y
        self.s = t


def _oracle_view(problem, oracle):
    """(phi_star, x_prime, omega_xprime, omega_star) in the iterated space."""
    if oracle is None:
        return None, None, None, None
    phi_star = getattr(oracle, "phi_star", None)
    xp = getattr(oracle, "x_prime", None)
    om_xp = getattr(oracle, "omega_xprime", None)
    om_star = getattr(oracle, "omega_star_inf", None)
    if xp is not None:
        xp = np.asarray(xp, dtype=float)
        if problem.is_lifted and xp.shape[0] == problem.lifted_from:
            xp = np.concatenate([xp, xp])
        if om_xp is None:
            om_xp = problem.outer_value(xp)
    return phi_star, xp, om_xp, om_star


def _prepare(problem, lift_mode):
    if lift_mode == "force" and not problem.is_lifted:
        return lift(problem)
    if problem.prox_available():
        return problem
    if lift_mode == "auto" and not problem.is_lifted:
        return lift(problem)
    raise ConfigurationError(
        "the prox of g + alpha*psi has no closed form for this pair; "
        "rerun with lift_mode='auto' or 'force'")


def _start_point(problem, x0):
    if x0 is None:
        return np.zeros(problem.dim)
    x0 = np.array(x0, dtype=float).reshape(-1)
    if problem.is_lifted and x0.shape[0] == problem.lifted_from:
        x0 = np.concatenate([x0, x0])
    if x0.shape[0] != problem.dim:
        raise ConfigurationError(f"x0 has length {x0.shape[0]}, problem dimension is {problem.dim}")
    return x0


def _iterate(problem, alpha_of, t_mode, K, stride, oracle, audit, seed, x0,
             keep_iterates, track_tilde, n_probes, meta):
    """Shared loop behind :func:`run_fbipg` and :func:`run_fista_fixed`."""
    phi_star, xp, om_xp, om_star = _oracle_view(problem, oracle)
    beta = problem.beta
    step = 1.0 / beta
    g, psi = problem.inner_prox, problem.outer_prox
    phi_fn, om_fn = problem.inner_value, problem.outer_value

    x = _start_point(problem, x0)
    x_prev = x.copy()
    t_prev, t = 0.0, 1.0
    alpha_prev = 0.0
    phi_x, om_x = phi_fn(x), om_fn(x)
    ergodic = np.zeros_like(x)
    omega_best = math.inf
    tdelta = 0.0

    rec = _Recorder(K, stride, keep_iterates, problem.dim)
    report = None
    if audit:
        report = AuditReport(params={k: meta[k] for k in ("gamma", "a", "alpha")
                                     if meta.get(k) is not None})
        rng = np.random.default_rng(seed)
        P = rng.standard_normal((n_probes, problem.dim))
        if xp is not None:
            scale = np.linalg.norm(x - xp)
            if scale > 0:
                P *= scale / np.linalg.norm(P, axis=1, keepdims=True)
            P = np.vstack([x + P, xp[None, :]])
        else:
            P = x + P
        phi_P = np.array([phi_fn(p) for p in P])
        om_P = np.array([om_fn(p) for p in P])
        usable = np.isfinite(phi_P) & np.isfinite(om_P)
        P, phi_P, om_P = P[usable], phi_P[usable], om_P[usable]
        if xp is not None and om_star is not None and phi_star is not None:
            R2 = float((x - xp) @ (x - xp))
            phi_xp = phi_fn(xp)
            eta_sum, at_sum = _KahanSum(), _KahanSum()
        else:
            R2 = None
            report.notes.append("no oracle: cumulative inequalities skipped")

    def record(k, alpha_k_val, t_k_val, alpha_before, step_norm):
        vals = dict(alpha_k=alpha_k_val, t_k=t_k_val, phi=phi_x, omega=om_x,
                    step_norm=step_norm, tdelta_sum=tdelta)
        if phi_star is not None:
            vals["phi_gap"] = phi_x - phi_star
            if om_xp is not None:
                vals["F_k_gap"] = phi_x - phi_star + alpha_before * (om_x - om_xp)
        if k >= 1:
            vals["omega_best"] = omega_best
            xbar = ergodic / k
            om_bar = om_fn(xbar)
            vals["omega_ergodic"] = om_bar
            if track_tilde:
                if om_bar < om_x:
                    vals["omega_tilde"], vals["phi_tilde"] = om_bar, phi_fn(xbar)
                else:
                    vals["omega_tilde"], vals["phi_tilde"] = om_x, phi_x
        if xp is not None:
            d = x - xp
            vals["mu_k"] = 0.5 * float(d @ d)
        rec.put(x, **vals)

    if rec.due(0):
        record(0, alpha_of(0), t, alpha_prev, 0.0)

    for k in range(K):
        a_k = alpha_of(k)
        lam = (t_prev - 1.0) / t
        y = x + lam * (x - x_prev) if lam != 0.0 else x
        v = y - step * problem.grad_smooth(y, a_k)
        x_new = combined_prox(g, psi, a_k, v, step)
        if not np.all(np.isfinite(x_new)):
            raise NumericError(k + 1)
        phi_new, om_new = phi_fn(x_new), om_fn(x_new)
        if not (math.isfinite(phi_new) and math.isfinite(om_new)):
            raise NumericError(k + 1, "objective value is not finite")
        t_next = rates.t_explicit(k + 1, meta["a"]) if t_mode == "explicit" else rates.t_fista(t)

        if audit:
            if k % stride == 0:
                _audit_basic(report, k, P, phi_P, om_P, x_prev, x, x_new, t_prev, t,
                             a_k, phi_x, om_x, phi_new, om_new, beta)
            # t_k^2 - t_k <= t_{k-1}^2
            dk = t_prev * t_prev - (t * t - t)
            report.check("t_sequence", k, -dk, 0.0, 1e-12 * (1.0 + t * t))
            if R2 is not None:
                eta = t_prev * t_prev * alpha_prev - (t * t - t) * a_k
                eta_sum.add(eta * (om_x - om_xp))
                at_sum.add(a_k * t)

        diff = x_new - x
        delta = 0.5 * float(diff @ diff)
        tdelta += t * delta
        ergodic += x_new
        omega_best = min(omega_best, om_new)

        x_prev, x = x, x_new
        t_prev, t = t, t_next
        alpha_prev = a_k
        phi_x, om_x = phi_new, om_new

        if audit and R2 is not None and ((k + 1) % stride == 0 or k + 1 == K):
            F_gap = phi_x - phi_xp + alpha_prev * (om_x - om_xp)
            scale = t_prev * t_prev
            rhs3 = 0.5 * beta * R2 - eta_sum.s
            report.check("prop3", k + 1, scale * F_gap, rhs3, 1e-8 * (1.0 + abs(rhs3)))
            rhs4 = 0.5 * beta * R2 + (om_xp - om_star) * at_sum.s
            report.check("prop4", k + 1, scale * (phi_x - phi_xp), rhs4,
                         1e-8 * (1.0 + abs(rhs4)))
            report.check("phi_above_star", k + 1, phi_star - phi_x, 0.0,
                         1e-9 * (1.0 + abs(phi_star)))
        if rec.due(k + 1):
            record(k + 1, alpha_of(k + 1), t, alpha_prev, math.sqrt(2.0 * delta))

    meta = dict(meta, K=K, beta=beta, lifted=problem.is_lifted, t_mode=t_mode)
    return IterateTrace(rec.cols, meta, x, problem=problem, iterates=rec.iterates,
                        audit=report)


def _audit_basic(report, k, P, phi_P, om_P, x_prev, x, x_new, t_prev, t, a_k,
                 phi_x, om_x, phi_new, om_new, beta):
    """Per-iteration inequality at the probe points P (rows)."""
    if len(P) == 0:
        return
    z_k = x_prev + t_prev * (x - x_prev)
    z_next = x + t * (x_new - x)
    F_P = phi_P + a_k * om_P
    F_new = phi_new + a_k * om_new
    coef = t * t - t
    F_old = phi_x + a_k * om_x
    old_term = coef * (F_old - F_P) if coef != 0.0 else np.zeros(len(P))
    dn = z_next[None, :] - P
    do = z_k[None, :] - P
    lhs = t * t * (F_new - F_P) + 0.5 * beta * np.einsum("ij,ij->i", dn, dn)
    rhs = old_term + 0.5 * beta * np.einsum("ij,ij->i", do, do)
    for l_, r_ in zip(lhs, rhs):
        report.check("prop2", k, float(l_), float(r_), 1e-8 * (1.0 + abs(r_)))


def run_fbipg(problem, config, oracle=None):
    """Run FBi-PG for ``config.iters`` iterations and return the trace.

    The problem is lifted first when ``config.lift_mode`` asks for it (or,
    with ``"auto"``, when the prox of ``g + alpha * psi`` has no closed form).
    """
    solved = _prepare(problem, config.lift_mode)
    a, gamma = config.a, config.gamma

    def alpha_of(k):
        return float((k + a) ** (-gamma))

    meta = {"algo": "fbipg", "gamma": gamma, "a": a, "alpha": None}
    return _iterate(solved, alpha_of, config.t_mode, config.iters, config.trace_stride,
                    oracle, config.audit, config.seed, config.x0, config.keep_iterates,
                    track_tilde=(gamma == 1), n_probes=config.n_probes, meta=meta)


def run_fista_fixed(problem, alpha, K, oracle=None, trace_stride=1, audit=False,
                    seed=0, x0=None, lift_mode="auto", keep_iterates=False):
    """Classical FISTA on ``phi + alpha * omega`` with step 1/beta."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if int(K) != K or K < 0:
        raise ValueError("K must be a nonnegative integer")
    solved = _prepare(problem, lift_mode)
    alpha = float(alpha)
    meta = {"algo": "fista-fixed", "gamma": None, "a": None, "alpha": alpha}
    return _iterate(solved, lambda k: alpha, "fista", int(K), trace_stride, oracle,
                    audit, seed, x0, keep_iterates, track_tilde=False, n_probes=5,
                    meta=meta)
