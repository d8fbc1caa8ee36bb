"""Bi-level problem container, JSON assembly, combined prox and lifting."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import functions as fn
from .exceptions import DimensionError, SpecError

__all__ = [
    "BilevelProblem", "assemble_problem", "load_problem", "combined_prox",
    "lift", "smooth_from_spec", "prox_from_spec",
]


@dataclass(frozen=True)
class BilevelProblem:
    """min sigma + psi over argmin (f + g).

    ``beta`` bounds the Lipschitz constant of ``grad f + alpha * grad sigma``
    for every ``alpha`` in [0, 1].  ``lifted_from`` is the original dimension
    when the problem is the lifted reformulation of another one (the variable
    is then ``w = (x, z)`` of length ``2 * lifted_from``).
    """

    inner_smooth: object
    inner_prox: object
    outer_smooth: object
    outer_prox: object
    beta: float
    dim: int
    omega_star: float = None
    lifted_from: int = None
    source: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.beta > 0 or not np.isfinite(self.beta):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        for name in ("inner_smooth", "inner_prox", "outer_smooth", "outer_prox"):
            d = getattr(self, name).dim
            if d is not None and d != self.dim:
                raise DimensionError(f"{name} has dimension {d}, problem has {self.dim}")

    @property
    def is_lifted(self):
        return self.lifted_from is not None

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return x

    def inner_value(self, x):
        """phi(x) = f(x) + g(x); may be +inf for indicator terms."""
        x = self._check(x)
        gx = self.inner_prox.value(x)
        if gx == np.inf:
            return np.inf
        return self.inner_smooth.value(x) + gx

    def outer_value(self, x):
        """omega(x) = sigma(x) + psi(x)."""
        x = self._check(x)
        px = self.outer_prox.value(x)
        if px == np.inf:
            return np.inf
        return self.outer_smooth.value(x) + px

    def regularized_value(self, alpha, x):
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        phi = self.inner_value(x)
        if alpha == 0:
            return phi
        return phi + alpha * self.outer_value(x)

    def grad_smooth(self, y, alpha):
        """Gradient of f + alpha * sigma at y."""
        g = self.inner_smooth.grad(y)
        if alpha != 0 and self.outer_smooth.kind != "zero":
            g = g + alpha * self.outer_smooth.grad(y)
        return g

    def prox_available(self):
        probe = np.zeros(self.dim)
        return combined_prox(self.inner_prox, self.outer_prox, 0.5, probe, 1.0) is not None

    def x_block(self, w):
        """Original variable of a (possibly) lifted iterate."""
        w = np.asarray(w, dtype=float)
        return w[:self.lifted_from] if self.is_lifted else w


# ---------------------------------------------------------------------------
# combined prox of g + alpha * psi


def _is(h, kind):
    return getattr(h, "kind", None) == kind


def _box_like_with_origin(h):
    if _is(h, "indicator_nonneg"):
        return True
    return _is(h, "indicator_box") and h.contains_origin


def combined_prox(g, psi, alpha, v, step):
    """Prox of ``g + alpha * psi`` at ``v`` when a closed form is known.

    Returns ``None`` when the pair is outside the table of closed forms; the
    caller is then expected to lift the problem.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    v = np.asarray(v, dtype=float)

    if _is(g, "separable_pair") and _is(psi, "separable_pair"):
        if g.split != psi.split:
            return None
        a = combined_prox(g.first, psi.first, alpha, v[:g.split], step)
        b = combined_prox(g.second, psi.second, alpha, v[g.split:], step)
        if a is None or b is None:
            return None
        return np.concatenate([a, b])
    if _is(psi, "zero") or alpha == 0:
        return g.prox(v, step)
    if _is(g, "zero"):
        return psi.prox(v, alpha * step)
    if _is(g, "l1") and _is(psi, "l1"):
        return fn.soft_threshold(v, (g.weight + alpha * psi.weight) * step)
    # indicator of a box containing 0 plus an l1 term: threshold, then project
    if _box_like_with_origin(g) and _is(psi, "l1"):
        return g.prox(fn.soft_threshold(v, alpha * psi.weight * step), step)
    if _is(g, "l1") and _box_like_with_origin(psi):
        return psi.prox(fn.soft_threshold(v, g.weight * step), step)
    return None


# ---------------------------------------------------------------------------
# lifting


def lift(p):
    """Lifted reformulation over ``w = (x, z)``.

    Inner: ``f(x) + g(x) + ||x - z||^2 / 2``; outer: ``sigma(x) + psi(z)``.
    The prox of ``g(x) + alpha * psi(z)`` is then blockwise.
    """
    if p.is_lifted:
        raise ValueError("problem is already lifted")
    n = p.dim
    f_bar = fn.CoupledSmooth(p.inner_smooth, n)
    g_bar = fn.SeparablePair(p.inner_prox, fn.Zero(n), n)
    sigma_bar = fn.FirstBlockSmooth(p.outer_smooth, n)
    psi_bar = fn.SeparablePair(fn.Zero(n), p.outer_prox, n)
    beta = p.inner_smooth.lipschitz + 2.0 + p.outer_smooth.lipschitz
    # keep any user override that exceeded the computed constants
    slack = p.beta - (p.inner_smooth.lipschitz + p.outer_smooth.lipschitz)
    beta += max(slack, 0.0)
    return BilevelProblem(f_bar, g_bar, sigma_bar, psi_bar, beta, 2 * n,
                          omega_star=p.omega_star, lifted_from=n, source=p.source)


# ---------------------------------------------------------------------------
# JSON assembly


def _load_array(value, base_dir, field_name, matrix):
    if isinstance(value, str):
        path = value if os.path.isabs(value) else os.path.join(base_dir, value)
        if not os.path.exists(path):
            raise SpecError(field_name, f"file not found: {path}")
        try:
            return fn.load_matrix(path) if matrix else fn.load_vector(path)
        except ValueError as exc:
            raise SpecError(field_name, f"cannot parse {path}: {exc}") from None
    try:
        arr = np.array(value, dtype=float, ndmin=2 if matrix else 1)
    except (TypeError, ValueError):
        raise SpecError(field_name, "expected a path or inline numbers") from None
    if not matrix:
        arr = arr.reshape(-1)
    return arr


def smooth_from_spec(spec, base_dir=".", where="inner_smooth"):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SpecError(where, "expected an object with a 'kind' key")
    kind = spec["kind"]
    try:
        if kind == "zero":
            return fn.Zero(spec.get("dim"))
        if kind == "squared_l2":
            center = spec.get("center")
            if center is not None:
                center = _load_array(center, base_dir, f"{where}.center", False)
            return fn.SquaredL2(spec.get("weight", 1.0), center, spec.get("dim"))
        if kind == "least_squares":
            A = _load_array(_require(spec, "A", where), base_dir, f"{where}.A", True)
            b = _load_array(_require(spec, "b", where), base_dir, f"{where}.b", False)
            return fn.LeastSquares(A, b, spec.get("N"), spec.get("lipschitz"))
        if kind == "logistic":
            A = _load_array(_require(spec, "A", where), base_dir, f"{where}.A", True)
            z = _load_array(_require(spec, "z", where), base_dir, f"{where}.z", False)
            return fn.Logistic(A, z, spec.get("N"), spec.get("lipschitz"))
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(where, str(exc)) from None
    raise SpecError(f"{where}.kind", f"unknown smooth kind {kind!r}")


def prox_from_spec(spec, base_dir=".", where="inner_prox"):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SpecError(where, "expected an object with a 'kind' key")
    kind = spec["kind"]
    try:
        if kind == "zero":
            return fn.Zero(spec.get("dim"))
        if kind == "l1":
            return fn.L1(spec.get("weight", 1.0))
        if kind == "indicator_nonneg":
            return fn.NonNegative()
        if kind == "indicator_box":
            lo = _require(spec, "lo", where)
            hi = _require(spec, "hi", where)
            lo = lo if np.isscalar(lo) else _load_array(lo, base_dir, f"{where}.lo", False)
            hi = hi if np.isscalar(hi) else _load_array(hi, base_dir, f"{where}.hi", False)
            return fn.Box(lo, hi)
        if kind == "squared_l2":
            center = spec.get("center")
            if center is not None:
                center = _load_array(center, base_dir, f"{where}.center", False)
            return fn.SquaredL2(spec.get("weight", 1.0), center, spec.get("dim"))
        if kind == "separable_pair":
            first = prox_from_spec(_require(spec, "first", where), base_dir, f"{where}.first")
            second = prox_from_spec(_require(spec, "second", where), base_dir, f"{where}.second")
            return fn.SeparablePair(first, second, _require(spec, "split", where))
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(where, str(exc)) from None
    raise SpecError(f"{where}.kind", f"unknown prox kind {kind!r}")


def _require(spec, key, where):
    if key not in spec:
        raise SpecError(f"{where}.{key}", "missing")
    return spec[key]


def assemble_problem(spec, base_dir="."):
    """Build a :class:`BilevelProblem` from a parsed problem JSON object.

    Relative data paths are resolved against ``base_dir``.
    """
    if not isinstance(spec, dict):
        raise SpecError("<root>", "expected a JSON object")
    parts = {}
    for key in ("inner_smooth", "outer_smooth"):
        parts[key] = smooth_from_spec(_require(spec, key, "<root>"), base_dir, key)
    for key in ("inner_prox", "outer_prox"):
        parts[key] = prox_from_spec(_require(spec, key, "<root>"), base_dir, key)

    dims = {k: v.dim for k, v in parts.items() if v.dim is not None}
    dim = spec.get("dim")
    if dim is not None:
        if not isinstance(dim, int) or dim <= 0:
            raise SpecError("dim", "must be a positive integer")
        for key, d in dims.items():
            if d != dim:
                raise SpecError(key, f"dimension {d} does not match dim={dim}")
    elif dims:
        dim = next(iter(dims.values()))
        for key, d in dims.items():
            if d != dim:
                raise SpecError(key, f"dimension {d} does not match {dim}")
    else:
        raise SpecError("dim", "cannot infer the dimension; give 'dim'")

    computed = parts["inner_smooth"].lipschitz + parts["outer_smooth"].lipschitz
    beta = spec.get("beta_override")
    if beta is None:
        beta = computed
    elif not isinstance(beta, (int, float)) or beta <= 0:
        raise SpecError("beta_override", "must be a positive number")
    elif beta < computed * (1 - 1e-12):
        raise SpecError("beta_override", f"{beta} is below the smoothness bound {computed}")
    if not beta > 0:
        raise SpecError("beta_override", "computed beta is 0; supply a positive override")

    omega_star = spec.get("omega_star")
    if omega_star is None:
        psi, sigma = parts["outer_prox"], parts["outer_smooth"]
        if sigma.kind == "zero" and psi.kind in ("l1", "zero"):
            omega_star = 0.0
    return BilevelProblem(parts["inner_smooth"], parts["inner_prox"],
                          parts["outer_smooth"], parts["outer_prox"],
                          float(beta), int(dim), omega_star=omega_star, source=spec)


def load_problem(path):
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except FileNotFoundError:
        raise SpecError("--problem", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SpecError("--problem", f"invalid JSON: {exc}") from None
    return assemble_problem(spec, os.path.dirname(os.path.abspath(path)))
