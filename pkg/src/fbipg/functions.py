"""Smooth and proximable convex functions.

Smooth functions expose ``value``, ``grad`` and a ``lipschitz`` attribute
(an upper bound on the Lipschitz constant of the gradient).  Proximable
functions expose ``value`` and ``prox(v, step)``, which returns

    argmin_u  h(u) + ||u - v||^2 / (2 * step).

``SquaredL2`` and ``Zero`` belong to both families.  All objects are
immutable after construction.
"""

import numpy as np

from .exceptions import DimensionError

__all__ = [
    "LeastSquares", "Logistic", "SquaredL2", "Zero", "L1", "NonNegative",
    "Box", "SeparablePair", "CoupledSmooth", "FirstBlockSmooth",
    "estimate_spectral_norm", "soft_threshold", "l1_subgradient",
    "load_matrix", "load_vector", "save_matrix", "save_vector",
]


def _as_vector(x, dim, who):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"{who}: expected a 1-D vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionError(f"{who}: expected dimension {dim}, got {x.shape[0]}")
    return x


def _as_matrix(A, who):
    A = np.array(A, dtype=float, ndmin=2)
    if A.ndim != 2 or A.size == 0:
        raise DimensionError(f"{who}: expected a non-empty 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{who}: matrix has non-finite entries")
    A.setflags(write=False)
    return A


def estimate_spectral_norm(A, iters=1000, seed=0):
    """Power-iteration estimate of ``lambda_max(A^T A)``.

    Deterministic for a given ``seed``.  The Rayleigh quotient never
    overestimates, so callers needing a safe bound should run enough
    iterations for the top eigenvalue gap of their matrix.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise DimensionError("estimate_spectral_norm: empty matrix")
    if iters < 1:
        raise ValueError("estimate_spectral_norm: iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam = float(v @ w)
        v = w / nw
    # one last Rayleigh quotient on the converged direction
    Av = A @ v
    return max(lam, float(Av @ Av))


def soft_threshold(v, thresh):
    """Componentwise ``sign(v) * max(|v| - thresh, 0)``; ties go to exactly 0."""
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def l1_subgradient(x, weight=1.0):
    """The sign-pattern subgradient of ``weight * ||x||_1`` (0 on zero entries)."""
    return weight * np.sign(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# smooth functions


class LeastSquares:
    """``(1/2N) ||A x - b||^2``."""

    kind = "least_squares"

    def __init__(self, A, b, N=None, lipschitz=None):
        self.A = _as_matrix(A, "least_squares.A")
        self.b = _as_vector(b, self.A.shape[0], "least_squares.b").copy()
        self.b.setflags(write=False)
        self.N = int(N) if N is not None else self.A.shape[0]
        self.dim = self.A.shape[1]
        if lipschitz is None:
            lipschitz = estimate_spectral_norm(self.A) / self.N
        self.lipschitz = float(lipschitz)

    def value(self, x):
        r = self.A @ _as_vector(x, self.dim, self.kind) - self.b
        return float(r @ r) / (2.0 * self.N)

    def grad(self, x):
        r = self.A @ _as_vector(x, self.dim, self.kind) - self.b
        return self.A.T @ r / self.N


class Logistic:
    """Mean negative log-likelihood of a logistic model.

    With ``t = A x`` and labels ``z`` in {0, 1} the value is
    ``(1/N) sum_i [log(1 + exp(t_i)) - z_i t_i]``.
    """

    kind = "logistic"

    def __init__(self, A, z, N=None, lipschitz=None):
        self.A = _as_matrix(A, "logistic.A")
        self.z = _as_vector(z, self.A.shape[0], "logistic.z").copy()
        if not np.all((self.z == 0.0) | (self.z == 1.0)):
            raise ValueError("logistic.z: labels must be 0 or 1")
        self.z.setflags(write=False)
        self.N = int(N) if N is not None else self.A.shape[0]
        self.dim = self.A.shape[1]
        if lipschitz is None:
            lipschitz = estimate_spectral_norm(self.A) / (4.0 * self.N)
        self.lipschitz = float(lipschitz)

    def value(self, x):
        t = self.A @ _as_vector(x, self.dim, self.kind)
        # log(1 + e^t) without overflow
        softplus = np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))
        return float(np.sum(softplus - self.z * t)) / self.N

    def grad(self, x):
        t = self.A @ _as_vector(x, self.dim, self.kind)
        e = np.exp(-np.abs(t))
        sig = np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return self.A.T @ (sig - self.z) / self.N


class SquaredL2:
    """``(weight/2) ||x - center||^2``; usable as smooth or proximable term."""

    kind = "squared_l2"

    def __init__(self, weight=1.0, center=None, dim=None):
        if weight < 0:
            raise ValueError("squared_l2.weight must be nonnegative")
        self.weight = float(weight)
        if center is not None:
            center = _as_vector(center, dim, "squared_l2.center").copy()
            center.setflags(write=False)
            dim = center.shape[0]
        self.center = center
        self.dim = dim
        self.lipschitz = self.weight

    def _shift(self, x):
        x = _as_vector(x, self.dim, self.kind)
        return x if self.center is None else x - self.center

    def value(self, x):
        d = self._shift(x)
        return 0.5 * self.weight * float(d @ d)

    def grad(self, x):
        return self.weight * self._shift(x)

    def prox(self, v, step):
        v = _as_vector(v, self.dim, self.kind)
        c = 0.0 if self.center is None else self.center
        return (v + step * self.weight * c) / (1.0 + step * self.weight)


class Zero:
    """The zero function, smooth and proximable."""

    kind = "zero"
    lipschitz = 0.0

    def __init__(self, dim=None):
        self.dim = dim

    def value(self, x):
        _as_vector(x, self.dim, self.kind)
        return 0.0

    def grad(self, x):
        return np.zeros_like(_as_vector(x, self.dim, self.kind))

    def prox(self, v, step):
        return _as_vector(v, self.dim, self.kind).copy()


class CoupledSmooth:
    """Smooth part of the lifted inner objective, ``f(x) + ||x - z||^2 / 2``.

    Acts on ``w = (x, z)`` of length ``2n``.  The gradient's Lipschitz
    constant is bounded by ``lipschitz(f) + 2``.
    """

    kind = "coupled"

    def __init__(self, base, n):
        self.base = base
        self.n = int(n)
        self.dim = 2 * self.n
        self.lipschitz = base.lipschitz + 2.0

    def value(self, w):
        w = _as_vector(w, self.dim, self.kind)
        x, z = w[:self.n], w[self.n:]
        d = x - z
        return self.base.value(x) + 0.5 * float(d @ d)

    def grad(self, w):
        w = _as_vector(w, self.dim, self.kind)
        x, z = w[:self.n], w[self.n:]
        d = x - z
        return np.concatenate([self.base.grad(x) + d, -d])


class FirstBlockSmooth:
    """``w = (x, z) -> base(x)``."""

    kind = "first_block"

    def __init__(self, base, n):
        self.base = base
        self.n = int(n)
        self.dim = 2 * self.n
        self.lipschitz = base.lipschitz

    def value(self, w):
        w = _as_vector(w, self.dim, self.kind)
        return self.base.value(w[:self.n])

    def grad(self, w):
        w = _as_vector(w, self.dim, self.kind)
        return np.concatenate([self.base.grad(w[:self.n]), np.zeros(self.n)])


# ---------------------------------------------------------------------------
# proximable functions


class L1:
    """``weight * ||x||_1``."""

    kind = "l1"
    dim = None

    def __init__(self, weight=1.0):
        if weight < 0:
            raise ValueError("l1.weight must be nonnegative")
        self.weight = float(weight)

    def value(self, x):
        return self.weight * float(np.sum(np.abs(_as_vector(x, None, self.kind))))

    def prox(self, v, step):
        v = _as_vector(v, None, self.kind)
        if self.weight == 0.0:
            return v.copy()
        return soft_threshold(v, self.weight * step)

    def subgradient(self, x):
        return l1_subgradient(x, self.weight)


class NonNegative:
    """Indicator of the nonnegative orthant."""

    kind = "indicator_nonneg"
    dim = None
    lo = 0.0
    hi = np.inf

    def value(self, x):
        x = _as_vector(x, None, self.kind)
        return 0.0 if np.all(x >= 0.0) else np.inf

    def prox(self, v, step):
        return np.maximum(_as_vector(v, None, self.kind), 0.0)


class Box:
    """Indicator of ``{x : lo <= x <= hi}``; bounds are vectors or scalars."""

    kind = "indicator_box"

    def __init__(self, lo, hi, dim=None):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim > 1 or hi.ndim > 1:
            raise DimensionError("indicator_box: bounds must be scalars or vectors")
        sizes = {a.shape[0] for a in (lo, hi) if a.ndim == 1}
        if dim is not None:
            sizes.add(dim)
        if len(sizes) > 1:
            raise DimensionError(f"indicator_box: inconsistent bound sizes {sorted(sizes)}")
        self.dim = sizes.pop() if sizes else None
        if np.any(lo > hi):
            raise ValueError("indicator_box: empty box (lo > hi)")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo, self.hi = lo, hi

    @property
    def contains_origin(self):
        return bool(np.all(self.lo <= 0.0) and np.all(self.hi >= 0.0))

    def value(self, x):
        x = _as_vector(x, self.dim, self.kind)
        return 0.0 if np.all((x >= self.lo) & (x <= self.hi)) else np.inf

    def prox(self, v, step):
        return np.clip(_as_vector(v, self.dim, self.kind), self.lo, self.hi)


class SeparablePair:
    """``h(w) = first(w[:split]) + second(w[split:])``."""

    kind = "separable_pair"

    def __init__(self, first, second, split):
        self.first = first
        self.second = second
        self.split = int(split)
        if first.dim is not None and first.dim != self.split:
            raise DimensionError("separable_pair: first block size differs from split")
        self.dim = None if second.dim is None else self.split + second.dim

    def _blocks(self, w):
        w = _as_vector(w, self.dim, self.kind)
        if w.shape[0] < self.split:
            raise DimensionError("separable_pair: vector shorter than split")
        return w[:self.split], w[self.split:]

    def value(self, w):
        a, b = self._blocks(w)
        return self.first.value(a) + self.second.value(b)

    def prox(self, v, step):
        a, b = self._blocks(v)
        return np.concatenate([self.first.prox(a, step), self.second.prox(b, step)])


# ---------------------------------------------------------------------------
# CSV helpers: one row per line, comma separated, no header


def load_matrix(path):
    A = np.loadtxt(path, delimiter=",", ndmin=2)
    if A.size == 0:
        raise DimensionError(f"{path}: empty matrix")
    return A


def load_vector(path):
    v = np.loadtxt(path, delimiter=",", ndmin=1)
    return v.reshape(-1)


def save_matrix(path, A):
    with open(path, "w") as fh:
        for row in np.asarray(A, dtype=float):
            fh.write(",".join(repr(float(a)) for a in row) + "\n")


def save_vector(path, v):
    with open(path, "w") as fh:
        for a in np.asarray(v, dtype=float).reshape(-1):
            fh.write(repr(float(a)) + "\n")
