"""Members of the regularizer family: l1, weighted l1, finite atomic norms, k-support norm."""
from __future__ import annotations

import hashlib
from itertools import product

import numpy as np
from scipy.spatial import ConvexHull

from .errors import DimensionMismatchError, InfeasibleError, SpanError
from .lp import simplex
from .model import AtomSet, as_vector

GAUGE_TOL = 1e-8


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in values)


class Regularizer:
    """A positively homogeneous convex function on R^n.

    Subclasses implement ``values`` (batched over the rows of a 2-d array);
    ``value`` and ``__call__`` evaluate a single vector.
    """

    #: whether ``dual_vertices`` is available (the norm is a max of linear forms)
    polyhedral = False
    n: int | None = None

    def __init__(self):
        self._cache = {}

    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.value(x) for x in X])

    def value(self, x) -> float:
        return float(self.values(np.asarray(x, dtype=float)[None, :])[0])

    def __call__(self, x) -> float:
        return self.value(x)

    def dual_vertices(self, n: int) -> np.ndarray:
        """Rows g with R(x) = max_g <g, x>; only for polyhedral norms."""
        raise TypeError(f"{self.descriptor} is not polyhedral")

    @property
    def descriptor(self) -> str:
        return type(self).__name__.lower()

    def __repr__(self):
        return self.descriptor

    def _check_dim(self, X):
        if self.n is not None and X.shape[-1] != self.n:
            raise DimensionMismatchError(f"{self.descriptor} expects length {self.n}, got {X.shape[-1]}")


class L1(Regularizer):
    polyhedral = True

    def values(self, X):
        return np.abs(np.atleast_2d(X)).sum(axis=1)

    def value(self, x):
        return float(np.abs(as_vector(x)).sum())

    def weights(self, n):
        return np.ones(n)

    def dual_vertices(self, n):
        return np.array(list(product((-1.0, 1.0), repeat=n)))

    @property
    def descriptor(self):
        return "l1"


class WeightedL1(Regularizer):
    polyhedral = True

    def __init__(self, weights):
        super().__init__()
        w = as_vector(weights)
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        self.w = w
        self.w.setflags(write=False)
        self.n = w.shape[0]

    def values(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self._check_dim(X)
        return np.abs(X) @ self.w

    def value(self, x):
        return float(self.values(as_vector(x)[None, :])[0])

    def weights(self, n):
        if n != self.n:
            raise DimensionMismatchError(f"weights have length {self.n}, model has n={n}")
        return self.w

    def dual_vertices(self, n):
        return L1().dual_vertices(n) * self.weights(n)

    def scaled(self, c: float) -> "WeightedL1":
        return WeightedL1(c * self.w)

    @property
    def descriptor(self):
        return f"wl1({_fmt(self.w)})"


def ksupport_norm(X, k: int) -> np.ndarray:
    """k-support norm of each row of ``X`` via the sorted-coordinate formula.

    With ``z`` the magnitudes sorted decreasingly and ``z_0 = +inf``, the norm
    squared is ``sum_{i<k-r} z_i^2 + (sum_{i>=k-r} z_i)^2 / (r+1)`` for the
    unique ``r`` in ``0..k-1`` with
    ``z_{k-r-1} > sum_{i>=k-r} z_i / (r+1) >= z_{k-r}`` (1-based indices).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    if k >= n:
        return np.linalg.norm(X, axis=1)
    Z = -np.sort(-np.abs(X), axis=1)
    tail = np.cumsum(Z[:, ::-1], axis=1)[:, ::-1]
    head_sq = np.concatenate([np.zeros((len(Z), 1)), np.cumsum(Z**2, axis=1)], axis=1)
    best = np.full(len(Z), np.inf)
    out = np.zeros(len(Z))
    for r in range(k):
        j = k - r - 1                      # 0-based start of the averaged block
        avg = tail[:, j] / (r + 1)
        viol = np.maximum(0.0, Z[:, j] - avg)
        if j >= 1:
            viol += np.maximum(0.0, avg - Z[:, j - 1])
        viol /= np.maximum(avg, 1e-300)
        val = head_sq[:, j] + (r + 1) * avg**2
        take = viol < best
        out[take] = val[take]
        best[take] = viol[take]
    return np.sqrt(out)


class KSupport(Regularizer):
    """Gauge of the unit-norm k-sparse vectors."""

    def __init__(self, k: int):
        super().__init__()
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)

    @property
    def polyhedral(self):
        return self.k == 1

    def values(self, X):
        return ksupport_norm(X, self.k)

    def dual_vertices(self, n):
        if self.k != 1:
            return super().dual_vertices(n)
        return L1().dual_vertices(n)

    @property
    def descriptor(self):
        return f"ksupport({self.k})"


def _hull_dual_vertices(points: np.ndarray) -> np.ndarray:
    hull = ConvexHull(points)
    eq = hull.equations                      # normal . x + offset <= 0 inside
    G = eq[:, :-1] / (-eq[:, -1:])
    _, idx = np.unique(np.round(G, 9), axis=0, return_index=True)
    return G[np.sort(idx)]


class FiniteAtomic(Regularizer):
    """Gauge of the symmetrized convex hull ``conv(+-A)`` of an atom set.

    ``value`` solves the gauge linear program
    ``min sum(c)  s.t.  sum_j c_j a_j = x, c >= 0`` over the signed atoms.
    ``values`` (the batched path) uses the facet description of the hull,
    ``R(x) = max_f <g_f, x>``, computed once with Qhull.
    """

    polyhedral = True

    def __init__(self, atoms: AtomSet):
        super().__init__()
        if not isinstance(atoms, AtomSet):
            raise TypeError("FiniteAtomic needs an AtomSet")
        self.atoms = atoms
        self.n = atoms.n

    def value(self, x) -> float:
        x = as_vector(x)
        self._check_dim(x[None, :])
        P = self.atoms.signed()
        try:
            res = simplex(np.ones(P.shape[0]), P.T, x)
        except InfeasibleError:
            raise SpanError("vector is outside the span of the atoms") from None
        return max(res.fun, 0.0)

    def dual_vertices(self, n=None):
        if n is not None and n != self.n:
            raise DimensionMismatchError(f"atoms live in R^{self.n}, not R^{n}")
        if "G" not in self._cache:
            if not self.atoms.spans():
                raise SpanError("atoms do not span R^n; the gauge is not a norm")
            self._cache["G"] = _hull_dual_vertices(self.atoms.signed())
        return self._cache["G"]

    def values(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self._check_dim(X)
        return (X @ self.dual_vertices().T).max(axis=1)

    @property
    def descriptor(self):
        if self.atoms.label:
            return self.atoms.label
        digest = hashlib.sha1(self.atoms.atoms.tobytes()).hexdigest()[:10]
        return f"atoms(n={self.n},k={self.atoms.k},count={len(self.atoms)},id={digest})"


class FunctionRegularizer(Regularizer):
    """Wrap an arbitrary callable; the descent tests fall back to numerical search."""

    def __init__(self, func, name: str = "function"):
        super().__init__()
        self.func = func
        self.name = name

    def value(self, x):
        return float(self.func(np.asarray(x, dtype=float)))

    @property
    def descriptor(self):
        return self.name


def evaluate(R: Regularizer, x) -> float:
    """``R(x)`` for any regularizer in the family."""
    x = as_vector(x)
    if R.n is not None and x.shape[0] != R.n:
        raise DimensionMismatchError(f"{R.descriptor} expects length {R.n}, got {x.shape[0]}")
    return R.value(x)


def weighted_l1_weights(R: Regularizer, n: int):
    """Weights for l1-type norms (L1, WeightedL1, KSupport(1)); None otherwise."""
    if isinstance(R, (L1, WeightedL1)):
        return R.weights(n)
    if isinstance(R, KSupport) and R.k == 1:
        return np.ones(n)
    return None
