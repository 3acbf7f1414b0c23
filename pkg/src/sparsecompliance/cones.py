"""Descent sets, model descent cones, and Monte-Carlo compliance estimates."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from itertools import combinations, product

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull

from .errors import ZeroVectorError
from .model import SparseModel, as_vector, complement
from .regularizers import FiniteAtomic, KSupport, Regularizer, weighted_l1_weights

EPS_DESC = 1e-10
T_RAY = 1e6
EPS_RAY = 1e-7
N_STARTS = 16
N_X = 64
BLOCK = 4096          # sphere samples per random substream


def in_descent_set(R: Regularizer, x, z) -> bool:
    """Whether ``R(x + z) <= R(x)`` (up to ``EPS_DESC``)."""
    x = as_vector(x)
    z = as_vector(z, x.shape[0])
    return R.value(x + z) <= R.value(x) + EPS_DESC


# ---------------------------------------------------------------------------
# polyhedral decomposition of the model descent cone


@dataclass(frozen=True)
class ConeUnion:
    """A finite union of polyhedral cones ``{z : G_p z <= 0}``.

    Rows of every piece are stacked in ``rows``; piece ``p`` owns
    ``rows[starts[p]:starts[p+1]]``.  ``supports[p]`` is the k-support of the
    model points whose descent cone the piece is.
    """

    rows: np.ndarray
    starts: np.ndarray
    supports: tuple

    @property
    def n_pieces(self) -> int:
        return len(self.supports)

    def piece_rows(self, p: int) -> np.ndarray:
        return self.rows[self.starts[p]:self.starts[p + 1]]

    def piece_values(self, Z) -> np.ndarray:
        """``max_{g in piece} <g, z>`` for each row of ``Z`` and each piece."""
        Z = np.atleast_2d(Z)
        S = Z @ self.rows.T
        return np.maximum.reduceat(S, self.starts[:-1], axis=1)

    def piece_contains(self, Z, tol: float = EPS_DESC) -> np.ndarray:
        Z = np.atleast_2d(Z)
        scale = np.linalg.norm(Z, axis=1)[:, None] * self._row_scale
        return self.piece_values(Z) <= tol * scale

    def contains(self, Z, tol: float = EPS_DESC) -> np.ndarray:
        return self.piece_contains(Z, tol).any(axis=1)

    @property
    def _row_scale(self):
        return np.abs(self.rows).max()


def _l1_type_pieces(w: np.ndarray, k: int) -> ConeUnion:
    n = w.shape[0]
    rows, starts, supports = [], [0], []
    for T in combinations(range(n), k):
        Tc = complement(T, n)
        tails = np.array(list(product((-1.0, 1.0), repeat=n - k))).reshape(-1, n - k)
        for sigma in product((-1.0, 1.0), repeat=k):
            block = np.zeros((tails.shape[0], n))
            block[:, list(T)] = w[list(T)] * np.array(sigma)
            block[:, list(Tc)] = w[list(Tc)] * tails
            rows.append(block)
            starts.append(starts[-1] + block.shape[0])
            supports.append(T)
    return ConeUnion(np.vstack(rows), np.array(starts), tuple(supports))


def _section_vertices(GT: np.ndarray, tol: float) -> np.ndarray:
    if GT.shape[1] == 1:
        return np.array([[GT.max()], [GT.min()]])
    uniq = GT[np.unique(np.round(GT / tol), axis=0, return_index=True)[1]]
    return uniq[np.sort(ConvexHull(uniq).vertices)]


def _polyhedral_pieces(G: np.ndarray, k: int) -> ConeUnion:
    """Split ``T_R(Sigma_k)`` into the tangent cones at relative interiors of
    the facets of each k-dimensional coordinate section of the unit ball.

    For a support T the section is ``{w : G_T w <= 1}``; its facets are the
    vertices of ``conv(rows of G_T)``.  Points inside a section facet with
    normal ``h`` have active dual vertices ``{g : g_T = h}``, and the descent
    cone there is ``{z : <g, z> <= 0 for those g}``.  Every other point of the
    section has a superset of active vertices, hence a smaller cone.
    """
    n = G.shape[1]
    tol = 1e-9 * max(1.0, np.abs(G).max())
    rows, starts, supports = [], [0], []
    for T in combinations(range(n), k):
        GT = G[:, list(T)]
        for h in _section_vertices(GT, tol):
            active = np.all(np.abs(GT - h) <= 10 * tol, axis=1)
            rows.append(G[active])
            starts.append(starts[-1] + int(active.sum()))
            supports.append(T)
    return ConeUnion(np.vstack(rows), np.array(starts), tuple(supports))


def descent_pieces(R: Regularizer, model: SparseModel) -> ConeUnion:
    """Polyhedral pieces whose union is the model descent cone of ``R``."""
    key = ("pieces", model.n, model.k)
    if key not in R._cache:
        w = weighted_l1_weights(R, model.n)
        if w is not None:
            R._cache[key] = _l1_type_pieces(np.asarray(w, dtype=float), model.k)
        elif R.polyhedral:
            R._cache[key] = _polyhedral_pieces(R.dual_vertices(model.n), model.k)
        else:
            raise TypeError(f"{R.descriptor} has no polyhedral cone decomposition")
    return R._cache[key]


# ---------------------------------------------------------------------------
# membership in T_R(Sigma)


def ray_test(R: Regularizer, model: SparseModel, z, t_ray: float = T_RAY,
             eps_ray: float = EPS_RAY, n_starts: int = N_STARTS, seed: int = 0) -> bool:
    """Numerical test of ``z in T_R(Sigma)``.

    Looks for a unit k-sparse ``u`` with ``R(t u + z) - t R(u) <= eps`` at
    ``t = t_ray``.  Per support the starts are the sign diagonals followed by
    random directions; for k >= 2 the best start is refined by Nelder-Mead.
    """
    n, k = model.n, model.k
    z = as_vector(z, n)
    nz = np.linalg.norm(z)
    if nz == 0:
        raise ZeroVectorError("descent cone queries need z != 0")
    z = z / nz
    rng = np.random.default_rng(seed)
    diagonals = np.array(list(product((-1.0, 1.0), repeat=k)))[:n_starts]
    for T in combinations(range(n), k):
        idx = list(T)
        starts = diagonals
        if k > 1 and len(starts) < n_starts:
            starts = np.vstack([starts, rng.standard_normal((n_starts - len(starts), k))])
        U = np.zeros((len(starts), n))
        U[:, idx] = starts / np.linalg.norm(starts, axis=1, keepdims=True)
        gap = R.values(t_ray * U + z) - t_ray * R.values(U)
        if gap.min() <= eps_ray:
            return True
        if k == 1:
            continue

        def f(v):
            u = np.zeros(n)
            u[idx] = v / max(np.linalg.norm(v), 1e-300)
            return float(R.values(t_ray * u + z)[0] - t_ray * R.values(u)[0])

        best = starts[np.argmin(gap)]
        res = minimize(f, best, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
        if res.fun <= eps_ray:
            return True
    return False


def model_cone_contains(R: Regularizer, model: SparseModel, Z) -> np.ndarray:
    """Batched ``in_model_descent_cone`` over the rows of ``Z`` (rows nonzero)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    w = weighted_l1_weights(R, model.n)
    if w is not None:
        a = np.abs(Z) * w
        top = np.partition(a, model.n - model.k, axis=1)[:, model.n - model.k:].sum(axis=1)
        total = a.sum(axis=1)
        return total - 2 * top <= EPS_DESC * total
    if isinstance(R, KSupport):
        # k >= 2: the k-support ball is smooth at 1-sparse points, so the
        # descent cone there is a half-space {<sign(x), z> <= 0}
        return np.any(Z != 0, axis=1)
    if R.polyhedral:
        return descent_pieces(R, model).contains(Z)
    return np.array([ray_test(R, model, z) for z in Z])


def in_model_descent_cone(R: Regularizer, model: SparseModel, z) -> bool:
    """Whether some ``x`` in the model has ``R(x + z) <= R(x)``.

    l1-type norms use ``||z_{T^c}||_1 <= ||z_T||_1`` (weighted analog) with T
    the top-k support; finite atomic norms use the exact polyhedral
    decomposition; anything else goes through ``ray_test``.
    """
    z = as_vector(z, model.n)
    if not np.any(z):
        raise ZeroVectorError("descent cone queries need z != 0")
    return bool(model_cone_contains(R, model, z[None, :])[0])


# ---------------------------------------------------------------------------
# sphere sampling and compliance estimates


def _sphere_block(n: int, seed: int, block: int, size: int) -> np.ndarray:
    rng = np.random.default_rng([seed, block])
    Z = rng.standard_normal((size, n))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def _blocks(count: int):
    return [(b, min(BLOCK, count - b * BLOCK)) for b in range(math.ceil(count / BLOCK))]


def sample_sphere(n: int, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. uniform points on the unit sphere of R^n.

    Sample ``i`` comes from the substream ``(seed, i // BLOCK)``, so the output
    does not depend on how the blocks are distributed over workers.
    """
    if n < 1 or count < 1:
        raise ValueError("need n >= 1 and count >= 1")
    return np.vstack([_sphere_block(n, seed, b, size) for b, size in _blocks(count)])


def _map_blocks(fn, n, samples, seed, workers):
    jobs = [(_sphere_block, n, seed, b, size) for b, size in _blocks(samples)]

    def run(job):
        return fn(job[0](*job[1:]))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return sum(parts[1:], parts[0])


@dataclass
class ComplianceReport:
    estimate: float
    half_width: float
    samples: int
    seed: int
    regularizer: str = ""
    measure: str = ""

    def to_json(self) -> dict:
        return asdict(self)


def _half_width(p: float, samples: int) -> float:
    return 1.96 * math.sqrt(p * (1 - p) / samples)


def estimate_A_uniform(R: Regularizer, model: SparseModel, samples: int, seed: int,
                       workers: int = 1) -> ComplianceReport:
    """One minus the sphere fraction of the model descent cone."""
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    hits = _map_blocks(lambda Z: int(model_cone_contains(R, model, Z).sum()),
                       model.n, samples, seed, workers)
    p = hits / samples
    return ComplianceReport((samples - hits) / samples, _half_width(p, samples), samples, seed,
                            R.descriptor, "uniform")


def _ksupport_representatives(model: SparseModel, rng) -> np.ndarray:
    n, k = model.n, model.k
    reps = []
    for s in range(1, k + 1):
        x = np.zeros(n)
        x[:s] = 1.0
        reps.append(x)
    for _ in range(N_X):
        x = np.zeros(n)
        x[:k] = np.sort(np.abs(rng.standard_normal(k)))[::-1]
        reps.append(x)
    reps = np.array(reps)
    return reps / np.linalg.norm(reps, axis=1, keepdims=True)


def _ksupport_point_cones(X: np.ndarray, k: int, Z: np.ndarray) -> np.ndarray:
    # directional derivative of the k-support norm at unit x with support S:
    #   |S| <  k : <x_S, z_S>
    #   |S| == k : <x_S, z_S> + min_S |x_i| * ||z_{S^c}||_1
    out = np.zeros((Z.shape[0], X.shape[0]), dtype=bool)
    for j, x in enumerate(X):
        S = np.flatnonzero(x)
        deriv = Z[:, S] @ x[S]
        if len(S) == k:
            rest = np.abs(np.delete(Z, S, axis=1)).sum(axis=1)
            deriv = deriv + np.abs(x[S]).min() * rest
        out[:, j] = deriv <= EPS_DESC * np.linalg.norm(Z, axis=1)
    return out


def _generic_point_cones(R: Regularizer, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    lams = np.geomspace(1e-4, 1e4, 17)
    base = R.values(X)
    out = np.zeros((Z.shape[0], X.shape[0]), dtype=bool)
    for j, x in enumerate(X):
        for lam in lams:
            out[:, j] |= R.values(x + lam * Z) <= base[j] + EPS_DESC
    return out


def representative_points(R: Regularizer, model: SparseModel, seed: int = 0):
    """Model points standing in for the sup over x in the non-uniform measure.

    Returns None for polyhedral norms, whose representatives are the cone
    pieces themselves (one per section facet, exact).  For the k-support norm
    the sign/permutation orbit representatives are sorted nonnegative profiles
    on the first k coordinates; anything else gets ``N_X`` random model points.
    """
    if R.polyhedral:
        return None
    rng = np.random.default_rng([seed, 0x5EED])
    if isinstance(R, KSupport):
        return _ksupport_representatives(model, rng)
    X = np.zeros((N_X, model.n))
    for row in X:
        S = rng.choice(model.n, model.k, replace=False)
        row[S] = rng.standard_normal(model.k)
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def nonuniform_fractions(R: Regularizer, model: SparseModel, samples: int, seed: int,
                         workers: int = 1) -> np.ndarray:
    """Sphere fraction of the (conic hull of the) descent set at each representative."""
    return _nonuniform_hits(R, model, samples, seed, workers) / samples


def _nonuniform_hits(R, model, samples, seed, workers) -> np.ndarray:
    X = representative_points(R, model, seed)
    if X is None:
        pieces = descent_pieces(R, model)
        fn = lambda Z: pieces.piece_contains(Z).sum(axis=0)
    elif isinstance(R, KSupport):
        fn = lambda Z: _ksupport_point_cones(X, R.k, Z).sum(axis=0)
    else:
        fn = lambda Z: _generic_point_cones(R, X, Z).sum(axis=0)
    return _map_blocks(fn, model.n, samples, seed, workers)


def estimate_A_nonuniform(R: Regularizer, model: SparseModel, samples: int, seed: int,
                          workers: int = 1) -> ComplianceReport:
    """One minus the largest single-point descent-cone fraction over the model."""
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    hits = int(_nonuniform_hits(R, model, samples, seed, workers).max())
    p = hits / samples
    return ComplianceReport((samples - hits) / samples, _half_width(p, samples), samples, seed,
                            R.descriptor, "nonuniform")
