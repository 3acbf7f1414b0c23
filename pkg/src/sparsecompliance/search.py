"""Multi-start search for sups of scale-invariant objectives over a descent cone.

The feasible set is ``T_R(Sigma) minus {0}``.  Starts are drawn as ``y - x``
with ``x`` a model point on the unit sphere of R and ``y`` in the unit ball of
R (every such difference is a descent vector at ``x``), plus sign and
permutation images of a few symmetric profiles.  The best starts are improved
by a batched random-perturbation hill climb, and the best few climbers are
polished with SLSQP inside the local polyhedral piece and ordering region.
"""
from __future__ import annotations

import math
from itertools import permutations, product

import numpy as np
from scipy.optimize import minimize

from .cones import descent_pieces, model_cone_contains
from .model import SparseModel, complement, top_support
from .regularizers import Regularizer

MAX_SEED_IMAGES = 20000


def normalize_rows(Z: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(Z, axis=1, keepdims=True)
    return Z[norms[:, 0] > 0] / norms[norms[:, 0] > 0]


def cone_samples(R: Regularizer, model: SparseModel, count: int, rng) -> np.ndarray:
    """Random unit vectors of ``T_R(Sigma)`` built as ``y - x``."""
    n, k = model.n, model.k
    X = np.zeros((count, n))
    supp = np.argsort(rng.random((count, n)), axis=1)[:, :k]
    np.put_along_axis(X, supp, rng.standard_normal((count, k)), axis=1)
    X /= R.values(X)[:, None]
    U = rng.standard_normal((count, n))
    Y = U / R.values(U)[:, None]
    radius = rng.random(count) ** (1.0 / n)
    radius[: count // 2] = 1.0
    return normalize_rows(Y * radius[:, None] - X)


def symmetric_images(profiles, n: int, rng, limit: int = MAX_SEED_IMAGES) -> np.ndarray:
    """All signed permutations of the given profiles (a random subset if too many)."""
    profiles = [np.asarray(p, dtype=float) for p in profiles]
    per = math.factorial(n) * 2**n
    if per * len(profiles) <= limit:
        perms = np.array(list(permutations(range(n))))
        signs = np.array(list(product((-1.0, 1.0), repeat=n)))
        out = [(p[perms][:, None, :] * signs[None, :, :]).reshape(-1, n) for p in profiles]
        return np.vstack(out)
    out = []
    for p in profiles:
        idx = np.argsort(rng.random((limit // len(profiles), n)), axis=1)
        sgn = rng.choice((-1.0, 1.0), size=idx.shape)
        out.append(p[idx] * sgn)
    return np.vstack(out)


def region_rows(z: np.ndarray, top: int) -> np.ndarray:
    """Rows ``r`` with ``r . z >= 0`` fixing the signs of ``z`` and which
    ``top`` coordinates are largest in magnitude."""
    n = z.shape[0]
    s = np.where(z < 0, -1.0, 1.0)
    rows = [s[i] * np.eye(n)[i] for i in range(n)]
    S = top_support(z, top)
    for i in S:
        for j in complement(S, n):
            rows.append(s[i] * np.eye(n)[i] - np.eye(n)[j])
            rows.append(s[i] * np.eye(n)[i] + np.eye(n)[j])
    return np.array(rows)


def local_piece(R: Regularizer, model: SparseModel, z: np.ndarray):
    """Rows of the polyhedral piece containing ``z`` with the most slack."""
    if not R.polyhedral:
        return None
    pieces = descent_pieces(R, model)
    vals = pieces.piece_values(z[None, :])[0]
    return pieces.piece_rows(int(np.argmin(vals)))


def polish(z0, local_fun, ineq_rows, contains) -> np.ndarray | None:
    """Maximize ``local_fun`` on the unit sphere subject to ``ineq_rows @ z >= 0``.

    The result is pulled back toward ``z0`` along the chord until ``contains``
    accepts it, which only moves it by rounding-level amounts.
    """
    cons = [{"type": "eq", "fun": lambda z: z @ z - 1.0, "jac": lambda z: 2 * z}]
    if ineq_rows is not None and len(ineq_rows):
        cons.append({"type": "ineq", "fun": lambda z: ineq_rows @ z, "jac": lambda z: ineq_rows})
    try:
        res = minimize(lambda z: -local_fun(z), z0, method="SLSQP", constraints=cons,
                       options={"ftol": 1e-15, "maxiter": 300})
    except (ValueError, np.linalg.LinAlgError):  # pragma: no cover - defensive
        return None
    # test points exactly as returned (unit norm), so boundary cases cannot flip
    z1 = res.x / np.linalg.norm(res.x)
    if contains(z1[None, :])[0]:
        return z1
    lo, hi, best = 0.0, 1.0, None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        zm = (1 - mid) * z0 + mid * z1
        zm /= np.linalg.norm(zm)
        if contains(zm[None, :])[0]:
            lo, best = mid, zm
        else:
            hi = mid
    return best


def maximize_over_cone(objective, R: Regularizer, model: SparseModel, budget: int, rng, *,
                       profiles=(), local=None, climbers: int = 48, iters: int = 160,
                       n_polish: int = 6):
    """Sup of a batched, scale-invariant ``objective`` over ``T_R(Sigma)``.

    ``local(z)`` returns ``(fun, region_rows)``: a smooth version of the
    objective valid near ``z`` and the rows describing that region.
    Returns ``(z, value)`` with ``z`` a certified member of the cone.
    """
    contains = lambda Z: model_cone_contains(R, model, Z)
    starts = cone_samples(R, model, budget, rng)
    if len(profiles):
        imgs = normalize_rows(symmetric_images(profiles, model.n, rng))
        starts = np.vstack([imgs[contains(imgs)], starts])
    starts = starts[contains(starts)]
    vals = objective(starts)

    order = np.argsort(-vals, kind="stable")
    half = climbers // 2
    pick = np.concatenate([order[:half], rng.choice(order[half:], size=min(half, max(len(order) - half, 0)),
                                                    replace=False)]) if len(order) > half else order
    P, f = starts[pick].copy(), vals[pick].copy()
    step = np.full(len(P), 0.2)
    for _ in range(iters):
        prop = P + step[:, None] * rng.standard_normal(P.shape)
        prop /= np.linalg.norm(prop, axis=1, keepdims=True)
        fp = objective(prop)
        ok = fp > f
        if ok.any():
            ok[ok] = contains(prop[ok])
        P[ok], f[ok] = prop[ok], fp[ok]
        step = np.clip(np.where(ok, step * 1.6, step * 0.75), 1e-13, 1.0)

    # merge climbers with the raw best starts before polishing
    P = np.vstack([P, starts[order[:n_polish]]])
    f = np.concatenate([f, vals[order[:n_polish]]])
    best = int(np.argmax(f))
    bz, bv = P[best], f[best]
    if local is not None:
        for i in np.argsort(-f, kind="stable")[:n_polish]:
            fun, rows = local(P[i])
            piece = local_piece(R, model, P[i])
            ineq = rows if piece is None else np.vstack([rows, -piece])
            z1 = polish(P[i], fun, ineq, contains)
            if z1 is None:
                continue
            v1 = float(objective(z1[None, :])[0])
            if v1 > bv:
                bz, bv = z1, v1
    return bz, float(bv)
