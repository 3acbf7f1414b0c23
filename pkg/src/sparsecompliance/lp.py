"""Dense revised simplex for small linear programs.

Solves ``min c.x  s.t.  A x = b, x >= 0`` with a two-phase method and Bland's
pivoting rule, which cannot cycle.  The basis is re-factorized every
iteration; the problems in this package have at most a few dozen rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, SolverStallError, UnboundedError

FEAS_TOL = 1e-8
PIVOT_TOL = 1e-9


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    status: str          # "optimal" or "unbounded"
    nit: int
    basis: np.ndarray
    ray: np.ndarray | None = None   # improving direction when unbounded


def _iterate(A, b, c, basis, allowed, max_iter, nit):
    m, nv = A.shape
    cscale = max(1.0, np.abs(c).max(initial=0.0))
    while True:
        if nit >= max_iter:
            raise SolverStallError(f"simplex hit the iteration cap ({max_iter})")
        B = A[:, basis]
        xb = np.linalg.solve(B, b)
        xb[xb < 0] = 0.0
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - A.T @ y
        reduced[basis] = 0.0
        cand = np.flatnonzero((reduced < -PIVOT_TOL * cscale) & allowed)
        if cand.size == 0:
            return xb, nit, None
        j = cand[0]
        d = np.linalg.solve(B, A[:, j])
        pos = d > PIVOT_TOL
        if not pos.any():
            ray = np.zeros(nv)
            ray[j] = 1.0
            ray[basis] = -d
            return xb, nit, ray
        ratios = np.full(m, np.inf)
        ratios[pos] = xb[pos] / d[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, best))
        r = ties[np.argmin(basis[ties])]
        basis[r] = j
        nit += 1


def simplex(c, A_eq, b_eq, max_iter: int | None = None) -> LPResult:
    """Minimize ``c.x`` over ``{x >= 0 : A_eq x = b_eq}``.

    Raises InfeasibleError when the feasible set is empty.  An unbounded
    problem is reported through ``status == "unbounded"`` together with an
    improving ray, since callers sometimes need the ray itself.
    """
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float, ndmin=2)
    b = np.array(b_eq, dtype=float)
    m, nv = A.shape
    if c.shape != (nv,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")
    if max_iter is None:
        max_iter = 50 * (nv + m)

    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # phase 1: artificial identity block
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(nv), np.ones(m)])
    basis = np.arange(nv, nv + m)
    allowed = np.ones(nv + m, dtype=bool)
    xb, nit, _ = _iterate(A1, b, c1, basis, allowed, max_iter, 0)
    bscale = max(1.0, np.abs(b).max(initial=0.0))
    if c1[basis] @ xb > FEAS_TOL * bscale:
        raise InfeasibleError("linear program is infeasible")

    # drive remaining (zero-level) artificials out; drop redundant rows
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] < nv:
            continue
        Binv_row = np.linalg.solve(A1[:, basis].T, np.eye(m)[r])
        row = Binv_row @ A
        row[basis[basis < nv]] = 0.0
        cand = np.flatnonzero(np.abs(row) > 1e-7)
        if cand.size:
            basis[r] = cand[0]
        else:
            keep[r] = False
    if not keep.all():
        A, b, basis = A[keep], b[keep], basis[keep]
        art = basis >= nv
        if art.any():  # pragma: no cover - only with inconsistent redundancy
            raise InfeasibleError("could not remove artificial variables")
    allowed = np.ones(nv, dtype=bool)
    xb, nit, ray = _iterate(A, b, c, basis, allowed, max_iter, nit)
    x = np.zeros(nv)
    x[basis] = xb
    if ray is not None:
        return LPResult(x, -np.inf, "unbounded", nit, basis, ray)
    return LPResult(x, float(c @ x), "optimal", nit, basis)


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, free=None,
            max_iter: int | None = None) -> LPResult:
    """Convenience wrapper: inequality rows get slacks, ``free`` variables are split.

    The returned ``x`` (and ``ray``) are in the caller's variables.
    """
    c = np.asarray(c, dtype=float)
    nv = c.shape[0]
    free = np.zeros(nv, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    nf = int(free.sum())
    rows, rhs = [], []
    n_ub = 0
    if A_ub is not None:
        A_ub = np.array(A_ub, dtype=float, ndmin=2)
        n_ub = A_ub.shape[0]

    def expand(block):
        return np.hstack([block, -block[:, free]])

    if A_eq is not None:
        A_eq = np.array(A_eq, dtype=float, ndmin=2)
        rows.append(np.hstack([expand(A_eq), np.zeros((A_eq.shape[0], n_ub))]))
        rhs.append(np.asarray(b_eq, dtype=float))
    if n_ub:
        rows.append(np.hstack([expand(A_ub), np.eye(n_ub)]))
        rhs.append(np.asarray(b_ub, dtype=float))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    cc = np.concatenate([c, -c[free], np.zeros(n_ub)])
    res = simplex(cc, A, b, max_iter=max_iter)

    def collapse(v):
        out = v[:nv].copy()
        out[free] -= v[nv:nv + nf]
        return out

    res.x = collapse(res.x)
    if res.ray is not None:
        res.ray = collapse(res.ray)
    else:
        res.fun = float(c @ res.x)
    return res


def require_optimal(res: LPResult) -> LPResult:
    if res.status == "unbounded":
        raise UnboundedError("linear program is unbounded")
    return res
