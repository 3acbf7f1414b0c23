"""RIP constants and the RIP-based compliance functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .cones import in_model_descent_cone, model_cone_contains
from .errors import BudgetExceededError, CertificateError, ZeroVectorError
from .model import SparseModel, as_vector, complement, top_support
from .regularizers import (KSupport, L1, Regularizer, ksupport_norm,
                           weighted_l1_weights)
from .search import maximize_over_cone, region_rows

ENUM_BUDGET = 10**6
SEARCH_BUDGET = 10**4


@dataclass
class RipResult:
    delta: float
    witness_support: tuple
    witness_vector: np.ndarray

    def to_json(self) -> dict:
        return {"delta": self.delta, "witness_support": list(self.witness_support),
                "witness_vector": self.witness_vector.tolist()}


@dataclass
class FunctionalResult:
    value: float
    argmax_z: np.ndarray
    restarts_used: int
    certificate: str            # "analytic" or "search"
    functional: str = ""
    regularizer: str = ""
    seed: int | None = None
    reference: float | None = None   # independently computed value, when one exists

    def to_json(self) -> dict:
        return {"functional": self.functional, "regularizer": self.regularizer,
                "value": self.value, "argmax_z": self.argmax_z.tolist(),
                "restarts_used": self.restarts_used, "certificate": self.certificate,
                "seed": self.seed, "reference": self.reference}


# ---------------------------------------------------------------------------
# RIP constants


def rip_constant(M, model: SparseModel | None = None, *, order: int | None = None,
                 budget: int = ENUM_BUDGET, chunk: int = 20000) -> RipResult:
    """Brute-force RIP constant of ``M`` over ``order``-sparse vectors.

    ``order`` defaults to the secant order 2k of ``model``.  For every support
    the extreme eigenvalues of the column Gram submatrix give the largest
    deviation of ``||Mx||^2`` from one.
    """
    M = np.array(M, dtype=float, ndmin=2)
    if not np.all(np.isfinite(M)):
        raise ValueError("operator has non-finite entries")
    n = M.shape[1]
    s = model.secant_order if order is None else int(order)
    if not 1 <= s <= n:
        raise ValueError(f"sparsity order {s} out of range for n={n}")
    if math.comb(n, s) > budget:
        raise BudgetExceededError(f"C({n},{s}) = {math.comb(n, s)} supports exceeds budget {budget}")
    gram = M.T @ M
    best, best_supp = -1.0, None
    it = combinations(range(n), s)
    while True:
        batch = np.array([c for _, c in zip(range(chunk), it)], dtype=int)
        if batch.size == 0:
            break
        sub = gram[batch[:, :, None], batch[:, None, :]]
        ev = np.linalg.eigvalsh(sub)
        dev = np.maximum(np.abs(ev[:, -1] - 1), np.abs(ev[:, 0] - 1))
        i = int(np.argmax(dev))
        if dev[i] > best:
            best, best_supp = float(dev[i]), tuple(int(j) for j in batch[i])
    ev, vecs = np.linalg.eigh(gram[np.ix_(best_supp, best_supp)])
    col = 0 if abs(ev[0] - 1) >= abs(ev[-1] - 1) else -1
    w = np.zeros(n)
    w[list(best_supp)] = vecs[:, col]
    return RipResult(best, best_supp, w)


def rip_projector(z, model: SparseModel) -> float:
    """RIP constant of ``I - P_z`` on the secant set, in closed form.

    ``||(I - P_z) x||^2 = ||x||^2 - <x, z/||z||>^2`` and the sup of the inner
    product over unit 2k-sparse ``x`` sits on the top-2k coordinates of z.
    """
    z = as_vector(z, model.n)
    nz2 = z @ z
    if nz2 == 0:
        raise ZeroVectorError("rip_projector needs z != 0")
    T2 = list(top_support(z, model.secant_order))
    return float(z[T2] @ z[T2] / nz2)


def projector_operator(z) -> np.ndarray:
    """The matrix ``I - z z^T / ||z||^2``."""
    z = as_vector(z)
    return np.eye(z.shape[0]) - np.outer(z, z) / (z @ z)


# ---------------------------------------------------------------------------
# batched objectives (all scale invariant)


def _sorted_sq(Z):
    return -np.sort(-np.atleast_2d(Z) ** 2, axis=1)


def b_ratio(Z, k: int) -> np.ndarray:
    """``||z_{T2^c}||^2 / ||z_{T2}||^2`` with T2 the top-2k support."""
    sq = _sorted_sq(Z)
    top = sq[:, :2 * k].sum(axis=1)
    return sq[:, 2 * k:].sum(axis=1) / top


def projector_ratio(Z, k: int) -> np.ndarray:
    sq = _sorted_sq(Z)
    return sq[:, :2 * k].sum(axis=1) / sq.sum(axis=1)


def d_ratio(Z, k: int) -> np.ndarray:
    """``||z_{T^c}||_Sigma^2 / ||z_T||^2`` with T the top-k support and
    ``||.||_Sigma`` the k-support norm."""
    a = -np.sort(-np.abs(np.atleast_2d(Z)), axis=1)
    den = (a[:, :k] ** 2).sum(axis=1)
    if a.shape[1] == k:
        return np.zeros(len(a))
    return ksupport_norm(a[:, k:], k) ** 2 / den


def _local_b(k):
    def local(z0):
        S = list(top_support(z0, 2 * k))
        mask = np.zeros(z0.shape[0], dtype=bool)
        mask[S] = True
        fun = lambda z: (z[~mask] @ z[~mask]) / (z[mask] @ z[mask])
        return fun, region_rows(z0, 2 * k)
    return local


def _local_nec(k):
    def local(z0):
        S = list(top_support(z0, 2 * k))
        mask = np.zeros(z0.shape[0], dtype=bool)
        mask[S] = True
        fun = lambda z: -(z[mask] @ z[mask]) / (z @ z)
        return fun, region_rows(z0, 2 * k)
    return local


def _local_d(k):
    def local(z0):
        T = list(top_support(z0, k))
        mask = np.zeros(z0.shape[0], dtype=bool)
        mask[T] = True
        s = np.where(z0 < 0, -1.0, 1.0)
        if k == 1:
            fun = lambda z: (s[~mask] @ z[~mask]) ** 2 / (z[mask] @ z[mask])
        else:
            fun = lambda z: ksupport_norm(z[~mask][None, :], k)[0] ** 2 / (z[mask] @ z[mask])
        return fun, region_rows(z0, k)
    return local


# ---------------------------------------------------------------------------
# closed-form l1 values


def _l1_b_candidates(n: int, k: int, b: np.ndarray):
    m = n - 2 * k
    total = k * (1 - b)
    with np.errstate(divide="ignore", invalid="ignore"):
        j = np.where(b > 0, np.minimum(m, np.floor(total / np.where(b > 0, b, 1))), m)
    r = np.where(j < m, np.clip(total - j * b, 0, b), 0.0)
    return (j * b**2 + r**2) / (k * (1 + b**2)), j, r


def l1_b_profile(n: int, k: int):
    """Worst sorted profile for ``B_Sigma(l1)``.

    After sorting, the top-k block can be taken equal to 1 and the next k
    entries equal to some ``b``; given ``b`` the tail (at most ``b`` each, sum
    at most ``k(1-b)``) is filled greedily.  The remaining 1-d problem in
    ``b`` is solved on a dense grid, at the kinks ``b = k/(k+j)``, and by
    golden-section refinement.
    """
    if n == 2 * k:
        return 0.0, np.ones(n)
    grid = np.concatenate([np.linspace(0, 1, 100001), k / (k + np.arange(0, n - 2 * k + 1))])
    vals, _, _ = _l1_b_candidates(n, k, grid)
    b0 = grid[int(np.argmax(vals))]
    lo, hi = max(0.0, b0 - 1e-5), min(1.0, b0 + 1e-5)
    g = lambda b: float(_l1_b_candidates(n, k, np.array([b]))[0][0])
    phi = (math.sqrt(5) - 1) / 2
    for _ in range(80):
        c, d = hi - phi * (hi - lo), lo + phi * (hi - lo)
        if g(c) >= g(d):
            hi = d
        else:
            lo = c
    b = max([b0, 0.5 * (lo + hi)], key=g)
    val, j, r = _l1_b_candidates(n, k, np.array([b]))
    j, r = int(j[0]), float(r[0])
    z = np.zeros(n)
    z[:k] = 1.0
    z[k:2 * k + j] = b
    if j < n - 2 * k:
        z[2 * k + j] = r
    return float(val[0]), z


def l1_d_profile(n: int, k: int):
    """Worst sorted profile for ``D_Sigma(l1)``.

    With the top-k block at 1 the remaining magnitudes range over the polytope
    ``{1 >= v_1 >= ... >= v_{n-k} >= 0, sum(v) <= k}``; the convex numerator is
    maximized at a vertex, and vertices have the form ``(1^j, c^l, 0...)``.
    """
    m = n - k
    cands = []
    for j in range(0, min(k, m) + 1):
        cands.append([1.0] * j + [0.0] * (m - j))
        for l in range(1, m - j + 1):
            c = (k - j) / l
            if 0 < c < 1:
                cands.append([1.0] * j + [c] * l + [0.0] * (m - j - l))
    V = np.array(cands)
    vals = ksupport_norm(V, k) ** 2 / k
    i = int(np.argmax(vals))
    return float(vals[i]), np.concatenate([np.ones(k), V[i]])


# ---------------------------------------------------------------------------
# functionals


def _is_plain_l1(R: Regularizer) -> bool:
    return isinstance(R, L1) or (isinstance(R, KSupport) and R.k == 1)


def _search(R, model, objective, local, budget, seed, name):
    rng = np.random.default_rng(seed)
    n, k = model.n, model.k
    profiles = [l1_b_profile(n, k)[1], l1_d_profile(n, k)[1], np.ones(n),
                np.r_[np.ones(k), np.zeros(n - k)]]
    z, v = maximize_over_cone(objective, R, model, budget, rng, profiles=profiles, local=local)
    if not model_cone_contains(R, model, z[None, :])[0]:  # pragma: no cover - invariant
        raise AssertionError(f"{name} witness left the descent cone")
    return z, v


def b_sigma(R: Regularizer, model: SparseModel, search_budget: int = SEARCH_BUDGET,
            seed: int = 0) -> FunctionalResult:
    """Lower estimate of ``sup_{z in T_R(Sigma)} ||z_{T2^c}||^2 / ||z_{T2}||^2``."""
    k = model.k
    if _is_plain_l1(R):
        val, z = l1_b_profile(model.n, k)
        return FunctionalResult(val, z, 0, "analytic", "b_sigma", R.descriptor, seed)
    if model.n == 2 * k:
        z = np.ones(model.n)
        return FunctionalResult(0.0, z, 0, "analytic", "b_sigma", R.descriptor, seed)
    obj = lambda Z: b_ratio(Z, k)
    z, v = _search(R, model, obj, _local_b(k), search_budget, seed, "b_sigma")
    return FunctionalResult(v, z, search_budget, "search", "b_sigma", R.descriptor, seed)


def d_sigma(R: Regularizer, model: SparseModel, search_budget: int = SEARCH_BUDGET,
            seed: int = 0) -> FunctionalResult:
    """Lower estimate of ``sup_{z in T_R(Sigma)} ||z_{T^c}||_Sigma^2 / ||z_T||^2``."""
    k = model.k
    if _is_plain_l1(R):
        val, z = l1_d_profile(model.n, k)
        return FunctionalResult(val, z, 0, "analytic", "d_sigma", R.descriptor, seed)
    obj = lambda Z: d_ratio(Z, k)
    z, v = _search(R, model, obj, _local_d(k), search_budget, seed, "d_sigma")
    return FunctionalResult(v, z, search_budget, "search", "d_sigma", R.descriptor, seed)


def delta_nec(R: Regularizer, model: SparseModel, search_budget: int = SEARCH_BUDGET,
              seed: int = 0) -> FunctionalResult:
    """Upper estimate of ``inf_{z in T_R(Sigma)} delta(I - P_z)``.

    Searched directly on the projector ratio; ``reference`` holds
    ``1 / (1 + B_Sigma(R))`` from an independent ``b_sigma`` run.
    """
    k = model.k
    obj = lambda Z: -projector_ratio(Z, k)
    z, v = _search(R, model, obj, _local_nec(k), search_budget, seed, "delta_nec")
    b = b_sigma(R, model, search_budget, seed + 1)
    return FunctionalResult(-v, z, search_budget, "search", "delta_nec", R.descriptor, seed,
                            reference=1.0 / (1.0 + b.value))


# ---------------------------------------------------------------------------
# sandwich bookkeeping


def _kernel(M, tol=1e-10):
    M = np.array(M, dtype=float, ndmin=2)
    _, s, vt = np.linalg.svd(M)
    rank = int((s > tol * max(1.0, s.max(initial=0.0))).sum())
    return vt[rank:].T


def kernel_meets_cone(M, R: Regularizer, model: SparseModel, seed: int = 0):
    """A nonzero kernel vector of ``M`` inside ``T_R(Sigma)``, or None."""
    K = _kernel(M)
    if K.shape[1] == 0:
        return None
    if K.shape[1] == 1:
        for v in (K[:, 0], -K[:, 0]):
            if in_model_descent_cone(R, model, v):
                return v
        return None
    if weighted_l1_weights(R, model.n) is not None:
        from .recovery import nsp_certificate

        cert = nsp_certificate(M, model, R)
        return None if cert.holds else cert.violating_direction
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((10**4, K.shape[1])) @ K.T
    hit = model_cone_contains(R, model, V)
    return V[np.argmax(hit)] if hit.any() else None


@dataclass
class SandwichReport:
    deltas: list
    min_delta: float
    delta_nec: float
    consistent: bool
    labels: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"deltas": self.deltas, "labels": self.labels, "min_delta": self.min_delta,
                "delta_nec": self.delta_nec, "consistent": self.consistent}


def verify_sandwich(R: Regularizer, model: SparseModel, M_list, search_budget: int = SEARCH_BUDGET,
                    seed: int = 0, include_witness: bool = True, labels=None) -> SandwichReport:
    """Empirical upper bound on the sharp RIP constant from failing operators.

    Every operator must have a kernel vector in ``T_R(Sigma)`` (else
    CertificateError).  ``min_delta`` over the list bounds the sharp constant
    from above; it is checked against ``delta_nec`` in the one direction that
    holds once the witness operator ``I - P_z*`` is part of the list.
    """
    M_list = list(M_list)
    labels = list(labels) if labels is not None else [f"M{i}" for i in range(len(M_list))]
    nec = delta_nec(R, model, search_budget, seed)
    if include_witness:
        M_list.append(projector_operator(nec.argmax_z))
        labels.append("witness")
    if not M_list:
        raise ValueError("need at least one operator")
    deltas = []
    for label, M in zip(labels, M_list):
        if kernel_meets_cone(M, R, model, seed) is None:
            raise CertificateError(f"operator {label} has trivial kernel intersection with the cone")
        deltas.append(rip_constant(M, model).delta)
    lo = min(deltas)
    return SandwichReport(deltas, lo, nec.value, lo <= nec.value + 1e-6, labels)
