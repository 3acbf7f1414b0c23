"""Equality-constrained norm minimization, recovery certificates, phase transitions."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np
import scipy.linalg

from .errors import BudgetExceededError, InfeasibleError, SolverStallError
from .lp import linprog, simplex
from .model import SparseModel, as_vector, complement
from .regularizers import FiniteAtomic, Regularizer, weighted_l1_weights

EPS_FEAS = 1e-8
EPS_MARGIN = 1e-9
SUCCESS_TOL = 1e-5
ENUM_BUDGET = 10**5


@dataclass
class RecoveryInstance:
    M: np.ndarray
    y: np.ndarray
    R: Regularizer
    x0: np.ndarray | None = None

    def __post_init__(self):
        self.M = np.array(self.M, dtype=float, ndmin=2)
        self.y = as_vector(self.y, self.M.shape[0])
        if self.x0 is not None:
            self.x0 = as_vector(self.x0, self.M.shape[1])
            if np.linalg.norm(self.M @ self.x0 - self.y) > 1e-12 * max(1.0, np.linalg.norm(self.y)):
                raise ValueError("y does not equal M x0")


@dataclass
class Certificate:
    kind: str                  # "uniform" or "nonuniform"
    holds: bool
    margin: float
    violating_direction: np.ndarray | None = None

    def to_json(self) -> dict:
        v = self.violating_direction
        return {"kind": self.kind, "holds": self.holds, "margin": self.margin,
                "violating_direction": None if v is None else v.tolist()}


def _independent_rows(M, y):
    """Drop linearly dependent rows; InfeasibleError if y leaves the range."""
    rank = np.linalg.matrix_rank(M)
    if rank == M.shape[0]:
        return M, y
    _, _, piv = scipy.linalg.qr(M.T, pivoting=True)
    keep = np.sort(piv[:rank])
    Mr, yr = M[keep], y[keep]
    x = np.linalg.lstsq(Mr, yr, rcond=None)[0]
    if np.linalg.norm(M @ x - y) > EPS_FEAS * max(1.0, np.linalg.norm(y)):
        raise InfeasibleError("y is not in the range of M")
    return Mr, yr


def solve(instance: RecoveryInstance) -> np.ndarray:
    """``argmin R(x)  s.t.  M x = y`` as a linear program.

    l1-type norms split ``x = u - v``; a finite atomic norm minimizes the sum
    of nonnegative coefficients on the signed atoms.
    """
    M, y, R = instance.M, instance.y, instance.R
    n = M.shape[1]
    Mr, yr = _independent_rows(M, y)
    w = weighted_l1_weights(R, n)
    try:
        if w is not None:
            res = simplex(np.concatenate([w, w]), np.hstack([Mr, -Mr]), yr)
            x = res.x[:n] - res.x[n:]
        elif isinstance(R, FiniteAtomic):
            P = R.atoms.signed().T
            res = simplex(np.ones(P.shape[1]), Mr @ P, yr)
            x = P @ res.x
        else:
            raise TypeError(f"solve supports l1, weighted l1 and finite atomic norms, not {R.descriptor}")
    except InfeasibleError:
        raise InfeasibleError("no x satisfies M x = y") from None
    if np.linalg.norm(M @ x - y) > EPS_FEAS * max(1.0, np.linalg.norm(y)):
        # one refinement step against the reduced system
        x = x + np.linalg.lstsq(M, y - M @ x, rcond=None)[0]
    return x


# ---------------------------------------------------------------------------
# certificates


def kernel_basis(M, tol: float = 1e-10) -> np.ndarray:
    M = np.array(M, dtype=float, ndmin=2)
    _, s, vt = np.linalg.svd(M)
    rank = int((s > tol * max(1.0, s.max(initial=0.0))).sum())
    return vt[rank:].T


def _cone_lp(K, w, gain, S):
    """``max gain . v_S  s.t.  sum_{S^c} w_i |v_i| <= 1,  v = K theta``.

    Returns ``(value, v)``; value is inf (with an improving ray) if unbounded.
    """
    n, d = K.shape
    Sc = [i for i in range(n) if i not in set(S)]
    nc = len(Sc)
    # variables: theta (free, d), u (nc)
    c = np.concatenate([-(gain @ K[list(S)]), np.zeros(nc)])
    A_ub = [np.concatenate([np.zeros(d), w[Sc]])]
    b_ub = [1.0]
    for r, i in enumerate(Sc):
        e = np.zeros(nc)
        e[r] = 1.0
        A_ub.append(np.concatenate([K[i], -e]))
        A_ub.append(np.concatenate([-K[i], -e]))
        b_ub += [0.0, 0.0]
    free = np.concatenate([np.ones(d, dtype=bool), np.zeros(nc, dtype=bool)])
    res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub), free=free)
    if res.status == "unbounded":
        v = K @ res.ray[:d]
        return math.inf, v / np.abs(v).max()
    return -res.fun, K @ res.x[:d]


def _l1_weights_or_raise(R, n):
    w = weighted_l1_weights(R, n)
    if w is None:
        raise TypeError(f"certificates need an l1-type norm, got {R.descriptor}")
    return np.asarray(w, dtype=float)


def nsp_certificate(M, model: SparseModel, R: Regularizer,
                    budget: int = ENUM_BUDGET) -> Certificate:
    """Uniform recovery certificate (weighted null space property).

    For every k-support T and sign pattern on T, maximize
    ``sum_T w_i s_i v_i`` over kernel vectors with ``sum_{T^c} w_i |v_i| <= 1``.
    Recovery of every k-sparse vector holds iff every optimum is below one.
    """
    M = np.array(M, dtype=float, ndmin=2)
    n, k = model.n, model.k
    w = _l1_weights_or_raise(R, n)
    K = kernel_basis(M)
    if K.shape[1] == 0:
        return Certificate("uniform", True, 1.0)
    count = math.comb(n, k) * 2 ** (k - 1)
    if count > budget:
        raise BudgetExceededError(f"{count} certificate LPs exceed budget {budget}")
    worst, worst_v = -math.inf, None
    for T in combinations(range(n), k):
        for tail in product((-1.0, 1.0), repeat=k - 1):
            sigma = np.array((1.0,) + tail)
            val, v = _cone_lp(K, w, w[list(T)] * sigma, T)
            if val > worst:
                worst, worst_v = val, v
    holds = worst < 1 - EPS_MARGIN
    margin = 1 - worst if math.isfinite(worst) else -math.inf
    return Certificate("uniform", bool(holds), margin, None if holds else worst_v)


def nonuniform_certificate(M, x0, R: Regularizer) -> Certificate:
    """Certificate that ``x0`` is the unique minimizer of R on ``{M x = M x0}``.

    With S the support of x0 and s its signs, the directional derivative of R
    at x0 along v is ``sum_S w s v + sum_{S^c} w |v|``.  Maximizing
    ``-sum_S w s v_S`` over kernel vectors with ``sum_{S^c} w |v| <= 1`` gives
    ``rho``; no kernel ray descends iff ``rho < 1``.  Ties count as failures.
    """
    M = np.array(M, dtype=float, ndmin=2)
    n = M.shape[1]
    x0 = as_vector(x0, n)
    w = _l1_weights_or_raise(R, n)
    K = kernel_basis(M)
    if K.shape[1] == 0:
        return Certificate("nonuniform", True, 1.0)
    S = tuple(int(i) for i in np.flatnonzero(x0))
    gain = -w[list(S)] * np.sign(x0[list(S)])
    rho, v = _cone_lp(K, w, gain, S)
    holds = rho < 1 - EPS_MARGIN
    margin = 1 - rho if math.isfinite(rho) else -math.inf
    return Certificate("nonuniform", bool(holds), margin, None if holds else v)


# ---------------------------------------------------------------------------
# phase transitions


def gaussian_operator(m: int, n: int, rng) -> np.ndarray:
    """i.i.d. N(0, 1/m) entries."""
    return rng.standard_normal((m, n)) / math.sqrt(m)


def sparse_unit_vector(model: SparseModel, rng) -> np.ndarray:
    """Uniform support, uniform direction on that support's unit sphere."""
    x = np.zeros(model.n)
    S = rng.choice(model.n, size=model.k, replace=False)
    u = rng.standard_normal(model.k)
    x[S] = u / np.linalg.norm(u)
    return x


def _trial(model, R, m, seed, t):
    rng = np.random.default_rng([seed, m, t])
    M = gaussian_operator(m, model.n, rng)
    x0 = sparse_unit_vector(model, rng)
    try:
        x = solve(RecoveryInstance(M, M @ x0, R, x0))
    except (InfeasibleError, SolverStallError):
        return False
    return bool(np.linalg.norm(x - x0) <= SUCCESS_TOL)


def phase_transition(model: SparseModel, R: Regularizer, m_range, trials: int, seed: int,
                     workers: int = 1) -> list[dict]:
    """Empirical exact-recovery rate per number of measurements.

    Trial ``t`` at ``m`` measurements draws everything from the substream
    ``(seed, m, t)``, so the table does not depend on ``workers``.
    """
    if trials < 10:
        raise ValueError("need at least 10 trials per m")
    rows = []
    for m in m_range:
        jobs = range(trials)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                ok = list(pool.map(lambda t: _trial(model, R, m, seed, t), jobs))
        else:
            ok = [_trial(model, R, m, seed, t) for t in jobs]
        succ = int(sum(ok))
        rows.append({"n": model.n, "k": model.k, "m": int(m), "regularizer": R.descriptor,
                     "trials": trials, "successes": succ, "rate": succ / trials, "seed": seed})
    return rows


def monotone_violations(rows, sigmas: float = 3.0) -> list[tuple]:
    """Pairs ``(m1, m2)``, m1 < m2, whose rates decrease by more than the band."""
    bad = []
    for a, b in combinations(sorted(rows, key=lambda r: r["m"]), 2):
        pa, pb = a["rate"], b["rate"]
        sd = math.sqrt(pa * (1 - pa) / a["trials"] + pb * (1 - pb) / b["trials"])
        if pb < pa - sigmas * sd - 1e-12:
            bad.append((a["m"], b["m"]))
    return bad
