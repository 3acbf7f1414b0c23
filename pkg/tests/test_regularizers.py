import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog as scipy_linprog

from sparsecompliance.errors import DimensionMismatchError, SpanError
from sparsecompliance.model import AtomSet, SparseModel, sample_atoms
from sparsecompliance.regularizers import (L1, FiniteAtomic, KSupport, WeightedL1, evaluate,
                                           ksupport_norm)


def unit_basis_atoms(n):
    return FiniteAtomic(AtomSet(np.eye(n), k=1))


def variants():
    return [L1(), WeightedL1([0.5, 2.0, 1.0, 3.0]), KSupport(1), KSupport(2), KSupport(4),
            FiniteAtomic(sample_atoms(SparseModel(4, 2), 16, seed=2)), unit_basis_atoms(4)]


def test_examples():
    assert evaluate(L1(), [3, -4, 0]) == pytest.approx(7)
    assert evaluate(KSupport(2), [3, 4, 0, 0]) == pytest.approx(5, abs=1e-12)
    assert evaluate(unit_basis_atoms(3), [1, 2, -3]) == pytest.approx(6, abs=1e-8)


def _sampled_gauge(x, k, per_pair=2000):
    """Upper bound on the k-support norm (k = 2) from a dense set of 2-sparse unit atoms."""
    n = len(x)
    theta = np.linspace(0, 2 * np.pi, per_pair, endpoint=False)
    atoms = []
    for i in range(n):
        for j in range(i + 1, n):
            a = np.zeros((per_pair, n))
            a[:, i], a[:, j] = np.cos(theta), np.sin(theta)
            atoms.append(a)
    A = np.vstack(atoms)
    res = scipy_linprog(np.ones(len(A)), A_eq=A.T, b_eq=x, bounds=(0, None), method="highs")
    return res.fun


def test_ksupport_against_sampled_lp():
    x = np.ones(4)
    oracle = _sampled_gauge(x, 2)
    assert evaluate(KSupport(2), x) == pytest.approx(oracle, abs=1e-3)


def test_ksupport_limits_and_sandwich(rng):
    X = rng.standard_normal((500, 6)) * rng.exponential(size=(500, 6))
    l1 = np.abs(X).sum(axis=1)
    l2 = np.linalg.norm(X, axis=1)
    assert np.array_equal(ksupport_norm(X, 1), l1) or np.allclose(ksupport_norm(X, 1), l1, rtol=0, atol=1e-12)
    assert np.allclose(ksupport_norm(X, 6), l2, atol=1e-12)
    for k in range(1, 7):
        v = ksupport_norm(X, k)
        assert (v <= l1 + 1e-12).all() and (v >= l2 - 1e-12).all()


def test_finite_atomic_equals_l1(rng):
    R = unit_basis_atoms(5)
    X = rng.standard_normal((50, 5))
    assert np.allclose([R.value(x) for x in X], np.abs(X).sum(axis=1), atol=1e-8)
    assert np.allclose(R.values(X), np.abs(X).sum(axis=1), atol=1e-8)


def test_finite_atomic_batched_matches_lp(rng):
    R = FiniteAtomic(sample_atoms(SparseModel(4, 2), 12, seed=5))
    X = rng.standard_normal((30, 4))
    assert np.allclose(R.values(X), [R.value(x) for x in X], atol=1e-8)


def test_errors():
    with pytest.raises(SpanError):
        FiniteAtomic(AtomSet(np.eye(3)[:2], k=1)).value([0, 0, 1])
    with pytest.raises(DimensionMismatchError):
        WeightedL1([1, 2, 3]).value([1, 2])
    with pytest.raises(ValueError):
        WeightedL1([1, 0, 2])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.integers(0, 10**6))
def test_homogeneity_and_convexity(which, seed):
    R = variants()[which]
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 4))
    lam = rng.uniform(0, 10)
    assert evaluate(R, lam * x) == pytest.approx(lam * evaluate(R, x), rel=1e-9, abs=1e-9)
    assert evaluate(R, (x + y) / 2) <= (evaluate(R, x) + evaluate(R, y)) / 2 + 1e-9


def test_homogeneity_bulk(rng):
    for R in variants():
        X = rng.standard_normal((1000, 4))
        lam = rng.uniform(0, 10, size=1000)
        lhs = R.values(X * lam[:, None])
        assert np.allclose(lhs, lam * R.values(X), rtol=1e-9, atol=1e-12)
