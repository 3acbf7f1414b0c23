import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import combined_half_width
from sparsecompliance.cones import (descent_pieces, estimate_A_nonuniform, estimate_A_uniform,
                                    in_descent_set, in_model_descent_cone, model_cone_contains,
                                    nonuniform_fractions, ray_test, sample_sphere)
from sparsecompliance.errors import ZeroVectorError
from sparsecompliance.model import AtomSet, SparseModel, sample_atoms
from sparsecompliance.regularizers import L1, FiniteAtomic, FunctionRegularizer, KSupport, WeightedL1

M31 = SparseModel(3, 1)


def test_descent_set_examples():
    assert in_descent_set(L1(), [1, 0, 0], [-1, 0.5, 0.4])
    assert in_descent_set(KSupport(2), [1, 2, 0, 0], [0, 0, 0, 0])
    assert not in_descent_set(L1(), [1, 0, 0], [0.1, 0, 0])


def _grid_oracle(z):
    # x = (-s, 0, 0) for growing s; z is a descent direction in the limit
    z = np.asarray(z, float)
    return all(np.abs(np.array([-s, 0, 0]) + z).sum() <= s + 1e-10 for s in (1e2, 1e4, 1e6))


@pytest.mark.parametrize("z,expected", [((1, 1, 0), True), ((1, 0.6, 0.6), False)])
def test_model_cone_examples(z, expected):
    assert in_model_descent_cone(L1(), M31, z) is expected
    assert _grid_oracle(z) is expected


def test_single_support_directions_always_in_cone(rng):
    model = SparseModel(4, 2)
    regs = [L1(), WeightedL1([1, 2, 3, 4]), KSupport(2),
            FiniteAtomic(sample_atoms(model, 16, seed=4))]
    for R in regs:
        for _ in range(20):
            z = np.zeros(4)
            S = rng.choice(4, 2, replace=False)
            z[S] = rng.standard_normal(2)
            assert in_model_descent_cone(R, model, z)


def test_zero_vector_rejected():
    with pytest.raises(ZeroVectorError):
        in_model_descent_cone(L1(), M31, [0, 0, 0])


def test_sample_sphere():
    X = sample_sphere(5, 100_000, seed=9)
    assert np.allclose(np.linalg.norm(X, axis=1), 1, atol=1e-12)
    assert np.linalg.norm(X.mean(axis=0)) <= 4 / math.sqrt(len(X))
    assert np.array_equal(X, sample_sphere(5, 100_000, seed=9))
    # prefix stability: fewer samples are a prefix of more samples
    assert np.array_equal(sample_sphere(5, 1000, seed=9), X[:1000])


def _python_rejection_oracle(samples, seed):
    """A^U(l1) at n=3, k=1 with the stdlib generator: 1 - P(max|z_i| >= sum of the others)."""
    gen = random.Random(seed)
    hits = 0
    for _ in range(samples):
        z = [abs(gen.gauss(0, 1)) for _ in range(3)]
        if 2 * max(z) >= sum(z):
            hits += 1
    p = 1 - hits / samples
    return p, 1.96 * math.sqrt(p * (1 - p) / samples)


def test_uniform_l1_against_independent_sampler():
    rep = estimate_A_uniform(L1(), M31, 100_000, seed=1)
    p, hw = _python_rejection_oracle(100_000, seed=2)
    assert abs(rep.estimate - p) <= 3 * math.hypot(rep.half_width, hw)
    assert 0 <= rep.estimate <= 1 and rep.half_width >= 0


def test_uniform_l1_beats_weighted():
    a = estimate_A_uniform(L1(), M31, 100_000, seed=3)
    b = estimate_A_uniform(WeightedL1([1, 1, 10]), M31, 100_000, seed=3)
    assert a.estimate - b.estimate >= 3 * combined_half_width(a, b)


def test_whole_space_cone_gives_zero():
    zero = FunctionRegularizer(lambda x: 0.0, "zero")
    assert estimate_A_uniform(zero, M31, 1000, seed=0).estimate == 0.0
    assert estimate_A_uniform(KSupport(2), SparseModel(4, 2), 1000, seed=0).estimate == 0.0


def test_sample_count_guard():
    with pytest.raises(ValueError):
        estimate_A_uniform(L1(), M31, 999, seed=0)


def test_nonuniform_l1_orbits_and_inclusion():
    fr = nonuniform_fractions(L1(), M31, 50_000, seed=4)
    hw = 1.96 * np.sqrt(fr * (1 - fr) / 50_000)
    assert fr.max() - fr.min() <= 3 * math.sqrt(2) * hw.max()
    for R in (L1(), WeightedL1([1, 1, 10]), FiniteAtomic(sample_atoms(M31, 12, seed=1))):
        u = estimate_A_uniform(R, M31, 20_000, seed=5)
        nu = estimate_A_nonuniform(R, M31, 20_000, seed=5)
        assert nu.estimate >= u.estimate


def test_two_seed_consistency():
    a = estimate_A_nonuniform(L1(), M31, 50_000, seed=10)
    b = estimate_A_nonuniform(L1(), M31, 50_000, seed=11)
    assert abs(a.estimate - b.estimate) <= 3 * combined_half_width(a, b)


def test_atom_monotonicity():
    base = sample_atoms(M31, 8, seed=3).atoms
    extra = sample_atoms(M31, 16, seed=4).atoms
    small = FiniteAtomic(AtomSet(base, k=1))
    big = FiniteAtomic(AtomSet(np.vstack([base, extra]), k=1))
    X = np.random.default_rng(0).standard_normal((200, 3))
    assert (big.values(X) <= small.values(X) + 1e-9).all()
    a1 = estimate_A_uniform(small, M31, 50_000, seed=6)
    a2 = estimate_A_uniform(big, M31, 50_000, seed=6)
    assert a2.estimate <= a1.estimate + 3 * combined_half_width(a1, a2)


def test_uniform_determinism_across_workers():
    R = FiniteAtomic(sample_atoms(SparseModel(4, 2), 20, seed=1))
    a = estimate_A_uniform(R, SparseModel(4, 2), 10_000, seed=2, workers=1)
    b = estimate_A_uniform(R, SparseModel(4, 2), 10_000, seed=2, workers=2)
    assert a == b


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(1e-3, 1e3))
def test_cone_property(seed, lam):
    model = SparseModel(4, 1)
    z = np.random.default_rng(seed).standard_normal(4)
    for R in (L1(), WeightedL1([1, 3, 0.5, 2])):
        assert in_model_descent_cone(R, model, z) == in_model_descent_cone(R, model, lam * z)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(1.0, 50.0))
def test_descent_sets_grow_with_scaling(seed, lam):
    rng = np.random.default_rng(seed)
    R = WeightedL1([1, 2, 0.5])
    x = np.zeros(3)
    x[rng.integers(3)] = rng.standard_normal()
    z = rng.standard_normal(3)
    if in_descent_set(R, x, z):
        assert in_descent_set(R, lam * x, z)


@pytest.mark.parametrize("R", [L1(), WeightedL1([1, 1, 10]), WeightedL1([0.3, 2.0, 1.0])])
def test_analytic_matches_ray_test(R):
    Z = sample_sphere(3, 10_000, seed=21)
    analytic = model_cone_contains(R, M31, Z)
    numeric = np.array([ray_test(R, M31, z) for z in Z])
    assert (analytic == numeric).all()


def test_polyhedral_pieces_match_ray_test():
    model = SparseModel(4, 2)
    R = FiniteAtomic(sample_atoms(model, 20, seed=11))
    pieces = descent_pieces(R, model)
    Z = sample_sphere(4, 200, seed=3)
    assert (pieces.contains(Z) == np.array([ray_test(R, model, z) for z in Z])).all()
