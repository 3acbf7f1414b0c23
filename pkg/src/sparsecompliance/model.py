"""Sparse model, supports, and atom sets."""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError

Support = tuple  # sorted tuple of coordinate indices


@dataclass(frozen=True)
class SparseModel:
    """The union of k-sparse coordinate subspaces of R^n.

    Differences of two model elements are 2k-sparse, so RIP quantities are
    taken over supports of size ``secant_order``.
    """

    n: int
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or int(self.n) != self.n:
            raise ValueError("n and k must be integers")
        if self.k < 1:
            raise ValueError(f"sparsity k must be >= 1, got {self.k}")
        if self.n < 2 * self.k:
            raise ValueError(f"need n >= 2k, got n={self.n}, k={self.k}")

    @property
    def secant_order(self) -> int:
        return 2 * self.k

    def supports(self, size: int | None = None):
        """All supports of the given size (default k), in lexicographic order."""
        return list(combinations(range(self.n), self.k if size is None else size))


def as_vector(x, n: int | None = None) -> np.ndarray:
    """Copy ``x`` into a finite 1-d float array, checking its length."""
    v = np.array(x, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionMismatchError(f"expected length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def top_support(z, size: int) -> Support:
    """Indices of the ``size`` largest entries of ``z`` in absolute value.

    Ties go to the lowest index.
    """
    z = np.asarray(z, dtype=float)
    if not 0 <= size <= z.shape[0]:
        raise ValueError(f"support size {size} out of range for length {z.shape[0]}")
    order = np.argsort(-np.abs(z), kind="stable")
    return tuple(sorted(int(i) for i in order[:size]))


def project_support(z, support) -> np.ndarray:
    """Copy of ``z`` with every entry outside ``support`` set to zero."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    idx = list(support)
    out[idx] = z[idx]
    return out


def complement(support, n: int) -> Support:
    s = set(support)
    return tuple(i for i in range(n) if i not in s)


class AtomSet:
    """A finite set of k-sparse atoms with maximal Euclidean norm one.

    Atoms are stored as the rows of ``atoms``.  The signed hull ``conv(+-A)``
    is what the gauge uses, so only one sign of each atom is kept.
    """

    def __init__(self, atoms, k: int, label: str | None = None):
        a = np.array(atoms, dtype=float)
        if a.ndim != 2 or a.shape[0] == 0:
            raise ValueError("atoms must be a nonempty 2-d array")
        if not np.all(np.isfinite(a)):
            raise ValueError("atoms must be finite")
        nnz = np.count_nonzero(a, axis=1)
        if np.any(nnz > k):
            raise ValueError(f"atom with {nnz.max()} nonzeros is not {k}-sparse")
        norms = np.linalg.norm(a, axis=1)
        if abs(norms.max() - 1) > 1e-12:
            raise ValueError(f"max atom norm must be 1, got {norms.max()!r}")
        self.atoms = a
        self.atoms.setflags(write=False)
        self.k = int(k)
        self.label = label

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return self.atoms.shape[0]

    def spans(self) -> bool:
        return np.linalg.matrix_rank(self.atoms) == self.n

    def signed(self) -> np.ndarray:
        """The symmetrized atoms ``[A; -A]`` as rows."""
        return np.vstack([self.atoms, -self.atoms])

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "atoms": self.atoms.tolist()}

    @classmethod
    def from_json(cls, data: dict, label: str | None = None) -> "AtomSet":
        atoms = np.array(data["atoms"], dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] != data["n"]:
            raise DimensionMismatchError("atom rows do not match declared n")
        return cls(atoms, data["k"], label=label)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "AtomSet":
        return cls.from_json(json.loads(Path(path).read_text()), label=Path(path).name)


def sample_atoms(model: SparseModel, count: int, seed: int,
                 radius_range=(1.0, 1.0)) -> AtomSet:
    """Random atom set for ``model``.

    Each atom gets a uniformly chosen k-subset support and a uniform direction
    on the unit sphere of that support, scaled by a radius drawn uniformly from
    ``radius_range`` (the largest atom is then rescaled to norm one).  Draws
    are repeated until the atoms span R^n so the gauge is finite everywhere.
    """
    n, k = model.n, model.k
    if count < 2 * n:
        raise ValueError(f"need at least 2n={2 * n} atoms, got {count}")
    lo, hi = radius_range
    if not 0 < lo <= hi <= 1:
        raise ValueError("radius_range must satisfy 0 < lo <= hi <= 1")
    rng = np.random.default_rng(seed)
    while True:
        atoms = np.zeros((count, n))
        for row in atoms:
            supp = rng.choice(n, size=k, replace=False)
            u = rng.standard_normal(k)
            row[supp] = u / np.linalg.norm(u)
        radii = rng.uniform(lo, hi, size=count) if lo < hi else np.full(count, hi)
        atoms *= radii[:, None]
        atoms[np.argmax(radii)] /= np.linalg.norm(atoms[np.argmax(radii)])
        if np.linalg.matrix_rank(atoms) == n:
            break
    return AtomSet(atoms, k, label=f"atoms(n={n},k={k},count={count},seed={seed})")
