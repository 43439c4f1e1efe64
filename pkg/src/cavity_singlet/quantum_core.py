"""Dense operator machinery on tensor-product Hilbert spaces.

Factor order for the cavity model is (atom1, atom2, cavity). Kronecker
products use the numpy convention (left factor varies slowest), and
density matrices are vectorized by stacking columns, so that

    vec(A X B) = (B^T kron A) vec(X).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from math import isqrt, prod

import numpy as np


@dataclass(frozen=True)
class HilbertSpace:
    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims:
            raise ValueError("a Hilbert space needs at least one factor")
        if any(d < 1 for d in dims):
            raise ValueError(f"factor dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def total_dim(self) -> int:
        return prod(self.factor_dims)

    def index(self, *labels: int) -> int:
        """Flat basis index of the product state |labels[0], labels[1], ...>."""
        return int(np.ravel_multi_index(labels, self.factor_dims))

    def labels(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.factor_dims))

    def basis_ket(self, *labels: int) -> np.ndarray:
        v = np.zeros(self.total_dim, dtype=complex)
        v[self.index(*labels)] = 1.0
        return v

    def __mul__(self, other: HilbertSpace) -> HilbertSpace:
        return HilbertSpace(self.factor_dims + other.factor_dims)


class Operator:
    """Square complex matrix tagged with the space it acts on."""

    __array_priority__ = 1000

    def __init__(self, space: HilbertSpace, matrix):
        m = np.array(matrix, dtype=complex)
        n = space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match space dimension {n}")
        m.setflags(write=False)
        self.space = space
        self.matrix = m

    @classmethod
    def identity(cls, space: HilbertSpace) -> Operator:
        return cls(space, np.eye(space.total_dim))

    @classmethod
    def zero(cls, space: HilbertSpace) -> Operator:
        return cls(space, np.zeros((space.total_dim, space.total_dim)))

    def _check(self, other: Operator):
        if self.space != other.space:
            raise ValueError(
                f"operators live on different spaces: {self.space.factor_dims} vs {other.space.factor_dims}"
            )

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.space, scalar * self.matrix)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.space, self.matrix / scalar)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        # acting on a state vector or raw matrix
        return self.matrix @ np.asarray(other)

    def dag(self) -> Operator:
        return dagger(self)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= atol)

    def __eq__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def __repr__(self):
        return f"Operator(space={self.space.factor_dims}, norm={np.linalg.norm(self.matrix):.4g})"


class DensityMatrix(Operator):
    """Operator that is a valid quantum state (checked on construction)."""

    def __init__(self, space: HilbertSpace, matrix, *, check: bool = True, atol: float = 1e-9):
        super().__init__(space, matrix)
        if check:
            self.validate(atol)

    def validate(self, atol: float = 1e-9, eig_atol: float = 1e-8):
        m = self.matrix
        tr = np.trace(m)
        if abs(tr - 1.0) > atol:
            raise ValueError(f"density matrix trace is {tr}, expected 1")
        herm = np.max(np.abs(m - m.conj().T), initial=0.0)
        if herm > atol:
            raise ValueError(f"density matrix is not Hermitian (max deviation {herm:.3g})")
        lam = self.min_eigenvalue()
        if lam < -eig_atol:
            raise ValueError(f"density matrix has negative eigenvalue {lam:.3g}")

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    @classmethod
    def from_ket(cls, space: HilbertSpace, psi) -> DensityMatrix:
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(space, np.outer(psi, psi.conj()))

    def expect(self, psi) -> float:
        """<psi|rho|psi> for a (normalized) ket psi."""
        psi = np.asarray(psi, dtype=complex)
        return float(np.real(psi.conj() @ self.matrix @ psi))


def kron(a: Operator, b: Operator) -> Operator:
    return Operator(a.space * b.space, np.kron(a.matrix, b.matrix))


def kron_all(*ops: Operator) -> Operator:
    return reduce(kron, ops)


def dagger(a: Operator) -> Operator:
    return Operator(a.space, a.matrix.conj().T)


def embed(op, factor_index: int, space: HilbertSpace) -> Operator:
    """Lift a single-factor operator to ``space``, identity on every other factor.

    ``op`` may be a raw square array or an :class:`Operator` on a one-factor space.
    """
    m = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    dims = space.factor_dims
    if not 0 <= factor_index < len(dims):
        raise IndexError(f"factor index {factor_index} out of range for {len(dims)} factors")
    if m.shape != (dims[factor_index],) * 2:
        raise ValueError(
            f"operator of shape {m.shape} does not fit factor {factor_index} of dimension {dims[factor_index]}"
        )
    left = np.eye(prod(dims[:factor_index]))
    right = np.eye(prod(dims[factor_index + 1 :]))
    return Operator(space, np.kron(np.kron(left, m), right))


def partial_trace_last(matrix: np.ndarray, space: HilbertSpace) -> np.ndarray:
    dims = space.factor_dims
    keep = prod(dims[:-1])
    last = dims[-1]
    return np.einsum("injn->ij", np.asarray(matrix).reshape(keep, last, keep, last))


def partial_trace_cavity(rho: Operator) -> DensityMatrix:
    """Trace out the last tensor factor (the cavity mode)."""
    space = rho.space
    if len(space.factor_dims) < 2:
        raise ValueError("partial trace needs at least two factors")
    reduced = HilbertSpace(space.factor_dims[:-1])
    return DensityMatrix(reduced, partial_trace_last(rho.matrix, space), check=False)


def vectorize(rho) -> np.ndarray:
    m = rho.matrix if isinstance(rho, Operator) else np.asarray(rho)
    return m.reshape(-1, order="F")


def unvectorize(v) -> np.ndarray:
    v = np.asarray(v)
    n = isqrt(v.size)
    if n * n != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    return v.reshape(n, n, order="F")


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random full- or given-rank density matrix (Ginibre construction)."""
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho)
