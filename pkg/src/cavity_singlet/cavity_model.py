"""Two Lambda atoms in a driven, lossy cavity.

Atomic levels are indexed 0 -> |0>, 1 -> |1>, 2 -> |e>. The full space is
atom1 (x) atom2 (x) cavity Fock space truncated at ``n_max`` photons. All
rates and energies are in units of the atomic decay rate gamma.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from math import isfinite, sqrt

import numpy as np

from .quantum_core import HilbertSpace, Operator, dagger, embed

GROUND0, GROUND1, EXCITED = 0, 1, 2
ATOM_DIM = 3

# order of the ground manifold everywhere: |00>, |01>, |10>, |11>
GROUND_LABELS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class ModelParams:
    g: float
    kappa: float
    gamma: float = 1.0
    Omega: float = 0.0
    Omega_MW: float = 0.0
    Delta: float = 0.0
    delta: float = 0.0
    n_max: int = 2

    def __post_init__(self):
        for name in ("g", "kappa", "gamma", "Omega", "Omega_MW", "Delta", "delta"):
            v = getattr(self, name)
            if not isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        # zero couplings/rates are allowed for limiting-case checks;
        # strict positivity is enforced on user-facing configs
        for name in ("g", "kappa", "gamma", "Omega", "Omega_MW"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError(f"n_max must be a non-negative integer, got {self.n_max}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def cooperativity(self) -> float:
        return self.g**2 / (self.kappa * self.gamma)

    @cached_property
    def space(self) -> HilbertSpace:
        return HilbertSpace((ATOM_DIM, ATOM_DIM, self.n_max + 1))

    def with_(self, **changes) -> ModelParams:
        return replace(self, **changes)

    @classmethod
    def from_cooperativity(cls, C: float, kappa_over_gamma: float, gamma: float = 1.0, **rest) -> ModelParams:
        kappa = kappa_over_gamma * gamma
        return cls(g=sqrt(C * kappa * gamma), kappa=kappa, gamma=gamma, **rest)


def transition(i: int, j: int, dim: int = ATOM_DIM) -> np.ndarray:
    """Single-atom |i><j|."""
    m = np.zeros((dim, dim), dtype=complex)
    m[i, j] = 1.0
    return m


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def atom_op(m: np.ndarray, atom: int, space: HilbertSpace) -> Operator:
    return embed(m, atom, space)


def cavity_annihilator(p: ModelParams) -> Operator:
    return embed(annihilation(p.n_max), 2, p.space)


def build_h0(p: ModelParams) -> Operator:
    """delta a^dag a + Delta (|e><e|_1 + |e><e|_2) + g(|e><1| a + h.c.) on both atoms."""
    s = p.space
    a = cavity_annihilator(p)
    h = p.delta * (dagger(a) @ a)
    for atom in (0, 1):
        h = h + p.Delta * atom_op(transition(EXCITED, EXCITED), atom, s)
        jc = p.g * (atom_op(transition(EXCITED, GROUND1), atom, s) @ a)
        h = h + jc + dagger(jc)
    return h


def build_hg(p: ModelParams) -> Operator:
    """Resonant microwave drive on the 0 <-> 1 transition of both atoms."""
    s = p.space
    up = Operator.zero(s)
    for atom in (0, 1):
        up = up + atom_op(transition(GROUND1, GROUND0), atom, s)
    up = 0.5 * p.Omega_MW * up
    return up + dagger(up)


def build_vplus(p: ModelParams) -> Operator:
    """Raising part of the optical pump; the pi phase sits on atom 2."""
    s = p.space
    e0 = transition(EXCITED, GROUND0)
    return 0.5 * p.Omega * (atom_op(e0, 0, s) - atom_op(e0, 1, s))


def build_vminus(p: ModelParams) -> Operator:
    return dagger(build_vplus(p))


def build_hamiltonian(p: ModelParams) -> Operator:
    vp = build_vplus(p)
    return build_h0(p) + build_hg(p) + vp + dagger(vp)


LINDBLAD_LABELS = ("kappa", "gamma_0_atom1", "gamma_0_atom2", "gamma_1_atom1", "gamma_1_atom2")


def build_lindblads(p: ModelParams) -> list[Operator]:
    """[sqrt(kappa) a, then sqrt(gamma/2)|0><e| and sqrt(gamma/2)|1><e| per atom].

    Order matches ``LINDBLAD_LABELS``.
    """
    s = p.space
    r = sqrt(p.gamma / 2)
    ops = [sqrt(p.kappa) * cavity_annihilator(p)]
    for final in (GROUND0, GROUND1):
        for atom in (0, 1):
            ops.append(r * atom_op(transition(final, EXCITED), atom, s))
    return ops


@dataclass(frozen=True)
class AtomicStates:
    """Logical two-atom states as vectors on the 9-dim atomic space."""

    s00: np.ndarray
    s11: np.ndarray
    S: np.ndarray
    T: np.ndarray

    @classmethod
    def standard(cls) -> AtomicStates:
        atoms = HilbertSpace((ATOM_DIM, ATOM_DIM))
        k = atoms.basis_ket
        return cls(
            s00=k(0, 0),
            s11=k(1, 1),
            S=(k(0, 1) - k(1, 0)) / sqrt(2),
            T=(k(0, 1) + k(1, 0)) / sqrt(2),
        )

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"S": self.S, "T": self.T, "00": self.s00, "11": self.s11}

    def on_full_space(self, p: ModelParams) -> dict[str, np.ndarray]:
        """Same states with the cavity in vacuum."""
        vac = np.zeros(p.n_max + 1)
        vac[0] = 1.0
        return {name: np.kron(v, vac) for name, v in self.as_dict().items()}


def ground_indices(p: ModelParams) -> list[int]:
    s = p.space
    return [s.index(a1, a2, 0) for a1, a2 in GROUND_LABELS]


def single_excitation_indices(p: ModelParams) -> list[int]:
    """One atom excited with an empty cavity, or one photon with both atoms in {0, 1}."""
    s = p.space
    idx = []
    for a1 in range(ATOM_DIM):
        for a2 in range(ATOM_DIM):
            n_e = (a1 == EXCITED) + (a2 == EXCITED)
            if n_e == 1:
                idx.append(s.index(a1, a2, 0))
            elif n_e == 0 and p.n_max >= 1:
                idx.append(s.index(a1, a2, 1))
    return sorted(idx)


def _projector(space: HilbertSpace, indices) -> Operator:
    m = np.zeros((space.total_dim, space.total_dim))
    m[indices, indices] = 1.0
    return Operator(space, m)


def ground_excited_projectors(p: ModelParams) -> tuple[Operator, Operator]:
    return _projector(p.space, ground_indices(p)), _projector(p.space, single_excitation_indices(p))


def swap_atoms(p: ModelParams) -> Operator:
    """Permutation exchanging atom 1 and atom 2."""
    s = p.space
    m = np.zeros((s.total_dim, s.total_dim))
    for a1 in range(ATOM_DIM):
        for a2 in range(ATOM_DIM):
            for n in range(p.n_max + 1):
                m[s.index(a2, a1, n), s.index(a1, a2, n)] = 1.0
    return Operator(s, m)
