"""Adiabatic elimination of the excited atomic levels and cavity photons.

Second-order effective operators on the ground manifold
span{|00>, |01>, |10>, |11>} (zero photons):

    H_eff   = -1/2 V_- [H_NH^-1 + (H_NH^-1)^dag] V_+ + H_g
    L_eff,j = L_j H_NH^-1 V_+
    H_NH    = H_0 - i/2 sum_j L_j^dag L_j   (on the single-excitation block)

and the closed-form lowest-order coefficients of the cavity and
spontaneous-emission channels.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .cavity_model import (
    LINDBLAD_LABELS,
    ModelParams,
    build_h0,
    build_hg,
    build_lindblads,
    build_vplus,
    ground_indices,
    single_excitation_indices,
)
from .errors import SingularityError
from .liouvillian import Liouvillian, build_liouvillian
from .quantum_core import HilbertSpace, Operator, dagger

QUBIT_PAIR = HilbertSpace((2, 2))
MAX_CONDITION = 1e12


def qubit_pair_states() -> dict[str, np.ndarray]:
    k = QUBIT_PAIR.basis_ket
    return {
        "00": k(0, 0),
        "11": k(1, 1),
        "S": (k(0, 1) - k(1, 0)) / sqrt(2),
        "T": (k(0, 1) + k(1, 0)) / sqrt(2),
    }


@dataclass(frozen=True)
class SubspaceBlock:
    """Matrix of an operator restricted to the span of some basis vectors."""

    matrix: np.ndarray
    indices: tuple[int, ...]

    def embed(self, dim: int) -> np.ndarray:
        full = np.zeros((dim, dim), dtype=complex)
        full[np.ix_(self.indices, self.indices)] = self.matrix
        return full


@dataclass(frozen=True)
class EffectiveModel:
    h_eff: Operator
    l_eff: tuple[Operator, ...]
    labels: tuple[str, ...]
    # weight of the second-order operators outside the ground manifold
    residual_norm: float

    def lindblad(self, label: str) -> Operator:
        return self.l_eff[self.labels.index(label)]


@dataclass(frozen=True)
class EffectiveRates:
    kappa_eff_1: float
    kappa_eff_2: float
    # [two |11><S| channels, two |T><S| channels]
    gamma_eff_list: tuple[float, float, float, float]
    g_eff: float
    gamma_eff: float

    @property
    def singlet_loss(self) -> float:
        return self.kappa_eff_2 + sum(self.gamma_eff_list)


def non_hermitian_hamiltonian(p: ModelParams) -> SubspaceBlock:
    idx = single_excitation_indices(p)
    if not idx:
        raise ValueError("single-excitation subspace is empty")
    h = build_h0(p).matrix.copy()
    for op in build_lindblads(p):
        h -= 0.5j * (op.matrix.conj().T @ op.matrix)
    return SubspaceBlock(h[np.ix_(idx, idx)], tuple(idx))


def _inverse_nh(p: ModelParams) -> np.ndarray:
    block = non_hermitian_hamiltonian(p)
    cond = np.linalg.cond(block.matrix)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularityError(
            "non-Hermitian Hamiltonian is singular on the excited block",
            condition_number=float(cond),
        )
    inv = SubspaceBlock(np.linalg.inv(block.matrix), block.indices)
    return inv.embed(p.space.total_dim)


def _restrict_ground(m: np.ndarray, p: ModelParams) -> tuple[np.ndarray, float]:
    g = ground_indices(p)
    block = m[np.ix_(g, g)]
    outside = m.copy()
    outside[np.ix_(g, g)] = 0.0
    return block, float(np.linalg.norm(outside))


def effective_hamiltonian(p: ModelParams) -> Operator:
    h, _ = _effective_hamiltonian(p)
    return h


def _effective_hamiltonian(p: ModelParams):
    hinv = _inverse_nh(p)
    vp = build_vplus(p).matrix
    vm = vp.conj().T
    # only the second-order term can leak out of the ground manifold
    block, resid = _restrict_ground(-0.5 * vm @ (hinv + hinv.conj().T) @ vp, p)
    g = ground_indices(p)
    block = block + build_hg(p).matrix[np.ix_(g, g)]
    block = 0.5 * (block + block.conj().T)
    return Operator(QUBIT_PAIR, block), resid


def effective_lindblads(p: ModelParams) -> list[Operator]:
    return list(_effective_lindblads(p)[0])


def _effective_lindblads(p: ModelParams):
    hinv = _inverse_nh(p)
    vp = build_vplus(p).matrix
    ops, resid = [], 0.0
    for op in build_lindblads(p):
        block, r = _restrict_ground(op.matrix @ hinv @ vp, p)
        ops.append(Operator(QUBIT_PAIR, block))
        resid = max(resid, r)
    return ops, resid


def effective_model(p: ModelParams) -> EffectiveModel:
    h, rh = _effective_hamiltonian(p)
    ls, rl = _effective_lindblads(p)
    return EffectiveModel(h, tuple(ls), LINDBLAD_LABELS, max(rh, rl))


def analytic_effective_rates(p: ModelParams) -> EffectiveRates:
    if p.Delta == 0:
        raise ZeroDivisionError("analytic effective rates need a non-zero laser detuning Delta")
    g, k, gam, D, d = p.g, p.kappa, p.gamma, p.Delta, p.delta
    g_eff = g * p.Omega / D
    gamma_eff = gam * p.Omega**2 / (2 * D**2)
    width2 = (k / 2 + gam * d / (2 * D)) ** 2
    k1 = g_eff**2 * (k / 2) / ((g**2 / D - d) ** 2 + width2)
    k2 = g_eff**2 * (k / 2) / ((2 * g**2 / D - d) ** 2 + width2)
    gl = (gamma_eff / 8, gamma_eff / 8, gamma_eff / 16, gamma_eff / 16)
    return EffectiveRates(k1, k2, gl, g_eff, gamma_eff)


# (lindblad label, final state, initial state, index into the analytic list)
# Decay |e> -> |1> lands the singlet in |11>; decay |e> -> |0> lands in
# |01> or |10>, whose triplet part is the |T><S| channel.
_CHANNEL_MAP = (
    ("kappa", "S", "00", "kappa_eff_1"),
    ("kappa", "11", "S", "kappa_eff_2"),
    ("gamma_1_atom1", "11", "S", 0),
    ("gamma_1_atom2", "11", "S", 1),
    ("gamma_0_atom1", "T", "S", 2),
    ("gamma_0_atom2", "T", "S", 3),
)


@dataclass(frozen=True)
class CoefficientRow:
    channel: str
    element: str
    numeric: float
    analytic: float

    @property
    def rel_error(self) -> float:
        return abs(self.numeric - self.analytic) / abs(self.analytic) if self.analytic else float("inf")


def coefficient_table(p: ModelParams) -> list[CoefficientRow]:
    """|<f|L_eff|i>| from the numeric reduction next to the closed-form coefficient."""
    model = effective_model(p)
    rates = analytic_effective_rates(p)
    st = qubit_pair_states()
    rows = []
    for label, final, initial, key in _CHANNEL_MAP:
        op = model.lindblad(label).matrix
        numeric = abs(st[final].conj() @ op @ st[initial])
        rate = getattr(rates, key) if isinstance(key, str) else rates.gamma_eff_list[key]
        rows.append(CoefficientRow(label, f"|{final}><{initial}|", float(numeric), sqrt(rate)))
    return rows


def reduced_liouvillian(p: ModelParams) -> Liouvillian:
    model = effective_model(p)
    return build_liouvillian(model.h_eff, model.l_eff)


def collective_raising() -> Operator:
    """J_+ = |1><0| (x) 1 + 1 (x) |1><0| on the qubit pair."""
    up = np.array([[0, 0], [1, 0]], dtype=complex)
    eye = np.eye(2)
    return Operator(QUBIT_PAIR, np.kron(up, eye) + np.kron(eye, up))


def idealized_liouvillian(Omega_MW: float, kappa_eff: float) -> Liouvillian:
    """Microwave shuffling of the triplets plus the single pump |00> -> |S>."""
    jp = collective_raising()
    h = 0.5 * Omega_MW * (jp + dagger(jp))
    st = qubit_pair_states()
    pump = Operator(QUBIT_PAIR, sqrt(kappa_eff) * np.outer(st["S"], st["00"].conj()))
    return build_liouvillian(h, [pump])
