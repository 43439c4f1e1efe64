"""Lindblad generator in superoperator form, steady states, spectra and dynamics.

With column-stacking vectorization the generator

    d rho/dt = -i[H, rho] + sum_j (L_j rho L_j^dag - 1/2 {L_j^dag L_j, rho})

becomes the matrix

    -i (1 (x) H - H^T (x) 1) + sum_j [ conj(L_j) (x) L_j
                                      - 1/2 (1 (x) L_j^dag L_j)
                                      - 1/2 ((L_j^dag L_j)^T (x) 1) ].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import ceil

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .cavity_model import GROUND_LABELS, AtomicStates, ModelParams, build_hamiltonian, build_lindblads
from .errors import EigensolverError, StiffnessError
from .quantum_core import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    partial_trace_last,
    unvectorize,
    vectorize,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Liouvillian:
    space: HilbertSpace
    matrix: np.ndarray
    hamiltonian: Operator = field(repr=False)
    lindblads: tuple[Operator, ...] = field(repr=False)
    sparse: sps.csc_matrix | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.space.total_dim

    def apply(self, rho) -> np.ndarray:
        """Generator acting on a density matrix, returned as a matrix."""
        return unvectorize(self.matrix @ vectorize(rho))

    def inf_norm(self) -> float:
        return float(np.abs(self.matrix).sum(axis=1).max(initial=0.0))


@dataclass(frozen=True)
class SteadyStateResult:
    rho_ss: DensityMatrix
    residual_eigenvalue: float
    degeneracy_flag: bool
    second_eigenvalue: float = float("nan")


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    gap: float
    zero_threshold: float


def build_liouvillian(h: Operator, ls, *, herm_atol: float = 1e-9) -> Liouvillian:
    space = h.space
    ls = tuple(ls)
    for op in ls:
        if op.space != space:
            raise ValueError(
                f"Lindblad operator on {op.space.factor_dims} but Hamiltonian on {space.factor_dims}"
            )
    hm = h.matrix
    dev = np.max(np.abs(hm - hm.conj().T), initial=0.0)
    if dev > herm_atol:
        raise ValueError(f"Hamiltonian is not Hermitian (max deviation {dev:.3g})")

    d = space.total_dim
    # assembled sparse: the dense Kronecker products dominate the cost otherwise
    eye = sps.identity(d, dtype=complex, format="csr")
    hs = sps.csr_matrix(hm)
    lm = -1j * (sps.kron(eye, hs) - sps.kron(hs.T, eye))
    for op in ls:
        c = sps.csr_matrix(op.matrix)
        cdc = (c.conj().T @ c).tocsr()
        lm = lm + sps.kron(c.conj(), c) - 0.5 * sps.kron(eye, cdc) - 0.5 * sps.kron(cdc.T, eye)
    lm = sps.csc_matrix(lm)
    return Liouvillian(space, lm.toarray(), h, ls, lm)


def model_liouvillian(p: ModelParams) -> Liouvillian:
    return build_liouvillian(build_hamiltonian(p), build_lindblads(p))


def _normalize_state(space: HilbertSpace, v: np.ndarray) -> DensityMatrix:
    rho = unvectorize(v)
    tr = np.trace(rho)
    if abs(tr) > 1e-14:
        rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(space, rho, check=False)


def _eig(matrix, right=True):
    try:
        return sla.eig(matrix, right=right, check_finite=True) if right else sla.eigvals(matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"eigendecomposition failed: {exc}") from exc


def steady_state(l: Liouvillian, tol: float = 1e-9) -> SteadyStateResult:
    """Eigenvector of the generator with the smallest-modulus eigenvalue.

    A second eigenvalue with modulus below ``tol`` flags a non-unique
    steady state; the returned state is then one arbitrary member of the
    stationary family.
    """
    w, vecs = _eig(l.matrix)
    order = np.argsort(np.abs(w))
    k0 = order[0]
    second = float(np.abs(w[order[1]])) if len(w) > 1 else float("inf")
    rho = _normalize_state(l.space, vecs[:, k0])
    return SteadyStateResult(
        rho_ss=rho,
        residual_eigenvalue=float(np.abs(w[k0])),
        degeneracy_flag=second < tol,
        second_eigenvalue=second,
    )


def solve_steady_state(l: Liouvillian) -> DensityMatrix:
    """Steady state from one (sparse) LU solve, replacing one equation by Tr rho = 1.

    Much cheaper than :func:`steady_state`; only meaningful when the
    stationary state is unique. Used inside optimization loops.
    """
    d = l.dim
    trace_row = vectorize(np.eye(d))
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    if l.sparse is not None:
        m = sps.vstack([sps.csr_matrix(trace_row), l.sparse.tocsr()[1:]]).tocsc()
        v = spla.splu(m).solve(b)
    else:
        m = l.matrix.copy()
        m[0, :] = trace_row
        v = sla.solve(m, b, check_finite=False)
    return _normalize_state(l.space, v)


def spectrum_and_gap(l: Liouvillian, zero_threshold: float | None = None, rel_threshold: float = 1e-10) -> SpectrumResult:
    """Full spectrum and gap = -max Re(lambda) over eigenvalues above the zero threshold.

    The default threshold is ``rel_threshold * max|lambda|``.
    """
    w = _eig(l.matrix, right=False)
    scale = float(np.max(np.abs(w), initial=0.0))
    thr = rel_threshold * scale if zero_threshold is None else zero_threshold
    nonzero = w[np.abs(w) > thr]
    gap = float(-np.max(nonzero.real)) if nonzero.size else 0.0
    return SpectrumResult(eigenvalues=w, gap=max(gap, 0.0), zero_threshold=thr)


def _rk4_propagator(lm: np.ndarray, dt: float, n: int) -> np.ndarray:
    """n classical RK4 steps of size dt/n for the linear ODE v' = L v.

    For a linear generator one RK4 step is exactly the degree-4 Taylor
    polynomial of exp(hL), so the n-step map is that polynomial to the
    n-th power.
    """
    h = dt / n
    hl = h * lm
    eye = np.eye(lm.shape[0], dtype=complex)
    step = eye + hl @ (eye + hl @ (eye + hl @ (eye + hl / 4) / 3) / 2)
    return np.linalg.matrix_power(step, n)


@dataclass
class EvolveStats:
    steps_per_interval: list[int] = field(default_factory=list)
    error_estimates: list[float] = field(default_factory=list)


def evolve(
    l: Liouvillian,
    rho0: Operator,
    t_grid,
    *,
    atol: float = 1e-10,
    step_factor: float = 0.05,
    max_refinements: int = 16,
    stats: EvolveStats | None = None,
) -> list[DensityMatrix]:
    """rho(t) on ``t_grid`` by fixed-step RK4 with a Richardson check per output point.

    The step is at most ``step_factor / ||L||_inf``. On every output
    interval the result with n steps is compared to the one with 2n steps;
    n is doubled until the estimated error of the finer solution is below
    ``atol`` (max-abs on vec(rho)).
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] != 0.0:
        raise ValueError("t_grid must be a 1-d array starting at 0")
    dts = np.diff(t)
    if np.any(dts <= 0):
        raise ValueError("t_grid must be strictly increasing")

    lm = l.matrix
    norm = l.inf_norm()
    h_max = step_factor / norm if norm > 0 else np.inf
    cache: dict[tuple[float, int], np.ndarray] = {}

    def prop(dt, n):
        key = (float(f"{dt:.12g}"), n)
        if key not in cache:
            cache[key] = _rk4_propagator(lm, dt, n)
        return cache[key]

    v = vectorize(rho0).astype(complex)
    out = [DensityMatrix(l.space, rho0.matrix, check=False)]
    refine = 0
    for dt in dts:
        n = max(1, ceil(dt / h_max)) if np.isfinite(h_max) else 1
        n <<= refine
        while True:
            coarse = prop(dt, n) @ v
            fine = prop(dt, 2 * n) @ v
            err = float(np.max(np.abs(fine - coarse))) / 15.0
            if err <= atol:
                break
            refine += 1
            n *= 2
            if refine > max_refinements or dt / n < 1e-14 * max(t[-1], 1.0):
                raise StiffnessError(
                    "step size underflow in RK4 integration",
                    interval=float(dt),
                    steps=n,
                    error_estimate=err,
                )
        if len(cache) > 8:
            # keep only the propagators for the current interval length
            for key in [k for k in cache if k[0] != float(f"{dt:.12g}")]:
                del cache[key]
        v = fine
        if stats is not None:
            stats.steps_per_interval.append(2 * n)
            stats.error_estimates.append(err)
        out.append(DensityMatrix(l.space, unvectorize(v), check=False))
    return out


def evolve_expm(l: Liouvillian, rho0: Operator, t_grid) -> list[np.ndarray]:
    """Reference solution exp(L t) rho0 by dense matrix exponential."""
    v0 = vectorize(rho0)
    return [unvectorize(sla.expm(l.matrix * t) @ v0) for t in np.asarray(t_grid, dtype=float)]


def atomic_state(rho: Operator, space: HilbertSpace | None = None) -> np.ndarray:
    """Two-atom reduced density matrix (cavity traced out)."""
    space = space or rho.space
    m = rho.matrix if isinstance(rho, Operator) else rho
    return partial_trace_last(m, space)


def populations(rho: Operator, states: AtomicStates | None = None) -> tuple[float, float, float, float]:
    """(P_S, P_T, P_00, P_11) of the cavity-traced atomic state."""
    states = states or AtomicStates.standard()
    ra = atomic_state(rho)
    return tuple(float(np.real(v.conj() @ ra @ v)) for v in (states.S, states.T, states.s00, states.s11))


def singlet_fidelity(rho: Operator) -> float:
    s = AtomicStates.standard().S
    return float(np.real(s.conj() @ atomic_state(rho) @ s))


def trace_norm_distance(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b||_1 for Hermitian a, b."""
    d = a - b
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def random_ground_state(p: ModelParams, seed: int = 0) -> DensityMatrix:
    """Haar-random pure state on span{|00>,|01>,|10>,|11>} with an empty cavity."""
    rng = np.random.default_rng(seed)
    amp = rng.normal(size=4) + 1j * rng.normal(size=4)
    amp /= np.linalg.norm(amp)
    psi = np.zeros(p.space.total_dim, dtype=complex)
    for a, (a1, a2) in zip(amp, GROUND_LABELS):
        psi[p.space.index(a1, a2, 0)] = a
    return DensityMatrix.from_ket(p.space, psi)
