import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_singlet.cavity_model import AtomicStates, ModelParams
from cavity_singlet.errors import StiffnessError
from cavity_singlet.liouvillian import (
    EvolveStats,
    atomic_state,
    build_liouvillian,
    evolve,
    evolve_expm,
    model_liouvillian,
    populations,
    random_ground_state,
    singlet_fidelity,
    solve_steady_state,
    spectrum_and_gap,
    steady_state,
    trace_norm_distance,
)
from cavity_singlet.quantum_core import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    random_density_matrix,
    unvectorize,
    vectorize,
)

Q = HilbertSpace((2,))
SM = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)

# operating point near the optimum at C=50, kappa=gamma/2, Omega=g/20, Omega_MW=2 Omega/5
OPERATING = ModelParams(g=5.0, kappa=0.5, Omega=0.25, Omega_MW=0.1, Delta=7.76, delta=3.136)


def qop(m):
    return Operator(Q, m)


def amplitude_damping(kappa):
    return build_liouvillian(Operator.zero(Q), [qop(np.sqrt(kappa) * SM)])


def random_model(rng, d, n_ls=2):
    s = HilbertSpace((d,))
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = Operator(s, 0.5 * (a + a.conj().T))
    ls = [Operator(s, 0.7 * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))) for _ in range(n_ls)]
    return build_liouvillian(h, ls)


def random_rho(rng, d):
    return DensityMatrix(HilbertSpace((d,)), random_density_matrix(d, rng))


def reference_rhs(h, ls, rho):
    out = -1j * (h @ rho - rho @ h)
    for c in ls:
        cdc = c.conj().T @ c
        out += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
    return out


@pytest.fixture(scope="module")
def operating():
    l = model_liouvillian(OPERATING)
    return l, steady_state(l), spectrum_and_gap(l)


def test_zero_generator():
    l = build_liouvillian(Operator.zero(Q), [])
    assert not l.matrix.any()
    sp = spectrum_and_gap(l)
    assert sp.gap == 0.0 and np.all(sp.eigenvalues == 0)


def test_amplitude_damping_action():
    k = 0.8
    l = amplitude_damping(k)
    out = l.apply(np.diag([0.0, 1.0]))
    assert np.allclose(out, k * np.diag([1.0, -1.0]), atol=1e-15)


def test_generator_matches_commutator_form():
    rng = np.random.default_rng(7)
    l = random_model(rng, 3)
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    ref = reference_rhs(l.hamiltonian.matrix, [c.matrix for c in l.lindblads], x)
    assert np.allclose(l.apply(x), ref, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 3, 4]))
def test_left_null_vector(seed, d):
    l = random_model(np.random.default_rng(seed), d)
    assert np.max(np.abs(vectorize(np.eye(d)).conj() @ l.matrix)) < 1e-9


def test_build_rejects_bad_inputs():
    with pytest.raises(ValueError, match="Hermitian"):
        build_liouvillian(qop(SM), [])
    with pytest.raises(ValueError):
        build_liouvillian(Operator.zero(Q), [Operator.zero(HilbertSpace((3,)))])


def test_amplitude_damping_spectrum_and_steady_state():
    k = 1.3
    l = amplitude_damping(k)
    sp = spectrum_and_gap(l)
    assert np.allclose(np.sort(sp.eigenvalues.real), [-k, -k / 2, -k / 2, 0.0], atol=1e-12)
    assert np.isclose(sp.gap, k / 2)
    ss = steady_state(l)
    assert not ss.degeneracy_flag
    assert np.allclose(ss.rho_ss.matrix, np.diag([1.0, 0.0]), atol=1e-12)
    assert np.allclose(solve_steady_state(l).matrix, ss.rho_ss.matrix, atol=1e-12)


def test_dephasing_is_degenerate():
    l = build_liouvillian(Operator.zero(Q), [qop(np.sqrt(0.5) * SZ)])
    assert steady_state(l).degeneracy_flag


def test_eigenvalues_in_left_half_plane():
    rng = np.random.default_rng(11)
    for d in (2, 3):
        w = spectrum_and_gap(random_model(rng, d)).eigenvalues
        assert w.real.max() <= 1e-9


def test_evolve_t0_exact():
    rng = np.random.default_rng(12)
    l = random_model(rng, 3)
    rho0 = random_rho(rng, 3)
    out = evolve(l, rho0, [0.0, 0.3])
    assert np.array_equal(out[0].matrix, rho0.matrix)


def test_rabi_oscillation():
    w = 0.9
    l = build_liouvillian(qop(0.5 * w * SX), [])
    t = np.linspace(0, 20, 81)
    out = evolve(l, DensityMatrix(Q, np.diag([1.0, 0.0])), t)
    p1 = np.array([o.matrix[1, 1].real for o in out])
    assert np.max(np.abs(p1 - np.sin(w * t / 2) ** 2)) < 1e-6


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 3]))
def test_evolve_matches_matrix_exponential(seed, d):
    rng = np.random.default_rng(seed)
    l = random_model(rng, d)
    rho0 = random_rho(rng, d)
    t = np.linspace(0, 3.0, 7)
    out = evolve(l, rho0, t)
    ref = evolve_expm(l, rho0, t)
    for a, b in zip(out, ref):
        assert np.max(np.abs(a.matrix - b)) < 1e-7
        assert abs(np.trace(a.matrix) - 1) < 1e-8
        assert np.max(np.abs(a.matrix - a.matrix.conj().T)) < 1e-10
        assert np.linalg.eigvalsh(a.matrix).min() >= -1e-8


def test_evolve_records_error_estimates():
    rng = np.random.default_rng(13)
    l = random_model(rng, 2)
    stats = EvolveStats()
    evolve(l, random_rho(rng, 2), np.linspace(0, 1, 5), stats=stats)
    assert len(stats.steps_per_interval) == 4
    assert max(stats.error_estimates) <= 1e-10


def test_evolve_reports_stiffness():
    rng = np.random.default_rng(14)
    l = random_model(rng, 2)
    with pytest.raises(StiffnessError) as exc:
        evolve(l, random_rho(rng, 2), [0.0, 1.0], atol=0.0, max_refinements=2)
    assert "steps" in exc.value.diagnostics


def test_evolve_rejects_bad_grid():
    l = amplitude_damping(1.0)
    rho0 = DensityMatrix(Q, np.diag([0.0, 1.0]))
    with pytest.raises(ValueError):
        evolve(l, rho0, [0.1, 0.2])
    with pytest.raises(ValueError):
        evolve(l, rho0, [0.0, 0.2, 0.2])


def test_populations_examples():
    st_ = AtomicStates.standard()
    full = st_.on_full_space(OPERATING)
    singlet = DensityMatrix.from_ket(OPERATING.space, full["S"])
    assert np.allclose(populations(singlet), (1, 0, 0, 0), atol=1e-15)
    rho = sum(np.outer(full[k], full[k].conj()) for k in ("00", "11", "S", "T")) / 4
    assert np.allclose(populations(DensityMatrix(OPERATING.space, rho)), (0.25,) * 4, atol=1e-15)


def test_random_ground_state_is_seeded_and_pure():
    a, b = random_ground_state(OPERATING, 3), random_ground_state(OPERATING, 3)
    assert np.array_equal(a.matrix, b.matrix)
    assert np.isclose(np.trace(a.matrix @ a.matrix).real, 1.0)
    assert np.isclose(sum(populations(a)), 1.0)


def test_full_model_steady_state(operating):
    l, ss, sp = operating
    assert not ss.degeneracy_flag
    resid = unvectorize(l.matrix @ vectorize(ss.rho_ss.matrix))
    assert np.max(np.abs(resid)) < 10 * 1e-9
    assert ss.rho_ss.min_eigenvalue() >= -1e-8
    ps = populations(ss.rho_ss)
    assert all(-1e-12 <= x <= 1 + 1e-9 for x in ps)
    # the complement of the four ground populations is excited or photon population
    assert sum(ps) <= 1 + 1e-12
    fast = solve_steady_state(l)
    assert abs(singlet_fidelity(fast) - singlet_fidelity(ss.rho_ss)) < 1e-9
    assert sp.gap > 0


def test_full_model_relaxes_to_steady_state(operating):
    l, ss, sp = operating
    t = np.linspace(0, 20 / sp.gap, 41)
    out = evolve(l, random_ground_state(OPERATING, 0), t)
    assert trace_norm_distance(out[-1].matrix, ss.rho_ss.matrix) < 1e-5
    assert max(abs(np.trace(o.matrix) - 1) for o in out) < 1e-8
    assert min(o.min_eigenvalue() for o in out) >= -1e-8

    # exponential envelope of the atomic distance decays at a rate set by the gap
    target = atomic_state(ss.rho_ss)
    d = np.array([trace_norm_distance(atomic_state(o), target) for o in out])
    mask = (t > 2 / sp.gap) & (d > 1e-7)
    rate = -np.polyfit(t[mask], np.log(d[mask]), 1)[0]
    assert 0.5 < rate * (1 / sp.gap) < 2.0
