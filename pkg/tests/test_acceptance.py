"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL verdict (printed in the terminal
summary) before asserting. Criteria run at their stated tolerances.
"""

import time

import numpy as np
import pytest

from cavity_singlet.analysis import (
    convergence_time,
    fit_scaling,
    operating_point,
    rate_equation_fidelity,
    steady_fidelity,
    sweep,
)
from cavity_singlet.cavity_model import ModelParams
from cavity_singlet.effective import coefficient_table, idealized_liouvillian, qubit_pair_states, reduced_liouvillian
from cavity_singlet.liouvillian import (
    build_liouvillian,
    evolve,
    evolve_expm,
    model_liouvillian,
    random_ground_state,
    spectrum_and_gap,
    steady_state,
)
from cavity_singlet.quantum_core import DensityMatrix, HilbertSpace, Operator, random_density_matrix, vectorize

pytestmark = pytest.mark.slow

C_GRID = [10.0, 20.0, 30.0, 50.0, 100.0, 200.0]
KAPPA_OVER_GAMMA = [1.0, 0.5, 2.0]
G_SI = 2 * np.pi * 35e6  # rad/s

RESULTS: dict[int, str] = {}


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[k] = line
    print(line)


_cache: dict = {}


def scaling(kg: float):
    if kg not in _cache:
        t0 = time.perf_counter()
        pts = sweep(C_GRID, kg)
        _cache[kg] = (pts, time.perf_counter() - t0)
    return _cache[kg]


def operating():
    if "operating" not in _cache:
        t0 = time.perf_counter()
        pt = operating_point()
        _cache["operating"] = (pt, time.perf_counter() - t0)
    return _cache["operating"]


def test_criterion_01_operating_point_fidelity():
    pt, secs = operating()
    ok = abs(pt.fidelity - 0.92) <= 0.02 and secs < 120
    p = pt.best_params
    record(1, ok, f"F = {pt.fidelity:.4f} (target 0.92 +- 0.02) at Delta = {p.Delta:.4g}, delta = {p.delta:.4g}; {secs:.0f} s")
    assert ok


def test_criterion_02_scaling_law():
    pts, secs = scaling(1.0)
    C = np.array([q.C for q in pts])
    y = np.array([q.one_minus_F for q in pts])
    fit = fit_scaling(C, y)
    slope_ok = abs(fit.slope + 1) <= 0.15
    pref_ok = abs(fit.prefactor - 3.5) <= 1.0
    bound_ok = bool(np.all(y <= 4.5 / C))
    ok = slope_ok and pref_ok and bound_ok and secs < 1800
    record(
        2,
        ok,
        f"slope {fit.slope:.3f} (need -1 +- 0.15: {'ok' if slope_ok else 'out'}), "
        f"prefactor {fit.prefactor:.3f} (need 3.5 +- 1: {'ok' if pref_ok else 'out'}), "
        f"max (1-F)C = {np.max(y * C):.3f} (need <= 4.5); {secs:.0f} s",
    )
    assert slope_ok
    assert pref_ok
    assert bound_ok
    assert secs < 1800


def test_criterion_03_kappa_insensitivity():
    prefs = {}
    for kg in KAPPA_OVER_GAMMA:
        pts, _ = scaling(kg)
        prefs[kg] = fit_scaling([q.C for q in pts], [q.one_minus_F for q in pts]).prefactor
    vals = np.array(list(prefs.values()))
    spread = (vals.max() - vals.min()) / vals.min()
    ok = spread < 0.30
    desc = ", ".join(f"{kg:g}: {v:.3f}" for kg, v in prefs.items())
    record(3, ok, f"prefactors by kappa/gamma {{{desc}}}; relative spread {spread:.3%} (need < 30%)")
    assert ok


def test_criterion_04_c30():
    pts, _ = scaling(1.0)
    F = next(q.fidelity for q in pts if q.C == 30.0)
    ok = F >= 0.88
    record(4, ok, f"F(C=30) = {F:.4f} (need >= 0.88)")
    assert ok


def test_criterion_05_convergence_time():
    pt, _ = operating()
    p = pt.best_params
    res = convergence_time(p, random_ground_state(p, 0), epsilon=0.02, g_SI=G_SI)
    t_ok = 500 <= res.g_t <= 2000
    si_ok = 2.5e-6 <= res.t_SI <= 10e-6
    ok = t_ok and si_ok
    record(
        5,
        ok,
        f"t = {res.g_t:.0f}/g (need 500..2000/g), t_SI = {res.t_SI * 1e6:.2f} us (need 2.5..10 us), "
        f"1/gap = {1 / pt.gap:.0f}/gamma",
    )
    assert t_ok
    assert si_ok


RESONANT = ModelParams(g=20.0, kappa=1.0, gamma=1.0, Omega=1.0, Omega_MW=0.2, Delta=40.0, delta=10.0)


def test_criterion_06_effective_operators():
    p = RESONANT  # Omega = g/20, delta = g^2/Delta = 10 kappa
    errs = []
    for om in (p.Omega, p.Omega / 2, p.Omega / 4):
        errs.append(np.array([r.rel_error for r in coefficient_table(p.with_(Omega=om))]))
    within = bool(np.all(errs[0] < 0.05))
    # the second-order operators are exactly linear in Omega, so the mismatch can only stay flat
    monotone = all(np.all(b <= a * (1 + 1e-9)) for a, b in zip(errs, errs[1:]))
    ok = within and monotone
    record(
        6,
        ok,
        f"max rel. error {errs[0].max():.2e} (need < 5%); after halving twice {errs[2].max():.2e} "
        f"({'non-increasing' if monotone else 'increasing'})",
    )
    assert within
    assert monotone


def test_criterion_07_reduced_model():
    pt, _ = operating()
    ss = steady_state(reduced_liouvillian(pt.best_params))
    s = qubit_pair_states()["S"]
    f_red = float(np.real(s.conj() @ ss.rho_ss.matrix @ s))
    diff = abs(f_red - pt.fidelity)
    ok = diff < 0.02 and not ss.degeneracy_flag
    record(7, ok, f"reduced F = {f_red:.4f}, full F = {pt.fidelity:.4f}, |diff| = {diff:.4f} (need < 0.02)")
    assert ok


def test_criterion_08_rate_equation():
    ratios, closed = [], []
    for kg in KAPPA_OVER_GAMMA:
        for q in scaling(kg)[0]:
            est = rate_equation_fidelity(q.best_params)
            ratios.append(est.one_minus_F_est / q.one_minus_F)
            closed.append(est.closed_form / q.one_minus_F)
    ratios = np.array(ratios)
    ok = bool(np.all((ratios >= 0.5) & (ratios <= 2.0)))
    record(
        8,
        ok,
        f"3 P_00 / (1-F) in [{ratios.min():.3f}, {ratios.max():.3f}] over {ratios.size} points (need 0.5..2); "
        f"closed-form/(1-F) in [{min(closed):.2f}, {max(closed):.2f}] (informational)",
    )
    assert ok


def _random_model(rng, d):
    s = HilbertSpace((d,))
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    ls = [Operator(s, 0.7 * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))) for _ in range(2)]
    return build_liouvillian(Operator(s, 0.5 * (a + a.conj().T)), ls)


def test_criterion_09_property_suite():
    checks = {}
    rng = np.random.default_rng(2024)
    oracle, null = 0.0, 0.0
    for d in (2, 3):
        for _ in range(5):
            l = _random_model(rng, d)
            rho0 = DensityMatrix(HilbertSpace((d,)), random_density_matrix(d, rng))
            t = np.linspace(0, 4.0, 9)
            out = evolve(l, rho0, t)
            ref = evolve_expm(l, rho0, t)
            oracle = max(oracle, max(np.max(np.abs(a.matrix - b)) for a, b in zip(out, ref)))
            null = max(null, np.max(np.abs(vectorize(np.eye(d)).conj() @ l.matrix)))
    checks["oracle"] = (oracle, oracle < 1e-7)

    pt, _ = operating()
    p = pt.best_params
    l = model_liouvillian(p)
    null = max(null, np.max(np.abs(vectorize(np.eye(l.dim)).conj() @ l.matrix)))
    checks["left null"] = (null, null < 1e-9)
    gap = spectrum_and_gap(l).gap
    out = evolve(l, random_ground_state(p, 0), np.linspace(0, 5 / gap, 21))
    drift = max(abs(np.trace(o.matrix) - 1) for o in out)
    checks["trace"] = (drift, drift < 1e-8)
    tol = 1e-9
    ss = steady_state(l, tol)
    states = out + [ss.rho_ss]
    pos = min(o.min_eigenvalue() for o in states)
    checks["positivity"] = (pos, pos >= -1e-8)
    resid = np.max(np.abs(l.apply(ss.rho_ss.matrix)))
    checks["residual"] = (resid, resid < 10 * tol)

    trunc = 0.0
    for q in [pt.best_params] + [x.best_params for x in scaling(1.0)[0]]:
        trunc = max(trunc, abs(steady_fidelity(q) - steady_fidelity(q.with_(n_max=3))))
    checks["n_max 2 vs 3"] = (trunc, trunc < 1e-4)

    ok = all(v[1] for v in checks.values())
    record(9, ok, "; ".join(f"{k} {v[0]:.1e}" + ("" if v[1] else " FAILED") for k, v in checks.items()))
    assert ok, checks


def test_criterion_10_idealized_fixed_point():
    l = idealized_liouvillian(Omega_MW=0.2, kappa_eff=0.05)
    ss = steady_state(l)
    s = qubit_pair_states()["S"]
    dev = float(np.max(np.abs(ss.rho_ss.matrix - np.outer(s, s.conj()))))
    gap = spectrum_and_gap(l).gap
    ok = dev < 1e-9 and gap > 0 and not ss.degeneracy_flag
    record(10, ok, f"max |rho_ss - |S><S|| = {dev:.1e} (need < 1e-9), gap = {gap:.4g} (need > 0)")
    assert ok
