"""Fidelity estimates, optimized fidelity-cooperativity scaling, speed/accuracy trade-off."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import log, sqrt

import numpy as np

from .cavity_model import ModelParams
from .effective import EffectiveRates, analytic_effective_rates
from .errors import NumericalError
from .liouvillian import (
    atomic_state,
    evolve,
    model_liouvillian,
    singlet_fidelity,
    solve_steady_state,
    spectrum_and_gap,
    steady_state,
    trace_norm_distance,
)
from .optimize import coordinate_descent, golden_section

logger = logging.getLogger(__name__)

# drive ratios of the reference operating point: g = 20 Omega, Omega = 5 Omega_MW / 2
OPERATING_OMEGA_OVER_G = 1 / 20
OPERATING_MW_OVER_OMEGA = 2 / 5
WEAK_OMEGA_OVER_G = 1 / 200


class ConvergenceError(NumericalError):
    pass


@dataclass(frozen=True)
class RateEstimate:
    p00: float
    one_minus_F_est: float
    # the closed-form expression with the optimum-condition substitutions
    closed_form: float
    rates: EffectiveRates


def rate_equation_fidelity(p: ModelParams) -> RateEstimate:
    """Singlet infidelity from the ground-manifold rate balance.

    With the microwave drive keeping |00>, |T>, |11> equally populated the
    balance P_00 kappa_eff_1 = P_S (kappa_eff_2 + sum gamma_eff_i) and
    P_S + 3 P_00 = 1 give P_00; 1 - F is estimated as 3 P_00. All rates
    scale as Omega^2, so the result does not depend on Omega.
    """
    if p.kappa == 0 or p.g == 0:
        raise ZeroDivisionError("rate estimate needs kappa > 0 and g > 0")
    rates = analytic_effective_rates(p if p.Omega > 0 else p.with_(Omega=1.0))
    loss = rates.singlet_loss
    p00 = loss / (rates.kappa_eff_1 + 3 * loss)

    g, k, gam, D = p.g, p.kappa, p.gamma, p.Delta
    numer = 3 * gam / 16 + k * D**2 / (2 * g**2)
    denom = g**2 * k / (2 * (k / 2 + gam * g**2 / (2 * D**2)) ** 2)
    return RateEstimate(p00=p00, one_minus_F_est=3 * p00, closed_form=6 * numer / denom, rates=rates)


@dataclass(frozen=True)
class DriveConstraints:
    """Search ranges for the drives, as Omega/g and Omega_MW/Omega.

    The (Delta, delta) search runs at the start values; the final polish
    lets the drives move inside the ranges. Equal ends pin a drive.
    """

    omega_over_g: tuple[float, float] = (WEAK_OMEGA_OVER_G, OPERATING_OMEGA_OVER_G)
    mw_over_omega: tuple[float, float] = (0.1, 2.0)
    start_omega_over_g: float = OPERATING_OMEGA_OVER_G
    start_mw_over_omega: float = OPERATING_MW_OVER_OMEGA

    @classmethod
    def fixed(cls, omega_over_g: float = OPERATING_OMEGA_OVER_G, mw_over_omega: float = OPERATING_MW_OVER_OMEGA):
        return cls((omega_over_g, omega_over_g), (mw_over_omega, mw_over_omega), omega_over_g, mw_over_omega)


@dataclass(frozen=True)
class ScalingPoint:
    C: float
    kappa_over_gamma: float
    best_params: ModelParams
    fidelity: float
    one_minus_F: float
    gap: float
    converged: bool = True
    n_evals: int = 0
    residual_eigenvalue: float = 0.0

    def row(self) -> dict:
        p = self.best_params
        return {
            "C": self.C,
            "kappa_over_gamma": self.kappa_over_gamma,
            "fidelity": self.fidelity,
            "one_minus_F": self.one_minus_F,
            "Delta": p.Delta,
            "delta": p.delta,
            "Omega": p.Omega,
            "Omega_MW": p.Omega_MW,
            "gap": self.gap,
        }


def _params_from_x(base: ModelParams, x) -> ModelParams:
    g = base.g
    Delta = float(np.exp(x[0]))
    Omega = g * float(np.exp(x[2]))
    return base.with_(
        Delta=Delta,
        delta=g**2 / Delta * float(np.exp(x[1])),
        Omega=Omega,
        Omega_MW=Omega * float(np.exp(x[3])),
    )


def steady_fidelity(p: ModelParams) -> float:
    """Singlet fidelity of the unique steady state (fast linear solve)."""
    return singlet_fidelity(solve_steady_state(model_liouvillian(p)))


def optimize_fidelity(
    C: float,
    kappa_over_gamma: float,
    constraints: DriveConstraints | None = None,
    *,
    gamma: float = 1.0,
    n_max: int = 2,
    tol: float = 1e-3,
    max_cycles: int = 40,
) -> ScalingPoint:
    """Maximize the full-model steady-state singlet fidelity at fixed g, kappa, gamma.

    Coordinates are log(Delta), log(delta Delta / g^2), log(Omega / g) and
    log(Omega_MW / Omega), so ``tol`` is a relative parameter tolerance.
    The search starts from the rate-equation optimum gamma = kappa Delta^2 / 2 g^2
    with delta on the single-atom line shift g^2 / Delta.
    """
    if C <= 0:
        raise ValueError("cooperativity must be positive")
    cons = constraints or DriveConstraints()
    base = ModelParams.from_cooperativity(C, kappa_over_gamma, gamma=gamma, n_max=n_max)
    g = base.g
    delta0 = g * sqrt(2 * base.gamma / base.kappa)

    def objective(x):
        return -steady_fidelity(_params_from_x(base, x))

    log_om = (log(cons.omega_over_g[0]), log(cons.omega_over_g[1]))
    log_mw = (log(cons.mw_over_omega[0]), log(cons.mw_over_omega[1]))
    x0 = [log(delta0), 0.0, log(cons.start_omega_over_g), log(cons.start_mw_over_omega)]
    free = (-np.inf, np.inf)
    x_start = np.array(x0)

    # detunings at the start drives
    res1 = coordinate_descent(
        objective, x0, [free, free, (x0[2], x0[2]), (x0[3], x0[3])], tol=tol, max_cycles=max_cycles
    )
    # polish everything inside the drive ranges
    if log_om[0] < log_om[1] or log_mw[0] < log_mw[1]:
        x1 = res1.x.copy()
        x1[2] = np.clip(x1[2], *log_om)
        x1[3] = np.clip(x1[3], *log_mw)
        res = coordinate_descent(objective, x1, [free, free, log_om, log_mw], tol=tol, max_cycles=max_cycles)
        n_evals = res1.n_evals + res.n_evals
        converged = res1.converged and res.converged
    else:
        res, n_evals, converged = res1, res1.n_evals, res1.converged
    if not converged:
        warnings.warn(f"fidelity optimization at C={C} hit the cycle cap", RuntimeWarning, stacklevel=2)
    logger.debug("C=%s start=%s end=%s evals=%d", C, x_start, res.x, n_evals)

    best = _params_from_x(base, res.x)
    return audit_point(best, C, kappa_over_gamma, converged=converged, n_evals=n_evals)


def audit_point(p: ModelParams, C: float, kappa_over_gamma: float, **extra) -> ScalingPoint:
    """Re-solve at ``p`` with the eigendecomposition route and record the result."""
    l = model_liouvillian(p)
    ss = steady_state(l)
    if ss.degeneracy_flag:
        raise NumericalError("steady state is not unique at the optimum", params=p)
    F = singlet_fidelity(ss.rho_ss)
    gap = spectrum_and_gap(l).gap
    return ScalingPoint(
        C=C,
        kappa_over_gamma=kappa_over_gamma,
        best_params=p,
        fidelity=F,
        one_minus_F=1.0 - F,
        gap=gap,
        residual_eigenvalue=ss.residual_eigenvalue,
        **extra,
    )


def _optimize_star(args):
    C, kg, cons, kwargs = args
    return optimize_fidelity(C, kg, cons, **kwargs)


def sweep(
    C_list,
    kappa_over_gamma: float,
    constraints: DriveConstraints | None = None,
    *,
    jobs: int = 1,
    **kwargs,
) -> list[ScalingPoint]:
    """optimize_fidelity over a list of cooperativities; output order follows C_list."""
    tasks = [(float(C), kappa_over_gamma, constraints, kwargs) for C in C_list]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_optimize_star, tasks))
    return [_optimize_star(t) for t in tasks]


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    # intercept of the free log-log fit, i.e. A in 1 - F = A C^slope
    free_prefactor: float
    # least-squares A in 1 - F = A / C (slope pinned at -1)
    prefactor: float


def fit_scaling(C, one_minus_F) -> ScalingFit:
    lc = np.log(np.asarray(C, dtype=float))
    ly = np.log(np.asarray(one_minus_F, dtype=float))
    slope, intercept = np.polyfit(lc, ly, 1)
    pinned = float(np.exp(np.mean(ly + lc)))
    return ScalingFit(float(slope), float(np.exp(intercept)), pinned)


def operating_point(n_max: int = 2, **kwargs) -> ScalingPoint:
    """C = 50, kappa = gamma/2, drives pinned at the operating ratios, optimized detunings."""
    return optimize_fidelity(50.0, 0.5, DriveConstraints.fixed(), n_max=n_max, **kwargs)


@dataclass(frozen=True)
class TradeoffPoint:
    gap_target: float
    gap: float
    fidelity: float
    Omega: float
    Omega_MW: float


def _gap(p: ModelParams) -> float:
    return spectrum_and_gap(model_liouvillian(p)).gap


def _omega_for_gap(base: ModelParams, ratio: float, target: float, guess: float, lo: float, hi: float, rtol: float):
    """Omega with gap(Omega, Omega_MW = ratio Omega) = target, by log-log secant.

    Returns None when the target is above the gap reachable at ``hi``.
    """

    def gap_at(om):
        return _gap(base.with_(Omega=om, Omega_MW=ratio * om))

    om0 = float(np.clip(guess, lo, hi))
    g0 = gap_at(om0)
    # the gap grows roughly as Omega^2 in the perturbative regime
    om1 = float(np.clip(om0 * sqrt(target / g0), lo, hi)) if g0 > 0 else hi
    if om1 == om0:
        om1 = min(hi, om0 * 1.1) if g0 < target else max(lo, om0 / 1.1)
    g1 = gap_at(om1)
    for _ in range(30):
        if abs(g1 / target - 1) < rtol:
            return om1, g1
        if om1 >= hi and g1 < target:
            return None
        if om1 <= lo and g1 > target:
            return om1, g1
        x0, x1 = log(om0), log(om1)
        y0, y1 = log(max(g0, 1e-300)), log(max(g1, 1e-300))
        slope = (y1 - y0) / (x1 - x0) if x1 != x0 and y1 != y0 else 2.0
        if slope <= 0:
            slope = 2.0
        x2 = x1 + (log(target) - y1) / slope
        om2 = float(np.clip(np.exp(x2), lo, hi))
        om0, g0 = om1, g1
        om1, g1 = om2, gap_at(om2)
    return None


def gap_fidelity_tradeoff(
    C: float,
    kappa_over_gamma: float,
    gap_targets,
    *,
    n_max: int = 2,
    detunings: tuple[float, float] | None = None,
    mw_over_omega: tuple[float, float] = (0.05, 5.0),
    omega_over_g: tuple[float, float] = (1e-4, 0.5),
    gap_rtol: float = 0.05,
    ratio_tol: float = 0.02,
) -> list[TradeoffPoint]:
    """Best fidelity reachable at each prescribed Liouvillian gap.

    (Delta, delta) stay at their weak-drive optimum (or ``detunings``). For
    each target the search runs over Omega_MW/Omega; for every ratio Omega is
    tuned so the measured gap matches the target within ``gap_rtol / 5``.
    Targets that no drive in range can reach are dropped with a warning.
    """
    base = ModelParams.from_cooperativity(C, kappa_over_gamma, n_max=n_max)
    g = base.g
    if detunings is None:
        weak = optimize_fidelity(C, kappa_over_gamma, DriveConstraints.fixed(WEAK_OMEGA_OVER_G), n_max=n_max)
        detunings = (weak.best_params.Delta, weak.best_params.delta)
    base = base.with_(Delta=detunings[0], delta=detunings[1])
    lo, hi = omega_over_g[0] * g, omega_over_g[1] * g

    out = []
    for target in gap_targets:
        target = float(target)
        guess = {"Omega": OPERATING_OMEGA_OVER_G * g}
        found: dict[float, tuple] = {}

        def neg_fid(log_ratio):
            ratio = float(np.exp(log_ratio))
            sol = _omega_for_gap(base, ratio, target, guess["Omega"], lo, hi, gap_rtol / 5)
            if sol is None:
                return 1.0
            om, gp = sol
            if abs(gp / target - 1) > gap_rtol:
                return 1.0
            guess["Omega"] = om
            p = base.with_(Omega=om, Omega_MW=ratio * om)
            F = steady_fidelity(p)
            found[log_ratio] = (F, om, ratio * om, gp)
            return -F

        s, val, _ = golden_section(neg_fid, log(mw_over_omega[0]), log(mw_over_omega[1]), ratio_tol)
        if val >= 1.0 or not found:
            warnings.warn(f"gap target {target:g} is not reachable; point omitted", RuntimeWarning, stacklevel=2)
            continue
        F, om, omw, gp = max(found.values(), key=lambda v: v[0])
        out.append(TradeoffPoint(target, gp, F, om, omw))
    return out


@dataclass(frozen=True)
class ConvergenceResult:
    t: float
    g_t: float
    t_SI: float | None
    final_distance: float
    distances: np.ndarray = field(repr=False)
    t_grid: np.ndarray = field(repr=False)


def convergence_time(
    p: ModelParams,
    rho0,
    epsilon: float = 0.02,
    t_grid=None,
    *,
    g_SI: float | None = None,
    gamma_SI: float | None = None,
) -> ConvergenceResult:
    """First grid time where ||Tr_cav rho(t) - Tr_cav rho_ss||_1 < epsilon.

    Times are in 1/gamma. ``g_t`` is the same time in units of 1/g. An SI
    time is reported when the angular frequency ``g_SI`` (rad/s) or
    ``gamma_SI`` is given. The default grid spans 40/gap in 4000 steps.
    """
    l = model_liouvillian(p)
    ss = steady_state(l)
    if ss.degeneracy_flag:
        raise NumericalError("convergence time needs a unique steady state")
    target = atomic_state(ss.rho_ss)
    if t_grid is None:
        gap = spectrum_and_gap(l).gap
        t_grid = np.linspace(0.0, 40.0 / gap, 4001)
    t_grid = np.asarray(t_grid, dtype=float)

    d0 = trace_norm_distance(atomic_state(rho0), target)
    if d0 < epsilon:
        dist = np.array([d0])
        t_hit = 0.0
    else:
        states = evolve(l, rho0, t_grid)
        dist = np.array([trace_norm_distance(atomic_state(r), target) for r in states])
        below = np.nonzero(dist < epsilon)[0]
        if below.size == 0:
            raise ConvergenceError(
                "time grid exhausted before convergence", final_distance=float(dist[-1]), t_max=float(t_grid[-1])
            )
        t_hit = float(t_grid[below[0]])
    if g_SI is not None:
        t_SI = p.g * t_hit / g_SI
    elif gamma_SI is not None:
        t_SI = t_hit / gamma_SI
    else:
        t_SI = None
    return ConvergenceResult(t_hit, p.g * t_hit, t_SI, float(dist[-1]), dist, t_grid)
