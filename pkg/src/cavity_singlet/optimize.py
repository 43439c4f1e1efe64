"""Deterministic derivative-free minimizers: golden-section and coordinate descent."""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

INV_PHI = (sqrt(5) - 1) / 2


def golden_section(f, a: float, b: float, tol: float = 1e-3, max_iter: int = 200):
    """Minimize a unimodal f on [a, b]; returns (x, f(x), n_evals).

    Stops when the bracket is narrower than ``tol``.
    """
    if b < a:
        a, b = b, a
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    n = 2
    while b - a > tol and n < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        n += 1
    return (c, fc, n) if fc <= fd else (d, fd, n)


@dataclass
class DescentResult:
    x: np.ndarray
    fun: float
    n_evals: int
    n_cycles: int
    converged: bool


def coordinate_descent(
    f,
    x0,
    bounds,
    half_width: float = np.log(2.0),
    tol: float = 1e-3,
    max_cycles: int = 40,
) -> DescentResult:
    """Cyclic golden-section line searches along each coordinate.

    Each search covers ``x_i +- w_i`` clipped to ``bounds[i]``. A search that
    ends on an interior edge of its window doubles the window; otherwise the
    window shrinks to a few times the last move. Coordinates with equal
    lower and upper bounds are held fixed. Converged when a full cycle moves
    no coordinate by more than ``tol`` and no window edge was hit.
    """
    x = np.array(x0, dtype=float)
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    x = np.clip(x, [b[0] for b in bounds], [b[1] for b in bounds])
    w = np.full(x.size, float(half_width))
    fx = f(x)
    n_evals = 1

    for cycle in range(1, max_cycles + 1):
        biggest = 0.0
        edge_hit = False
        for i, (lo_b, hi_b) in enumerate(bounds):
            if hi_b - lo_b <= 0:
                continue
            lo = max(lo_b, x[i] - w[i])
            hi = min(hi_b, x[i] + w[i])

            def line(s, i=i):
                y = x.copy()
                y[i] = s
                return f(y)

            s, fs, n = golden_section(line, lo, hi, tol)
            n_evals += n
            step = 0.0
            if fs < fx:
                step = s - x[i]
                x[i], fx = s, fs
            hit = (x[i] - lo < 2 * tol and lo > lo_b) or (hi - x[i] < 2 * tol and hi < hi_b)
            if hit:
                w[i] *= 2.0
                edge_hit = True
            else:
                w[i] = max(3.0 * abs(step), 10.0 * tol)
            biggest = max(biggest, abs(step))
        if biggest < tol and not edge_hit:
            return DescentResult(x, fx, n_evals, cycle, True)
    return DescentResult(x, fx, n_evals, max_cycles, False)
