"""Gain and phase optimisation of the steady-state occupation.

Golden-section searches over the steady state of the moment dynamics.
Unstable parameter points count as +inf; a coarse pre-scan guards against
multi-modality (the curves are smooth single-minimum in practice) and falls
back to grid refinement when it triggers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoStableGainError, UnstableError
from .moments import (
    FeedbackConfig,
    build_drift_diffusion,
    phonon_number,
    squeezing_parameter,
    steady_state_moments,
)
from .params import DerivedRates

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section(fun, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Minimiser of a unimodal function on [lo, hi] to absolute tolerance.

    Ties resolve toward the smaller argument.
    """
    span = hi - lo
    if span <= tol:
        return 0.5 * (lo + hi)
    n_iter = int(math.ceil(math.log(tol / span) / math.log(_INVPHI)))
    c = lo + _INVPHI2 * span
    d = lo + _INVPHI * span
    fc = fun(c)
    fd = fun(d)
    for _ in range(max(0, n_iter - 1)):
        if fc <= fd:
            hi, d, fd = d, c, fc
            span *= _INVPHI
            c = lo + _INVPHI2 * span
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            span *= _INVPHI
            d = lo + _INVPHI * span
            fd = fun(d)
    return 0.5 * (lo + d) if fc <= fd else 0.5 * (c + hi)


def _nss(rates: DerivedRates, gain: float, phase: float, delta_tilde: float) -> float:
    fb = FeedbackConfig(gain=gain, phase=phase, delta_tilde=delta_tilde)
    try:
        state = steady_state_moments(build_drift_diffusion(rates, fb))
    except UnstableError:
        return math.inf
    return phonon_number(state)


def minimize_over_gain(
    rates: DerivedRates,
    phase: float,
    delta_tilde: float = 0.0,
    g_range: tuple[float, float] = (0.0, 10.0),
    tol: float = 1e-6,
    prescan: int = 64,
) -> tuple[float, float]:
    """(G*, <n>*) minimising the steady-state occupation over the gain."""
    lo, hi = g_range
    grid = np.linspace(lo, hi, prescan)
    vals = np.array([_nss(rates, g, phase, delta_tilde) for g in grid])
    finite = np.isfinite(vals)
    if not finite.any():
        raise NoStableGainError(
            f"no stable gain in [{lo:g}, {hi:g}] at phase {phase:g}"
        )
    # restrict to the largest stable prefix (instability is one-sided in G)
    if not finite.all():
        first_bad = int(np.argmin(finite))
        grid, vals = grid[:first_bad], vals[:first_bad]
    kbest = int(np.argmin(vals))
    # unimodality guard: a second separated local minimum triggers grid+refine
    interior = vals[1:-1]
    local_min = (interior < vals[:-2]) & (interior <= vals[2:])
    n_local = int(local_min.sum()) + int(vals[0] < vals[1]) + int(
        vals[-1] < vals[-2]
    )
    fun = lambda g: _nss(rates, g, phase, delta_tilde)
    if n_local > 1:
        fine = np.linspace(grid[0], grid[-1], 2048)
        fvals = np.array([fun(g) for g in fine])
        kbest_f = int(np.argmin(fvals))
        lo_b = fine[max(0, kbest_f - 1)]
        hi_b = fine[min(fine.size - 1, kbest_f + 1)]
        g_opt = golden_section(fun, lo_b, hi_b, tol)
    else:
        lo_b = grid[max(0, kbest - 1)]
        hi_b = grid[min(grid.size - 1, kbest + 1)]
        g_opt = golden_section(fun, lo_b, hi_b, tol)
    return g_opt, fun(g_opt)


@dataclass(frozen=True)
class OptimalPoint:
    delta_tilde: float
    phase: float
    gain: float
    n_ss: float
    squeezing: float


def optimal_phase_vs_detuning(
    rates: DerivedRates,
    delta_grid,
    phase_range: tuple[float, float] = (-math.pi + 1e-3, -1e-3),
    g_range: tuple[float, float] = (0.0, 10.0),
    phase_tol: float = 1e-4,
    gain_tol: float = 1e-6,
) -> list[OptimalPoint]:
    """Optimal (phase, gain) and the resulting state along a detuning grid.

    Nested optimisation: golden-section over the phase with an inner gain
    minimisation; the squeezing parameter of the optimal steady state is
    reported for each detuning.
    """
    points = []
    for dl in np.asarray(delta_grid, dtype=float):

        def best_n(phase):
            try:
                return minimize_over_gain(
                    rates, phase, dl, g_range=g_range, tol=gain_tol
                )[1]
            except NoStableGainError:
                return math.inf

        phi_opt = golden_section(best_n, phase_range[0], phase_range[1], phase_tol)
        g_opt, n_opt = minimize_over_gain(
            rates, phi_opt, dl, g_range=g_range, tol=gain_tol
        )
        fb = FeedbackConfig(gain=g_opt, phase=phi_opt, delta_tilde=dl)
        state = steady_state_moments(build_drift_diffusion(rates, fb))
        points.append(
            OptimalPoint(
                delta_tilde=float(dl),
                phase=phi_opt,
                gain=g_opt,
                n_ss=n_opt,
                squeezing=squeezing_parameter(state),
            )
        )
    return points


def write_optimal_curve(path, points) -> None:
    """CSV columns: delta_tilde, phi_opt_deg, g_opt, n_min, r_sigma."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("delta_tilde,phi_opt_deg,g_opt,n_min,r_sigma\n")
        for p in points:
            row = (
                p.delta_tilde,
                math.degrees(p.phase),
                p.gain,
                p.n_ss,
                p.squeezing,
            )
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
