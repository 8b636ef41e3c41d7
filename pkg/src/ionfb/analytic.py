"""Closed-form steady-state occupations, used as oracles for the moment solver.

The variable-phase expression implemented here is the one consistent with
the steady state -M^{-1}u of the moment dynamics (and with the quoted slope
d<n>/dG at G = 0); see `nss_variable_phase` for the two coefficients that
differ from the commonly printed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UnstableError
from .params import DerivedRates


def nss_cold_damping(rates: DerivedRates, gain: float) -> float:
    """Steady-state <n> at phi = -pi/2, delta = 0.

    (N + (1/2) eta gt (2N - 1) G + (1/8) gt G^2) / (1 + 2 eta gt G)
    """
    gt = rates.gamma_tilde
    eta = rates.lamb_dicke
    n = rates.n_bar
    num = n + 0.5 * eta * gt * (2.0 * n - 1.0) * gain + gt * gain**2 / 8.0
    return num / (1.0 + 2.0 * eta * gt * gain)


def optimal_gain_cold_damping(rates: DerivedRates) -> tuple[float, float]:
    """Gain minimising the cold-damping occupation, and the minimum itself."""
    gt = rates.gamma_tilde
    eta = rates.lamb_dicke
    n = rates.n_bar
    b = eta**2 * gt
    root = math.sqrt(1.0 + 8.0 * (2.0 * n + 1.0) * b)
    g_min = (root - 1.0) / (2.0 * eta * gt)
    n_min = (4.0 * (2.0 * n - 1.0) * b - 1.0 + root) / (16.0 * b)
    return g_min, n_min


def nss_gain_slope(rates: DerivedRates, phase: float) -> float:
    """d<n>_ss/dG at G = 0 for delta = 0: (2N+1) eta gt sin(phi) / 2.

    Negative (cooling) exactly for -pi < phi < 0; at phi = -pi/2 this is the
    quoted slope -(2N+1) eta gt / 2.
    """
    return (
        0.5
        * (2.0 * rates.n_bar + 1.0)
        * rates.lamb_dicke
        * rates.gamma_tilde
        * math.sin(phase)
    )


def nss_variable_phase(rates: DerivedRates, gain: float, phase: float) -> float:
    """Steady-state <n> for arbitrary feedback phase at delta = 0.

    Derived from -M^{-1}u:

        <n>_ss = [N - (1/2)(4N-1) eta gt G s
                  + (1/8) gt G^2 (1 + 4 gt eta^2 (2N + 1 - 2 s^2))
                  - (1/8) eta gt^2 G^3 s] / [(1 - eta gt G s)(1 - 2 eta gt G s)]

    with s = sin(phase).  The printed literature form carries the G-linear
    term with opposite sign and the G^3 term without the 1/8; those versions
    fail both the phi = -pi/2 reduction and the published G = 0 slope, so the
    consistent coefficients are used here (the moment solver is authoritative
    either way).
    """
    gt = rates.gamma_tilde
    eta = rates.lamb_dicke
    n = rates.n_bar
    s = math.sin(phase)
    d1 = 1.0 - eta * gt * gain * s
    d2 = 1.0 - 2.0 * eta * gt * gain * s
    if d1 <= 0.0 or d2 <= 0.0:
        raise UnstableError(
            f"no steady state: gain {gain:g} exceeds 1/(2 eta gt sin phi)",
            eigenvalue=None,
        )
    num = (
        n
        - 0.5 * (4.0 * n - 1.0) * eta * gt * gain * s
        + gt * gain**2 / 8.0 * (1.0 + 4.0 * gt * eta**2 * (2.0 * n + 1.0 - 2.0 * s**2))
        - eta * gt**2 * gain**3 * s / 8.0
    )
    return num / (d1 * d2)


def nss_large_detuning(rates: DerivedRates, gain: float) -> float:
    """Steady-state <n> in the fast-rotation limit gamma << delta << B.

    (N - (1/2) eta gt G + (1/8) gt G^2) / (1 + eta gt G), the delta -> inf
    limit of the moment dynamics at phi = -pi/2.
    """
    gt = rates.gamma_tilde
    eta = rates.lamb_dicke
    n = rates.n_bar
    num = n - 0.5 * eta * gt * gain + gt * gain**2 / 8.0
    return num / (1.0 + eta * gt * gain)


def optimal_gain_large_detuning(rates: DerivedRates) -> tuple[float, float]:
    """Gain minimising the large-detuning occupation, and the minimum."""
    gt = rates.gamma_tilde
    eta = rates.lamb_dicke
    n = rates.n_bar
    g_min = (math.sqrt(1.0 + 4.0 * (2.0 * n + 1.0) * eta**2 * gt) - 1.0) / (eta * gt)
    return g_min, nss_large_detuning(rates, g_min)


def n_min_large_detuning(rates: DerivedRates) -> float:
    """Asymptotic minimum sqrt((1+a)/2 eps) - 1/2 - 2(1+a)/(8 eps N), N >> 1."""
    eps = rates.epsilon
    al = rates.alpha
    n = rates.n_bar
    return (
        math.sqrt((1.0 + al) / (2.0 * eps))
        - 0.5
        - 2.0 * (1.0 + al) / (8.0 * eps * n)
    )


@dataclass(frozen=True)
class DopplerAsymptote:
    """Large-N cold-damping minimum: exact value and two expansions.

    `series` is the expansion of the exact closed form,
    N/2 + (1/4) sqrt((1+a)/eps) - 1/4 - (1+a)/(16 eps N); `printed` is the
    commonly printed variant N/2 + 4 sqrt((1+a)/eps) - (1+a)/(eps N), whose
    coefficients disagree with the expansion (kept for comparison).
    """

    exact: float
    series: float
    printed: float


def n_min_doppler_asymptote(rates: DerivedRates) -> DopplerAsymptote:
    """Large-N expansions of the cold-damping minimum (N sqrt(eps) >> 1)."""
    import warnings

    from .errors import ParameterRegimeWarning

    n = rates.n_bar
    eps = rates.epsilon
    al = rates.alpha
    if n * math.sqrt(eps) <= 3.0:
        warnings.warn(
            f"N*sqrt(eps) = {n * math.sqrt(eps):.3g} <= 3; the large-N "
            "expansion is unreliable here",
            ParameterRegimeWarning,
            stacklevel=2,
        )
    _, exact = optimal_gain_cold_damping(rates)
    ratio = math.sqrt((1.0 + al) / eps)
    series = 0.5 * n + 0.25 * ratio - 0.25 - (1.0 + al) / (16.0 * eps * n)
    printed = 0.5 * n + 4.0 * ratio - (1.0 + al) / (n * eps)
    return DopplerAsymptote(exact=exact, series=series, printed=printed)
