"""Gaussian (Wigner-function) moment dynamics of the feedback-cooled ion.

Everything here is expressed in units with gamma_eff = 1: times are measured
in 1/gamma_eff, and the drift/diffusion matrices returned by
`build_drift_diffusion` are dimensionless.  Phase-space variables are the
scaled pair zbar = (a + a^dag)/2, pbar = (a - a^dag)/(2i), so the vacuum has
variance 1/4 and <n> = <zbar^2> + <pbar^2> - 1/2.

The first moments obey d<x>/dt = -kappa <x> with the 2x2 drift

    kappa = (1/2) [[1, -2*dl], [2*Gt*cos(phi) + 2*dl, 1 - 2*Gt*sin(phi)]],

Gt = G*eta*gamma_tilde, dl the local-oscillator detuning over gamma_eff.
The second moments y = (<z^2>, <p^2>, <zp>) obey dy/dt = M y + u.  M and u
follow from kappa and the diffusion matrix; note that with the symmetrised
cross moment stored as <zp> (not <zp + pz>) the off-diagonal entries differ
by factors of two from writing the same dynamics for (<z^2>, <p^2>, <zp+pz>).
Both conventions share the diagonal, the spectrum, and y1, y2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import (
    DegenerateStateError,
    ParameterRegimeWarning,
    PhysicalityWarning,
    UnstableError,
)
from .params import DerivedRates

#: minimum uncertainty product var_z*var_p - cov^2 for the scaled variables
UNCERTAINTY_BOUND = 1.0 / 16.0


@dataclass(frozen=True)
class FeedbackConfig:
    """Feedback loop settings: gain, demodulation phase, LO detuning.

    `delta_tilde` is the local-oscillator detuning delta = omega_0 - nu_T in
    units of gamma_eff.  `bandwidth` (same units) and `delay` (units of
    1/gamma_eff) only enter the timescale checks; the coarse-grained dynamics
    treat the filter as instantaneous and the delay as zero.
    """

    gain: float
    phase: float = -math.pi / 2
    delta_tilde: float = 0.0
    bandwidth: float | None = None
    delay: float = 0.0

    def __post_init__(self):
        if self.delay < 0.0:
            raise ValueError("delay must be non-negative")

    def g_tilde(self, rates: DerivedRates) -> float:
        """Loop gain G*eta*gamma_tilde entering the drift matrix."""
        return self.gain * rates.lamb_dicke * rates.gamma_tilde

    def check_timescales(
        self,
        rates: DerivedRates,
        trap_frequency: float | None = None,
        margin: float = 10.0,
    ) -> None:
        """Warn when G*gamma, |delta|, gamma_eff << B << nu_T is violated.

        All quantities are compared in gamma_eff units; `margin` is the factor
        demanded between consecutive scales.
        """
        if self.bandwidth is None:
            return
        slow = max(1.0, abs(self.delta_tilde), self.gain * rates.gamma_tilde)
        if self.bandwidth < margin * slow:
            warnings.warn(
                f"filter bandwidth {self.bandwidth:g} is not >> slow scales "
                f"(max {slow:g}, margin {margin:g})",
                ParameterRegimeWarning,
                stacklevel=2,
            )
        if trap_frequency is not None:
            if margin * self.bandwidth > trap_frequency:
                warnings.warn(
                    f"trap frequency {trap_frequency:g} is not >> bandwidth "
                    f"{self.bandwidth:g} (margin {margin:g})",
                    ParameterRegimeWarning,
                    stacklevel=2,
                )
            if self.delay * trap_frequency > 0.1:
                warnings.warn(
                    f"feedback delay {self.delay:g} is not << trap period",
                    ParameterRegimeWarning,
                    stacklevel=2,
                )


@dataclass(frozen=True)
class GaussianMomentState:
    """First moments and central covariances of the Wigner function."""

    mean_z: float
    mean_p: float
    var_z: float
    var_p: float
    cov_zp: float = 0.0

    def __post_init__(self):
        if self.var_z <= 0.0 or self.var_p <= 0.0:
            raise ValueError("variances must be positive")
        det = self.var_z * self.var_p - self.cov_zp**2
        if det < UNCERTAINTY_BOUND * (1.0 - 1e-9):
            warnings.warn(
                f"uncertainty product {det:.6g} below the bound 1/16; the "
                "feedback generator does not guarantee physicality for all "
                "gains",
                PhysicalityWarning,
                stacklevel=2,
            )

    @classmethod
    def thermal(cls, n_bar: float) -> "GaussianMomentState":
        v = (2.0 * n_bar + 1.0) / 4.0
        return cls(0.0, 0.0, v, v, 0.0)

    @classmethod
    def vacuum(cls) -> "GaussianMomentState":
        return cls.thermal(0.0)

    @property
    def second_moments(self) -> np.ndarray:
        """Raw moments y = (<z^2>, <p^2>, <zp>), means included."""
        return np.array(
            [
                self.var_z + self.mean_z**2,
                self.var_p + self.mean_p**2,
                self.cov_zp + self.mean_z * self.mean_p,
            ]
        )

    @property
    def phonon(self) -> float:
        y = self.second_moments
        return float(y[0] + y[1] - 0.5)


@dataclass(frozen=True, eq=False)
class DriftDiffusion:
    """Drift/diffusion matrices of the moment dynamics (gamma_eff = 1)."""

    kappa: np.ndarray
    diffusion: np.ndarray
    emat: np.ndarray
    source: np.ndarray
    n_bar: float
    gamma_tilde: float
    eta: float
    gain: float
    phase: float
    delta_tilde: float
    g_tilde: float
    gamma_eff: float = 1.0


def build_drift_diffusion(rates: DerivedRates, fb: FeedbackConfig) -> DriftDiffusion:
    """Assemble kappa, D and the second-moment system (M, u)."""
    r = rates.normalized()
    gt = r.gamma_tilde
    n = r.n_bar
    eta = r.lamb_dicke
    s, c = math.sin(fb.phase), math.cos(fb.phase)
    dl = fb.delta_tilde
    big_g = fb.gain * eta * gt
    kappa = 0.5 * np.array(
        [
            [1.0, -2.0 * dl],
            [2.0 * big_g * c + 2.0 * dl, 1.0 - 2.0 * big_g * s],
        ]
    )
    diffusion = 0.125 * np.diag([2 * n + 1, 2 * n + 1 + 0.5 * gt * fb.gain**2])
    emat = -np.array(
        [
            [1.0, 0.0, -2.0 * dl],
            [0.0, 1.0 - 2.0 * big_g * s, 2.0 * (big_g * c + dl)],
            [big_g * c + dl, -dl, 1.0 - big_g * s],
        ]
    )
    source = np.array([2.0 * diffusion[0, 0], 2.0 * diffusion[1, 1], 0.0])
    return DriftDiffusion(
        kappa=kappa,
        diffusion=diffusion,
        emat=emat,
        source=source,
        n_bar=n,
        gamma_tilde=gt,
        eta=eta,
        gain=fb.gain,
        phase=fb.phase,
        delta_tilde=dl,
        g_tilde=big_g,
        gamma_eff=rates.gamma_eff,
    )


def solve3(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting for a 3x3 system."""
    a = np.array(mat, dtype=float)
    b = np.array(rhs, dtype=float)
    n = 3
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if a[piv, col] == 0.0:
            raise np.linalg.LinAlgError("singular 3x3 system")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        for row in range(col + 1, n):
            f = a[row, col] / a[col, col]
            a[row, col:] -= f * a[col, col:]
            b[row] -= f * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]
    return x


def steady_state_moments(dd: DriftDiffusion) -> GaussianMomentState:
    """Steady state y_ss = -M^{-1} u; raises UnstableError if M is not Hurwitz."""
    eigs = np.linalg.eigvals(dd.emat)
    worst = eigs[np.argmax(eigs.real)]
    if worst.real >= 0.0:
        raise UnstableError(
            f"moment matrix has eigenvalue {worst:.6g} with non-negative real part",
            eigenvalue=worst,
        )
    y = solve3(dd.emat, -dd.source)
    resid = np.linalg.norm(dd.emat @ y + dd.source)
    if resid > 1e-10 * max(np.linalg.norm(dd.source), 1e-300):
        raise ArithmeticError(f"steady-state solve residual {resid:g} too large")
    return GaussianMomentState(0.0, 0.0, y[0], y[1], y[2])


def _propagators(dd: DriftDiffusion, t: float):
    mean_prop = expm(-dd.kappa * t)
    aug = np.zeros((4, 4))
    aug[:3, :3] = dd.emat
    aug[:3, 3] = dd.source
    cov_prop = expm(aug * t)
    return mean_prop, cov_prop


def evolve_moments(
    dd: DriftDiffusion,
    s0: GaussianMomentState,
    t_grid,
    method: str = "exact",
    rtol: float = 1e-9,
) -> list[GaussianMomentState]:
    """Propagate means (by -kappa) and covariances (by M, u) along t_grid.

    `method="exact"` uses matrix exponentials of the constant generators
    (valid for any stability); `method="adaptive"` integrates with an
    adaptive Runge-Kutta at relative tolerance `rtol`.  The grid must be
    strictly increasing and start at 0.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0.0):
        raise ValueError("t_grid must be strictly increasing from 0")
    m0 = np.array([s0.mean_z, s0.mean_p])
    c0 = np.array([s0.var_z, s0.var_p, s0.cov_zp, 1.0])
    out = []
    if method == "exact":
        for t in t_grid:
            mean_prop, cov_prop = _propagators(dd, t)
            m = mean_prop @ m0
            c = cov_prop @ c0
            out.append(GaussianMomentState(m[0], m[1], c[0], c[1], c[2]))
        return out
    if method != "adaptive":
        raise ValueError(f"unknown method {method!r}")

    def rhs(_t, v):
        dm = -dd.kappa @ v[:2]
        dc = dd.emat @ v[2:] + dd.source
        return np.concatenate([dm, dc])

    sol = solve_ivp(
        rhs,
        (0.0, float(t_grid[-1])),
        np.concatenate([m0, c0[:3]]),
        t_eval=t_grid,
        method="RK45",
        rtol=rtol,
        atol=1e-12,
    )
    if not sol.success:
        raise RuntimeError(f"moment integration failed: {sol.message}")
    for k in range(t_grid.size):
        v = sol.y[:, k]
        out.append(GaussianMomentState(v[0], v[1], v[2], v[3], v[4]))
    return out


def phonon_number(state: GaussianMomentState) -> float:
    """Mean occupation <n> = <z^2> + <p^2> - 1/2 (raw moments)."""
    return state.phonon


def squeezing_parameter(state: GaussianMomentState) -> float:
    """Minor/major axis ratio of the covariance ellipse, in (0, 1]."""
    tr = state.var_z + state.var_p
    if tr <= 0.0:
        raise DegenerateStateError("total variance is not positive")
    f = math.hypot(state.var_z - state.var_p, 2.0 * state.cov_zp) / tr
    return (1.0 - f) / (1.0 + f)


@dataclass(frozen=True)
class StabilityReport:
    is_stable: bool
    slowest_eigenvalue: complex
    decay_rates: np.ndarray
    critical_gain: float | None


def stability_margin(dd: DriftDiffusion) -> StabilityReport:
    """Spectral stability of M plus the closed-form critical gain.

    For sin(phi) > 0 the cold-damping analysis at delta = 0 gives the gain
    bound G < 1/(2 eta gamma_tilde sin phi); that closed form is reported
    whenever sin(phi) > 0.
    """
    eigs = np.linalg.eigvals(dd.emat)
    worst = eigs[np.argmax(eigs.real)]
    critical = None
    s = math.sin(dd.phase)
    if s > 0.0:
        critical = 1.0 / (2.0 * dd.eta * dd.gamma_tilde * s)
    return StabilityReport(
        is_stable=bool(worst.real < 0.0),
        slowest_eigenvalue=worst,
        decay_rates=-np.sort(eigs.real)[::-1],
        critical_gain=critical,
    )


def write_moment_series(path, times, states) -> None:
    """Write a moment time series as CSV (full double precision)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,mean_z,mean_p,var_z,var_p,cov_zp,n\n")
        for t, s in zip(times, states):
            row = (t, s.mean_z, s.mean_p, s.var_z, s.var_p, s.cov_zp, s.phonon)
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
