"""Physical parameters and derived laser-cooling / mirror-mode rates.

Conventions: hbar = 1, all frequencies and rates are angular.  The ion sits
at the half-fringe point of the mirror standing wave (k_eg L = pi/4).  The
two-term heating/cooling rates are

    A_pm = eta^2 (Omega^2/4) Gamma_b [ sin^2(chi) / ((Delta_L -+ nu_T)^2
           + Gamma^2/4) + alpha / (Delta_L^2 + Gamma^2/4) ]

with Gamma_b = (1 - eps) Gamma the background emission rate, and the mirror
pumping rate is

    gamma = eps Gamma (Omega^2/4) / (Delta_L^2 + Gamma^2/4),

independent of the laser angle chi.  In the Doppler regime (nu_T << Gamma,
|Delta_L|, chi = pi/2, eps << 1) this coincides with the rewriting
gamma_tilde = eps N / ((1 + alpha) eta^2); the occupation-parameterised
constructor `DerivedRates.from_occupation` adopts that identity exactly,
which is the form all steady-state results downstream are expressed in.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

from scipy.integrate import quad

from .errors import (
    BlueDetuningError,
    ConfigError,
    HeatingDominatesError,
    NotNormalizedError,
    ParameterRegimeWarning,
)

#: ratio demanded by the "much smaller than" soft checks
WEAK_DRIVE_MARGIN = 10.0


@dataclass(frozen=True)
class PhysicalParams:
    """Raw physical inputs of the cooling setup (angular frequency units)."""

    rabi_frequency: float
    laser_detuning: float
    linewidth: float
    solid_angle_fraction: float
    lamb_dicke: float
    laser_angle: float = math.pi / 2
    dipole_alpha: float = 0.4
    trap_frequency: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.solid_angle_fraction < 1.0:
            raise ValueError("solid_angle_fraction must lie in (0, 1)")
        if self.lamb_dicke <= 0.0:
            raise ValueError("lamb_dicke must be positive")
        if self.linewidth <= 0.0:
            raise ValueError("linewidth must be positive")
        if self.trap_frequency <= 0.0:
            raise ValueError("trap_frequency must be positive")
        if self.rabi_frequency < 0.0:
            raise ValueError("rabi_frequency must be non-negative")
        if self.lamb_dicke > 0.3:
            warnings.warn(
                f"lamb_dicke = {self.lamb_dicke:g} is large; the second-order "
                "expansion of the recoil operators degrades above ~0.3",
                ParameterRegimeWarning,
                stacklevel=2,
            )
        scale = max(self.linewidth, abs(self.laser_detuning))
        if WEAK_DRIVE_MARGIN * self.rabi_frequency > scale:
            warnings.warn(
                "weak-driving assumption Omega << max(Gamma, |Delta_L|) is "
                f"marginal: Omega = {self.rabi_frequency:g}, scale = {scale:g}",
                ParameterRegimeWarning,
                stacklevel=2,
            )

    @property
    def eta_tilde(self) -> float:
        """Projected Lamb-Dicke parameter eta*sin(chi) of the drive."""
        return self.lamb_dicke * math.sin(self.laser_angle)


@dataclass(frozen=True)
class DerivedRates:
    """Cooling/heating rates and the mirror pumping rate.

    `gamma_eff` sets the time unit used by every downstream module: drift and
    diffusion matrices, Fock-space generators and trajectory steppers are all
    expressed with gamma_eff = 1, i.e. times are in units of 1/gamma_eff.
    """

    a_minus: float
    a_plus: float
    gamma_eff: float
    n_bar: float
    gamma_mirror: float
    gamma_tilde: float
    lamb_dicke: float
    epsilon: float
    alpha: float

    def __post_init__(self):
        if self.gamma_eff <= 0.0:
            raise ValueError("gamma_eff must be positive")
        if self.n_bar < 0.0:
            raise ValueError("n_bar must be non-negative")

    @classmethod
    def from_occupation(
        cls,
        n_bar: float,
        epsilon: float,
        lamb_dicke: float,
        alpha: float = 0.4,
        gamma_eff: float = 1.0,
    ) -> "DerivedRates":
        """Build rates from the steady-state occupation parameterisation.

        Uses gamma_tilde = eps*N / ((1+alpha)*eta^2) exactly, the form in
        which all steady-state and feedback results are quoted.
        """
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        gt = epsilon * n_bar / ((1.0 + alpha) * lamb_dicke**2)
        return cls(
            a_minus=gamma_eff * (n_bar + 1.0),
            a_plus=gamma_eff * n_bar,
            gamma_eff=gamma_eff,
            n_bar=n_bar,
            gamma_mirror=gt * gamma_eff,
            gamma_tilde=gt,
            lamb_dicke=lamb_dicke,
            epsilon=epsilon,
            alpha=alpha,
        )

    def identity_gamma_tilde(self) -> float:
        """gamma_tilde computed from the occupation identity eps*N/((1+a)eta^2)."""
        return self.epsilon * self.n_bar / ((1.0 + self.alpha) * self.lamb_dicke**2)

    def normalized(self) -> "DerivedRates":
        """Copy of the rates rescaled so that gamma_eff = 1."""
        g = self.gamma_eff
        return replace(
            self,
            a_minus=self.a_minus / g,
            a_plus=self.a_plus / g,
            gamma_eff=1.0,
            gamma_mirror=self.gamma_mirror / g,
        )


def derive_rates(p: PhysicalParams) -> DerivedRates:
    """Compute A_pm, Gamma_eff, N and the mirror pumping rate from raw inputs.

    Raises BlueDetuningError for Delta_L >= 0 and HeatingDominatesError when
    the two-term rates give A+ >= A- (no cooling steady state).
    """
    if p.laser_detuning >= 0.0:
        raise BlueDetuningError(
            f"laser_detuning = {p.laser_detuning:g} is not red-detuned"
        )
    gamma_b = (1.0 - p.solid_angle_fraction) * p.linewidth
    pref = p.lamb_dicke**2 * p.rabi_frequency**2 / 4.0 * gamma_b
    half_sq = p.linewidth**2 / 4.0
    sin_sq = math.sin(p.laser_angle) ** 2
    carrier = p.dipole_alpha / (p.laser_detuning**2 + half_sq)
    a_plus = pref * (
        sin_sq / ((p.laser_detuning - p.trap_frequency) ** 2 + half_sq) + carrier
    )
    a_minus = pref * (
        sin_sq / ((p.laser_detuning + p.trap_frequency) ** 2 + half_sq) + carrier
    )
    if a_plus >= a_minus:
        raise HeatingDominatesError(
            f"A+ = {a_plus:g} >= A- = {a_minus:g}; no cooling steady state"
        )
    gamma_eff = a_minus - a_plus
    n_bar = a_plus / gamma_eff
    gamma_mirror = (
        p.solid_angle_fraction
        * p.linewidth
        * p.rabi_frequency**2
        / 4.0
        / (p.laser_detuning**2 + half_sq)
    )
    return DerivedRates(
        a_minus=a_minus,
        a_plus=a_plus,
        gamma_eff=gamma_eff,
        n_bar=n_bar,
        gamma_mirror=gamma_mirror,
        gamma_tilde=gamma_mirror / gamma_eff,
        lamb_dicke=p.lamb_dicke,
        epsilon=p.solid_angle_fraction,
        alpha=p.dipole_alpha,
    )


def isotropic_pattern(u):
    """Flat angular distribution N(u) = 1/2 on [-1, 1]."""
    return 0.5 if not hasattr(u, "__len__") else 0.5 + 0.0 * u


def dipole_pattern(u):
    """Linear-dipole angular distribution N(u) = (3/8)(1 + u^2)."""
    return 0.375 * (1.0 + u * u)


def dipole_alpha(pattern, norm_tol: float = 1e-8) -> float:
    """Second moment alpha = int u^2 N(u) du of an angular distribution.

    The pattern must be normalised on [-1, 1] to within `norm_tol`.
    """
    norm, _ = quad(pattern, -1.0, 1.0, epsabs=1e-12, epsrel=1e-12)
    if abs(norm - 1.0) > norm_tol:
        raise NotNormalizedError(
            f"pattern integrates to {norm:.12g}, expected 1 within {norm_tol:g}"
        )
    val, _ = quad(lambda u: u * u * pattern(u), -1.0, 1.0, epsabs=1e-10, epsrel=1e-12)
    return val


# keys accepted in the flat key=value parameter file
CONFIG_KEYS = ("omega", "delta_l", "gamma", "epsilon", "eta", "chi", "alpha", "nu_t")


def read_config(path) -> dict:
    """Parse a flat key=value parameter file; '#' starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, text = line.partition("=")
            key = key.strip().lower()
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = float(text.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad number {text!r}") from exc
    return values


def physical_params_from_config(path, **overrides) -> PhysicalParams:
    """Build PhysicalParams from a key=value file plus keyword overrides."""
    values = read_config(path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PhysicalParams(
            rabi_frequency=values["omega"],
            laser_detuning=values["delta_l"],
            linewidth=values["gamma"],
            solid_angle_fraction=values["epsilon"],
            lamb_dicke=values["eta"],
            laser_angle=values.get("chi", math.pi / 2),
            dipole_alpha=values.get("alpha", 0.4),
            trap_frequency=values.get("nu_t", 1.0),
        )
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r} in {path}") from exc
