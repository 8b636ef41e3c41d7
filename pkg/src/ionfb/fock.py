"""Truncated Fock-space operators and master-equation integration.

Serves as the basis-level engine cross-validating the Gaussian moment
dynamics.  Everything runs in gamma_eff = 1 units (see `params.DerivedRates`).
Two generator kinds are supported:

* ``"laser"``: the unconditional cooling generator
  -i[H, rho] + gamma D[c_m] rho + A- D[a] rho + A+ D[a^dag] rho with H the
  trap Hamiltonian (``frame="lab"``: nu_T a^dag a) or the rotating-frame
  detuning term (``frame="rotating"``: delta a^dag a).  The mirror recoil
  term gamma D[c_m] is kept by default here.

* ``"feedback"``: the rotating-frame feedback generator
  -i delta [a^dag a, rho] + A- D[a] + A+ D[a^dag]
  - i (G/4) gamma eta [z, X_phi rho + rho X_phi] - (G^2/16) gamma [z,[z,rho]],
  with z = a + a^dag and X_phi = a e^{i phi} + a^dag e^{-i phi}.  The recoil
  correction to the heating/cooling rates is neglected by default (pass
  ``include_recoil=True`` to keep it).

The jump operator at the half-fringe operating point k_eg L = pi/4 is
c_m = (1/sqrt(2)) (1 + eta z - (1/2) eta^2 z^2).
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as knl
from .errors import (
    DimensionMismatchError,
    PhysicalityWarning,
    TruncationLeakageError,
)
from .moments import FeedbackConfig, GaussianMomentState
from .params import DerivedRates

#: warn when the top five levels carry more than this population
LEAK_WARN = 1e-6
#: abort evolution when the top level carries more than this population
LEAK_ABORT = 1e-3


def default_n_max(n_bar: float) -> int:
    """Truncation keeping the thermal tail below ~1e-5: max(50, 12(N+1))."""
    return max(50, math.ceil(12.0 * (n_bar + 1.0)))


def destroy(n_max: int) -> np.ndarray:
    """Annihilation operator on the basis {|0>, ..., |n_max>}."""
    return np.diag(np.sqrt(np.arange(1.0, n_max + 1)), 1).astype(complex)


def mirror_jump_operator(eta: float, n_max: int) -> np.ndarray:
    """c_m = (1 + eta z - eta^2 z^2 / 2) / sqrt(2) at k_eg L = pi/4."""
    a = destroy(n_max)
    z = a + a.conj().T
    dim = n_max + 1
    return (np.eye(dim) + eta * z - 0.5 * eta**2 * (z @ z)) / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class FockOperators:
    """Dense operator set on a truncated basis (dimension n_max + 1)."""

    n_max: int
    eta: float
    phi: float
    a: np.ndarray
    adag: np.ndarray
    number: np.ndarray
    z_tilde: np.ndarray
    x_phi: np.ndarray
    c_m: np.ndarray
    h_eff: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.n_max + 1


def build_fock_operators(
    eta: float,
    phi: float,
    n_max: int,
    rates: DerivedRates | None = None,
    frame: str = "rotating",
    delta_tilde: float = 0.0,
    trap_frequency: float = 1.0,
) -> FockOperators:
    """Build a, a^dag, z, X_phi, c_m (and h_eff when rates are given).

    h_eff = H_T - (i/2) gamma c_m^dag c_m, with H_T chosen per `frame`
    (gamma_eff units: `trap_frequency` is nu_T / gamma_eff).
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    a = destroy(n_max)
    adag = a.conj().T
    z = a + adag
    x = a * np.exp(1j * phi) + adag * np.exp(-1j * phi)
    cm = mirror_jump_operator(eta, n_max)
    h_eff = None
    if rates is not None:
        r = rates.normalized()
        diag = np.arange(n_max + 1, dtype=float)
        ht = (trap_frequency if frame == "lab" else delta_tilde) * np.diag(diag)
        h_eff = ht.astype(complex) - 0.5j * r.gamma_mirror * (cm.conj().T @ cm)
    return FockOperators(
        n_max=n_max,
        eta=eta,
        phi=phi,
        a=a,
        adag=adag,
        number=(adag @ a).real.astype(complex),
        z_tilde=z,
        x_phi=x,
        c_m=cm,
        h_eff=h_eff,
    )


class TruncatedDensityMatrix:
    """Hermitian unit-trace operator on a truncated Fock basis."""

    def __init__(self, matrix, check: bool = True):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError("density matrix must be square")
        self.matrix = m
        if check:
            self.validate()

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def validate(self, herm_tol: float = 1e-12, trace_tol: float = 1e-10):
        m = self.matrix
        herm = np.abs(m - m.conj().T).max()
        if herm > herm_tol * max(1.0, np.abs(m).max()):
            raise ValueError(f"not Hermitian: max asymmetry {herm:g}")
        tr = np.trace(m).real
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"trace {tr!r} differs from 1 beyond {trace_tol:g}")
        tail = float(np.diag(m).real[-5:].sum())
        if tail > LEAK_WARN:
            warnings.warn(
                f"top five Fock levels carry population {tail:.3g}; "
                "increase n_max",
                PhysicalityWarning,
                stacklevel=2,
            )
        return self

    @classmethod
    def thermal(cls, n_bar: float, n_max: int) -> "TruncatedDensityMatrix":
        if n_bar == 0.0:
            return cls.vacuum(n_max)
        k = np.arange(n_max + 1)
        p = (n_bar / (n_bar + 1.0)) ** k
        p /= p.sum()
        return cls(np.diag(p.astype(complex)))

    @classmethod
    def vacuum(cls, n_max: int) -> "TruncatedDensityMatrix":
        m = np.zeros((n_max + 1, n_max + 1), dtype=complex)
        m[0, 0] = 1.0
        return cls(m)

    @classmethod
    def fock(cls, level: int, n_max: int) -> "TruncatedDensityMatrix":
        m = np.zeros((n_max + 1, n_max + 1), dtype=complex)
        m[level, level] = 1.0
        return cls(m)

    @classmethod
    def displaced_thermal(
        cls, alpha: complex, n_bar: float, n_max: int
    ) -> "TruncatedDensityMatrix":
        """D(alpha) rho_thermal D(alpha)^dag (for oracle tests)."""
        from scipy.linalg import expm

        a = destroy(n_max)
        d = expm(alpha * a.conj().T - np.conj(alpha) * a)
        base = cls.thermal(n_bar, n_max).matrix
        return cls(d @ base @ d.conj().T)


def expectations(rho, operators) -> list:
    """Tr(rho A) for each A; complex in general, real if you know better."""
    m = rho.matrix if isinstance(rho, TruncatedDensityMatrix) else np.asarray(rho)
    out = []
    for op in operators:
        op = np.asarray(op)
        if op.shape != m.shape:
            raise DimensionMismatchError(
                f"operator shape {op.shape} vs state {m.shape}"
            )
        out.append(complex(np.trace(m @ op)))
    return out


@lru_cache(maxsize=8)
def _moment_ops(dim: int):
    a = destroy(dim - 1)
    adag = a.conj().T
    zb = 0.5 * (a + adag)
    pb = (a - adag) / 2j
    return (
        zb,
        pb,
        zb @ zb,
        pb @ pb,
        0.5 * (zb @ pb + pb @ zb),
    )


def wigner_moments(rho) -> GaussianMomentState:
    """Symmetric-ordered moments of zbar, pbar mapped to a Gaussian state."""
    m = rho.matrix if isinstance(rho, TruncatedDensityMatrix) else np.asarray(rho)
    zb, pb, zz, pp, zp = _moment_ops(m.shape[0])
    mz = float(np.trace(m @ zb).real)
    mp = float(np.trace(m @ pb).real)
    vz = float(np.trace(m @ zz).real) - mz * mz
    vp = float(np.trace(m @ pp).real) - mp * mp
    cz = float(np.trace(m @ zp).real) - mz * mp
    return GaussianMomentState(mz, mp, vz, vp, cz)


def phonon_expectation(rho) -> float:
    m = rho.matrix if isinstance(rho, TruncatedDensityMatrix) else np.asarray(rho)
    return float(np.diag(m).real @ np.arange(m.shape[0]))


# ---------------------------------------------------------------------------
# generator assembly
# ---------------------------------------------------------------------------


def _recoil_bands(eta: float, dim: int):
    """Bands of A = eta*z - (eta^2/2) z^2 and of A^2 (recoil generator).

    gamma D[c_m] = (gamma/2) D[A] exactly, because c_m = (I + A)/sqrt(2) with
    A Hermitian and the identity part of a Hermitian jump operator drops out
    of the dissipator.
    """
    s = np.sqrt(np.arange(dim + 1, dtype=float))
    b0 = -0.5 * eta**2 * (2.0 * np.arange(dim, dtype=float) + 1.0)
    b1 = eta * s[1:dim]
    b2 = -0.5 * eta**2 * s[1 : dim - 1] * s[2:dim]
    amat = (
        np.diag(b0)
        + np.diag(b1, 1)
        + np.diag(b1, -1)
        + np.diag(b2, 2)
        + np.diag(b2, -2)
    )
    a2 = amat @ amat
    cb = np.zeros((5, dim))
    for d in range(5):
        cb[d, : dim - d] = np.diag(a2, d)
    b1 = np.concatenate([b1, [0.0]])
    b2 = np.concatenate([b2, [0.0, 0.0]])
    return (b0, b1, b2), cb


def _cm_sq_bands(eta: float, dim: int) -> np.ndarray:
    """Bands of c_m^dag c_m (full, elastic part included)."""
    cm = mirror_jump_operator(eta, dim - 1)
    c2 = (cm.conj().T @ cm).real
    cb = np.zeros((5, dim))
    for d in range(5):
        cb[d, : dim - d] = np.diag(c2, d)
    return cb


class _Generator:
    """Callable drho/dt built from compiled kernels (batch layout)."""

    def __init__(
        self,
        kind: str,
        rates: DerivedRates,
        fb: FeedbackConfig | None,
        n_max: int,
        frame: str,
        include_recoil: bool | None,
        trap_frequency: float,
    ):
        if kind not in ("laser", "feedback"):
            raise ValueError(f"unknown generator kind {kind!r}")
        if kind == "feedback" and fb is None:
            raise ValueError("feedback generator needs a FeedbackConfig")
        r = rates.normalized()
        self.kind = kind
        self.dim = n_max + 1
        self.s = np.sqrt(np.arange(self.dim + 1, dtype=float))
        self.am = r.a_minus
        self.ap = r.a_plus
        self.gamma = r.gamma_mirror
        self.eta = r.lamb_dicke
        if include_recoil is None:
            include_recoil = kind == "laser"
        self.include_recoil = include_recoil
        if kind == "laser":
            self.delta = fb.delta_tilde if (fb and frame == "rotating") else 0.0
            h_diag = (
                trap_frequency if frame == "lab" else self.delta
            ) * np.arange(self.dim, dtype=float)
            self.gain = 0.0
            self.phi = 0.0
        else:
            self.delta = fb.delta_tilde if frame == "rotating" else 0.0
            if frame == "lab":
                raise ValueError("the feedback generator is rotating-frame only")
            h_diag = self.delta * np.arange(self.dim, dtype=float)
            self.gain = fb.gain
            self.phi = fb.phase
        k = np.arange(self.dim, dtype=float)
        # diagonal of the *truncated* product a a^dag vanishes at the top
        # level; using it keeps the truncated generator exactly traceless
        # (cyclic trace), so trace drift measures only roundoff
        aad = k + 1.0
        aad[-1] = 0.0
        decay = -0.5 * (self.am * k + self.ap * aad)
        # the generator is real at delta = 0 for the plain cooling kind, and
        # for feedback exactly on the quadrature axes phi = +-pi/2 (cos phi
        # at the float pi/2 is ~6e-17; below 1e-12 the dropped piece is
        # smaller than roundoff)
        self.is_real = self.delta == 0.0 and (
            kind == "laser" or abs(math.cos(self.phi)) < 1e-12
        )
        if self.is_real:
            self.dtype = np.float64
            self.gd = decay.copy()
        else:
            self.dtype = np.complex128
            self.gd = decay - 1j * h_diag
        self.recoil = None
        if include_recoil and self.gamma > 0.0:
            self.recoil = _recoil_bands(self.eta, self.dim)
        # feedback coupling: -i (G/4) gamma eta [z, X rho + rho X]
        if kind == "feedback" and self.gain != 0.0:
            base = self.gain / 4.0 * self.gamma * self.eta
            if self.is_real:
                # X_{+-pi/2} = -+i(a - a^dag); the i cancels the -i prefactor
                self.w, self.v = 1.0, -1.0
                self.cfb = -base * (1.0 if math.sin(self.phi) < 0 else -1.0)
            else:
                self.w = np.exp(1j * self.phi)
                self.v = np.exp(-1j * self.phi)
                self.cfb = -1j * base
            self.ck2 = -self.gain**2 / 16.0 * self.gamma
        else:
            self.w = self.v = self.cfb = None
            self.ck2 = -self.gain**2 / 16.0 * self.gamma if kind == "feedback" else 0.0

    def spectral_bound(self) -> float:
        """Upper estimate of the generator's spectral radius (rate units)."""
        n1 = self.dim
        lam = 2.0 * (self.am + self.ap) * n1 + 2.0 * abs(self.delta) * n1
        if self.kind == "feedback":
            lam += self.gamma * self.gain**2 * n1
            lam += self.gamma * self.eta * self.gain * 4.0 * math.sqrt(n1) * 2.0
        if self.include_recoil:
            lam += 4.0 * self.gamma * self.eta**2 * n1
        return lam

    def apply(self, rho: np.ndarray, out: np.ndarray, tmp: np.ndarray) -> None:
        """out = L(rho) for batched rho[b, i, j]."""
        knl.diag_pair(rho, out, self.gd)
        knl.recycle_add(rho, out, self.s, self.am, self.ap)
        if self.recoil is not None:
            (b0, b1, b2), cb = self.recoil
            knl.sandwich_add(rho, out, b0, b1, b2, 0.5 * self.gamma, tmp=tmp)
            knl.anticomm_add(rho, out, cb, -0.25 * self.gamma)
        if self.cfb is not None:
            knl.quad_sandwich(rho, tmp, self.s, self.w, self.v)
            knl.zcomm_add(tmp, out, self.s, self.cfb)
        if self.kind == "feedback" and self.ck2 != 0.0:
            knl.zcommutator(rho, tmp, self.s)
            knl.zcomm_add(tmp, out, self.s, self.ck2)


def liouvillian_apply(
    kind: str,
    rho,
    rates: DerivedRates,
    fb: FeedbackConfig | None = None,
    frame: str = "rotating",
    include_recoil: bool | None = None,
    trap_frequency: float = 1.0,
):
    """Single application drho/dt of the chosen generator (gamma_eff units)."""
    m = rho.matrix if isinstance(rho, TruncatedDensityMatrix) else np.asarray(rho)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError("rho must be square")
    if np.abs(m - m.conj().T).max() > 1e-10 * max(1.0, np.abs(m).max()):
        raise ValueError("rho must be Hermitian")
    gen = _Generator(
        kind, rates, fb, m.shape[0] - 1, frame, include_recoil, trap_frequency
    )
    work = np.ascontiguousarray(m.astype(gen.dtype)[None])
    out = np.empty_like(work)
    tmp = np.empty_like(work)
    gen.apply(work, out, tmp)
    return out[0].astype(complex)


def suggest_timestep(
    kind: str,
    rates: DerivedRates,
    fb: FeedbackConfig | None,
    n_max: int,
    frame: str = "rotating",
    include_recoil: bool | None = None,
    trap_frequency: float = 1.0,
    safety: float = 0.8,
) -> float:
    """RK4-stable fixed step from the generator's spectral bound.

    Also respects the coarser physical-rate bounds (damping, detuning); the
    truncation bound dominates for realistic n_max.
    """
    gen = _Generator(kind, rates, fb, n_max, frame, include_recoil, trap_frequency)
    dt = safety * 2.5 / gen.spectral_bound()
    g_t = fb.g_tilde(rates) if fb is not None else 0.0
    dt = min(dt, 0.25 / (1.0 + 2.0 * abs(g_t)))
    if fb is not None and fb.delta_tilde != 0.0:
        dt = min(dt, 0.25 / abs(fb.delta_tilde))
    return dt


@dataclass(eq=False)
class FockEvolution:
    """Result of a fixed-step master-equation integration."""

    times: np.ndarray
    states: list
    dt: float
    trace_drift: np.ndarray

    @property
    def moment_states(self) -> list[GaussianMomentState]:
        return [wigner_moments(s) for s in self.states]

    @property
    def phonons(self) -> np.ndarray:
        return np.array([phonon_expectation(s) for s in self.states])


def evolve_density_matrix(
    kind: str,
    rho0,
    rates: DerivedRates,
    fb: FeedbackConfig | None,
    t_grid,
    frame: str = "rotating",
    include_recoil: bool | None = None,
    trap_frequency: float = 1.0,
    dt: float | None = None,
) -> FockEvolution:
    """Integrate the chosen master equation with fixed-step RK4.

    The state is re-symmetrised every step; the trace is *not* renormalised,
    its drift is recorded in `trace_drift`.  Raises TruncationLeakageError
    when the top-level population exceeds 1e-3.
    """
    m0 = rho0.matrix if isinstance(rho0, TruncatedDensityMatrix) else np.asarray(rho0)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0.0):
        raise ValueError("t_grid must be strictly increasing from 0")
    n_max = m0.shape[0] - 1
    gen = _Generator(kind, rates, fb, n_max, frame, include_recoil, trap_frequency)
    if dt is None:
        dt = suggest_timestep(
            kind, rates, fb, n_max, frame, include_recoil, trap_frequency
        )
    if gen.is_real and np.abs(m0.imag).max() == 0.0:
        work = np.ascontiguousarray(m0.real[None])
    else:
        gen.is_real = False
        gen.dtype = np.complex128
        gen.gd = gen.gd.astype(complex)
        work = np.ascontiguousarray(m0.astype(complex)[None])
    k1, k2, k3, k4, tmp, stage = (np.empty_like(work) for _ in range(6))
    herm = np.empty_like(work[0])
    states = [m0.astype(complex).copy()]
    drift = [abs(float(np.trace(m0).real) - 1.0)]
    t = 0.0
    for t_target in t_grid[1:]:
        nstep = max(1, math.ceil((t_target - t) / dt))
        h = (t_target - t) / nstep
        for _ in range(nstep):
            gen.apply(work, k1, tmp)
            np.multiply(k1, 0.5 * h, out=stage)
            stage += work
            gen.apply(stage, k2, tmp)
            np.multiply(k2, 0.5 * h, out=stage)
            stage += work
            gen.apply(stage, k3, tmp)
            np.multiply(k3, h, out=stage)
            stage += work
            gen.apply(stage, k4, tmp)
            k1 += k4
            k2 += k3
            work += (h / 6.0) * k1
            work += (h / 3.0) * k2
            # re-symmetrise (no trace renormalisation: drift is monitored)
            w0 = work[0]
            np.conjugate(w0.T, out=herm)
            w0 += herm
            w0 *= 0.5
            top = float(np.real(w0[-1, -1]))
            if top > LEAK_ABORT:
                raise TruncationLeakageError(
                    f"top-level population {top:.3g} exceeded {LEAK_ABORT:g}"
                )
        t = t_target
        states.append(work[0].astype(complex).copy())
        drift.append(abs(float(np.trace(work[0]).real) - 1.0))
    drift = np.array(drift)
    if drift.max() > 1e-6:
        warnings.warn(
            f"trace drifted by {drift.max():.3g} during evolution",
            PhysicalityWarning,
            stacklevel=2,
        )
    return FockEvolution(times=t_grid.copy(), states=states, dt=dt, trace_drift=drift)


# ---------------------------------------------------------------------------
# binary snapshot dump
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<qd")  # dimension (int64), time (float64)


def save_density_snapshots(path, times, states) -> None:
    """Dump snapshots as [int64 dim, float64 time, dim^2 complex64] records."""
    with open(path, "wb") as fh:
        for t, st in zip(times, states):
            m = st.matrix if isinstance(st, TruncatedDensityMatrix) else np.asarray(st)
            fh.write(_HEADER.pack(m.shape[0], float(t)))
            fh.write(np.ascontiguousarray(m, dtype=np.complex64).tobytes())


def load_density_snapshots(path):
    """Read back snapshots written by `save_density_snapshots`."""
    times, states = [], []
    with open(path, "rb") as fh:
        while True:
            head = fh.read(_HEADER.size)
            if not head:
                break
            dim, t = _HEADER.unpack(head)
            buf = fh.read(dim * dim * 8)
            if len(buf) != dim * dim * 8:
                raise IOError("truncated snapshot file")
            times.append(t)
            states.append(
                np.frombuffer(buf, dtype=np.complex64).reshape(dim, dim).astype(complex)
            )
    return np.array(times), states
