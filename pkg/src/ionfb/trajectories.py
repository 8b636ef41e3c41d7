"""Stochastic unravellings of the cooling dynamics, plus the filter chain.

Three conditional processes are provided, all on truncated-Fock density
matrices in gamma_eff = 1 units and all driven by counter-based per-trajectory
random streams (Philox keyed by (seed, trajectory index)), so ensembles are
order- and batch-independent and bit-reproducible.

* photon counting (``jump``): no-jump evolution with the non-trace-preserving
  generator -i(h_eff rho - rho h_eff^dag) + L_b, interleaved with normalised
  jumps rho -> c_m rho c_m^dag / tr at probability gamma <c_m^dag c_m> dt.

* homodyne-like diffusion (``diffusive``): Euler-Maruyama steps

      drho = L0 rho dt + sqrt(gamma/2) dW eta (X rho + rho X - 2<X> rho)

  with X the measured quadrature (the position z = a + a^dag by default) and
  photocurrent samples I dt = gamma eta <X> dt + sqrt(gamma/2) dW.

* measurement feedback (``feedback``): the diffusive step followed by a
  momentum kick exp(-i u z) with u = (G/2)(gamma eta <X_phi> dt
  + sqrt(gamma/2) dW_xi).  In the Markov limit the demodulated noise that is
  fed back is the just-measured shot noise, so dW_xi = dW by default; the
  kick then Ito-expands into the <X_phi>-drift, K^2-diffusion and measurement
  cross terms and the ensemble mean reproduces the deterministic feedback
  master equation.  ``kick_noise="independent"`` draws dW_xi separately
  instead; that variant damps only the mean-spread part of the ensemble
  variance and demonstrably fails to average to the master equation, and is
  kept only for that comparison.

Numerically, the elementwise (diagonal) part of each generator is applied as
an exact exponential factor each step while the recycling / recoil /
innovation pieces stay explicit Euler terms; this keeps stepping stable at
large n_max where the bare Euler bath update diverges.  The kick uses a
Cayley unitary (see `_kernels.cayley_kick`), never amplifying truncated
coherences.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from . import _kernels as knl
from .errors import (
    GridMismatchError,
    NormCollapseError,
    ParameterRegimeWarning,
    SampleRateTooLowError,
    StepTooLargeError,
)
from .fock import (
    TruncatedDensityMatrix,
    _cm_sq_bands,
    _recoil_bands,
    default_n_max,
    mirror_jump_operator,
)
from .moments import FeedbackConfig
from .params import DerivedRates

DEFAULT_SEED = 123456789

KINDS = ("jump", "diffusive", "diffusive+feedback")


@dataclass(frozen=True)
class TrajectoryConfig:
    """Stepping and ensemble settings (times in 1/gamma_eff)."""

    dt: float
    t_final: float
    seed: int = DEFAULT_SEED
    ensemble_size: int = 1
    kind: str = "diffusive"
    record_stride: int = 1
    n_max: int | None = None

    def __post_init__(self):
        if self.dt <= 0.0 or self.t_final <= 0.0:
            raise ValueError("dt and t_final must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.steps % self.record_stride != 0:
            raise ValueError("record_stride must divide the step count")

    @property
    def steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))

    def validate_against(self, rates: DerivedRates, fb: FeedbackConfig | None):
        """Enforce dt <= 0.05 / max(1, gamma_tilde, G_tilde)."""
        g_t = fb.g_tilde(rates) if fb is not None else 0.0
        bound = 0.05 / max(1.0, rates.gamma_tilde, abs(g_t))
        if self.dt > bound * (1.0 + 1e-12):
            raise StepTooLargeError(
                f"dt = {self.dt:g} exceeds 0.05/max(1, gamma_tilde, G_tilde) "
                f"= {bound:g}"
            )


@dataclass(eq=False)
class TrajectoryRecord:
    """One conditional trajectory sampled on the record grid.

    `x_phi` holds the conditional mean of the monitored quadrature (the
    position z for jump/diffusive runs, X_phi for feedback runs); `current`
    holds the photocurrent averaged over each record window (index k covers
    the window ending at times[k]; entry 0 is zero), and `dn` the photon
    counts per window (jump runs only).
    """

    times: np.ndarray
    x_phi: np.ndarray
    n_cond: np.ndarray
    current: np.ndarray
    dn: np.ndarray
    jump_times: np.ndarray
    seed: int
    index: int
    kind: str


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=np.array([seed, index], dtype=np.uint64))
    )


class _BathPropagator:
    """Exact one-step propagator of the quadratic (bath) part of the drift.

    The generator -i delta [n, .] + A- D[a] + A+ D[a^dag] (plus any purely
    elementwise decay, e.g. the no-jump -(gamma/2){c^dag c, .} diagonal)
    couples only Fock cells on a fixed coherence offset d = j - i, where it
    reduces to a real tridiagonal matrix plus the constant phase
    exp(i delta d dt).  Each offset block is exponentiated once; applying the
    exact propagator is then one small real GEMM per offset over the batch
    and both Hermitian-conjugate diagonals at once.  This sidesteps the
    stiffness of the bath at the truncation boundary entirely.
    """

    def __init__(self, dim, dt, am, ap, delta, extra_diag=None):
        from scipy.linalg import expm

        self.dim = dim
        self.delta = delta
        self.dt = dt
        k = np.arange(dim, dtype=float)
        aad = k + 1.0
        aad[-1] = 0.0
        base = -0.5 * (am * k + ap * aad)
        if extra_diag is not None:
            base = base + extra_diag
        sq = np.sqrt(k)
        self.mats = []
        for d in range(dim):
            m = dim - d
            kk = np.arange(m, dtype=float)
            diag = base[:m] + base[d : d + m]
            sup = am * np.sqrt((kk[:-1] + 1.0) * (kk[:-1] + d + 1.0))
            sub = ap * sq[1:m] * np.sqrt(kk[1:] + d)
            block = np.diag(diag) + np.diag(sup, 1) + np.diag(sub, -1)
            self.mats.append(expm(dt * block))
        self.phases = np.exp(1j * delta * np.arange(dim) * dt)
        self._rows = [np.arange(dim - d) for d in range(dim)]

    def apply(self, rho: np.ndarray) -> None:
        """Propagate a Hermitian batch in place (upper diagonals + mirror)."""
        dim = self.dim
        real_state = rho.dtype == np.float64
        for d in range(dim):
            rows = self._rows[d]
            cols = rows + d
            vals = rho[:, rows, cols]  # (B, m)
            if real_state:
                new = (self.mats[d] @ vals.T).T
                rho[:, rows, cols] = new
                if d:
                    rho[:, cols, rows] = new
            else:
                re = (self.mats[d] @ vals.real.T).T
                im = (self.mats[d] @ vals.imag.T).T
                new = re + 1j * im
                if self.delta != 0.0:
                    new = new * self.phases[d]
                rho[:, rows, cols] = new
                if d:
                    rho[:, cols, rows] = np.conj(new)


def _initial_batch(rho0, n_max, dtype, count):
    if isinstance(rho0, TruncatedDensityMatrix):
        m0 = rho0.matrix
    else:
        m0 = np.asarray(rho0)
    if m0.shape[0] != n_max + 1:
        raise ValueError(f"rho0 dimension {m0.shape[0]} != n_max + 1")
    if dtype == np.float64 and np.abs(m0.imag).max() > 0.0:
        dtype = np.complex128
    batch = np.empty((count, n_max + 1, n_max + 1), dtype=dtype)
    batch[:] = m0.real if dtype == np.float64 else m0
    return batch, dtype


class _Recorder:
    def __init__(self, count, n_rec, stride, dt):
        self.stride = stride
        self.dt = dt
        self.x = np.zeros((count, n_rec + 1))
        self.n = np.zeros((count, n_rec + 1))
        self.cur = np.zeros((count, n_rec + 1))
        self.dn = np.zeros((count, n_rec + 1))
        self._cur_acc = np.zeros(count)
        self._dn_acc = np.zeros(count)
        self._slot = 0

    def state(self, xv, nv):
        self.x[:, self._slot] = xv
        self.n[:, self._slot] = nv

    def window(self, cur, dn=None):
        self._cur_acc += cur
        if dn is not None:
            self._dn_acc += dn

    def close_window(self):
        self._slot += 1
        self.cur[:, self._slot] = self._cur_acc / self.stride
        self.dn[:, self._slot] = self._dn_acc
        self._cur_acc[:] = 0.0
        self._dn_acc[:] = 0.0


def _simulate_batch(kind, rho0, rates, fb, cfg, indices, quadrature_phase, kick_noise):
    """Advance a batch of trajectories; returns a _Recorder plus jump times."""
    r = rates.normalized()
    n_max = cfg.n_max if cfg.n_max is not None else default_n_max(r.n_bar)
    dim = n_max + 1
    steps = cfg.steps
    dt = cfg.dt
    stride = cfg.record_stride
    count = len(indices)
    gamma = r.gamma_mirror
    eta = r.lamb_dicke
    delta = fb.delta_tilde if fb is not None else 0.0

    feedback = kind == "diffusive+feedback"
    phi = fb.phase if feedback else quadrature_phase
    w_meas = np.exp(1j * phi)
    use_real = delta == 0.0 and kind != "diffusive+feedback" and phi == 0.0
    dtype = np.float64 if use_real else np.complex128
    rho, dtype = _initial_batch(rho0, n_max, dtype, count)
    use_real = dtype == np.float64

    s = np.sqrt(np.arange(dim + 1, dtype=float))
    c2b = _cm_sq_bands(eta, dim)
    # the diffusive process unravels the full cooling generator, mirror
    # recoil included; the feedback process pairs with the feedback master
    # equation, which neglects the recoil corrections
    recoil = _recoil_bands(eta, dim) if kind == "diffusive" else None
    if kind == "jump":
        # the no-jump decay -(gamma/2){c^dag c, rho}: its diagonal joins the
        # exact bath propagator, the off-diagonal bands stay explicit
        c2_off = c2b.copy()
        c2_off[0] = 0.0
        cm_dense = mirror_jump_operator(eta, n_max)
        if use_real:
            cm_dense = cm_dense.real
    if use_real:
        w = v = 1.0
    else:
        w, v = complex(w_meas), complex(np.conj(w_meas))
    bath = _BathPropagator(
        dim,
        dt,
        r.a_minus,
        r.a_plus,
        delta,
        extra_diag=(-0.5 * gamma * c2b[0]) if kind == "jump" else None,
    )

    acc = np.empty_like(rho)
    out = np.empty_like(rho)
    wk = np.empty((dim, dim), dtype=complex)
    wk2 = np.empty_like(rho)
    tr = np.empty(count, dtype=dtype)
    sn = np.empty(count, dtype=dtype)
    sx = np.empty(count, dtype=dtype)
    stop = np.empty(count, dtype=dtype)
    pexp = np.empty(count, dtype=dtype)

    gens = [_rng(cfg.seed, int(i)) for i in indices]
    if kind == "jump":
        noises = np.stack([g.random(steps) for g in gens])
    elif feedback and kick_noise == "independent":
        normals = np.stack([g.standard_normal((steps, 2)) for g in gens])
        noises = normals[:, :, 0]
        xi_noises = normals[:, :, 1]
    else:
        noises = np.stack([g.standard_normal(steps) for g in gens])
    sq_dt = math.sqrt(dt)
    c_inn = math.sqrt(gamma / 2.0) * eta
    jump_times = [[] for _ in range(count)]

    n_rec = steps // stride
    rec = _Recorder(count, n_rec, stride, dt)

    for step in range(steps):
        knl.batch_stats(rho, s, w, v, sn, sx, tr, stop)
        xv = np.real(sx)
        if step % stride == 0:
            rec.state(xv, np.real(sn))
        if kind == "jump":
            knl.band_expect(rho, c2b, pexp)
            p = gamma * dt * np.real(pexp)
            if p.max() > 0.1:
                raise StepTooLargeError(
                    f"jump probability {p.max():.3g} exceeds 0.1; reduce dt"
                )
            hit = noises[:, step] < p
            rec.window(np.zeros(count), hit.astype(float))
            jumped = np.where(hit)[0]
            saved = rho[jumped].copy() if jumped.size else None
            # no-jump evolution for everyone: explicit small off-diagonal
            # decay bands, then the exact bath/decay propagator; jumpers are
            # overwritten from their pre-step states
            np.copyto(acc, rho)
            knl.anticomm_add(rho, acc, c2_off, -0.5 * gamma * dt)
            rho, acc = acc, rho
            bath.apply(rho)
            t_now = (step + 1) * dt
            for pos, b in enumerate(jumped):
                rho[b] = cm_dense @ saved[pos] @ cm_dense.T.conj()
                jump_times[b].append(t_now)
        else:
            dwn = noises[:, step] * sq_dt
            cw = (c_inn * dwn).astype(dtype)
            np.copyto(acc, rho)
            if recoil is not None:
                (b0, b1, b2), a2b = recoil
                knl.herm2_lmul(rho, wk2, b0, b1, b2)
                knl.herm2_rmul_add(wk2, acc, b0, b1, b2, 0.5 * gamma * dt)
                knl.anticomm_add(rho, acc, a2b, -0.25 * gamma * dt)
            knl.innovation_add(rho, acc, s, w, v, cw, sx)
            rho, acc = acc, rho
            cur = gamma * eta * xv + math.sqrt(gamma / 2.0) * dwn / dt
            rec.window(cur)
            if feedback:
                # kick before the bath propagator so its Ito cross product
                # with the innovation (the Wiseman-Milburn term) is exact
                dw_xi = xi_noises[:, step] * sq_dt if kick_noise == "independent" else dwn
                u = 0.5 * fb.gain * (gamma * eta * xv * dt + math.sqrt(gamma / 2.0) * dw_xi)
                knl.cayley_kick(rho, out, wk, s, 0.5 * u)
                rho, out = out, rho
            bath.apply(rho)
        knl.hermitize_normalize(rho, tr)
        trv = np.real(tr)
        if kind != "jump" and (trv < 0.5).any():
            raise NormCollapseError(
                f"conditional trace collapsed to {trv.min():.3g}"
            )
        if not np.isfinite(trv).all():
            raise ArithmeticError("trajectory integration produced non-finite trace")
        if (step + 1) % stride == 0:
            rec.close_window()
    knl.batch_stats(rho, s, w, v, sn, sx, tr, stop)
    rec.state(np.real(sx), np.real(sn))
    top = float(np.real(stop).max())
    if top > 1e-3:
        import warnings

        from .errors import PhysicalityWarning

        warnings.warn(
            f"top five Fock levels reached population {top:.3g}; increase n_max",
            PhysicalityWarning,
            stacklevel=2,
        )
    times = dt * stride * np.arange(n_rec + 1)
    return rec, times, jump_times


def _records_from_batch(kind, cfg, indices, rec, times, jump_times):
    out = []
    for row, idx in enumerate(indices):
        out.append(
            TrajectoryRecord(
                times=times.copy(),
                x_phi=rec.x[row].copy(),
                n_cond=rec.n[row].copy(),
                current=rec.cur[row].copy(),
                dn=rec.dn[row].copy(),
                jump_times=np.array(jump_times[row]),
                seed=cfg.seed,
                index=int(idx),
                kind=kind,
            )
        )
    return out


def _resolve_workers(workers) -> int:
    if workers is None:
        env = os.environ.get("IONFB_THREADS")
        workers = int(env) if env else 1
    return max(1, int(workers))


def simulate_ensemble(
    rho0,
    rates: DerivedRates,
    cfg: TrajectoryConfig,
    fb: FeedbackConfig | None = None,
    quadrature_phase: float = 0.0,
    kick_noise: str = "measurement",
    workers: int | None = None,
    batch_size: int = 64,
) -> list[TrajectoryRecord]:
    """Simulate cfg.ensemble_size independent trajectories of cfg.kind.

    Results are deterministic functions of (seed, trajectory index) and are
    merged in index order, independent of batching or worker count.
    """
    if cfg.kind == "diffusive+feedback" and fb is None:
        raise ValueError("feedback trajectories need a FeedbackConfig")
    if kick_noise not in ("measurement", "independent"):
        raise ValueError("kick_noise must be 'measurement' or 'independent'")
    cfg.validate_against(rates, fb if cfg.kind == "diffusive+feedback" else None)
    if cfg.kind == "diffusive+feedback" and fb.gain == 0.0:
        # feedback terms vanish identically; delegate so the reduction is
        # bitwise (same stream, same kernels)
        dcfg = _with_kind(cfg, "diffusive")
        return [
            _retag(rec, "diffusive+feedback")
            for rec in simulate_ensemble(
                rho0, rates, dcfg, fb=fb, quadrature_phase=fb.phase,
                workers=workers, batch_size=batch_size,
            )
        ]
    indices = np.arange(cfg.ensemble_size)
    workers = _resolve_workers(workers)
    chunks = [
        indices[lo : lo + batch_size] for lo in range(0, len(indices), batch_size)
    ]
    kind = cfg.kind
    results = []
    if workers == 1 or len(chunks) == 1:
        for chunk in chunks:
            rec, times, jt = _simulate_batch(
                kind, rho0, rates, fb, cfg, chunk, quadrature_phase, kick_noise
            )
            results.extend(_records_from_batch(kind, cfg, chunk, rec, times, jt))
    else:
        from concurrent.futures import ProcessPoolExecutor

        rho_arg = rho0.matrix if isinstance(rho0, TruncatedDensityMatrix) else rho0
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(
                    _batch_worker,
                    kind,
                    rho_arg,
                    rates,
                    fb,
                    cfg,
                    chunk,
                    quadrature_phase,
                    kick_noise,
                )
                for chunk in chunks
            ]
            for chunk, fut in zip(chunks, futs):
                rec, times, jt = fut.result()
                results.extend(_records_from_batch(kind, cfg, chunk, rec, times, jt))
    return results


def _batch_worker(kind, rho0, rates, fb, cfg, chunk, quadrature_phase, kick_noise):
    return _simulate_batch(kind, rho0, rates, fb, cfg, chunk, quadrature_phase, kick_noise)


def _with_kind(cfg: TrajectoryConfig, kind: str) -> TrajectoryConfig:
    return TrajectoryConfig(
        dt=cfg.dt,
        t_final=cfg.t_final,
        seed=cfg.seed,
        ensemble_size=cfg.ensemble_size,
        kind=kind,
        record_stride=cfg.record_stride,
        n_max=cfg.n_max,
    )


def _retag(rec: TrajectoryRecord, kind: str) -> TrajectoryRecord:
    rec.kind = kind
    return rec


def simulate_jump_trajectory(
    rho0, rates: DerivedRates, cfg: TrajectoryConfig, index: int = 0,
    fb: FeedbackConfig | None = None,
) -> TrajectoryRecord:
    """Photon-counting conditional evolution (no feedback)."""
    cfg = _with_kind(cfg, "jump")
    cfg.validate_against(rates, None)
    rec, times, jt = _simulate_batch(
        "jump", rho0, rates, fb, cfg, np.array([index]), 0.0, "measurement"
    )
    return _records_from_batch("jump", cfg, [index], rec, times, jt)[0]


def simulate_diffusive_trajectory(
    rho0, rates: DerivedRates, cfg: TrajectoryConfig, index: int = 0,
    fb: FeedbackConfig | None = None, quadrature_phase: float = 0.0,
) -> TrajectoryRecord:
    """Homodyne-like diffusive conditional evolution (no feedback)."""
    cfg = _with_kind(cfg, "diffusive")
    cfg.validate_against(rates, None)
    rec, times, jt = _simulate_batch(
        "diffusive", rho0, rates, fb, cfg, np.array([index]), quadrature_phase,
        "measurement",
    )
    return _records_from_batch("diffusive", cfg, [index], rec, times, jt)[0]


def simulate_feedback_trajectory(
    rho0, rates: DerivedRates, fb: FeedbackConfig, cfg: TrajectoryConfig,
    index: int = 0, kick_noise: str = "measurement",
) -> TrajectoryRecord:
    """Feedback-conditioned evolution in the Markov (zero-delay) limit."""
    cfg = _with_kind(cfg, "diffusive+feedback")
    cfg.validate_against(rates, fb)
    if fb.gain == 0.0:
        # feedback terms vanish identically; same stream, same kernels, so
        # the reduction to the diffusive process is bitwise
        rec = simulate_diffusive_trajectory(
            rho0, rates, cfg, index=index, fb=fb, quadrature_phase=fb.phase
        )
        return _retag(rec, "diffusive+feedback")
    rec, times, jt = _simulate_batch(
        "diffusive+feedback", rho0, rates, fb, cfg, np.array([index]), fb.phase,
        kick_noise,
    )
    return _records_from_batch("diffusive+feedback", cfg, [index], rec, times, jt)[0]


@dataclass(eq=False)
class EnsembleStatistics:
    times: np.ndarray
    n_mean: np.ndarray
    n_var: np.ndarray
    n_se: np.ndarray
    x_mean: np.ndarray
    x_se: np.ndarray
    current_mean: np.ndarray
    current_se: np.ndarray
    size: int


def ensemble_statistics(records) -> EnsembleStatistics:
    """Pointwise mean/variance/standard error over a trajectory ensemble."""
    if len(records) < 2:
        raise ValueError("need at least two records")
    t0 = records[0].times
    for rec in records[1:]:
        if rec.times.shape != t0.shape or not np.array_equal(rec.times, t0):
            raise GridMismatchError("trajectory records use different grids")
    n = np.stack([r.n_cond for r in records])
    x = np.stack([r.x_phi for r in records])
    c = np.stack([r.current for r in records])
    m = len(records)

    def se(arr):
        return arr.std(axis=0, ddof=1) / math.sqrt(m)

    return EnsembleStatistics(
        times=t0.copy(),
        n_mean=n.mean(axis=0),
        n_var=n.var(axis=0, ddof=1),
        n_se=se(n),
        x_mean=x.mean(axis=0),
        x_se=se(x),
        current_mean=c.mean(axis=0),
        current_se=se(c),
        size=m,
    )


def bandpass_demodulate(
    signal, dt: float, omega0: float, phase: float, bandwidth: float, gain: float
) -> np.ndarray:
    """Demodulate-filter-remodulate chain applied to a sampled signal.

    Multiplies by cos(omega0 t + phase), applies a first-order low-pass of
    bandwidth B (exponential smoothing y[k] = a y[k-1] + (1-a) x[k] with
    a = exp(-B dt), unit DC gain) and multiplies by gain * cos(omega0 t).
    Used standalone on synthetic signals to validate the loop-filter
    statistics; the rotating-frame steppers model the filtered noise directly.
    """
    signal = np.asarray(signal, dtype=float)
    if dt <= 0.0 or omega0 <= 0.0 or bandwidth <= 0.0:
        raise ValueError("dt, omega0 and bandwidth must be positive")
    samples_per_period = 2.0 * math.pi / (omega0 * dt)
    if samples_per_period < 20.0:
        raise SampleRateTooLowError(
            f"{samples_per_period:.2f} samples per LO period; need >= 20"
        )
    if bandwidth > omega0 / 10.0:
        import warnings

        warnings.warn(
            f"bandwidth {bandwidth:g} is not << omega0 = {omega0:g}",
            ParameterRegimeWarning,
            stacklevel=2,
        )
    t = dt * np.arange(signal.size)
    mixed = signal * np.cos(omega0 * t + phase)
    a = math.exp(-bandwidth * dt)
    smooth = lfilter([1.0 - a], [1.0, -a], mixed)
    return gain * np.cos(omega0 * t) * smooth


def write_trajectory_csv(path, record: TrajectoryRecord) -> None:
    """CSV columns: t, mean_x_phi, n_cond, current, dN."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,mean_x_phi,n_cond,current,dN\n")
        for k in range(record.times.size):
            row = (
                record.times[k],
                record.x_phi[k],
                record.n_cond[k],
                record.current[k],
                record.dn[k],
            )
            fh.write(",".join(f"{val:.17g}" for val in row) + "\n")


def write_ensemble_csv(path, stats: EnsembleStatistics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,n_mean,n_var,n_se,x_mean,x_se,current_mean,current_se\n")
        for k in range(stats.times.size):
            row = (
                stats.times[k],
                stats.n_mean[k],
                stats.n_var[k],
                stats.n_se[k],
                stats.x_mean[k],
                stats.x_se[k],
                stats.current_mean[k],
                stats.current_se[k],
            )
            fh.write(",".join(f"{val:.17g}" for val in row) + "\n")


def write_metadata(path, cfg: TrajectoryConfig, extra: dict | None = None) -> None:
    """Sidecar key=value metadata (seed, stepping, ensemble layout)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"seed={cfg.seed}\n")
        fh.write(f"kind={cfg.kind}\n")
        fh.write(f"dt={cfg.dt:.17g}\n")
        fh.write(f"t_final={cfg.t_final:.17g}\n")
        fh.write(f"ensemble={cfg.ensemble_size}\n")
        fh.write(f"record_stride={cfg.record_stride}\n")
        if cfg.n_max is not None:
            fh.write(f"n_max={cfg.n_max}\n")
        for key, val in (extra or {}).items():
            fh.write(f"{key}={val}\n")
