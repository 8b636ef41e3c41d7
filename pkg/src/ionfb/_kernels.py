"""Compiled kernels for truncated-Fock generators and trajectory stepping.

All kernels act on a batch rho[b, i, j] of density matrices and avoid
dtype-specific constants, so numba specialises them both for float64 (real
fast path, valid when the generator is real: rotating frame, delta = 0, real
measurement quadrature, real state) and complex128 (general case).  `s` is
the ladder table s[k] = sqrt(k) of length n + 1.  A two-band Hermitian real
operator A is passed as bands (b0, b1, b2) with b0[i] = A[i, i],
b1[i] = A[i, i+1], b2[i] = A[i, i+2]; a wider Hermitian real operator C as a
(bands, n) array cb with cb[d, i] = C[i, i+d].

Generators compose additively: `diag_pair` initialises the accumulator with
the elementwise piece (gd[i] + conj(gd[j]))*rho, the *_add kernels accumulate
recycling, recoil, feedback and double-commutator pieces.  Scalar reductions
(`batch_stats`, `hermitize_normalize`) return values in the array dtype; the
drivers take real parts.
"""

import numba as nb
import numpy as np

_OPTS = dict(cache=True, nogil=True)


@nb.njit(**_OPTS)
def diag_pair(rho, acc, gd):
    """acc = (gd[i] + conj(gd[j])) * rho."""
    B, n, _ = rho.shape
    for b in range(B):
        for i in range(n):
            gi = gd[i]
            for j in range(n):
                acc[b, i, j] = (gi + np.conj(gd[j])) * rho[b, i, j]


@nb.njit(**_OPTS)
def recycle_add(rho, acc, s, am, ap):
    """acc += am * a rho a^dag + ap * a^dag rho a."""
    B, n, _ = rho.shape
    for b in range(B):
        for i in range(n):
            for j in range(n):
                v = acc[b, i, j]
                if i + 1 < n and j + 1 < n:
                    v += am * s[i + 1] * s[j + 1] * rho[b, i + 1, j + 1]
                if i >= 1 and j >= 1:
                    v += ap * s[i] * s[j] * rho[b, i - 1, j - 1]
                acc[b, i, j] = v



@nb.njit(**_OPTS)
def herm2_lmul(rho, tmp, b0, b1, b2):
    """tmp = A rho for the two-band Hermitian real A."""
    B, n, _ = rho.shape
    for b in range(B):
        for i in range(n):
            for j in range(n):
                v = b0[i] * rho[b, i, j]
                if i + 1 < n:
                    v += b1[i] * rho[b, i + 1, j]
                if i >= 1:
                    v += b1[i - 1] * rho[b, i - 1, j]
                if i + 2 < n:
                    v += b2[i] * rho[b, i + 2, j]
                if i >= 2:
                    v += b2[i - 2] * rho[b, i - 2, j]
                tmp[b, i, j] = v


@nb.njit(**_OPTS)
def herm2_rmul_add(tmp, acc, b0, b1, b2, coef):
    """acc += coef * tmp A for the two-band Hermitian real A."""
    B, n, _ = tmp.shape
    for b in range(B):
        for i in range(n):
            for j in range(n):
                v = tmp[b, i, j] * b0[j]
                if j >= 1:
                    v += tmp[b, i, j - 1] * b1[j - 1]
                if j + 1 < n:
                    v += tmp[b, i, j + 1] * b1[j]
                if j >= 2:
                    v += tmp[b, i, j - 2] * b2[j - 2]
                if j + 2 < n:
                    v += tmp[b, i, j + 2] * b2[j]
                acc[b, i, j] += coef * v


def sandwich_add(rho, acc, b0, b1, b2, coef, tmp=None):
    """acc += coef * A rho A via two banded passes (A Hermitian, bands 0..2)."""
    if tmp is None:
        tmp = np.empty_like(rho)
    herm2_lmul(rho, tmp, b0, b1, b2)
    herm2_rmul_add(tmp, acc, b0, b1, b2, coef)


@nb.njit(**_OPTS)
def anticomm_add(rho, acc, cb, coef):
    """acc += coef * (C rho + rho C) for Hermitian real C, bands cb[d, i]."""
    B, n, _ = rho.shape
    nd = cb.shape[0]
    for b in range(B):
        for i in range(n):
            for j in range(n):
                v = rho[b, i, j] * 0.0
                for d in range(nd):
                    if i + d < n:
                        v += cb[d, i] * rho[b, i + d, j]
                    if d > 0 and i - d >= 0:
                        v += cb[d, i - d] * rho[b, i - d, j]
                    if j + d < n:
                        v += rho[b, i, j + d] * cb[d, j]
                    if d > 0 and j - d >= 0:
                        v += rho[b, i, j - d] * cb[d, j - d]
                acc[b, i, j] += coef * v


@nb.njit(**_OPTS)
def quad_sandwich(rho, tmp, s, w, v):
    """tmp = X rho + rho X for X = w*a + v*a^dag."""
    B, n, _ = rho.shape
    for b in range(B):
        for i in range(n):
            for j in range(n):
                t = rho[b, i, j] * 0.0
                if i + 1 < n:
                    t += w * s[i + 1] * rho[b, i + 1, j]
                if i >= 1:
                    t += v * s[i] * rho[b, i - 1, j]
                if j >= 1:
                    t += w * s[j] * rho[b, i, j - 1]
                if j + 1 < n:
                    t += v * s[j + 1] * rho[b, i, j + 1]
                tmp[b, i, j] = t


@nb.njit(**_OPTS)
def zcommutator(rho, tmp, s):
    """tmp = z rho - rho z for z = a + a^dag."""
    B, n, _ = rho.shape
    for b in range(B):
        for i in range(n):
            for j in range(n):
                t = rho[b, i, j] * 0.0
                if i + 1 < n:
                    t += s[i + 1] * rho[b, i + 1, j]
                if i >= 1:
                    t += s[i] * rho[b, i - 1, j]
                if j >= 1:
                    t -= s[j] * rho[b, i, j - 1]
                if j + 1 < n:
                    t -= s[j + 1] * rho[b, i, j + 1]
                tmp[b, i, j] = t


@nb.njit(**_OPTS)
def zcomm_add(tmp, acc, s, coef):
    """acc += coef * (z tmp - tmp z)."""
    B, n, _ = tmp.shape
    for b in range(B):
        for i in range(n):
            for j in range(n):
                t = tmp[b, i, j] * 0.0
                if i + 1 < n:
                    t += s[i + 1] * tmp[b, i + 1, j]
                if i >= 1:
                    t += s[i] * tmp[b, i - 1, j]
                if j >= 1:
                    t -= s[j] * tmp[b, i, j - 1]
                if j + 1 < n:
                    t -= s[j + 1] * tmp[b, i, j + 1]
                acc[b, i, j] += coef * t


@nb.njit(**_OPTS)
def innovation_add(rho, acc, s, w, v, cw, xv):
    """acc += cw[b] * (X rho + rho X - 2*xv[b]*rho), X = w*a + v*a^dag."""
    B, n, _ = rho.shape
    for b in range(B):
        c = cw[b]
        x2 = 2.0 * xv[b]
        for i in range(n):
            for j in range(n):
                t = -x2 * rho[b, i, j]
                if i + 1 < n:
                    t += w * s[i + 1] * rho[b, i + 1, j]
                if i >= 1:
                    t += v * s[i] * rho[b, i - 1, j]
                if j >= 1:
                    t += w * s[j] * rho[b, i, j - 1]
                if j + 1 < n:
                    t += v * s[j + 1] * rho[b, i, j + 1]
                acc[b, i, j] += c * t



@nb.njit(cache=True, nogil=True)
def cayley_kick(rho, out, wk, s, theta):
    """Unitary momentum kick rho -> W rho W^dag with the Cayley form

        W = (I - i*t*z)(I + i*t*z)^{-1},  t = theta[b],  z = a + a^dag,

    which matches exp(-i*u*z) with u = 2*theta to O(u^3) and is exactly
    unitary, so high Fock coherences are never amplified.  The tridiagonal
    solves use the Thomas recursion; for I + i*t*z the pivots stay real and
    >= 1 and consecutive multiplier products telescope, so elimination is
    stable without pivoting.  `wk` is an (n, n) complex workspace.
    """
    B, n, _ = rho.shape
    d = np.empty(n)
    for b in range(B):
        t = theta[b]
        d[0] = 1.0
        for i in range(1, n):
            d[i] = 1.0 + (t * s[i]) ** 2 / d[i - 1]
        # stage 1: Y = (I + i t z)^{-1} rho (columnwise solve, row sweeps)
        for j in range(n):
            wk[0, j] = rho[b, 0, j]
        for i in range(1, n):
            m = t * s[i] / d[i - 1]
            for j in range(n):
                wk[i, j] = rho[b, i, j] - 1j * m * wk[i - 1, j]
        for j in range(n):
            wk[n - 1, j] = wk[n - 1, j] / d[n - 1]
        for i in range(n - 2, -1, -1):
            ts = 1j * t * s[i + 1]
            for j in range(n):
                wk[i, j] = (wk[i, j] - ts * wk[i + 1, j]) / d[i]
        # stage 2: Z = Y (I - i t z)^{-1} (rowwise solve)
        for i in range(n):
            for j in range(1, n):
                m = t * s[j] / d[j - 1]
                wk[i, j] = wk[i, j] + 1j * m * wk[i, j - 1]
            wk[i, n - 1] = wk[i, n - 1] / d[n - 1]
            for j in range(n - 2, -1, -1):
                wk[i, j] = (wk[i, j] + 1j * t * s[j + 1] * wk[i, j + 1]) / d[j]
        # stage 3: T = (I - i t z) Z
        for i in range(n):
            for j in range(n):
                val = wk[i, j]
                if i + 1 < n:
                    val -= 1j * t * s[i + 1] * wk[i + 1, j]
                if i >= 1:
                    val -= 1j * t * s[i] * wk[i - 1, j]
                out[b, i, j] = val
        # stage 4: out = T (I + i t z)
        for i in range(n):
            for j in range(n):
                wk[i, j] = out[b, i, j]
        for i in range(n):
            for j in range(n):
                val = wk[i, j]
                if j >= 1:
                    val += 1j * t * s[j] * wk[i, j - 1]
                if j + 1 < n:
                    val += 1j * t * s[j + 1] * wk[i, j + 1]
                out[b, i, j] = val


@nb.njit(**_OPTS)
def hermitize_normalize(rho, traces):
    """Symmetrise rho in place and divide by its trace.

    Pre-normalisation traces are written to `traces` (rho's dtype; the
    imaginary part of the raw trace is discarded by the symmetrisation).
    """
    B, n, _ = rho.shape
    for b in range(B):
        tr = rho[b, 0, 0] * 0.0
        for i in range(n):
            tr += 0.5 * (rho[b, i, i] + np.conj(rho[b, i, i]))
        traces[b] = tr
        for i in range(n):
            for j in range(i, n):
                v = 0.5 * (rho[b, i, j] + np.conj(rho[b, j, i])) / tr
                rho[b, i, j] = v
                rho[b, j, i] = np.conj(v)


@nb.njit(**_OPTS)
def batch_stats(rho, s, w, v, out_n, out_x, out_tr, out_top):
    """Per-trajectory trace, sum(i * p_i), <X> for X = w*a + v*a^dag, and the
    population of the top five levels.  Outputs carry rho's dtype; for a
    Hermitian state their imaginary parts vanish.
    """
    B, n, _ = rho.shape
    for b in range(B):
        zero = rho[b, 0, 0] * 0.0
        tr = zero
        nn = zero
        top = zero
        for i in range(n):
            p = 0.5 * (rho[b, i, i] + np.conj(rho[b, i, i]))
            tr += p
            nn += i * p
            if i >= n - 5:
                top += p
        x = zero
        for i in range(n - 1):
            t = w * s[i + 1] * rho[b, i + 1, i] + v * s[i + 1] * rho[b, i, i + 1]
            x += 0.5 * (t + np.conj(t))
        out_tr[b] = tr
        out_n[b] = nn
        out_x[b] = x
        out_top[b] = top


@nb.njit(**_OPTS)
def band_expect(rho, cb, out):
    """out[b] = Tr(C rho) for a Hermitian real banded C, bands cb[d, i]."""
    B, n, _ = rho.shape
    nd = cb.shape[0]
    for b in range(B):
        acc = rho[b, 0, 0] * 0.0
        for i in range(n):
            acc += cb[0, i] * rho[b, i, i]
            for d in range(1, nd):
                if i + d < n:
                    acc += cb[d, i] * (rho[b, i + d, i] + rho[b, i, i + d])
        out[b] = 0.5 * (acc + np.conj(acc))
