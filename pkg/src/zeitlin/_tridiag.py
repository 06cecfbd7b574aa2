"""Numba kernels: prefactorized Thomas sweeps for the per-diagonal solves.

The blocks are symmetric tridiagonal and negative definite away from the
m = 0 kernel, so the elimination runs without pivoting.  The factorization
arrays are stored position-major (``arr[k, m]`` is the coefficient of the
m-th diagonal at position k): the sweeps then walk matrix rows, which keeps
every hot access contiguous instead of striding along diagonals.  Column 0
of the factorization holds the deflated m = 0 system of size N-1 (last
unknown pinned to zero; the kernel restores the zero-sum solution).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def factorize_blocks(diag, off, mult, dinv):
    """LU-factor every block (diagonal-major layout); False on a zero pivot."""
    n = diag.shape[0]
    for m in range(n):
        length = n - m if m > 0 else n - 1
        if length == 0:
            continue
        piv = diag[m, 0]
        if abs(piv) < 1e-300:
            return False
        dinv[m, 0] = 1.0 / piv
        for k in range(1, length):
            w = off[m, k - 1] / piv
            mult[m, k - 1] = w
            piv = diag[m, k] - w * off[m, k - 1]
            if abs(piv) < 1e-300:
                return False
            dinv[m, k] = 1.0 / piv
    return True


@njit(cache=True)
def _backward_and_finish(dinv_t, off_t, n_trunc, out):
    """Back substitution over all diagonals, then the m = 0 kernel fix-up."""
    n = out.shape[0]
    for k in range(n - 2, -1, -1):
        mmax = n - 1 - k
        if n_trunc < mmax:
            mmax = n_trunc
        for m in range(0, mmax + 1):
            y = out[k, k + m]
            if (m >= 1 and k == n - 1 - m) or (m == 0 and k == n - 2):
                x = y * dinv_t[k, m]
            else:
                x = (y - off_t[k, m] * out[k + 1, k + 1 + m]) * dinv_t[k, m]
            out[k, k + m] = x
    out[n - 1, n - 1] = 0.0
    s = 0.0 + 0.0j
    for k in range(n):
        s += out[k, k]
    mean_out = s / n
    for k in range(n):
        out[k, k] -= mean_out


@njit(cache=True)
def _mirror_band(out, n_trunc):
    """Fill subdiagonals by skew-Hermitian symmetry, in 64x64 tiles."""
    n = out.shape[0]
    tile = 64
    for i0 in range(0, n, tile):
        i1 = min(i0 + tile, n)
        for j0 in range(0, i1, tile):
            j1 = min(j0 + tile, n)
            for i in range(i0, i1):
                jhi = min(j1, i)
                jlo = max(j0, i - n_trunc)
                for j in range(jlo, jhi):
                    out[i, j] = -np.conj(out[j, i])


@njit(cache=True)
def stream_solve_dense(w, mult_t, dinv_t, off_t, n_trunc, out):
    """Solve the stream problem for a dense skew-Hermitian state.

    Superdiagonals m = 0..n_trunc are solved; subdiagonals are mirrored by
    skew-Hermitian symmetry.  The main diagonal is trace-deflated so the
    output is trace-free.  Diagonals beyond n_trunc in ``out`` are left
    untouched (callers pass a zeroed or band-reusable buffer).
    """
    n = w.shape[0]
    tr = 0.0 + 0.0j
    for k in range(n):
        tr += w[k, k]
    shift = tr / n

    for k in range(n):
        mmax = n - 1 - k
        if n_trunc < mmax:
            mmax = n_trunc
        mstart = 0 if k <= n - 2 else 1
        for m in range(mstart, mmax + 1):
            b = w[k, k + m]
            if m == 0:
                b -= shift
            if k == 0:
                y = b
            else:
                y = b - mult_t[k - 1, m] * out[k - 1, k - 1 + m]
            out[k, k + m] = y

    _backward_and_finish(dinv_t, off_t, n_trunc, out)
    _mirror_band(out, n_trunc)


@njit(cache=True)
def stream_solve_lowrank(v, u, mult_t, dinv_t, off_t, n_trunc, out):
    """Stream solve for a factored state Y = U S U^H, with V = U @ S.

    Only the diagonals m = 0..n_trunc of Y are assembled from the factors
    (cost O(r (N - m)) each), then solved exactly as in the dense path.
    """
    n, r = v.shape
    tr = 0.0 + 0.0j
    for k in range(n):
        acc = 0.0 + 0.0j
        for j in range(r):
            acc += v[k, j] * np.conj(u[k, j])
        tr += acc
    shift = tr / n

    for k in range(n):
        mmax = n - 1 - k
        if n_trunc < mmax:
            mmax = n_trunc
        mstart = 0 if k <= n - 2 else 1
        for m in range(mstart, mmax + 1):
            acc = 0.0 + 0.0j
            for j in range(r):
                acc += v[k, j] * np.conj(u[k + m, j])
            if m == 0:
                acc -= shift
            if k == 0:
                y = acc
            else:
                y = acc - mult_t[k - 1, m] * out[k - 1, k - 1 + m]
            out[k, k + m] = y

    _backward_and_finish(dinv_t, off_t, n_trunc, out)
    _mirror_band(out, n_trunc)
