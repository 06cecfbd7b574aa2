"""Quantized Laplacian and the per-diagonal tridiagonal stream solver.

The Laplacian acts as a double commutator with the spin generators and
preserves every matrix diagonal, so it splits into symmetric tridiagonal
blocks of size N-|m|.  The stream matrix P solving ``Lap P = W - (tr W/N) I``
is obtained from one Thomas solve per diagonal: O(N^2) for the full solve
and O(N*n_trunc) when the diagonal truncation operator is applied first.

Blocks are extracted numerically from the double-commutator form (three
applications of :func:`apply_laplacian` to mod-3 indicator matrices cover
all columns without overlap) and validated against the spectral identity
by the test suite, rather than hard-coding entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _tridiag
from .quantization import _spin_sparse

__all__ = [
    "LaplacianBlocks",
    "apply_laplacian",
    "build_blocks",
    "solve_stream",
    "solve_stream_lowrank",
    "solve_stream_truncated",
    "truncate_diagonals",
]


def _require_square(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    return w


def apply_laplacian(w: np.ndarray) -> np.ndarray:
    """Apply the quantized Laplacian: ``-sum_a [S_a, [S_a, W]]``.

    Eigenvalue -ell(ell+1) on each basis matrix; the kernel is i*R*I.
    Cost O(N^2) through sparse spin generators.
    """
    w = _require_square(w).astype(np.complex128, copy=False)
    out = np.zeros_like(w)
    for s in _spin_sparse(w.shape[0]):
        inner = s @ w - w @ s
        out += s @ inner - inner @ s
    return -out


@dataclass(frozen=True)
class LaplacianBlocks:
    """Per-diagonal tridiagonal blocks of the quantized Laplacian.

    ``diag[m, :N-m]`` and ``off[m, :N-m-1]`` hold the block for the |m|-th
    diagonal (blocks are even in m).  ``mult_t``/``dinv_t``/``off_t`` cache
    the pivot-free Thomas factorization in position-major layout for the
    row-walking kernels; column 0 factors the deflated m = 0 system.
    """

    n: int
    diag: np.ndarray = field(repr=False)
    off: np.ndarray = field(repr=False)
    mult_t: np.ndarray = field(repr=False)
    dinv_t: np.ndarray = field(repr=False)
    off_t: np.ndarray = field(repr=False)

    def block(self, m: int) -> np.ndarray:
        """Dense tridiagonal block for diagonal |m| (size N-|m|)."""
        m = abs(m)
        if m >= self.n:
            raise ValueError(f"|m|={m} out of range for N={self.n}")
        length = self.n - m
        d = self.diag[m, :length]
        e = self.off[m, : length - 1]
        return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def build_blocks(n: int) -> LaplacianBlocks:
    """Extract all tridiagonal blocks by probing the Laplacian.

    Indicator matrices with ones at every third position of every diagonal
    are enough: the blocks have bandwidth one, so images of columns three
    apart never overlap.  Three O(N^2) Laplacian applications cover all
    columns of all blocks.
    """
    if n < 2:
        raise ValueError("N must be at least 2")
    idx = np.arange(n)
    pos = np.minimum.outer(idx, idx) % 3
    images = []
    for c in range(3):
        indicator = (pos == c).astype(np.complex128)
        images.append(apply_laplacian(indicator))

    diag = np.zeros((n, n), dtype=np.float64)
    off = np.zeros((n, n), dtype=np.float64)
    for m in range(n):
        length = n - m
        for c in range(3):
            y = np.diagonal(images[c], offset=m)
            diag[m, c:length:3] = y[c:length:3].real
            off[m, c : length - 1 : 3] = y[c + 1 : length : 3].real

    mult = np.zeros((n, n), dtype=np.float64)
    dinv = np.zeros((n, n), dtype=np.float64)
    if not _tridiag.factorize_blocks(diag, off, mult, dinv):
        raise RuntimeError("singular tridiagonal block: Laplacian blocks are inconsistent")
    return LaplacianBlocks(
        n=n,
        diag=diag,
        off=off,
        mult_t=np.ascontiguousarray(mult.T),
        dinv_t=np.ascontiguousarray(dinv.T),
        off_t=np.ascontiguousarray(off.T),
    )


def _check_trunc(n: int, n_trunc: int) -> int:
    n_trunc = int(n_trunc)
    if not (0 < n_trunc <= n - 1):
        raise ValueError(f"truncation order must satisfy 0 < n_trunc <= N-1, got {n_trunc}")
    return n_trunc


def truncate_diagonals(w: np.ndarray, n_trunc: int) -> np.ndarray:
    """Zero every diagonal with |offset| > n_trunc; entries inside the band
    are copied unchanged.  Idempotent, linear and Frobenius self-adjoint."""
    w = _require_square(w)
    n_trunc = _check_trunc(w.shape[0], n_trunc)
    return np.triu(np.tril(w, n_trunc), -n_trunc)


def solve_stream_truncated(
    blocks: LaplacianBlocks,
    w: np.ndarray,
    n_trunc: int,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Solve ``Lap P = T_trunc(W - (tr W/N) I)`` with banded, trace-free P.

    Superdiagonals 0..n_trunc are solved by prefactorized Thomas sweeps and
    mirrored to the subdiagonals, so P is skew-Hermitian by construction for
    skew-Hermitian input.  Cost O(N * n_trunc).  A reusable ``out`` buffer may
    be supplied; only the band |offset| <= n_trunc is written.
    """
    w = _require_square(w)
    n = blocks.n
    if w.shape[0] != n:
        raise ValueError(f"state size {w.shape[0]} does not match blocks (N={n})")
    n_trunc = _check_trunc(n, n_trunc)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    if out is None:
        # the full solve writes every entry; only banded output needs zeros
        alloc = np.empty if n_trunc == n - 1 else np.zeros
        out = alloc((n, n), dtype=np.complex128)
    _tridiag.stream_solve_dense(w, blocks.mult_t, blocks.dinv_t, blocks.off_t, n_trunc, out)
    return out


def solve_stream(
    blocks: LaplacianBlocks, w: np.ndarray, out: np.ndarray | None = None
) -> np.ndarray:
    """Full stream solve: trace-free P with ``Lap P = W - (tr W/N) I``.

    One tridiagonal system per diagonal, O(N^2) total.
    """
    return solve_stream_truncated(blocks, w, blocks.n - 1, out=out)


def solve_stream_lowrank(
    blocks: LaplacianBlocks,
    u: np.ndarray,
    s: np.ndarray,
    n_trunc: int | None = None,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Stream solve for a factored state Y = U S U^H without densifying Y.

    Only the needed diagonals of Y are assembled from the factors, each at
    cost O(r (N - m)); the result matches the dense path applied to the
    reconstructed product to roundoff.
    """
    n = blocks.n
    u = np.asarray(u, dtype=np.complex128)
    s = np.asarray(s, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != n:
        raise ValueError(f"frame must be N x r with N={n}, got {u.shape}")
    r = u.shape[1]
    if s.shape != (r, r):
        raise ValueError(f"core must be {r} x {r}, got {s.shape}")
    n_trunc = blocks.n - 1 if n_trunc is None else _check_trunc(n, n_trunc)
    v = np.ascontiguousarray(u @ s)
    u = np.ascontiguousarray(u)
    if out is None:
        alloc = np.empty if n_trunc == n - 1 else np.zeros
        out = alloc((n, n), dtype=np.complex128)
    _tridiag.stream_solve_lowrank(v, u, blocks.mult_t, blocks.dinv_t, blocks.off_t, n_trunc, out)
    return out
