"""Conserved-quantity monitors and a-priori error bounds.

Casimir values are reported through the real power sums of the spectrum:
``casimirs(W)[k-1] = (4*pi/N) * sum_j Im(lambda_j)^k``.  The trace form
``(4*pi/N) tr(W^k)`` equals ``i^k`` times this, so conservation statements
and the rank-truncation error identity transfer verbatim (|i^k| = 1) while
the stored vector stays real for every k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .states import SpectralFactorization, frobenius_norm, hbar, sorted_eigenvalues
from .stream import (
    LaplacianBlocks,
    solve_stream,
    solve_stream_lowrank,
    solve_stream_truncated,
    truncate_diagonals,
)

__all__ = [
    "AprioriBound",
    "DiagnosticsRecord",
    "apriori_bound",
    "casimirs",
    "csv_header",
    "frobenius_error",
    "hamiltonian",
    "record_to_csv_row",
    "spectrum_drift",
]


def hamiltonian(state, blocks: LaplacianBlocks, n_trunc: int | None = None) -> float:
    """Kinetic energy ``-1/2 <W, P(W)>_N`` (truncated stream when requested).

    The value is real by self-adjointness of the inverse Laplacian; the
    imaginary residual is asserted below 1e-10 relative.
    """
    n = blocks.n
    scale = 4.0 * math.pi / n
    if isinstance(state, SpectralFactorization):
        p = solve_stream_lowrank(blocks, state.u, state.s, n_trunc)
        inner = scale * np.trace(state.s.conj().T @ (state.u.conj().T @ (p @ state.u)))
    else:
        w = np.asarray(state, dtype=np.complex128)
        p = solve_stream(blocks, w) if n_trunc is None else solve_stream_truncated(blocks, w, n_trunc)
        inner = scale * np.vdot(w, p)
    value = -0.5 * inner
    if abs(value.imag) > 1e-10 * max(abs(value.real), 1e-300):
        raise ArithmeticError(f"Hamiltonian has imaginary residual {value.imag:.3e}")
    return float(value.real)


def casimirs(state, k_max: int, n: int | None = None) -> np.ndarray:
    """Spectral power sums ``(4*pi/N) sum_j Im(lambda_j)^k`` for k = 1..k_max.

    For a factored state the sums run over the core spectrum (zero padding
    contributes nothing) but the prefactor keeps the ambient N.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if isinstance(state, SpectralFactorization):
        mu = np.linalg.eigvalsh(-1j * state.s)
        total = state.n if n is None else n
    else:
        x = np.asarray(state, dtype=np.complex128)
        mu = np.linalg.eigvalsh(-1j * x)
        total = x.shape[0] if n is None else n
    scale = 4.0 * math.pi / total
    return np.array([scale * np.sum(mu**k) for k in range(1, k_max + 1)])


def spectrum_drift(reference: np.ndarray, current) -> float:
    """l-infinity distance between a reference spectrum and the spectrum of
    the current state, both sorted by |Im| descending with deterministic
    tie-breaks; factored spectra are zero-padded to the reference length."""
    reference = np.asarray(reference, dtype=np.complex128)
    eigs = sorted_eigenvalues(current, n=reference.size)
    if eigs.size != reference.size:
        raise ValueError(f"length mismatch: {eigs.size} vs {reference.size}")
    return float(np.max(np.abs(reference - eigs)))


@dataclass(frozen=True)
class AprioriBound:
    lipschitz: float
    tail_norm: float
    bound_value: float
    variant: str


def apriori_bound(
    w0: np.ndarray,
    r: int,
    t: float,
    variant: str = "exact-stream",
    n_trunc: int | None = None,
    trajectory=None,
    trajectory_times=None,
) -> AprioriBound:
    """Right-hand side of the low-rank trajectory error bounds.

    Uses the Lipschitz constant ``K = 2 sqrt(N) rho(W0) / hbar`` and the
    singular-value tail of the initial state.  The ``truncated-stream``
    variant adds the stream-truncation integral, evaluated by trapezoidal
    quadrature along a supplied trajectory (the spectral-tail terms vanish at
    r = N; the integral term does not).
    """
    w0 = np.asarray(w0, dtype=np.complex128)
    n = w0.shape[0]
    if not (1 <= r <= n):
        raise ValueError(f"rank must satisfy 1 <= r <= N, got {r}")
    if t < 0:
        raise ValueError("time must be nonnegative")
    sigma = np.linalg.svd(w0, compute_uv=False)
    rho = float(sigma[0]) if sigma.size else 0.0
    hb = hbar(n)
    lipschitz = 2.0 * math.sqrt(n) * rho / hb
    tail = float(np.sqrt(np.sum(sigma[r:] ** 2)))
    head = float(np.sqrt(np.sum(sigma[:r] ** 2)))

    if variant == "exact-stream":
        if lipschitz == 0.0:
            value = 0.0
        else:
            value = head / (hb * lipschitz) * math.expm1(lipschitz * t) * tail
    elif variant == "truncated-stream":
        if n_trunc is None:
            raise ValueError("truncated-stream variant needs n_trunc")
        if lipschitz == 0.0:
            value = 0.0
        else:
            value = (1.0 + frobenius_norm(w0) / (hb * lipschitz)) * math.expm1(lipschitz * t) * tail
        if trajectory is not None:
            times = np.asarray(trajectory_times, dtype=np.float64)
            if times.size != len(trajectory):
                raise ValueError("trajectory and trajectory_times lengths differ")
            integrand = np.array(
                [
                    0.5
                    * frobenius_norm(ws - truncate_diagonals(ws, n_trunc))
                    * math.exp(lipschitz * (t - s))
                    for ws, s in zip(trajectory, times)
                ]
            )
            value += frobenius_norm(w0) * float(np.trapezoid(integrand, times))
        elif t > 0:
            raise ValueError("truncated-stream variant needs trajectory snapshots for t > 0")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return AprioriBound(lipschitz=lipschitz, tail_norm=tail, bound_value=value, variant=variant)


def frobenius_error(a, b) -> float:
    """Frobenius distance between states; two factored states sharing N are
    compared through r x r blocks without densifying."""
    a_fact = isinstance(a, SpectralFactorization)
    b_fact = isinstance(b, SpectralFactorization)
    if a_fact and b_fact:
        if a.n != b.n:
            raise ValueError(f"size mismatch: N={a.n} vs N={b.n}")
        cross = a.u.conj().T @ b.u
        sq = (
            np.linalg.norm(a.s) ** 2
            + np.linalg.norm(b.s) ** 2
            - 2.0 * np.real(np.trace(a.s.conj().T @ cross @ b.s @ cross.conj().T))
        )
        return float(np.sqrt(max(sq, 0.0)))
    if a_fact:
        a = a.reconstruct()
    if b_fact:
        b = b.reconstruct()
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of the per-step time series."""

    time: float
    hamiltonian: float
    hamiltonian_normalized: float
    casimirs: np.ndarray
    eigenvalues: np.ndarray
    eig_drift: float
    frobenius_error_vs_reference: float | None
    wall_ms: float


def csv_header(k_max: int) -> str:
    cols = ["time", "H", "H_norm"]
    cols += [f"C{k}" for k in range(1, k_max + 1)]
    cols += ["eig_drift", "frob_err", "wall_ms"]
    return ",".join(cols)


def record_to_csv_row(rec: DiagnosticsRecord) -> str:
    parts = [f"{rec.time:.17g}", f"{rec.hamiltonian:.17g}", f"{rec.hamiltonian_normalized:.17g}"]
    parts += [f"{c:.17g}" for c in rec.casimirs]
    parts.append(f"{rec.eig_drift:.17g}")
    parts.append("" if rec.frobenius_error_vs_reference is None else f"{rec.frobenius_error_vs_reference:.17g}")
    parts.append(f"{rec.wall_ms:.3f}")
    return ",".join(parts)
