"""Time integrators for the matrix vorticity flow and its low-rank forms.

Four families:

* :func:`iso2_step` -- second-order isospectral Lie-Poisson scheme on the
  dense state, a fixed-point iteration followed by a conjugation-like update.
* :func:`rkmk_step` -- explicit Runge-Kutta Munthe-Kaas steps for the frame
  reconstruction equation with fixed core, using the Cayley coordinate map.
  All algebra elements are kept in factored form (never densified), which is
  what brings the per-step cost down to O(N^2 r) + O(N r^2) terms.
* :func:`midpoint_stiefel_step` -- implicit midpoint on the frame; the induced
  map on Y = U S0 U^H coincides with the dense Iso2 map at exact fixed points.
* :func:`strang_step` -- symmetric splitting for the factorization with a
  time-dependent core: frame half-step, core full step, frame half-step.

Steppers never re-orthonormalize frames: the schemes preserve orthonormality
analytically and silent re-projection would mask integrator bugs.  Use
``states.reorthonormalize`` explicitly if recovery is ever needed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .states import SpectralFactorization, frobenius_norm, hbar
from .stream import (
    LaplacianBlocks,
    solve_stream,
    solve_stream_lowrank,
    solve_stream_truncated,
)

__all__ = [
    "ButcherTableau",
    "FactoredSkew",
    "FixedPointConfig",
    "FixedPointDivergenceError",
    "StepReport",
    "TABLEAUX",
    "cayley",
    "cayley_apply",
    "dcayinv",
    "iso2_step",
    "midpoint_stiefel_step",
    "rk4_step",
    "rkmk_step",
    "splitting_s_step",
    "splitting_u_step",
    "strang_step",
]


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients of an explicit Runge-Kutta method."""

    a: np.ndarray
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=np.float64))
        b = np.asarray(self.b, dtype=np.float64)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.shape[0] != a.shape[1] or a.shape[0] != b.size:
            raise ValueError("tableau dimensions are inconsistent")
        if np.any(np.triu(a) != 0.0):
            raise ValueError("tableau must be explicit (strictly lower triangular a)")
        if abs(b.sum() - 1.0) > 1e-14:
            raise ValueError("weights must sum to 1")

    @property
    def stages(self) -> int:
        return self.b.size


TABLEAUX = {
    "euler": ButcherTableau(a=[[0.0]], b=[1.0], name="euler"),
    "heun": ButcherTableau(a=[[0.0, 0.0], [1.0, 0.0]], b=[0.5, 0.5], name="heun"),
    "midpoint": ButcherTableau(a=[[0.0, 0.0], [0.5, 0.0]], b=[0.0, 1.0], name="midpoint"),
}


@dataclass(frozen=True)
class FixedPointConfig:
    """Stopping rule for the fixed-point iterations.

    ``tol`` is relative: the iteration stops when the Frobenius norm of the
    increment drops below ``tol * ||state||_F``.
    """

    tol: float = 1e-12
    max_iters: int = 100

    def __post_init__(self):
        if self.tol <= 0 or self.max_iters < 1:
            raise ValueError("tol must be positive and max_iters >= 1")


@dataclass(frozen=True)
class StepReport:
    iterations: int
    residual: float
    wall_time: float


class FixedPointDivergenceError(RuntimeError):
    """Fixed-point iteration failed to reach the stopping tolerance."""

    def __init__(self, iterations: int, residual: float, tol: float):
        super().__init__(
            f"fixed-point iteration did not converge in {iterations} iterations "
            f"(residual {residual:.3e}, tolerance {tol:.3e})"
        )
        self.iterations = iterations
        self.residual = residual
        self.tol = tol


def _solver(blocks: LaplacianBlocks, n_trunc):
    if n_trunc is None:
        return lambda w: solve_stream(blocks, w)
    return lambda w: solve_stream_truncated(blocks, w, n_trunc)


@njit(cache=True)
def _iso2_combine(base, b, q, a, qsign, wt, cand):
    """Fused update ``cand = base + a (b^H - b) + qsign a^2 q`` plus the
    Frobenius distance to ``wt``, in a single pass over the matrices.

    This is the O(N^2) part of every fixed-point sweep; keeping it to one
    memory pass preserves the cubic profile of the step, which is otherwise
    buried under elementwise traffic at small sizes.
    """
    n = base.shape[0]
    aa = qsign * a * a
    acc = 0.0
    for i in range(n):
        for j in range(n):
            v = base[i, j] + a * (np.conj(b[j, i]) - b[i, j]) + aa * q[i, j]
            d = v - wt[i, j]
            acc += d.real * d.real + d.imag * d.imag
            cand[i, j] = v
    return np.sqrt(acc)


def iso2_step(
    w: np.ndarray,
    dt: float,
    blocks: LaplacianBlocks,
    cfg: FixedPointConfig = FixedPointConfig(),
    n_trunc: int | None = None,
) -> tuple[np.ndarray, StepReport]:
    """One step of the dense second-order isospectral Lie-Poisson scheme.

    Fixed point: ``Wt = W - (dt/2)[P(Wt), Wt]_N + (dt^2/4 hb^2) P Wt P``,
    then the update ``(I - a P) Wt (I + a P)`` with ``a = dt/(2 hb)``.  When
    ``n_trunc`` is given the truncated stream map is used uniformly in both
    the commutator and the quadratic term.
    """
    t0 = time.perf_counter()
    w = np.ascontiguousarray(w, dtype=np.complex128)
    n = blocks.n
    hb = hbar(n)
    a = dt / (2.0 * hb)
    nt = n - 1 if n_trunc is None else n_trunc
    tol = cfg.tol * max(frobenius_norm(w), 1e-300)

    # scratch reused across iterations; the solve rewrites its band in place
    p = np.zeros((n, n), dtype=np.complex128)
    b = np.empty_like(p)
    q = np.empty_like(p)
    cand = np.empty_like(p)

    wt = w.copy()
    residual = 0.0
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iters + 1):
        solve_stream_truncated(blocks, wt, nt, out=p)
        np.matmul(p, wt, out=b)
        np.matmul(b, p, out=q)
        # cand = w + a*(b^H - b) + a^2*q; for skew P, Wt: Wt P = (P Wt)^H
        residual = _iso2_combine(w, b, q, a, 1.0, wt, cand)
        wt, cand = cand, wt
        if residual < tol:
            converged = True
            break
    if not converged:
        raise FixedPointDivergenceError(iterations, residual, tol)

    solve_stream_truncated(blocks, wt, nt, out=p)
    np.matmul(p, wt, out=b)
    np.matmul(b, p, out=q)
    # the conjugation update flips the quadratic sign: wt + a*(b^H - b) - a^2*q
    _iso2_combine(wt, b, q, a, -1.0, wt, cand)
    return cand, StepReport(iterations, residual, time.perf_counter() - t0)


def rk4_step(
    w: np.ndarray,
    dt: float,
    blocks: LaplacianBlocks,
    n_trunc: int | None = None,
) -> np.ndarray:
    """Classical RK4 on the dense flow; the non-structure-preserving
    reference oracle for convergence studies."""
    hb = hbar(blocks.n)
    solve = _solver(blocks, n_trunc)

    def rhs(x):
        p = solve(x)
        return -(p @ x - x @ p) / hb

    k1 = rhs(w)
    k2 = rhs(w + 0.5 * dt * k1)
    k3 = rhs(w + 0.5 * dt * k2)
    k4 = rhs(w + dt * k3)
    return w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# -- Cayley map and its factored action ------------------------------------


def cayley(omega: np.ndarray) -> np.ndarray:
    """Cayley transform ``(I - Omega/2)^{-1} (I + Omega/2)``; unitary for
    skew-Hermitian input, cayley(0) = I."""
    omega = np.asarray(omega, dtype=np.complex128)
    n = omega.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    return np.linalg.solve(eye - 0.5 * omega, eye + 0.5 * omega)


@dataclass(frozen=True)
class FactoredSkew:
    """Skew-Hermitian algebra element in outer-product form alpha @ beta^H."""

    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)

    @classmethod
    def empty(cls, n: int) -> "FactoredSkew":
        return cls(np.zeros((n, 0), dtype=np.complex128), np.zeros((n, 0), dtype=np.complex128))

    @property
    def width(self) -> int:
        return self.alpha.shape[1]

    def dense(self) -> np.ndarray:
        return self.alpha @ self.beta.conj().T


def cayley_apply(omega: FactoredSkew, x: np.ndarray) -> np.ndarray:
    """Action of ``cayley(alpha beta^H)`` on a tall matrix through a k x k
    bordered solve (Woodbury); never forms an N x N inverse."""
    if omega.width == 0:
        return x.copy()
    alpha, beta = omega.alpha, omega.beta
    t = x + alpha @ ((beta.conj().T @ x) * 0.5)
    cap = np.eye(omega.width, dtype=np.complex128) - 0.5 * (beta.conj().T @ alpha)
    return t + alpha @ np.linalg.solve(cap, (beta.conj().T @ t) * 0.5)


def _afactor_apply(omega: FactoredSkew, x: np.ndarray) -> np.ndarray:
    """Apply ``A = I - Omega/2`` to a tall matrix."""
    if omega.width == 0:
        return x.copy()
    return x - omega.alpha @ ((omega.beta.conj().T @ x) * 0.5)


def dcayinv(omega: FactoredSkew, l: FactoredSkew) -> FactoredSkew:
    """Inverse right-trivialized tangent of the Cayley map, in factored form.

    ``dcay^{-1}_Omega(L) = A L A^H`` with ``A = I - Omega/2``; applying A to
    both factors keeps the width of L.  At Omega = 0 this is the identity.
    """
    return FactoredSkew(_afactor_apply(omega, l.alpha), _afactor_apply(omega, l.beta))


def _combine(n: int, dt: float, weights, lams) -> FactoredSkew:
    """Weighted sum ``dt * sum_j w_j Lambda_j`` by factor concatenation."""
    alphas = []
    betas = []
    for wj, lam in zip(weights, lams):
        if wj == 0.0:
            continue
        alphas.append((dt * wj) * lam.alpha)
        betas.append(lam.beta)
    if not alphas:
        return FactoredSkew.empty(n)
    return FactoredSkew(np.hstack(alphas), np.hstack(betas))


def _rkmk_generic(u: np.ndarray, dt: float, tableau: ButcherTableau, lfun) -> np.ndarray:
    """Explicit RK-MK sweep with Cayley coordinates; ``lfun`` maps a frame to
    the factored algebra element of the reconstruction field."""
    n = u.shape[0]
    lams: list[FactoredSkew] = []
    for i in range(tableau.stages):
        if i == 0:
            omega_i = FactoredSkew.empty(n)
            u_i = u
        else:
            omega_i = _combine(n, dt, tableau.a[i, :i], lams)
            u_i = cayley_apply(omega_i, u)
        lams.append(dcayinv(omega_i, lfun(u_i)))
    omega = _combine(n, dt, tableau.b, lams)
    return cayley_apply(omega, u)


def _stream_buffer(n: int, n_trunc) -> np.ndarray:
    """Reusable output buffer for repeated stream solves on one state size.

    The full solve rewrites every entry; a banded solve rewrites its band and
    relies on the off-band zeros staying in place, which holds across reuses."""
    if n_trunc is None:
        return np.empty((n, n), dtype=np.complex128)
    return np.zeros((n, n), dtype=np.complex128)


def _lfun_fixed_core(blocks, s0, n_trunc, hb, buf):
    """Algebra element for the fixed-core reconstruction equation.

    ``L(U) = (I - U U^H) F U^H - U F^H`` with ``F = -P(U S0 U^H) U / hb``,
    folded into a single width-3r outer product."""

    def lfun(u):
        p = solve_stream_lowrank(blocks, u, s0, n_trunc, out=buf)
        f = -(p @ u) / hb
        c = u @ (f.conj().T @ u)
        alpha = np.hstack([f, -u, -u])
        beta = np.hstack([u, f, c])
        return FactoredSkew(alpha, beta)

    return lfun


def _lfun_projected(blocks, s, n_trunc, hb, buf):
    """Algebra element for the projected (splitting) frame equation.

    ``L(U) = Fp U^H - U Fp^H`` with ``Fp = -(I - U U^H) P(U S U^H) U / hb``;
    skew by construction, width 2r."""

    def lfun(u):
        p = solve_stream_lowrank(blocks, u, s, n_trunc, out=buf)
        f = -(p @ u) / hb
        fp = f - u @ (u.conj().T @ f)
        alpha = np.hstack([fp, -u])
        beta = np.hstack([u, fp])
        return FactoredSkew(alpha, beta)

    return lfun


def rkmk_step(
    u: np.ndarray,
    s0: np.ndarray,
    dt: float,
    blocks: LaplacianBlocks,
    tableau: ButcherTableau = TABLEAUX["heun"],
    n_trunc: int | None = None,
) -> np.ndarray:
    """Explicit RK-MK step of the fixed-core reconstruction equation.

    All stage elements stay in factored form; their widths grow by at most 3r
    per stage and are never compressed mid-step.  The returned frame is
    orthonormal up to roundoff.
    """
    u = np.asarray(u, dtype=np.complex128)
    s0 = np.asarray(s0, dtype=np.complex128)
    hb = hbar(blocks.n)
    buf = _stream_buffer(blocks.n, n_trunc)
    return _rkmk_generic(u, dt, tableau, _lfun_fixed_core(blocks, s0, n_trunc, hb, buf))


def splitting_u_step(
    u: np.ndarray,
    s: np.ndarray,
    dt: float,
    blocks: LaplacianBlocks,
    tableau: ButcherTableau = TABLEAUX["heun"],
    n_trunc: int | None = None,
) -> np.ndarray:
    """RK-MK step of the projected frame equation with the core held fixed.

    The exact flow of this equation conserves the Hamiltonian of the
    reconstructed state and keeps the frame on the Stiefel manifold.
    """
    u = np.asarray(u, dtype=np.complex128)
    s = np.asarray(s, dtype=np.complex128)
    hb = hbar(blocks.n)
    buf = _stream_buffer(blocks.n, n_trunc)
    return _rkmk_generic(u, dt, tableau, _lfun_projected(blocks, s, n_trunc, hb, buf))


def midpoint_stiefel_step(
    u: np.ndarray,
    s0: np.ndarray,
    dt: float,
    blocks: LaplacianBlocks,
    cfg: FixedPointConfig = FixedPointConfig(),
    n_trunc: int | None = None,
) -> tuple[np.ndarray, StepReport]:
    """Implicit midpoint rule on the frame reconstruction equation.

    Fixed point ``Ut = U - (dt/2 hb) P(Ut S0 Ut^H) Ut`` followed by the
    update ``(I - (dt/2 hb) P) Ut``.  The induced map on Y = U S0 U^H is the
    Iso2 map at exact fixed points, hence isospectral and Lie-Poisson.
    """
    t0 = time.perf_counter()
    u = np.asarray(u, dtype=np.complex128)
    s0 = np.asarray(s0, dtype=np.complex128)
    hb = hbar(blocks.n)
    a = dt / (2.0 * hb)
    tol = cfg.tol * max(frobenius_norm(u), 1e-300)

    buf = _stream_buffer(blocks.n, n_trunc)
    ut = u.copy()
    residual = 0.0
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iters + 1):
        p = solve_stream_lowrank(blocks, ut, s0, n_trunc, out=buf)
        ut_next = u - a * (p @ ut)
        residual = frobenius_norm(ut_next - ut)
        ut = ut_next
        if residual < tol:
            converged = True
            break
    if not converged:
        raise FixedPointDivergenceError(iterations, residual, tol)

    p = solve_stream_lowrank(blocks, ut, s0, n_trunc, out=buf)
    u_next = ut - a * (p @ ut)
    return u_next, StepReport(iterations, residual, time.perf_counter() - t0)


def splitting_s_step(
    s: np.ndarray,
    u: np.ndarray,
    dt: float,
    blocks: LaplacianBlocks,
    cfg: FixedPointConfig = FixedPointConfig(),
    n_trunc: int | None = None,
) -> tuple[np.ndarray, StepReport]:
    """Iso2 scheme on u(r) for the core, with the frame held fixed.

    The stream map is the compressed ``Q(S) = U^H P(U S U^H) U``; the scaled
    commutator keeps the ambient hbar(N), so the dynamics match the full-size
    flow restricted to the frame.  Isospectral in S.
    """
    t0 = time.perf_counter()
    s = np.asarray(s, dtype=np.complex128)
    u = np.asarray(u, dtype=np.complex128)
    hb = hbar(blocks.n)
    a = dt / (2.0 * hb)
    tol = cfg.tol * max(frobenius_norm(s), 1e-300)

    buf = _stream_buffer(blocks.n, n_trunc)

    def qmap(core):
        p = solve_stream_lowrank(blocks, u, core, n_trunc, out=buf)
        return u.conj().T @ (p @ u)

    st = s.copy()
    residual = 0.0
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iters + 1):
        q = qmap(st)
        qs = q @ st
        st_next = s - a * (qs - qs.conj().T) + (a * a) * (qs @ q)
        residual = frobenius_norm(st_next - st)
        st = st_next
        if residual < tol:
            converged = True
            break
    if not converged:
        raise FixedPointDivergenceError(iterations, residual, tol)

    q = qmap(st)
    qs = q @ st
    s_next = st - a * (qs - qs.conj().T) - (a * a) * (qs @ q)
    return s_next, StepReport(iterations, residual, time.perf_counter() - t0)


def strang_step(
    f: SpectralFactorization,
    dt: float,
    blocks: LaplacianBlocks,
    tableau: ButcherTableau = TABLEAUX["heun"],
    cfg: FixedPointConfig = FixedPointConfig(),
    n_trunc: int | None = None,
    s_substeps: int = 2,
) -> tuple[SpectralFactorization, StepReport]:
    """Strang splitting for the time-dependent-core factorization.

    Frame half-step with the core frozen, core full step with the midpoint
    frame frozen, frame half-step with the updated core frozen.  The core
    flow is isospectral and the frame stays orthonormal, so the Casimir
    functions of the reconstructed state are preserved.

    The core sub-flow is the stiffer of the two and carries the dominant
    share of the energy error, so it is resolved with ``s_substeps`` inner
    steps of the isospectral scheme (a composition of isospectral
    Lie-Poisson maps keeps every structural property).
    """
    if s_substeps < 1:
        raise ValueError("s_substeps must be at least 1")
    u_half = splitting_u_step(f.u, f.s, 0.5 * dt, blocks, tableau, n_trunc)
    s_new = f.s
    report = None
    for _ in range(s_substeps):
        s_new, report = splitting_s_step(s_new, u_half, dt / s_substeps, blocks, cfg, n_trunc)
    u_new = splitting_u_step(u_half, s_new, 0.5 * dt, blocks, tableau, n_trunc)
    return SpectralFactorization(u=u_new, s=s_new), report
