"""Experiment initial conditions.

Two generators: random skew-Hermitian states with a prescribed spectrum, and
the vortex-blob state built from conjugated rank-one matrices.  Both are
deterministic functions of ``(spec, seed)``; random draws come from a single
PCG64 stream in a documented order, so baselines are reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .quantization import basis_matrix

__all__ = [
    "ScenarioSpec",
    "make_initial_condition",
    "prescribed_spectrum",
    "random_spectrum_ic",
    "scenario_hash",
    "vortex_blob_ic",
]

KINDS = ("random-spectrum", "vortex-blobs")


@dataclass(frozen=True)
class ScenarioSpec:
    """Initial-condition description; hashed into output filenames.

    ``basis="identity"`` skips the random conjugation of the prescribed
    spectrum and yields a diagonal (stationary, zonal-like) state -- the
    sanity case for convergence studies.  ``blob_adjoint`` selects the
    conjugate-transpose reading of the blob conjugation (default; the one
    that produces a skew-Hermitian state) or the literal transpose for
    comparison.  ``traceless`` additionally removes the trace component of
    the blob state; off by default because it raises the numerical rank from
    blob_count to N while leaving the bracket dynamics unchanged.
    """

    kind: str
    n: int
    seed: int
    spectrum_range: tuple[float, float] = (1e-11, 10.0)
    blob_count: int = 4
    basis: str = "haar"
    blob_adjoint: str = "conjugate-transpose"
    traceless: bool = False

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.n < 2:
            raise ValueError("N must be at least 2")
        if self.kind == "random-spectrum":
            lo, hi = self.spectrum_range
            if not (lo > 0 and hi > lo):
                raise ValueError("spectrum range must satisfy 0 < lo < hi")
            if self.basis not in ("haar", "identity"):
                raise ValueError(f"unknown basis {self.basis!r}")
        if self.kind == "vortex-blobs":
            if self.blob_count < 1:
                raise ValueError("blob count must be at least 1")
            if self.blob_adjoint not in ("conjugate-transpose", "transpose"):
                raise ValueError(f"unknown adjoint mode {self.blob_adjoint!r}")


def scenario_hash(spec: ScenarioSpec) -> str:
    payload = json.dumps(asdict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def prescribed_spectrum(spec: ScenarioSpec) -> np.ndarray:
    """Imaginary parts of the prescribed eigenvalues: moduli equally spaced
    over the range, signs alternating, last entry adjusted for zero trace."""
    lo, hi = spec.spectrum_range
    mu = np.linspace(lo, hi, spec.n)
    mu *= (-1.0) ** np.arange(spec.n)
    mu[-1] = -np.sum(mu[:-1])
    return mu


def random_spectrum_ic(spec: ScenarioSpec) -> np.ndarray:
    """Traceless skew-Hermitian state with the prescribed spectrum.

    A complex Gaussian matrix is QR-orthonormalized into a Haar-like unitary
    (R-diagonal phases absorbed), then conjugates diag(i mu).  Draw order:
    the full real Gaussian block, then the imaginary block.
    """
    spec.validate()
    if spec.kind != "random-spectrum":
        raise ValueError("scenario kind must be random-spectrum")
    mu = prescribed_spectrum(spec)
    if spec.basis == "identity":
        return np.diag(1j * mu)
    rng = np.random.default_rng(spec.seed)
    z = rng.standard_normal((spec.n, spec.n)) + 1j * rng.standard_normal((spec.n, spec.n))
    q, rmat = np.linalg.qr(z)
    d = np.diagonal(rmat)
    q = q * (d / np.abs(d))
    w = (q * (1j * mu)) @ q.conj().T
    return 0.5 * (w - w.conj().T)


def vortex_blob_ic(spec: ScenarioSpec) -> np.ndarray:
    """Low-rank vortex-blob state: conjugated corner rank-one charges.

    Each blob is ``R^H B R`` with ``B`` the (N,N) corner indicator and ``R``
    the exponential of a random combination of the degree-1 harmonics at
    amplitude ``100 sqrt(N)``; the exponential goes through the Hermitian
    eigendecomposition so R is unitary to roundoff.  Draw order: a_j, b_j,
    c_j per blob, blobs in order.  Numerical rank equals blob_count.
    """
    spec.validate()
    if spec.kind != "vortex-blobs":
        raise ValueError("scenario kind must be vortex-blobs")
    n = spec.n
    rng = np.random.default_rng(spec.seed)
    t11 = basis_matrix(n, (1, 1)).dense()
    t1m1 = basis_matrix(n, (1, -1)).dense()
    t10 = basis_matrix(n, (1, 0)).dense()
    amp = 100.0 * math.sqrt(n)

    w = np.zeros((n, n), dtype=np.complex128)
    for _ in range(spec.blob_count):
        a, b, c = rng.random(3)
        x = amp * (1j * a * (t11 - t1m1) - b * (t11 + t1m1) + 1j * c * t10)
        herm = -1j * x
        vals, vecs = np.linalg.eigh(herm)
        r = (vecs * np.exp(1j * vals)) @ vecs.conj().T
        row = r[n - 1, :]
        if spec.blob_adjoint == "conjugate-transpose":
            w += 2j * np.outer(np.conj(row), row)
        else:
            w += 2j * np.outer(row, row)
    w = 0.5 * (w - w.conj().T)
    if spec.traceless:
        w = w - (np.trace(w) / n) * np.eye(n)
    return w


def make_initial_condition(spec: ScenarioSpec) -> np.ndarray:
    spec.validate()
    if spec.kind == "random-spectrum":
        return random_spectrum_ic(spec)
    return vortex_blob_ic(spec)
