"""Matrix states, the scaled Frobenius structure and spectral factorizations.

A vorticity state is a plain complex ``N x N`` numpy array, skew-Hermitian up
to roundoff.  Low-rank states are carried as ``Y = U S U^H`` with an
orthonormal ``N x r`` frame and an ``r x r`` skew-Hermitian core
(:class:`SpectralFactorization`).  The best rank-r approximation of a
skew-Hermitian matrix is its spectral truncation to the r eigenvalues of
largest modulus (:func:`truncated_eig`).

The checkpoint container shared with the CLI lives here as well: a one-line
UTF-8 JSON header followed by raw little-endian complex128 payload(s),
bit-exact on round trip.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DegenerateSpectrumWarning",
    "SpectralFactorization",
    "frobenius_norm",
    "hbar",
    "is_skew_hermitian",
    "load_checkpoint",
    "reconstruct",
    "reorthonormalize",
    "save_checkpoint",
    "scaled_bracket",
    "scaled_inner",
    "sorted_eigenvalues",
    "truncated_eig",
]


class DegenerateSpectrumWarning(UserWarning):
    """Raised when the spectral cut falls inside a (numerically) tied pair."""


def hbar(n: int) -> float:
    """Commutator scaling 2 / sqrt(N^2 - 1)."""
    if n < 2:
        raise ValueError("N must be at least 2")
    return 2.0 / math.sqrt(n * n - 1.0)


def frobenius_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def scaled_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Scaled Frobenius inner product ``(4*pi/N) * tr(A^H B)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return complex(4.0 * math.pi / a.shape[0] * np.vdot(a, b))


def scaled_bracket(a: np.ndarray, b: np.ndarray, hb: float | None = None) -> np.ndarray:
    """Scaled commutator ``(A B - B A) / hbar``.

    ``hb`` defaults to the scaling of the matrices' own size; integrators on
    the reduced algebra u(r) pass the ambient hbar(N) explicitly.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected equal square shapes, got {a.shape} and {b.shape}")
    if hb is None:
        hb = hbar(a.shape[0])
    return (a @ b - b @ a) / hb


def is_skew_hermitian(w: np.ndarray, rtol: float = 1e-12) -> bool:
    w = np.asarray(w)
    scale = np.linalg.norm(w)
    if scale == 0.0:
        return True
    return np.linalg.norm(w + w.conj().T) < rtol * scale


@dataclass(frozen=True)
class SpectralFactorization:
    """Low-rank state ``Y = U S U^H``: orthonormal frame plus skew core."""

    u: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def r(self) -> int:
        return self.u.shape[1]

    def reconstruct(self) -> np.ndarray:
        return (self.u @ self.s) @ self.u.conj().T

    def validate(self, rtol: float = 1e-12) -> None:
        gram = self.u.conj().T @ self.u
        if np.linalg.norm(gram - np.eye(self.r)) > rtol * math.sqrt(self.r):
            raise ValueError("frame columns are not orthonormal")
        if not is_skew_hermitian(self.s, rtol):
            raise ValueError("core is not skew-Hermitian")


def reconstruct(f: SpectralFactorization) -> np.ndarray:
    """Dense state from a factorization; spectrum of S padded with zeros."""
    return f.reconstruct()


def _eig_order(mu: np.ndarray) -> np.ndarray:
    """Deterministic ordering: |mu| descending, then mu descending, then index."""
    return np.lexsort((np.arange(mu.size), -mu, -np.abs(mu)))


def sorted_eigenvalues(x, n: int | None = None) -> np.ndarray:
    """Eigenvalues as a complex vector sorted by |Im| desc (deterministic ties).

    Accepts a dense skew-Hermitian matrix or a :class:`SpectralFactorization`;
    a factored spectrum is padded with zeros to length ``n`` (default N).
    """
    if isinstance(x, SpectralFactorization):
        mu = np.linalg.eigvalsh(-1j * x.s)
        total = x.n if n is None else n
    else:
        x = np.asarray(x)
        mu = np.linalg.eigvalsh(-1j * x)
        total = x.shape[0] if n is None else n
    mu = mu[_eig_order(mu)]
    out = np.zeros(total, dtype=np.complex128)
    out[: mu.size] = 1j * mu
    return out


def truncated_eig(w: np.ndarray, r: int) -> SpectralFactorization:
    """Best rank-r approximation of a skew-Hermitian matrix by spectral cut.

    Diagonalizes the Hermitian matrix -iW, keeps the r eigenvalues of largest
    modulus (ties broken by signed value, then original index) and fixes each
    eigenvector phase so its largest-magnitude entry is real positive.  By
    Eckart-Young-Mirsky the reconstruction is Frobenius-optimal among rank-r
    matrices.
    """
    w = np.asarray(w, dtype=np.complex128)
    n = w.shape[0]
    if not (1 <= r <= n):
        raise ValueError(f"rank must satisfy 1 <= r <= N, got r={r}, N={n}")
    mu, vec = np.linalg.eigh(-1j * w)
    order = _eig_order(mu)
    mu = mu[order]
    vec = vec[:, order]
    if r < n:
        gap = abs(abs(mu[r - 1]) - abs(mu[r]))
        scale = max(abs(mu[0]), 1e-300)
        if gap <= 1e-12 * scale:
            warnings.warn(
                f"spectral cut at r={r} falls inside a tied pair "
                f"(|mu_r|={abs(mu[r - 1]):.6e}, |mu_r+1|={abs(mu[r]):.6e}); "
                "best-approximation uniqueness is lost, tie-break applied",
                DegenerateSpectrumWarning,
            )
    u = vec[:, :r].copy()
    for j in range(r):
        k = int(np.argmax(np.abs(u[:, j])))
        pivot = u[k, j]
        if abs(pivot) > 0:
            u[:, j] *= np.conj(pivot) / abs(pivot)
    return SpectralFactorization(u=u, s=np.diag(1j * mu[:r]))


def reorthonormalize(u: np.ndarray) -> np.ndarray:
    """Maintenance QR re-orthonormalization with a deterministic phase fix.

    Never called by the steppers (they preserve orthonormality analytically);
    exposed for explicit recovery only.
    """
    q, rmat = np.linalg.qr(u)
    d = np.diagonal(rmat).copy()
    d = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return q * d.conj()


# Checkpoint container: JSON header line + raw little-endian complex128
# payloads, row-major.  Factored states store U then S.

_MAGIC = "zeitlin-checkpoint"


def save_checkpoint(path, state, scenario_hash: str = "") -> None:
    header = {
        "magic": _MAGIC,
        "version": 1,
        "dtype": "complex128",
        "layout": "row-major",
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "scenario_hash": scenario_hash,
    }
    if isinstance(state, SpectralFactorization):
        header.update(kind="factored", n=state.n, r=state.r)
        payloads = [state.u, state.s]
    else:
        w = np.asarray(state, dtype=np.complex128)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("dense checkpoint state must be a square matrix")
        header.update(kind="dense", n=w.shape[0], r=w.shape[0])
        payloads = [w]
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for arr in payloads:
            fh.write(np.ascontiguousarray(arr, dtype="<c16").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns ``(state, header)`` with the state either a
    dense array or a :class:`SpectralFactorization`."""
    with open(path, "rb") as fh:
        line = fh.readline()
        header = json.loads(line.decode("utf-8"))
        if header.get("magic") != _MAGIC:
            raise ValueError(f"not a checkpoint file: {path}")
        blob = fh.read()
    n = int(header["n"])
    if header["kind"] == "dense":
        w = np.frombuffer(blob, dtype="<c16", count=n * n).reshape(n, n)
        return w.astype(np.complex128), header
    r = int(header["r"])
    u = np.frombuffer(blob, dtype="<c16", count=n * r).reshape(n, r).astype(np.complex128)
    s_off = n * r * 16
    s = (
        np.frombuffer(blob[s_off:], dtype="<c16", count=r * r)
        .reshape(r, r)
        .astype(np.complex128)
    )
    return SpectralFactorization(u=u, s=s), header
