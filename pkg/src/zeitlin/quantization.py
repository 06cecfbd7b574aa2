"""Quantized spherical-harmonic basis matrices and grid rendering.

For a truncation size ``N``, every harmonic index ``(ell, m)`` with
``ell < N`` and ``|m| <= ell`` is represented by an ``N x N`` matrix whose
nonzero entries sit on a single diagonal.  The family is orthonormal with
respect to the scaled Frobenius inner product ``(4*pi/N) * tr(A^H B)`` and,
combined with the imaginary unit, spans the skew-Hermitian matrices.
Coefficient vectors of a real function on the sphere map to skew-Hermitian
matrices (:func:`project`) and back (:func:`lift`); matrix states can be
rendered on a latitude-longitude grid for inspection (:func:`render_field`).

Matrix entries are assembled from Wigner 3j symbols evaluated with the Racah
single-sum formula.  For small angular momenta (j1+j2+j3 <= 120, which covers
every basis build up to N = 61) the sum runs in exact big-integer arithmetic
and only the final square root is floating point, so values are correct to a
unit in the last place; beyond that the log-factorial form takes over, with
relative accuracy around 1e-10 into the few-hundreds range where the
alternating sum starts to cancel.

Half-integer angular momenta are carried as doubled integers internally so
that selection rules are decided exactly, never through float comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "BasisMatrix",
    "CoefficientVector",
    "FieldGrid",
    "basis_diagonal",
    "basis_matrix",
    "lift",
    "project",
    "render_field",
    "spin_matrices",
    "wigner3j",
]


# Log-factorial table, grown on demand.  _logfact(n) == log(n!).
_logfact_table = [0.0]


def _logfact(n: int) -> float:
    while len(_logfact_table) <= n:
        k = len(_logfact_table)
        _logfact_table.append(_logfact_table[-1] + math.log(k))
    return _logfact_table[n]


def _as_doubled(x, name: str) -> int:
    """Round a (half-)integer argument to its exact doubled-integer form."""
    d = round(2.0 * float(x))
    if abs(2.0 * float(x) - d) > 1e-9:
        raise ValueError(f"{name} must be an integer or half-integer, got {x!r}")
    return int(d)


# Below this j1+j2+j3 bound the symbol is evaluated in exact big-integer
# arithmetic (the squared value is <= 1, so the only rounding is the final
# square root).  120 covers every basis build up to N = 61; larger momenta
# fall back to log-factorials, whose alternating sum is the speed/accuracy
# trade documented in the module docstring.
_EXACT_DOUBLED_JSUM = 240


def _terms_bounds(dj1, dj2, dj3, dm1, dm2):
    a1 = (dj1 + dj2 - dj3) // 2
    b1 = (dj1 - dm1) // 2
    b2 = (dj2 + dm2) // 2
    c1 = (dj3 - dj2 + dm1) // 2
    c2 = (dj3 - dj1 - dm2) // 2
    return a1, b1, b2, c1, c2, max(0, -c1, -c2), min(a1, b1, b2)


def _racah_exact(dj1, dj2, dj3, dm1, dm2, dm3) -> float:
    a1, b1, b2, c1, c2, t_min, t_max = _terms_bounds(dj1, dj2, dj3, dm1, dm2)
    ssum = Fraction(0)
    for t in range(t_min, t_max + 1):
        denom = (
            math.factorial(t) * math.factorial(a1 - t)
            * math.factorial(b1 - t) * math.factorial(b2 - t)
            * math.factorial(c1 + t) * math.factorial(c2 + t)
        )
        ssum += Fraction((-1) ** t, denom)
    if ssum == 0:
        return 0.0
    square = Fraction(
        math.factorial(a1)
        * math.factorial((dj1 - dj2 + dj3) // 2)
        * math.factorial((-dj1 + dj2 + dj3) // 2),
        math.factorial((dj1 + dj2 + dj3) // 2 + 1),
    )
    square *= (
        math.factorial((dj1 + dm1) // 2) * math.factorial(b1)
        * math.factorial((dj2 - dm2) // 2) * math.factorial(b2)
        * math.factorial((dj3 + dm3) // 2) * math.factorial((dj3 - dm3) // 2)
    )
    square *= ssum * ssum
    sign = 1.0 if ssum > 0 else -1.0
    if ((dj1 - dj2 - dm3) // 2) % 2:
        sign = -sign
    return sign * math.sqrt(float(square))


def _racah_logfact(dj1, dj2, dj3, dm1, dm2, dm3) -> float:
    a1, b1, b2, c1, c2, t_min, t_max = _terms_bounds(dj1, dj2, dj3, dm1, dm2)
    log_pref = 0.5 * (
        _logfact(a1) + _logfact((dj1 - dj2 + dj3) // 2)
        + _logfact((-dj1 + dj2 + dj3) // 2) - _logfact((dj1 + dj2 + dj3) // 2 + 1)
        + _logfact((dj1 + dm1) // 2) + _logfact(b1)
        + _logfact((dj2 - dm2) // 2) + _logfact(b2)
        + _logfact((dj3 + dm3) // 2) + _logfact((dj3 - dm3) // 2)
    )
    logs = []
    for t in range(t_min, t_max + 1):
        logs.append(log_pref - (
            _logfact(t) + _logfact(a1 - t) + _logfact(b1 - t)
            + _logfact(b2 - t) + _logfact(c1 + t) + _logfact(c2 + t)
        ))
    peak = max(logs)
    acc = 0.0
    for t, lg in zip(range(t_min, t_max + 1), logs):
        acc += (-1.0) ** t * math.exp(lg - peak)
    phase = -1.0 if ((dj1 - dj2 - dm3) // 2) % 2 else 1.0
    return phase * acc * math.exp(peak)


def _wigner3j_doubled(dj1: int, dj2: int, dj3: int, dm1: int, dm2: int, dm3: int) -> float:
    """Racah single-sum evaluation; all arguments are doubled (half-)integers."""
    for dj, dm in ((dj1, dm1), (dj2, dm2), (dj3, dm3)):
        if dj < 0:
            raise ValueError("angular momenta must be nonnegative")
        if (dj - dm) % 2 != 0:
            raise ValueError("j and m must differ by an integer")
    if abs(dm1) > dj1 or abs(dm2) > dj2 or abs(dm3) > dj3:
        return 0.0
    if dm1 + dm2 + dm3 != 0:
        return 0.0
    if dj3 > dj1 + dj2 or dj3 < abs(dj1 - dj2):
        return 0.0
    if (dj1 + dj2 + dj3) % 2 != 0:
        return 0.0
    # Symmetry zero: reflection m -> -m flips the sign for odd j1+j2+j3.
    if dm1 == 0 and dm2 == 0 and dm3 == 0 and ((dj1 + dj2 + dj3) // 2) % 2 == 1:
        return 0.0
    if dj1 + dj2 + dj3 <= _EXACT_DOUBLED_JSUM:
        return _racah_exact(dj1, dj2, dj3, dm1, dm2, dm3)
    return _racah_logfact(dj1, dj2, dj3, dm1, dm2, dm3)


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol for integer or half-integer arguments.

    Returns exactly 0.0 when a selection rule fails (m1+m2+m3 != 0, triangle
    inequality violated, or |m| > j).  Raises ValueError for negative j or a
    j/m parity mismatch.
    """
    dj1 = _as_doubled(j1, "j1")
    dj2 = _as_doubled(j2, "j2")
    dj3 = _as_doubled(j3, "j3")
    dm1 = _as_doubled(m1, "m1")
    dm2 = _as_doubled(m2, "m2")
    dm3 = _as_doubled(m3, "m3")
    return _wigner3j_doubled(dj1, dj2, dj3, dm1, dm2, dm3)


def _check_index(n: int, ell: int, m: int) -> None:
    if not (0 <= ell <= n - 1):
        raise ValueError(f"ell={ell} out of range for N={n}")
    if abs(m) > ell:
        raise ValueError(f"|m|={abs(m)} exceeds ell={ell}")


@lru_cache(maxsize=None)
def _basis_values(n: int, ell: int, m: int) -> np.ndarray:
    """Nonzero entries of the (ell, m) basis matrix along its diagonal.

    Entry k of the returned vector is the matrix element at row
    ``k + max(0, -m)``, column ``row + m`` (numpy diagonal offset ``m``).
    """
    ds = n - 1  # doubled spin s = (N-1)/2
    length = n - abs(m)
    values = np.empty(length, dtype=np.float64)
    scale = math.sqrt(n / (4.0 * math.pi)) * math.sqrt(2 * ell + 1)
    row0 = max(0, -m)
    for k in range(length):
        row = k + row0
        dm1 = ds - 2 * row
        sign = -1.0 if row % 2 else 1.0
        values[k] = scale * sign * _wigner3j_doubled(
            ds, 2 * ell, ds, -dm1, 2 * m, dm1 - 2 * m
        )
    values.setflags(write=False)
    return values


def basis_diagonal(n: int, ell: int, m: int) -> np.ndarray:
    """Read-only vector of the nonzero diagonal of the (ell, m) basis matrix."""
    _check_index(n, ell, m)
    return _basis_values(n, ell, m)


@dataclass(frozen=True)
class BasisMatrix:
    """Quantized harmonic basis matrix, stored by its single nonzero diagonal."""

    n: int
    ell: int
    m: int
    values: np.ndarray = field(repr=False)

    @property
    def index(self) -> tuple[int, int]:
        return (self.ell, self.m)

    @property
    def offset(self) -> int:
        """Numpy diagonal offset (column minus row) carrying the entries."""
        return self.m

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.complex128)
        k = np.arange(self.n - abs(self.m))
        if self.m >= 0:
            out[k, k + self.m] = self.values
        else:
            out[k - self.m, k] = self.values
        return out


def basis_matrix(n: int, index: tuple[int, int]) -> BasisMatrix:
    """Construct the basis matrix for harmonic index ``(ell, m)`` at size N."""
    ell, m = index
    return BasisMatrix(n=n, ell=ell, m=m, values=basis_diagonal(n, ell, m))


@dataclass
class CoefficientVector:
    """Harmonic expansion coefficients of a function on the sphere."""

    n: int
    coeffs: dict[tuple[int, int], complex]

    @classmethod
    def zeros(cls, n: int) -> "CoefficientVector":
        return cls(n=n, coeffs={})

    def get(self, ell: int, m: int) -> complex:
        return self.coeffs.get((ell, m), 0.0 + 0.0j)

    def validate_reality(self, rtol: float = 1e-10) -> None:
        """Check omega[l,-m] == (-1)^m * conj(omega[l,m]); raise on violation."""
        for (ell, m), v in self.coeffs.items():
            partner = self.get(ell, -m)
            expected = (-1.0) ** m * np.conj(v)
            if abs(partner - expected) > rtol * max(1.0, abs(v)):
                raise ValueError(
                    f"reality constraint violated at (ell={ell}, m={m}): "
                    f"omega[l,-m]={partner!r}, expected {expected!r}"
                )


def project(coeffs: CoefficientVector) -> np.ndarray:
    """Map harmonic coefficients to the skew-Hermitian matrix state.

    Returns ``W = sum_{ell,m} i * omega^{lm} * T^N_{ell,m}``.  The coefficient
    vector must satisfy the reality constraint; the image is then
    skew-Hermitian up to roundoff.
    """
    n = coeffs.n
    coeffs.validate_reality()
    w = np.zeros((n, n), dtype=np.complex128)
    for (ell, m), v in coeffs.coeffs.items():
        if v == 0:
            continue
        _check_index(n, ell, m)
        values = _basis_values(n, ell, m)
        k = np.arange(n - abs(m))
        if m >= 0:
            w[k, k + m] += 1j * v * values
        else:
            w[k - m, k] += 1j * v * values
    return w


def lift(w: np.ndarray) -> CoefficientVector:
    """Expand a skew-Hermitian matrix in the quantized harmonic basis.

    Component extraction by the scaled Frobenius inner product:
    ``omega^{lm} = (4*pi/N) * tr((i T_{l,m})^H W)``.  Right inverse of
    :func:`project` up to roundoff.
    """
    w = np.asarray(w, dtype=np.complex128)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("state must be a square matrix")
    n = w.shape[0]
    scale = 4.0 * math.pi / n
    out: dict[tuple[int, int], complex] = {}
    for m in range(-(n - 1), n):
        diag = np.diagonal(w, offset=m)
        for ell in range(abs(m), n):
            values = _basis_values(n, ell, m)
            out[(ell, m)] = complex(-1j * scale * np.dot(values, diag))
    return CoefficientVector(n=n, coeffs=out)


@dataclass(frozen=True)
class FieldGrid:
    """Real scalar field sampled on an inclination-azimuth grid."""

    theta: np.ndarray  # inclination nodes in [0, pi]
    phi: np.ndarray    # azimuth nodes in [0, 2*pi)
    values: np.ndarray  # shape (n_theta, n_phi)

    @property
    def n_theta(self) -> int:
        return self.theta.size

    @property
    def n_phi(self) -> int:
        return self.phi.size


def _sph_theta_profile(ell: int, m: int, theta: np.ndarray) -> np.ndarray:
    """Complex spherical harmonic Y_{ell,m}(theta, phi=0), Condon-Shortley phase."""
    try:
        from scipy.special import sph_harm_y
        return np.asarray(sph_harm_y(ell, m, theta, 0.0), dtype=np.complex128)
    except ImportError:
        from scipy.special import sph_harm
        return np.asarray(sph_harm(m, ell, 0.0, theta), dtype=np.complex128)


def render_field(w: np.ndarray, n_theta: int, n_phi: int) -> FieldGrid:
    """Evaluate the vorticity function represented by a matrix state.

    Synthesizes ``sum omega^{lm} Y_{l,m}`` on a uniform grid, theta in
    [0, pi] inclusive, phi in [0, 2*pi) without the periodic endpoint.
    The imaginary residual must stay below 1e-9 relative for skew-Hermitian
    input; only synthesis is supported, there is no analysis transform.
    """
    if n_theta < 2 or n_phi < 2:
        raise ValueError("grid must have at least 2 nodes per direction")
    coeffs = lift(w)
    n = coeffs.n
    theta = np.linspace(0.0, math.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
    out = np.zeros((n_theta, n_phi), dtype=np.complex128)
    for m in range(-(n - 1), n):
        profile = np.zeros(n_theta, dtype=np.complex128)
        active = False
        for ell in range(abs(m), n):
            v = coeffs.get(ell, m)
            if v != 0:
                profile += v * _sph_theta_profile(ell, m, theta)
                active = True
        if active:
            out += np.outer(profile, np.exp(1j * m * phi))
    scale = np.max(np.abs(out)) if out.size else 0.0
    resid = np.max(np.abs(out.imag)) if out.size else 0.0
    if scale > 0 and resid > 1e-9 * scale:
        raise ArithmeticError(
            f"imaginary residual {resid:.3e} exceeds 1e-9 relative ({scale:.3e})"
        )
    return FieldGrid(theta=theta, phi=phi, values=out.real)


def spin_matrices(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Standard spin-s generators for s = (N-1)/2, as dense complex matrices.

    S3 is diagonal with entries s, s-1, ..., -s; S1 and S2 combine the
    ladder operators.  They satisfy [S1, S2] = i S3 cyclically and
    S1^2 + S2^2 + S3^2 = s(s+1) I.
    """
    if n < 1:
        raise ValueError("N must be positive")
    s = (n - 1) / 2.0
    k = np.arange(1, n, dtype=np.float64)
    c = np.sqrt(k * (n - k))
    sp = np.diag(c, 1).astype(np.complex128)
    sm = sp.T.copy()
    s1 = (sp + sm) / 2.0
    s2 = (sp - sm) / 2.0j
    s3 = np.diag(s - np.arange(n)).astype(np.complex128)
    return s1, s2, s3


@lru_cache(maxsize=None)
def _spin_sparse(n: int):
    """Sparse CSR spin generators; cached per size, treated as immutable."""
    from scipy.sparse import csr_array, diags_array

    s = (n - 1) / 2.0
    k = np.arange(1, n, dtype=np.float64)
    c = np.sqrt(k * (n - k))
    sp = diags_array([c], offsets=[1], shape=(n, n), dtype=np.complex128)
    sm = diags_array([c], offsets=[-1], shape=(n, n), dtype=np.complex128)
    s3 = diags_array([s - np.arange(n)], offsets=[0], shape=(n, n), dtype=np.complex128)
    s1 = (sp + sm) / 2.0
    s2 = (sp - sm) / 2.0j
    return csr_array(s1), csr_array(s2), csr_array(s3)
