import math

import numpy as np
import pytest

from oracles import wigner3j_exact
from zeitlin.quantization import (
    CoefficientVector,
    basis_diagonal,
    basis_matrix,
    lift,
    project,
    render_field,
    spin_matrices,
    wigner3j,
)
from zeitlin.states import scaled_inner


def test_wigner_known_value():
    # frozen from the exact oracle
    assert wigner3j(1, 1, 0, 1, -1, 0) == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-13)
    assert wigner3j_exact(1, 1, 0, 1, -1, 0) == pytest.approx(0.5773502691896258, rel=1e-14)


def test_wigner_selection_rules_exact_zero():
    assert wigner3j(1, 1, 1, 0, 0, 0) == 0.0  # odd j-sum with all m = 0
    assert wigner3j(1, 1, 1, 1, 1, -1) == 0.0  # m-sum != 0
    assert wigner3j(5, 1, 1, 0, 0, 0) == 0.0  # triangle violated
    assert wigner3j(2, 1, 1, 1, 1, -2) == 0.0  # |m3| > j3
    assert wigner3j(0.5, 0.5, 2, 0.5, -0.5, 0) == 0.0  # triangle with halves


def test_wigner_domain_errors():
    with pytest.raises(ValueError):
        wigner3j(-1, 1, 1, 0, 0, 0)
    with pytest.raises(ValueError):
        wigner3j(1, 1, 1, 0.5, -0.5, 0)  # j/m parity mismatch
    with pytest.raises(ValueError):
        wigner3j(0.3, 1, 1, 0, 0, 0)  # not a half-integer


def test_wigner_matches_exact_oracle_exhaustive_small():
    twos = [x / 2.0 for x in range(0, 9)]
    for j1 in twos:
        for j2 in twos:
            for j3 in twos:
                if (2 * (j1 + j2 + j3)) % 2 != 0:
                    continue
                for dm1 in range(-int(2 * j1), int(2 * j1) + 1, 2):
                    for dm2 in range(-int(2 * j2), int(2 * j2) + 1, 2):
                        m1, m2 = dm1 / 2.0, dm2 / 2.0
                        m3 = -(m1 + m2)
                        if abs(m3) > j3 or (2 * (j3 - m3)) % 2 != 0:
                            continue
                        got = wigner3j(j1, j2, j3, m1, m2, m3)
                        want = wigner3j_exact(j1, j2, j3, m1, m2, m3)
                        assert got == pytest.approx(want, rel=1e-12, abs=1e-14)


def test_wigner_matches_exact_oracle_randomized_j20():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 300:
        dj1, dj2 = rng.integers(0, 41, size=2)
        dj3 = rng.integers(abs(dj1 - dj2), min(dj1 + dj2, 40) + 1)
        if (dj1 + dj2 + dj3) % 2:
            continue
        dm1 = rng.integers(-dj1, dj1 + 1)
        if (dj1 - dm1) % 2:
            continue
        dm2 = rng.integers(-dj2, dj2 + 1)
        if (dj2 - dm2) % 2:
            continue
        dm3 = -(dm1 + dm2)
        if abs(dm3) > dj3 or (dj3 - dm3) % 2:
            continue
        args = (dj1 / 2, dj2 / 2, dj3 / 2, dm1 / 2, dm2 / 2, dm3 / 2)
        got = wigner3j(*args)
        want = wigner3j_exact(*args)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-14), args
        checked += 1


def test_wigner_logfact_branch_documented_accuracy():
    # the large-momentum fallback path, held to its own 1e-10 guarantee
    from zeitlin.quantization import _racah_logfact

    rng = np.random.default_rng(11)
    checked = 0
    while checked < 200:
        dj1, dj2 = (int(x) for x in rng.integers(0, 41, size=2))
        dj3 = int(rng.integers(abs(dj1 - dj2), min(dj1 + dj2, 40) + 1))
        if (dj1 + dj2 + dj3) % 2:
            continue
        dm1 = int(rng.integers(-dj1, dj1 + 1))
        dm2 = int(rng.integers(-dj2, dj2 + 1))
        dm3 = -(dm1 + dm2)
        if (dj1 - dm1) % 2 or (dj2 - dm2) % 2 or abs(dm3) > dj3 or (dj3 - dm3) % 2:
            continue
        want = wigner3j_exact(dj1 / 2, dj2 / 2, dj3 / 2, dm1 / 2, dm2 / 2, dm3 / 2)
        got = _racah_logfact(dj1, dj2, dj3, dm1, dm2, dm3)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-13)
        checked += 1


def test_basis_t00_is_scaled_identity():
    for n in (2, 5, 8):
        t00 = basis_matrix(n, (0, 0)).dense()
        np.testing.assert_allclose(t00, np.eye(n) / math.sqrt(4 * math.pi), atol=1e-14)


def test_basis_support_single_diagonal():
    t = basis_matrix(8, (2, 1))
    dense = t.dense()
    assert t.offset == 1
    mask = np.ones((8, 8), dtype=bool)
    k = np.arange(7)
    mask[k, k + 1] = False
    assert np.all(dense[mask] == 0.0)
    assert np.any(dense[~mask] != 0.0)


def test_basis_entries_match_defining_formula():
    # evaluate every entry of the defining formula at N=6, including the
    # off-support pairs which must vanish through the selection rule
    n = 6
    s = (n - 1) / 2.0
    for ell in range(n):
        for m in range(-ell, ell + 1):
            dense = basis_matrix(n, (ell, m)).dense()
            for i in range(n):
                for j in range(n):
                    m1 = s - i
                    m2 = s - j
                    val = (
                        math.sqrt(n / (4 * math.pi))
                        * (-1.0) ** (s - m1)
                        * math.sqrt(2 * ell + 1)
                        * wigner3j_exact(s, ell, s, -m1, m, m2)
                    )
                    assert dense[i, j].real == pytest.approx(val, abs=1e-13)
                    assert dense[i, j].imag == 0.0


@pytest.mark.parametrize("n", [4, 8, 16])
def test_basis_orthonormality(n):
    scale = 4 * math.pi / n
    for m in range(-(n - 1), n):
        ells = list(range(abs(m), n))
        rows = np.stack([basis_diagonal(n, ell, m) for ell in ells])
        gram = scale * (rows @ rows.T)
        assert np.max(np.abs(gram - np.eye(len(ells)))) < 1e-10


def test_basis_adjoint_symmetry():
    # T_{l,m}^H == (-1)^m T_{l,-m}; derived from 3j symmetries, not assumed
    n = 8
    for ell in range(n):
        for m in range(-ell, ell + 1):
            t = basis_matrix(n, (ell, m)).dense()
            tm = basis_matrix(n, (ell, -m)).dense()
            np.testing.assert_allclose(t.conj().T, (-1.0) ** m * tm, atol=1e-13)


def test_basis_index_errors():
    with pytest.raises(ValueError):
        basis_matrix(4, (4, 0))
    with pytest.raises(ValueError):
        basis_matrix(4, (1, 2))


def test_project_zero_and_single_mode():
    n = 8
    assert np.all(project(CoefficientVector.zeros(n)) == 0.0)
    w = project(CoefficientVector(n=n, coeffs={(1, 0): 1.0 + 0.0j}))
    t10 = basis_matrix(n, (1, 0)).dense()
    np.testing.assert_allclose(w, 1j * t10, atol=1e-15)
    assert np.all(w == np.diag(np.diagonal(w)))  # m=0 modes are diagonal
    assert abs(np.trace(w)) < 1e-14  # trace zero iff no (0,0) component
    w00 = project(CoefficientVector(n=n, coeffs={(0, 0): 1.0 + 0.0j}))
    assert abs(np.trace(w00)) > 0.1


def test_project_reality_violation_raises():
    coeffs = CoefficientVector(n=4, coeffs={(1, 1): 1.0 + 0.0j, (1, -1): 1.0 + 0.0j})
    with pytest.raises(ValueError, match="reality"):
        project(coeffs)


def test_project_real_coefficients_give_skew_hermitian():
    n = 8
    rng = np.random.default_rng(3)
    coeffs = {}
    for ell in range(n):
        coeffs[(ell, 0)] = complex(rng.standard_normal())
        for m in range(1, ell + 1):
            v = complex(rng.standard_normal(), rng.standard_normal())
            coeffs[(ell, m)] = v
            coeffs[(ell, -m)] = (-1.0) ** m * np.conj(v)
    w = project(CoefficientVector(n=n, coeffs=coeffs))
    assert np.linalg.norm(w + w.conj().T) < 1e-12 * np.linalg.norm(w)
    # component extraction is a right inverse on the coefficient side too
    back = lift(w)
    for key, v in coeffs.items():
        assert back.get(*key) == pytest.approx(v, abs=1e-12)


def test_lift_examples_and_roundtrips():
    n = 8
    t10 = basis_matrix(n, (1, 0)).dense()
    c = lift(1j * t10)
    assert c.get(1, 0) == pytest.approx(1.0, abs=1e-14)
    others = [abs(v) for k, v in c.coeffs.items() if k != (1, 0)]
    assert max(others) < 1e-14
    assert max(abs(v) for v in lift(np.zeros((n, n))).coeffs.values()) == 0.0

    from oracles import random_skew

    for n in (4, 8, 16):
        w = random_skew(n, seed=n)
        back = project(lift(w))
        assert np.linalg.norm(back - w) < 1e-12 * np.linalg.norm(w)


def test_render_zero_and_y10():
    assert np.all(render_field(np.zeros((4, 4), dtype=complex), 8, 8).values == 0.0)
    w = project(CoefficientVector(n=8, coeffs={(1, 0): 1.0 + 0.0j}))
    grid = render_field(w, 65, 128)
    expected = math.sqrt(3.0 / (4 * math.pi)) * np.cos(grid.theta)
    assert np.max(np.abs(grid.values - expected[:, None])) < 1e-9


def test_render_zero_mean_quadrature():
    from oracles import random_skew

    w = random_skew(8, seed=5, traceless=True)
    grid = render_field(w, 201, 256)
    dtheta = math.pi / 200
    dphi = 2 * math.pi / 256
    integral = np.sum(grid.values * np.sin(grid.theta)[:, None]) * dtheta * dphi
    assert abs(integral) < 1e-3 * np.max(np.abs(grid.values))


def test_render_grid_validation():
    with pytest.raises(ValueError):
        render_field(np.zeros((4, 4), dtype=complex), 1, 16)


def test_spin_matrices_pauli_and_identities():
    s1, s2, s3 = spin_matrices(2)
    pauli = [
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
    for s, p in zip((s1, s2, s3), pauli):
        np.testing.assert_allclose(s, p / 2.0, atol=1e-15)

    for n in (2, 3, 8, 64):
        s1, s2, s3 = spin_matrices(n)
        spin = (n - 1) / 2.0
        assert np.max(np.abs(s1 @ s2 - s2 @ s1 - 1j * s3)) < 1e-13 * max(1.0, n)
        assert np.max(np.abs(s2 @ s3 - s3 @ s2 - 1j * s1)) < 1e-13 * max(1.0, n)
        cas = s1 @ s1 + s2 @ s2 + s3 @ s3
        np.testing.assert_allclose(cas, spin * (spin + 1) * np.eye(n), atol=1e-11)


def test_scaled_inner_against_basis():
    n = 8
    t10 = basis_matrix(n, (1, 0)).dense()
    t20 = basis_matrix(n, (2, 0)).dense()
    assert scaled_inner(t10, t10) == pytest.approx(1.0, abs=1e-12)
    assert abs(scaled_inner(t10, t20)) < 1e-12
