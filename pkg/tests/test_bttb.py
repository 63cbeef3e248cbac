import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spreadpide.bttb import (BCCBPreconditioner, BTTBMatrix, GeneratingArray,
                             SingularPreconditionerError, apply_inverse, bicgstab, matvec,
                             optimal_bccb)


def random_gen(rng, m, n, complex_=False):
    v = rng.standard_normal((2 * m - 1, 2 * n - 1))
    if complex_:
        v = v + 1j * rng.standard_normal(v.shape)
    return GeneratingArray(m, n, v)


def unitary_dft(k):
    return np.fft.fft(np.eye(k)) / np.sqrt(k)


def test_generating_array_shape_checked():
    with pytest.raises(ValueError):
        GeneratingArray(3, 3, np.zeros((5, 4)))


def test_dense_layout():
    g = GeneratingArray.from_function(3, 2, lambda p, q: 10 * p + q)
    D = g.to_dense()
    # row (k2=2, k1=0) -> 4, column (j2=0, j1=1) -> 1
    assert D[4, 1] == 10 * 2 + (0 - 1)


def test_delta_is_identity():
    m, n = 4, 6
    v = np.zeros((2 * m - 1, 2 * n - 1))
    v[m - 1, n - 1] = 1
    x = np.random.default_rng(0).standard_normal(m * n)
    np.testing.assert_array_almost_equal(matvec(BTTBMatrix(GeneratingArray(m, n, v)), x), x, 15)


def test_matvec_matches_dense_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        m, n = rng.integers(1, 6, size=2)
        g = random_gen(rng, m, n)
        x = rng.standard_normal(m * n)
        ref = g.to_dense() @ x
        assert np.linalg.norm(BTTBMatrix(g) @ x - ref) <= 1e-12 * np.linalg.norm(ref)


def test_matvec_complex():
    rng = np.random.default_rng(2)
    g = random_gen(rng, 5, 4, complex_=True)
    x = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    np.testing.assert_allclose(BTTBMatrix(g) @ x, g.to_dense() @ x, atol=1e-12)


def test_matvec_dimension_error():
    with pytest.raises(ValueError):
        BTTBMatrix(GeneratingArray.zeros(3, 3)) @ np.ones(8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_matvec_linear(m, n, a, b, seed):
    rng = np.random.default_rng(seed)
    T = BTTBMatrix(random_gen(rng, m, n))
    x, y = rng.standard_normal((2, m * n))
    lhs = T @ (a * x + b * y)
    rhs = a * (T @ x) + b * (T @ y)
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_generating_arrays_combine_linearly(m, n, seed):
    rng = np.random.default_rng(seed)
    g1, g2 = random_gen(rng, m, n), random_gen(rng, m, n)
    x = rng.standard_normal(m * n)
    np.testing.assert_allclose(BTTBMatrix(2 * g1 - g2) @ x, 2 * (BTTBMatrix(g1) @ x) - BTTBMatrix(g2) @ x,
                               atol=1e-11)


def test_crop_and_pad_roundtrip():
    rng = np.random.default_rng(3)
    g = random_gen(rng, 3, 3)
    big = g.pad(6, 5)
    np.testing.assert_array_equal(big.crop(3, 3).values, g.values)
    # leading principal block of the padded matrix equals the original on shared offsets
    assert big(2, -2) == g(2, -2) and big(4, 0) == 0


def test_optimal_bccb_matches_frobenius_projection():
    rng = np.random.default_rng(4)
    for m, n in [(4, 4), (3, 5), (8, 8), (1, 6)]:
        g = random_gen(rng, m, n)
        F = np.kron(unitary_dft(m), unitary_dft(n))
        ref = np.diag(F @ g.to_dense() @ F.conj().T).reshape(m, n)
        np.testing.assert_allclose(optimal_bccb(g).eigen, ref, atol=1e-10 * np.abs(ref).max())


def test_optimal_bccb_fixed_point_and_identity():
    rng = np.random.default_rng(5)
    m, n = 4, 3
    c = rng.standard_normal((m, n)) + 5
    eig = np.fft.fft2(c)
    P = BCCBPreconditioner(m, n, eig)
    circ = GeneratingArray.from_function(m, n, lambda p, q: c[p % m, q % n])
    np.testing.assert_allclose(optimal_bccb(circ).eigen, eig, atol=1e-13 * np.abs(eig).max())
    np.testing.assert_allclose(P.to_dense(), circ.to_dense(), atol=1e-12)
    ident = GeneratingArray.from_function(m, n, lambda p, q: (p == 0) & (q == 0))
    np.testing.assert_allclose(optimal_bccb(ident).eigen, 1.0, atol=1e-15)


def test_singular_preconditioner_rejected():
    with pytest.raises(SingularPreconditionerError):
        optimal_bccb(GeneratingArray.zeros(3, 3))
    e = np.ones((2, 2)); e[0, 0] = 0
    with pytest.raises(SingularPreconditionerError):
        BCCBPreconditioner(2, 2, e)


def test_apply_inverse_identity_and_dense():
    x = np.arange(12.0)
    np.testing.assert_array_equal(apply_inverse(BCCBPreconditioner.identity(3, 4), x), x)
    rng = np.random.default_rng(6)
    eig = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4)) + 3
    P = BCCBPreconditioner(3, 4, eig)
    np.testing.assert_allclose(P.apply_inverse(x), np.linalg.solve(P.to_dense(), x), atol=1e-12)


def test_bicgstab_identity():
    g = GeneratingArray.from_function(3, 3, lambda p, q: 1.0 * ((p == 0) & (q == 0)))
    b = np.arange(1.0, 10.0)
    x, st_ = bicgstab(BTTBMatrix(g), None, b)
    np.testing.assert_allclose(x, b)
    assert st_.iterations <= 1 and st_.converged


def diag_dominant(rng, m):
    v = 0.1 * rng.standard_normal((2 * m - 1, 2 * m - 1))
    v[m - 1, m - 1] = 10.0
    return GeneratingArray(m, m, v)


def test_bicgstab_matches_dense_solve():
    rng = np.random.default_rng(7)
    g = diag_dominant(rng, 8)
    T = BTTBMatrix(g)
    b = rng.standard_normal(64)
    ref = np.linalg.solve(g.to_dense(), b)
    for P in (optimal_bccb(T), None):
        x, st_ = bicgstab(T, P, b, tol=1e-12)
        assert st_.converged and st_.residual <= 1e-12
        np.testing.assert_allclose(x, ref, atol=1e-8)


def test_bicgstab_zero_rhs_and_warm_start():
    rng = np.random.default_rng(8)
    g = diag_dominant(rng, 5)
    T = BTTBMatrix(g)
    x, st_ = bicgstab(T, None, np.zeros(25))
    assert np.all(x == 0) and st_.iterations == 0
    b = rng.standard_normal(25)
    sol = np.linalg.solve(g.to_dense(), b)
    x, st_ = bicgstab(T, None, b, x0=sol)
    assert st_.iterations == 0


def test_bicgstab_reports_nonconvergence():
    rng = np.random.default_rng(9)
    g = random_gen(rng, 6, 6)
    x, st_ = bicgstab(BTTBMatrix(g), None, rng.standard_normal(36), tol=1e-14, maxit=2)
    assert not st_.converged and st_.iterations <= 2
