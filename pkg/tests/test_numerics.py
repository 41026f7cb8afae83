import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import gammaln

from reflpos.errors import ValidationError
from reflpos.numerics import (
    as_sym_matrix,
    box_quadrature,
    cap_quadrature,
    interval_quadrature,
    nnls,
    psd_check,
    sphere_area,
    sphere_quadrature,
    sym_eig_min,
)


def monomial_sphere_integral(alpha):
    """Closed form of the integral of x^alpha over the unit sphere."""
    alpha = np.asarray(alpha)
    if np.any(alpha % 2):
        return 0.0
    b = (alpha + 1) / 2
    return 2 * np.exp(gammaln(b).sum() - gammaln(b.sum()))


def test_eig_min_identity():
    lam, v = sym_eig_min(np.eye(3))
    assert lam == pytest.approx(1.0)
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_eig_min_2x2_closed_form():
    lam, v = sym_eig_min([[1, 0.5], [0.5, 1]])
    assert lam == pytest.approx(0.5)
    assert abs(abs(v @ np.array([1, -1]) / np.sqrt(2)) - 1) < 1e-12


def test_eig_min_exponential_gram_positive():
    e = np.exp(-1)
    lam, v = sym_eig_min([[1, e, e * e], [e, 1, e], [e * e, e, 1]])
    assert lam > 0
    # symmetric block in basis (1,0,1)/sqrt2, (0,1,0): [[1+b, sqrt2 a], [sqrt2 a, 1]]
    a, b = e, e * e
    assert lam == pytest.approx(1 + b / 2 - np.sqrt(b * b / 4 + 2 * a * a), rel=1e-12)


def test_eig_min_residual():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(20, 20))
    A = A + A.T
    lam, v = sym_eig_min(A)
    assert np.linalg.norm(A @ v - lam * v) <= 1e-9 * np.linalg.norm(A)


def test_nonsymmetric_names_pair():
    with pytest.raises(ValidationError, match=r"A\[0\]\[1\]"):
        sym_eig_min([[1, 2], [0, 1]])


def test_nonfinite_rejected():
    with pytest.raises(ValidationError):
        psd_check([[np.inf, 0], [0, 1]])
    with pytest.raises(ValidationError):
        as_sym_matrix([[np.nan]])


def test_nonsquare_rejected():
    with pytest.raises(ValidationError):
        as_sym_matrix(np.ones((2, 3)))


def test_psd_diag():
    v = psd_check([[2, 0], [0, 3]])
    assert v.is_psd and v.witness is None
    assert v.scale == pytest.approx(3)


def test_psd_indefinite_witness():
    v = psd_check([[0, 1], [1, 0]])
    assert not v.is_psd
    assert v.min_eigenvalue == pytest.approx(-1)
    assert abs(abs(v.witness @ np.array([1, -1]) / np.sqrt(2)) - 1) < 1e-12
    A = np.array([[0, 1], [1, 0]])
    assert v.witness @ A @ v.witness < -v.tol * v.scale


def test_psd_riesz_gram_r3():
    rng = np.random.default_rng(3)
    from reflpos.kernels import KernelFamily, gram

    P = rng.normal(size=(6, 3))
    assert psd_check(gram(KernelFamily("riesz", 1.0, 3), P)).is_psd


def test_psd_scale_relative():
    # large-magnitude matrix with a tiny negative eigenvalue relative to scale
    A = np.diag([1e12, -1e-3])
    assert psd_check(A, tol=1e-10).is_psd
    assert not psd_check(np.diag([1.0, -1e-3])).is_psd


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(-10, 10)))
def test_psd_verdict_invariants(B):
    A = B + B.T
    v = psd_check(A)
    if v.is_psd:
        assert v.min_eigenvalue >= -v.tol * v.scale
    else:
        w = v.witness
        assert w @ A @ w < -v.tol * v.scale


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 6), elements=st.floats(-5, 5)))
def test_gram_of_vectors_always_psd(B):
    assert psd_check(B.T @ B).is_psd


def test_nnls_clipping():
    assert np.allclose(nnls(np.eye(2), [1, -1]), [1, 0])


def test_nnls_single_column():
    assert np.allclose(nnls([[1], [1]], [2, 2]), [2])


def test_nnls_dimension_mismatch():
    with pytest.raises(ValidationError):
        nnls(np.eye(3), [1, 2])


def test_nnls_exponential_dictionary():
    xs = np.linspace(0, 5, 40)
    grid = np.round(np.arange(0, 3.0001, 0.1), 10)
    A = np.exp(-np.outer(xs, grid))
    x = nnls(A, np.exp(-0.7 * xs))
    k = int(np.argmax(x))
    assert grid[k] == pytest.approx(0.7)
    assert abs(x[k] - 1) < 1e-4


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, (8, 4), elements=st.floats(-3, 3)),
    arrays(np.float64, (8,), elements=st.floats(-3, 3)),
)
def test_nnls_kkt(A, b):
    x = nnls(A, b)
    assert np.all(x >= 0)
    g = A.T @ (A @ x - b)
    scale = max(np.linalg.norm(A.T @ b), 1.0)
    # stationarity on the support, dual feasibility off it
    assert np.all(g >= -1e-8 * scale)
    assert np.all(np.abs(g[x > 0]) <= 1e-8 * scale)


def test_nnls_matches_brute_force():
    # exhaustive search over active sets as an independent oracle
    import itertools

    rng = np.random.default_rng(5)
    A = rng.normal(size=(7, 4))
    b = rng.normal(size=7)
    best = np.inf
    for k in range(5):
        for S in itertools.combinations(range(4), k):
            x = np.zeros(4)
            if S:
                sol, *_ = np.linalg.lstsq(A[:, S], b, rcond=None)
                if np.any(sol < 0):
                    continue
                x[list(S)] = sol
            best = min(best, np.linalg.norm(A @ x - b))
    assert np.linalg.norm(A @ nnls(A, b) - b) == pytest.approx(best, rel=1e-10)


def test_sphere_circle_circumference():
    q = sphere_quadrature(1, 8)
    assert abs(q.weights.sum() - 2 * np.pi) < 1e-12


def test_sphere_area_s2():
    q = sphere_quadrature(2, 4)
    assert q.integrate(lambda X: np.ones(len(X))) == pytest.approx(4 * np.pi, rel=1e-12)


def test_sphere_x0_squared():
    q = sphere_quadrature(2, 10)
    assert abs(q.integrate(lambda X: X[:, 0] ** 2) - 4 * np.pi / 3) < 1e-8


def test_sphere_n0_unsupported():
    with pytest.raises(ValidationError):
        sphere_quadrature(0, 4)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("order", [3, 6, 9])
def test_sphere_exact_on_polynomials(n, order):
    q = sphere_quadrature(n, order)
    assert np.all(q.weights > 0)
    assert np.abs(np.linalg.norm(q.nodes, axis=1) - 1).max() < 1e-12
    assert abs(q.weights.sum() / sphere_area(n) - 1) < 1e-8
    rng = np.random.default_rng(n * 10 + order)
    for _ in range(25):
        a = rng.multinomial(rng.integers(0, order + 1), np.ones(n + 1) / (n + 1))
        val = q.integrate(lambda X: np.prod(X ** a, axis=1))
        assert abs(val - monomial_sphere_integral(a)) <= 1e-10 * max(1.0, sphere_area(n))


def test_sphere_area_values():
    assert sphere_area(1) == pytest.approx(2 * np.pi)
    assert sphere_area(2) == pytest.approx(4 * np.pi)
    assert sphere_area(3) == pytest.approx(2 * np.pi ** 2)


def test_cap_quadrature_measure():
    # area of a geodesic cap of radius r on S^2 is 2 pi (1 - cos r)
    q = cap_quadrature([0, 0, 1.0], 0.3, 10)
    assert q.weights.sum() == pytest.approx(2 * np.pi * (1 - np.cos(0.3)), rel=1e-10)
    assert np.all(np.arccos(np.clip(q.nodes @ [0, 0, 1.0], -1, 1)) <= 0.3 + 1e-12)


def test_interval_and_box():
    q = interval_quadrature(0, 2, 6)
    assert q.integrate(lambda x: x[:, 0] ** 5) == pytest.approx(64 / 6)
    b = box_quadrature([0, 0], [1, 2], 5)
    assert b.integrate(lambda X: X[:, 0] * X[:, 1] ** 2) == pytest.approx(0.5 * 8 / 3)
