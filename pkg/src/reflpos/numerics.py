"""Shared numerical primitives.

Symmetric eigensolves, scale-relative PSD certification with witnesses,
nonnegative least squares and quadrature rules on spheres, caps,
intervals and boxes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import nnls as _scipy_nnls
from scipy.special import gammaln, roots_jacobi

from .errors import ValidationError

__all__ = [
    "PsdVerdict",
    "Quadrature",
    "as_sym_matrix",
    "sym_eig_min",
    "psd_check",
    "nnls",
    "sphere_area",
    "sphere_quadrature",
    "cap_quadrature",
    "interval_quadrature",
    "box_quadrature",
]

SYM_RTOL = 1e-12


def as_sym_matrix(A) -> np.ndarray:
    """Validate a real symmetric or complex Hermitian square matrix.

    Raises
    ------
    ValidationError
        On non-square input, non-finite entries, or an asymmetric pair
        (the offending ``(i, j)`` is named in the message).
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        bad = np.argwhere(~np.isfinite(A))[0]
        raise ValidationError(
            f"non-finite entry at ({bad[0]}, {bad[1]}); a singular kernel was "
            "probably evaluated on the diagonal"
        )
    if not np.iscomplexobj(A):
        A = A.astype(float)
    if A.size == 0:
        return A
    scale = max(1.0, float(np.abs(A).sum(axis=1).max()))
    diff = np.abs(A - A.conj().T)
    if diff.max() > SYM_RTOL * scale:
        i, j = np.unravel_index(np.argmax(diff), diff.shape)
        raise ValidationError(
            f"matrix is not symmetric: |A[{i}][{j}] - conj(A[{j}][{i}])| = "
            f"{diff[i, j]:.3e}"
        )
    return 0.5 * (A + A.conj().T)


def sym_eig_min(A) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and a unit eigenvector of a symmetric matrix.

    Examples
    --------
    >>> lam, v = sym_eig_min([[1.0, 0.5], [0.5, 1.0]])
    >>> round(lam, 12)
    0.5
    """
    A = as_sym_matrix(A)
    w, V = np.linalg.eigh(A)
    return float(w[0]), V[:, 0]


@dataclass(frozen=True)
class PsdVerdict:
    """Outcome of a scale-relative PSD test.

    Attributes
    ----------
    is_psd : bool
    min_eigenvalue : float
    witness : ndarray or None
        Unit vector ``v`` with ``v^H A v < -tol * scale`` when not PSD.
    scale : float
        Largest absolute eigenvalue.
    tol : float
    eigenvalues : ndarray
        Full ascending spectrum.
    """

    is_psd: bool
    min_eigenvalue: float
    witness: np.ndarray | None
    scale: float
    tol: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def relative_min(self) -> float:
        """Smallest eigenvalue divided by the scale (0 for the zero matrix)."""
        return self.min_eigenvalue / self.scale if self.scale > 0 else 0.0


def psd_check(A, tol: float = 1e-10) -> PsdVerdict:
    """Decide positive semidefiniteness relative to the spectral radius.

    The matrix is declared PSD when ``min_eig >= -tol * max|eig|``.
    Otherwise the eigenvector of the smallest eigenvalue is returned as a
    witness.

    Examples
    --------
    >>> psd_check([[0.0, 1.0], [1.0, 0.0]]).is_psd
    False
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    A = as_sym_matrix(A)
    if A.shape[0] == 0:
        return PsdVerdict(True, 0.0, None, 0.0, tol, np.zeros(0))
    w, V = np.linalg.eigh(A)
    scale = float(np.abs(w).max())
    lam = float(w[0])
    ok = lam >= -tol * scale
    witness = None if ok else V[:, 0].copy()
    return PsdVerdict(bool(ok), lam, witness, scale, tol, w)


def nnls(A, b, maxiter: int | None = None) -> np.ndarray:
    """Nonnegative least squares ``argmin ||Ax - b||, x >= 0``.

    Thin wrapper around the Lawson–Hanson active-set solver shipped with
    SciPy, with dimension validation.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
        raise ValidationError(
            f"dimension mismatch: A{A.shape} vs b{b.shape}"
        )
    if maxiter is None:
        maxiter = 50 * max(A.shape[1], 1)
    x, _ = _scipy_nnls(A, b, maxiter=maxiter)
    return x


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class Quadrature:
    """Nodes and positive weights on a domain.

    Attributes
    ----------
    nodes : ndarray, shape (N, d)
    weights : ndarray, shape (N,)
    domain : str
        One of ``"sphere"``, ``"cap"``, ``"interval"``, ``"box"``.
    measure : float
        Total measure of the domain.
    dim : int
        Intrinsic dimension (``n`` for the sphere S^n).
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: str
    measure: float
    dim: int

    def integrate(self, f) -> float:
        """Apply the rule to a vectorised callable on ``nodes``."""
        return np.asarray(f(self.nodes)) @ self.weights

    def __len__(self) -> int:
        return len(self.weights)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^n in R^(n+1)."""
    return float(2.0 * np.pi ** ((n + 1) / 2) / np.exp(gammaln((n + 1) / 2)))


def _polar_rule(m: int, q: int):
    """Rule for int_0^pi g(theta) sin^m(theta) d theta in u = cos(theta).

    Gauss–Jacobi with alpha = beta = (m-1)/2 absorbs the weight exactly.
    """
    a = 0.5 * (m - 1)
    if a == 0:
        u, w = leggauss(q)
    else:
        u, w = roots_jacobi(q, a, a)
    return u, w


def sphere_quadrature(n: int, order: int) -> Quadrature:
    """Product rule on S^n exact for polynomials of degree <= ``order``.

    Nested polar angles use Gauss–Jacobi rules in ``cos(theta)`` and the
    azimuth uses the trapezoid rule with ``order + 1`` points.
    """
    if n < 1:
        raise ValidationError("sphere_quadrature requires n >= 1")
    if order < 1:
        raise ValidationError("order must be >= 1")
    na = order + 1
    phi = 2 * np.pi * np.arange(na) / na
    nodes = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    weights = np.full(na, 2 * np.pi / na)
    q = order // 2 + 1
    # grow S^{k-1} -> S^k by prepending a polar angle with weight sin^{k-1}
    for k in range(2, n + 1):
        u, wu = _polar_rule(k - 1, q)
        sin_t = np.sqrt(1.0 - u * u)
        new_nodes = np.concatenate(
            [
                np.repeat(u, len(weights))[:, None],
                (sin_t[:, None, None] * nodes[None, :, :]).reshape(-1, k),
            ],
            axis=1,
        )
        weights = np.outer(wu, weights).ravel()
        nodes = new_nodes
    return Quadrature(nodes, weights, "sphere", sphere_area(n), n)


def _frame(center: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the tangent space at ``center`` (columns)."""
    d = len(center)
    Q, _ = np.linalg.qr(np.column_stack([center, np.eye(d)]))
    return Q[:, 1:d]


def cap_quadrature(center, radius: float, order: int) -> Quadrature:
    """Rule on the geodesic cap ``{x in S^n : angle(x, center) <= radius}``.

    Gauss–Legendre in the geodesic radius times a sphere rule on the
    directions S^(n-1) of the tangent space.
    """
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    n = len(c) - 1
    if n < 1:
        raise ValidationError("cap_quadrature requires n >= 1")
    if not 0 < radius <= np.pi:
        raise ValidationError("radius must lie in (0, pi]")
    t, w = leggauss(order // 2 + n)
    r = 0.5 * (t + 1) * radius
    wr = 0.5 * radius * w * np.sin(r) ** (n - 1)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
        wd = np.ones(2)
    else:
        sq = sphere_quadrature(n - 1, order)
        dirs, wd = sq.nodes, sq.weights
    E = _frame(c)
    tangent = dirs @ E.T
    nodes = (
        np.cos(r)[:, None, None] * c[None, None, :]
        + np.sin(r)[:, None, None] * tangent[None, :, :]
    ).reshape(-1, n + 1)
    weights = np.outer(wr, wd).ravel()
    return Quadrature(nodes, weights, "cap", float(weights.sum()), n)


def interval_quadrature(a: float, b: float, order: int) -> Quadrature:
    """Gauss–Legendre on ``[a, b]`` exact to degree ``order``."""
    if not b > a:
        raise ValidationError("require a < b")
    t, w = leggauss(order // 2 + 1)
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    return Quadrature(x[:, None], 0.5 * (b - a) * w, "interval", b - a, 1)


def box_quadrature(lo, hi, order: int) -> Quadrature:
    """Tensor Gauss–Legendre rule on an axis-aligned box."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ValidationError("box bounds must satisfy lo < hi componentwise")
    t, w = leggauss(order // 2 + 1)
    axes = [0.5 * (h - l) * t + 0.5 * (h + l) for l, h in zip(lo, hi)]
    wax = [0.5 * (h - l) * w for l, h in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(1)
    for wa in wax:
        weights = np.outer(weights, wa).ravel()
    return Quadrature(nodes, weights, "box", float(np.prod(hi - lo)), len(lo))
