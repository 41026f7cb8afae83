"""Kernel families, Gram matrices and positivity thresholds.

Families
--------
riesz
    ``|x - y|^{-s}`` on R^n.
sphere_Q
    ``(1 - <x, y>)^{-s/2}`` on S^n.
compactified_K
    pullback of ``sphere_Q`` through the stereographic chart,
    ``2^{-s/2} (1+|x|^2)^{s/2} |x-y|^{-s} (1+|y|^2)^{s/2}``.
ball_R
    ``(1 - 2<x, y> + |x|^2 |y|^2)^{-s/2}`` on the open unit ball.
halfspace_reflected
    ``((x_0 + y_0)^2 + |x' - y'|^2)^{-s/2}`` on ``x_0 > 0``.
cone_power
    ``Delta(x + y)^{-lambda}`` on the open light cone, with
    ``Delta(z) = z_0^2 - |z'|^2``.
tube_power
    ``Delta(z + conj(w))^{-lambda}`` on the tube over the light cone,
    principal branch, restricted to ``Re Delta > 0``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc, betaincinv, beta as beta_fn, gammaln, hyp1f1
from scipy.stats import qmc

from .errors import (
    BranchDomainError,
    DiagonalSingularityError,
    DomainError,
    IntegrabilityError,
    ValidationError,
)
from .numerics import Quadrature, as_sym_matrix, psd_check, sphere_area

__all__ = [
    "FAMILIES",
    "KernelFamily",
    "PointConfig",
    "make_points",
    "eval_kernel",
    "kernel_matrix",
    "gram",
    "sigma_reflect",
    "smeared_gram",
    "refine_smeared_gram",
    "smeared_gram_polar",
    "cell_integral",
    "cap_bumps",
    "sphere_row_integral",
    "pd_phase_predicate",
    "Witness",
    "witness_search",
    "default_sampler",
]

FAMILIES = (
    "riesz",
    "sphere_Q",
    "compactified_K",
    "ball_R",
    "halfspace_reflected",
    "cone_power",
    "tube_power",
)

CARRIERS = {
    "riesz": "euclidean",
    "sphere_Q": "sphere",
    "compactified_K": "euclidean",
    "ball_R": "ball",
    "halfspace_reflected": "halfspace",
    "cone_power": "cone",
    "tube_power": "tube",
}

_SINGULAR = {"riesz", "sphere_Q", "compactified_K"}
COINCIDE_TOL = 1e-14


@dataclass(frozen=True)
class KernelFamily:
    """A kernel family with its exponent ``s`` (``lambda`` for cones).

    Parameters
    ----------
    tag : str
        One of :data:`FAMILIES`.
    s : float
        Exponent. For ``cone_power``/``tube_power`` this is ``lambda``.
    n : int
        Ambient dimension (``n`` for S^n, R^n, the ball, the half-space
        and the light cone in R^n).
    """

    tag: str
    s: float
    n: int

    def __post_init__(self):
        if self.tag not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.tag!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError("n must be a positive integer")
        s, n = float(self.s), self.n
        if not np.isfinite(s) or s < 0:
            raise ValidationError(f"{self.tag} requires a finite exponent >= 0")
        if self.tag in _SINGULAR and not s < n:
            raise IntegrabilityError(
                f"{self.tag} requires 0 <= s < n (local integrability); "
                f"got s={s}, n={n}"
            )
        if self.tag in ("cone_power", "tube_power") and n < 2:
            raise ValidationError("the light cone needs n >= 2")

    @property
    def carrier(self) -> str:
        return CARRIERS[self.tag]

    @property
    def lam(self) -> float:
        return float(self.s)

    @property
    def diagonal_singular(self) -> bool:
        return self.tag in _SINGULAR and self.s > 0

    @property
    def point_dim(self) -> int:
        return self.n + 1 if self.tag == "sphere_Q" else self.n


# ------------------------------------------------------------ point configs


def _carrier_violations(carrier: str, P: np.ndarray) -> np.ndarray:
    if carrier == "sphere":
        return np.abs(np.linalg.norm(P, axis=1) - 1.0) > 1e-12
    if carrier == "ball":
        return np.linalg.norm(P, axis=1) >= 1.0
    if carrier == "halfspace":
        return P[:, 0] <= 0
    if carrier == "cone":
        return P[:, 0] <= np.linalg.norm(P[:, 1:], axis=1)
    if carrier == "tube":
        R = P.real
        return R[:, 0] <= np.linalg.norm(R[:, 1:], axis=1)
    if carrier == "euclidean":
        return np.zeros(len(P), dtype=bool)
    raise ValidationError(f"unknown carrier {carrier!r}")


@dataclass(frozen=True)
class PointConfig:
    """Points on a declared carrier with their minimum separation."""

    points: np.ndarray
    carrier: str
    delta_min: float

    def __len__(self) -> int:
        return len(self.points)


def make_points(points, carrier: str) -> PointConfig:
    """Validate points against a carrier and record ``delta_min``."""
    P = np.atleast_2d(np.asarray(points))
    if not np.iscomplexobj(P):
        P = P.astype(float)
    if carrier != "tube" and np.iscomplexobj(P):
        raise ValidationError("complex points are only allowed on the tube")
    bad = np.nonzero(_carrier_violations(carrier, P))[0]
    if len(bad):
        raise DomainError(f"point {bad[0]} lies outside the {carrier} carrier")
    if len(P) > 1:
        D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
        D[np.diag_indices(len(P))] = np.inf
        dmin = float(D.min())
    else:
        dmin = np.inf
    return PointConfig(P, carrier, dmin)


def _as_config(fam: KernelFamily, pts) -> PointConfig:
    if isinstance(pts, PointConfig):
        cfg = pts
    else:
        cfg = make_points(pts, fam.carrier)
    if cfg.points.shape[1] != fam.point_dim:
        raise ValidationError(
            f"{fam.tag} with n={fam.n} expects points in dimension "
            f"{fam.point_dim}, got {cfg.points.shape[1]}"
        )
    return cfg


# --------------------------------------------------------------- evaluation


def _lorentz_delta(Z):
    return Z[..., 0] ** 2 - np.sum(Z[..., 1:] ** 2, axis=-1)


def kernel_matrix(fam: KernelFamily, X, Y) -> np.ndarray:
    """Vectorised ``K(X[i], Y[j])`` for all pairs.

    Raises
    ------
    DiagonalSingularityError
        If a diagonal-singular family meets a coincident pair.
    BranchDomainError
        If ``tube_power`` leaves ``Re Delta > 0``.
    """
    X = np.atleast_2d(np.asarray(X))
    Y = np.atleast_2d(np.asarray(Y))
    s, t = float(fam.s), fam.tag
    if t in ("riesz", "compactified_K", "sphere_Q"):
        if t == "sphere_Q":
            base = 1.0 - X @ Y.T
            dist = np.sqrt(np.maximum(2.0 * base, 0.0))
        else:
            diff = X[:, None, :] - Y[None, :, :]
            dist = np.linalg.norm(diff, axis=-1)
        if s == 0:
            return np.ones(dist.shape)
        hit = np.argwhere(dist <= COINCIDE_TOL)
        if len(hit):
            i, j = hit[0]
            raise DiagonalSingularityError(
                f"{t} is singular at coincident points (pair {i}, {j})"
            )
        if t == "sphere_Q":
            return base ** (-s / 2)
        K = dist ** (-s)
        if t == "compactified_K":
            wx = (1.0 + np.sum(X * X, axis=1)) ** (s / 2)
            wy = (1.0 + np.sum(Y * Y, axis=1)) ** (s / 2)
            K = 2.0 ** (-s / 2) * wx[:, None] * K * wy[None, :]
        return K
    if t == "ball_R":
        nx = np.sum(X * X, axis=1)
        ny = np.sum(Y * Y, axis=1)
        base = 1.0 - 2.0 * X @ Y.T + np.outer(nx, ny)
        return base ** (-s / 2)
    if t == "halfspace_reflected":
        d0 = X[:, None, 0] + Y[None, :, 0]
        dp = np.sum((X[:, None, 1:] - Y[None, :, 1:]) ** 2, axis=-1)
        return (d0 * d0 + dp) ** (-s / 2)
    if t == "cone_power":
        D = _lorentz_delta(X[:, None, :] + Y[None, :, :])
        if np.any(D <= 0):
            raise DomainError("x + y left the light cone")
        return D ** (-s)
    if t == "tube_power":
        Z = X.astype(complex)[:, None, :] + np.conj(Y.astype(complex))[None, :, :]
        D = _lorentz_delta(Z)
        bad = np.argwhere(D.real <= 0)
        if len(bad):
            i, j = bad[0]
            raise BranchDomainError(
                f"Re Delta(z + conj(w)) <= 0 at pair ({i}, {j}); the principal "
                "branch is only certified where Re Delta > 0"
            )
        return np.exp(-s * np.log(D))
    raise ValidationError(f"unknown family {t!r}")


def eval_kernel(fam: KernelFamily, x, y):
    """Evaluate one kernel value ``K(x, y)``.

    Examples
    --------
    >>> eval_kernel(KernelFamily("riesz", 1.0, 2), [0.0, 0.0], [2.0, 0.0])
    0.5
    """
    v = kernel_matrix(fam, np.atleast_1d(x)[None, :], np.atleast_1d(y)[None, :])[0, 0]
    return complex(v) if fam.tag == "tube_power" else float(v)


# -------------------------------------------------------------------- Grams


def sigma_reflect(X) -> np.ndarray:
    """Flip the first coordinate (sphere reflection or time reflection)."""
    Y = np.array(X, dtype=float, copy=True)
    Y[..., 0] = -Y[..., 0]
    return Y


def _mollified_riesz(P: np.ndarray, s: float, eps: float) -> np.ndarray:
    """Gram of Gaussian-smoothed point masses for ``|x-y|^{-s}``.

    For ``X ~ N(mu, 2 eps^2 I)``,
    ``E|X|^{-s} = (4 eps^2)^{-s/2} Gamma((n-s)/2) / Gamma(n/2)
    * 1F1(s/2; n/2; -|mu|^2 / (4 eps^2))``.
    """
    n = P.shape[1]
    r2 = np.sum((P[:, None, :] - P[None, :, :]) ** 2, axis=-1)
    c = np.exp(gammaln((n - s) / 2) - gammaln(n / 2)) * (4 * eps * eps) ** (-s / 2)
    return c * hyp1f1(s / 2, n / 2, -r2 / (4 * eps * eps))


def _singular_plain_gram(fam: KernelFamily, cfg: PointConfig, width: float):
    P = cfg.points
    s = float(fam.s)
    if fam.tag == "sphere_Q":
        # pull back to the chart, avoiding the chart's point at infinity
        if np.any(P[:, 0] < -0.5):
            P = sigma_reflect(P)
        P = P[:, 1:] / (1.0 + P[:, :1])
    if len(P) < 2:
        dmin = 1.0
    else:
        D = np.linalg.norm(P[:, None] - P[None, :], axis=-1)
        D[np.diag_indices(len(P))] = np.inf
        dmin = float(D.min())
    if dmin <= COINCIDE_TOL:
        raise DiagonalSingularityError(f"{fam.tag} Gram needs distinct points")
    G = _mollified_riesz(P, s, width * dmin)
    if fam.tag in ("compactified_K", "sphere_Q"):
        w = (1.0 + np.sum(P * P, axis=1)) ** (s / 2)
        G = 2.0 ** (-s / 2) * w[:, None] * G * w[None, :]
    return G


def _pairing_map(pairing) -> Callable | None:
    if pairing in (None, "plain"):
        return None
    if pairing == "sigma":
        return sigma_reflect
    if isinstance(pairing, tuple) and len(pairing) == 2:
        kind, fn = pairing
        if kind in ("reflected", "sharp") and callable(fn):
            return fn
    raise ValidationError(
        "pairing must be 'plain', 'sigma', ('reflected', tau) or ('sharp', map)"
    )


def gram(fam: KernelFamily, pts, pairing="plain", mollify: float | None = 0.25):
    """Gram matrix of a family on a point configuration.

    Parameters
    ----------
    fam : KernelFamily
    pts : PointConfig or array_like
    pairing : str or tuple
        ``"plain"``: ``K(x_i, x_j)``. ``"sigma"`` or ``("reflected", tau)``:
        ``K(tau x_i, x_j)``. ``("sharp", m)``: ``K(x_i, m(x_j))``; for the
        cone families ``K(x, y)`` already depends on ``x + y`` so the
        identity map gives ``K(x_i + x_j^#)`` with ``x^# = x``.
    mollify : float or None
        Plain Grams of diagonal-singular families are formed from
        Gaussian-smoothed point masses of width ``mollify * delta_min``
        (an exact Gram of vectors in the kernel's Hilbert space). ``None``
        refuses and raises :class:`DiagonalSingularityError`.
    """
    cfg = _as_config(fam, pts)
    P = cfg.points
    fn = _pairing_map(pairing)
    if fn is None:
        if fam.diagonal_singular:
            if mollify is None:
                raise DiagonalSingularityError(
                    f"{fam.tag} is infinite on the diagonal; use smeared_gram "
                    "or a mollified point Gram"
                )
            return as_sym_matrix(_singular_plain_gram(fam, cfg, mollify))
        return as_sym_matrix(kernel_matrix(fam, P, P))
    if isinstance(pairing, tuple) and pairing[0] == "sharp":
        return as_sym_matrix(kernel_matrix(fam, P, fn(P)))
    return as_sym_matrix(kernel_matrix(fam, fn(P), P))


# ----------------------------------------------------------- smeared Grams


def _ball_volume(n: int) -> float:
    return sphere_area(n - 1) / n


def sphere_row_integral(n: int, s: float) -> float:
    """``F(e_0) = int_{S^n} (1 - x_0)^{-s/2} dmu(x)``, finite iff ``s < n``."""
    if not s < n:
        raise IntegrabilityError(f"sphere_Q is integrable only for s < n = {n}")
    return float(
        sphere_area(n - 1) * 2.0 ** (n - 1 - s / 2) * beta_fn((n - s) / 2, n / 2)
    )


def cell_integral(fam: KernelFamily, center, w: float) -> float:
    """Integral of ``K(center, .)`` over a ball or cap of measure ``w``.

    Used as the diagonal compensation of :func:`smeared_gram`.
    """
    s, n = float(fam.s), fam.n
    if fam.tag == "sphere_Q":
        total = sphere_area(n)
        if w >= total:
            raise ValidationError("cell measure exceeds the sphere area")
        U = betaincinv(n / 2, n / 2, w / total)
        om = sphere_area(n - 1)
        part = betainc((n - s) / 2, n / 2, U) * beta_fn((n - s) / 2, n / 2)
        return float(om * 2.0 ** (n - 1 - s / 2) * part)
    if fam.tag in ("riesz", "compactified_K"):
        r = (w / _ball_volume(n)) ** (1.0 / n)
        val = sphere_area(n - 1) * r ** (n - s) / (n - s)
        if fam.tag == "compactified_K":
            x = np.asarray(center, dtype=float)
            val *= 2.0 ** (-s / 2) * (1.0 + x @ x) ** s
        return float(val)
    raise ValidationError(f"{fam.tag} has no diagonal singularity")


def _bump_matrix(bumps, nodes: np.ndarray) -> np.ndarray:
    if callable(bumps):
        bumps = [bumps]
    if isinstance(bumps, np.ndarray) and bumps.ndim == 2:
        F = bumps
    else:
        F = np.stack([np.asarray(f(nodes)) if callable(f) else np.asarray(f) for f in bumps])
    if F.shape[1] != len(nodes):
        raise ValidationError("bump samples must match the quadrature nodes")
    return F.T


def smeared_gram(fam: KernelFamily, bumps, quad: Quadrature, pairing="plain"):
    """Gram matrix of test functions under the kernel, by double quadrature.

    ``M[i, j] = sum_{a, b} w_a w_b conj(f_i(x_a)) f_j(x_b) K(x_a, x_b)``
    (with ``K(tau x_a, x_b)`` for reflected pairings). For diagonal-singular
    families the coincident terms ``a = b`` are replaced by
    ``w_a * cell_integral(x_a, w_a)``, the kernel mass of a ball (or cap)
    of measure ``w_a`` around the node.

    Parameters
    ----------
    bumps : sequence of callables or 2-D array
        Test functions evaluated at ``quad.nodes`` (rows of samples).
    """
    s, n = float(fam.s), fam.n
    if fam.tag in _SINGULAR and s >= n:
        raise IntegrabilityError(f"{fam.tag} is integrable only for s < n = {n}")
    X = quad.nodes
    F = _bump_matrix(bumps, X)
    w = quad.weights
    fn = _pairing_map(pairing)
    if fn is not None:
        K = kernel_matrix(fam, fn(X), X)
    elif fam.diagonal_singular:
        if fam.tag == "sphere_Q":
            base = 1.0 - X @ X.T
            np.fill_diagonal(base, 1.0)
            if np.any(base <= COINCIDE_TOL):
                raise DiagonalSingularityError("quadrature has repeated nodes")
            K = base ** (-s / 2)
        else:
            diff = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=-1)
            np.fill_diagonal(diff, 1.0)
            if np.any(diff <= COINCIDE_TOL):
                raise DiagonalSingularityError("quadrature has repeated nodes")
            K = diff ** (-s)
            if fam.tag == "compactified_K":
                a = (1.0 + np.sum(X * X, axis=1)) ** (s / 2)
                K = 2.0 ** (-s / 2) * a[:, None] * K * a[None, :]
        if fam.tag == "sphere_Q" and quad.domain == "sphere":
            # singularity subtraction: each row integrates to F(e_0) exactly
            np.fill_diagonal(K, 0.0)
            K[np.diag_indices(len(X))] = (sphere_row_integral(n, s) - K @ w) / w
        else:
            comp = np.array([cell_integral(fam, x, wa) for x, wa in zip(X, w)])
            K[np.diag_indices(len(X))] = comp / w
    else:
        K = kernel_matrix(fam, X, X)
    WF = w[:, None] * F
    M = WF.conj().T @ K @ WF
    return as_sym_matrix(0.5 * (M + M.conj().T))


def _polar_singular_rule(n: int, s: float, order: int):
    """Rule for ``int_{S^n} (1 - <e_0, y>)^{-s/2} g(y) dmu(y)``.

    Gauss–Jacobi in ``u = y_0`` absorbs both the kernel singularity and
    the polar measure; directions use a rule on S^(n-1).
    """
    from scipy.special import roots_jacobi

    q = order // 2 + 1
    u, wu = roots_jacobi(q, (n - 2 - s) / 2, (n - 2) / 2)
    if n == 1:
        dirs, wd = np.array([[1.0], [-1.0]]), np.ones(2)
    else:
        from .numerics import sphere_quadrature

        sq = sphere_quadrature(n - 1, order)
        dirs, wd = sq.nodes, sq.weights
    st = np.sqrt(1.0 - u * u)
    nodes = np.concatenate(
        [
            np.repeat(u, len(wd))[:, None],
            (st[:, None, None] * dirs[None, :, :]).reshape(-1, n),
        ],
        axis=1,
    )
    return nodes, np.outer(wu, wd).ravel()


def _householder_to(x: np.ndarray) -> np.ndarray:
    """Orthogonal map sending ``e_0`` to the unit vector ``x``."""
    v = -x.copy()
    v[0] += 1.0
    nv = v @ v
    if nv < 1e-28:
        return np.eye(len(x))
    return np.eye(len(x)) - 2.0 * np.outer(v, v) / nv


def smeared_gram_polar(
    fam: KernelFamily,
    bump_fns: Sequence[Callable],
    outer: Quadrature,
    inner_order: int | None = None,
):
    """Smeared ``sphere_Q`` Gram by singular product integration.

    The inner integral ``int K(x_a, y) f_j(y) dmu(y)`` is computed for each
    outer node with a rule centred at ``x_a`` whose weights absorb the
    kernel singularity, so smooth bumps converge spectrally. Bumps must be
    callables.
    """
    if fam.tag != "sphere_Q" or outer.domain != "sphere":
        raise ValidationError("polar product integration needs sphere_Q on S^n")
    s, n = float(fam.s), fam.n
    if not s < n:
        raise IntegrabilityError(f"sphere_Q is integrable only for s < n = {n}")
    if inner_order is None:
        inner_order = int(max(2, round(np.sqrt(len(outer)))))
    base, bw = _polar_singular_rule(n, s, inner_order)
    X = outer.nodes
    F = _bump_matrix(bump_fns, X)
    inner = np.empty_like(F, dtype=np.result_type(F, float))
    for a, x in enumerate(X):
        Y = base @ _householder_to(x).T
        inner[a] = bw @ _bump_matrix(bump_fns, Y)
    M = (outer.weights[:, None] * F).conj().T @ inner
    return as_sym_matrix(0.5 * (M + M.conj().T))


def refine_smeared_gram(
    fam: KernelFamily,
    bump_fns: Sequence[Callable],
    quad_factory: Callable[[int], Quadrature],
    order: int = 8,
    rtol: float = 1e-6,
    max_order: int = 64,
    pairing="plain",
):
    """Raise the quadrature order until the smeared Gram stabilises.

    Plain ``sphere_Q`` Grams on a full sphere rule use
    :func:`smeared_gram_polar`; everything else uses :func:`smeared_gram`.

    Returns
    -------
    M : ndarray
    order : int
        Final order used.
    rel_change : float
        ``||M_k - M_{k-1}|| / ||M_k||`` at the last step.
    """
    def build(o):
        q = quad_factory(o)
        if pairing == "plain" and fam.tag == "sphere_Q" and q.domain == "sphere" and fam.s > 0:
            return smeared_gram_polar(fam, bump_fns, q, o)
        return smeared_gram(fam, bump_fns, q, pairing)

    prev = build(order)
    rel = np.inf
    while order < max_order:
        order = min(2 * order, max_order)
        cur = build(order)
        rel = float(np.linalg.norm(cur - prev) / max(np.linalg.norm(cur), 1e-300))
        prev = cur
        if rel < rtol:
            break
    return prev, order, rel


def cap_bumps(centers, radius: float, order: int = 8):
    """Disjoint smooth cap bumps and a union-of-caps quadrature.

    Bump ``i`` is ``(1 - (d_i / radius)^2)^2`` for geodesic distance
    ``d_i < radius`` from ``centers[i]`` and zero elsewhere.

    Returns
    -------
    quad : Quadrature
        Concatenated cap rules (domain ``"cap"``).
    bumps : list of callables
    """
    from .numerics import cap_quadrature

    C = np.atleast_2d(np.asarray(centers, dtype=float))
    C = C / np.linalg.norm(C, axis=1, keepdims=True)
    ang = np.arccos(np.clip(C @ C.T, -1.0, 1.0))
    np.fill_diagonal(ang, np.inf)
    if len(C) > 1 and ang.min() <= 2 * radius:
        raise ValidationError("cap bumps must have disjoint supports")
    rules = [cap_quadrature(c, radius, order) for c in C]
    nodes = np.vstack([q.nodes for q in rules])
    weights = np.concatenate([q.weights for q in rules])
    quad = Quadrature(nodes, weights, "cap", float(weights.sum()), C.shape[1] - 1)

    def make(c):
        def f(X):
            d = np.arccos(np.clip(np.asarray(X) @ c, -1.0, 1.0))
            return np.where(d < radius, (1.0 - (d / radius) ** 2) ** 2, 0.0)
        return f

    return quad, [make(c) for c in C]


# --------------------------------------------------------- phase predicate


def pd_phase_predicate(fam: KernelFamily) -> bool:
    """Theoretical positive definiteness of a family (not a numerical test).

    * ``riesz``, ``sphere_Q``, ``compactified_K``: ``0 <= s < n``.
    * ``halfspace_reflected``, ``ball_R``: ``s = 0`` or ``s >= max(0, n-2)``.
    * ``cone_power``, ``tube_power``: ``lambda`` in the Wallach set
      ``{0} U [(n-2)/2, inf)``.
    """
    s, n = float(fam.s), fam.n
    if fam.tag in _SINGULAR:
        return 0 <= s < n
    if fam.tag in ("halfspace_reflected", "ball_R"):
        return s == 0 or s >= max(0, n - 2)
    return s == 0 or s >= (n - 2) / 2


# ---------------------------------------------------------- witness search


def default_sampler(fam: KernelFamily, pairing="plain"):
    """Return ``(sample, project, dim)`` for a family's carrier.

    ``sample`` maps ``k`` Latin-hypercube rows in ``[0, 1)^dim`` to ``k``
    points; ``project`` pushes jittered points back into the carrier.
    """
    n = fam.n
    carrier = fam.carrier
    if fam.tag == "sphere_Q" and pairing == "sigma":
        # cap x_0 > 0 through the stereographic chart of the unit ball
        from .conformal import stereographic

        def sample(U):
            B = 2.0 * U - 1.0
            r = np.linalg.norm(B, axis=1, keepdims=True)
            B = np.where(r > 0.95, B * 0.95 / np.maximum(r, 1e-300), B)
            return stereographic(B)

        def project(P):
            P = P / np.linalg.norm(P, axis=1, keepdims=True)
            P[:, 0] = np.maximum(np.abs(P[:, 0]), 1e-3)
            return P / np.linalg.norm(P, axis=1, keepdims=True)

        return sample, project, n
    if carrier == "halfspace":
        def sample(U):
            P = 2.0 * U - 1.0
            P[:, 0] = U[:, 0] + 1e-3
            return P

        def project(P):
            P[:, 0] = np.abs(P[:, 0]) + 1e-6
            return P

        return sample, project, n
    if carrier == "ball":
        def sample(U):
            P = 2.0 * U - 1.0
            r = np.linalg.norm(P, axis=1, keepdims=True)
            return np.where(r > 0.95, P * 0.95 / np.maximum(r, 1e-300), P)

        def project(P):
            r = np.linalg.norm(P, axis=1, keepdims=True)
            return np.where(r > 0.97, P * 0.97 / np.maximum(r, 1e-300), P)

        return sample, project, n
    if carrier == "cone":
        def sample(U):
            P = 2.0 * U - 1.0
            P[:, 0] = np.linalg.norm(P[:, 1:], axis=1) + 1e-3 + U[:, 0]
            return P

        def project(P):
            r = np.linalg.norm(P[:, 1:], axis=1)
            bad = P[:, 0] <= r
            P[bad, 0] = r[bad] + 1e-4
            return P

        return sample, project, n
    if carrier == "euclidean":
        return (lambda U: 2.0 * U - 1.0), (lambda P: P), n
    if carrier == "sphere":
        def sample(U):
            P = 2.0 * U - 1.0
            return P / np.linalg.norm(P, axis=1, keepdims=True)

        return sample, lambda P: P / np.linalg.norm(P, axis=1, keepdims=True), n + 1
    raise ValidationError(f"no default sampler for carrier {carrier!r}")


@dataclass
class Witness:
    """Persistable certificate that a Gram matrix is indefinite."""

    family: str
    s: float
    n: int
    points: np.ndarray
    coefficients: np.ndarray
    value: float
    scale: float
    seed: int
    restart: int = -1
    pairing: str = "plain"
    extra: dict = field(default_factory=dict)

    @property
    def relative_value(self) -> float:
        return self.value / self.scale

    def kernel(self) -> KernelFamily:
        return KernelFamily(self.family, self.s, self.n)

    def verify(self, threshold: float = 1e-8) -> bool:
        """Recompute the Gram and check ``v^T G v < -threshold * scale``."""
        G = gram(self.kernel(), self.points, self.pairing)
        v = self.coefficients
        q = float(np.real(v.conj() @ G @ v))
        scale = float(np.abs(np.linalg.eigvalsh(G)).max())
        return q < -threshold * scale

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "s": self.s,
            "n": self.n,
            "pairing": self.pairing,
            "points": self.points.tolist(),
            "coefficients": self.coefficients.tolist(),
            "quadratic_form": self.value,
            "scale": self.scale,
            "seed": self.seed,
            "restart": self.restart,
            **({"extra": self.extra} if self.extra else {}),
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "Witness":
        return cls(
            family=d["family"],
            s=float(d["s"]),
            n=int(d["n"]),
            points=np.asarray(d["points"], dtype=float),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            value=float(d["quadratic_form"]),
            scale=float(d["scale"]),
            seed=int(d["seed"]),
            restart=int(d.get("restart", -1)),
            pairing=d.get("pairing", "plain"),
            extra=d.get("extra", {}),
        )

    @classmethod
    def load(cls, path, verify: bool = True) -> "Witness":
        with open(path) as fh:
            w = cls.from_dict(json.load(fh))
        if verify and not w.verify():
            raise ValidationError(f"persisted witness in {path} does not re-verify")
        return w


def _rel_min(G: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(G)
    sc = np.abs(ev).max()
    return ev[0] / sc if sc > 0 else 0.0


def witness_search(
    fam: KernelFamily,
    n_points: int = 10,
    restarts: int = 10_000,
    steps: int = 200,
    step: float = 0.1,
    seed: int = 0,
    pairing: str = "plain",
    target: float = -1e-8,
    sampler=None,
) -> Witness | None:
    """Randomised search for an indefinite Gram.

    Each restart draws a Latin-hypercube configuration and then hill-climbs
    with Gaussian point jitter, accepting moves that lower the relative
    smallest eigenvalue. Stops at the first configuration with relative
    smallest eigenvalue below ``target``.

    Returns
    -------
    Witness or None
        ``None`` when the budget is exhausted.
    """
    if restarts < 1 or n_points < 2:
        raise ValidationError("need restarts >= 1 and n_points >= 2")
    sample, project, d = sampler if sampler is not None else default_sampler(fam, pairing)
    rng = np.random.default_rng(seed)
    lhs = qmc.LatinHypercube(d=d, seed=rng)

    def score(P):
        try:
            return _rel_min(gram(fam, P, pairing))
        except (ValidationError, FloatingPointError):
            return np.inf

    for r in range(restarts):
        P = project(sample(lhs.random(n_points)))
        m = score(P)
        for _ in range(steps):
            Q = project(P + step * rng.normal(size=P.shape))
            mq = score(Q)
            if mq < m:
                P, m = Q, mq
            if m < target:
                break
        if m < target:
            G = gram(fam, P, pairing)
            ev, V = np.linalg.eigh(G)
            v = V[:, 0]
            return Witness(
                fam.tag, float(fam.s), fam.n, P, v, float(v @ G @ v),
                float(np.abs(ev).max()), seed, r, pairing,
            )
    return None
