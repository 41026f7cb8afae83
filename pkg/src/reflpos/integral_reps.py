"""Integral representations of reflection positive functions.

On ``(R, tau = -id, S = [0, inf))`` the reflection positive functions are
Laplace transforms ``phi(x) = int e^{-lambda |x|} dnu(lambda)`` of finite
measures on ``[0, inf)``. On a convex cone ``Omega`` with involution
``tau`` and ``x^# = -tau(x)``, positive definite functions on
``(Omega, #)`` are Fourier–Laplace transforms of measures on the dual cone.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import linprog

from .errors import DomainError, ValidationError
from .numerics import PsdVerdict, as_sym_matrix, nnls, psd_check

__all__ = [
    "DiscreteMeasure",
    "eval_rp_function",
    "cauchy_fourier_check",
    "FitResult",
    "fit_measure",
    "DEFAULT_LAMBDA_GRID",
    "ConeSpec",
    "make_cone",
    "DualCone",
    "dual_cone",
    "fourier_laplace",
    "cone_pd_gram",
    "laplace_power_measure",
    "taylor_order_probe",
    "random_dual_measure",
]

DEFAULT_LAMBDA_GRID = np.round(np.arange(0.0, 10.0 + 1e-9, 0.05), 10)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many nonnegative atoms.

    Scalar case: ``locations`` has shape (k,) with entries ``>= 0``.
    Cone case: ``locations`` has shape (k, d) and holds functionals
    ``alpha`` on R^d (identified through the Euclidean pairing).
    """

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)
        if len(loc) != len(w):
            raise ValidationError("locations and weights differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("measure weights must be finite and >= 0")
        if loc.ndim == 1 and np.any(loc < 0):
            raise ValidationError("scalar atoms must lie in [0, inf)")

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return DiscreteMeasure(
            np.concatenate([self.locations, other.locations]),
            np.concatenate([self.weights, other.weights]),
        )

    def to_dict(self, cone: "ConeSpec | None" = None) -> dict:
        """JSON form; cone atoms are split into ``alpha_plus``/``alpha_minus``."""
        atoms = []
        for loc, w in zip(self.locations, self.weights):
            if self.locations.ndim == 1:
                atoms.append({"lambda": float(loc), "weight": float(w)})
            else:
                tau = cone.tau if cone is not None else -np.eye(len(loc))
                ap = 0.5 * (loc + tau.T @ loc)
                am = 0.5 * (loc - tau.T @ loc)
                atoms.append({
                    "alpha_plus": ap.tolist(),
                    "alpha_minus": am.tolist(),
                    "weight": float(w),
                })
        return {"atoms": atoms}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        atoms = d["atoms"]
        if not atoms:
            return cls(np.zeros(0), np.zeros(0))
        if "lambda" in atoms[0]:
            return cls(
                np.array([a["lambda"] for a in atoms]),
                np.array([a["weight"] for a in atoms]),
            )
        locs = [np.add(a["alpha_plus"], a["alpha_minus"]) for a in atoms]
        return cls(np.array(locs), np.array([a["weight"] for a in atoms]))

    def save(self, path, cone=None) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(cone), fh, indent=2)


def eval_rp_function(nu: DiscreteMeasure, x) -> np.ndarray:
    """``phi(x) = sum_k w_k exp(-lambda_k |x|)``.

    Examples
    --------
    >>> nu = DiscreteMeasure(np.array([1.0]), np.array([1.0]))
    >>> float(eval_rp_function(nu, 2.0)) == float(np.exp(-2.0))
    True
    """
    if nu.locations.ndim != 1:
        raise ValidationError("eval_rp_function needs a measure on [0, inf)")
    x = np.asarray(x, dtype=float)
    return np.exp(-np.abs(x)[..., None] * nu.locations) @ nu.weights


# ----------------------------------------------------------- Cauchy check


def _cauchy_tail(lam: float, x: float, Y: float, terms: int = 12) -> float:
    """``int_Y^inf cos(x y) c(y) dy`` for the Cauchy density ``c``.

    Repeated integration by parts; accurate once ``x * Y`` is large.
    """
    tot = 0j
    for k in range(terms):
        gk = (1 / (2j * np.pi)) * (-1) ** k * factorial(k) * (
            (Y - 1j * lam) ** (-k - 1) - (Y + 1j * lam) ** (-k - 1)
        )
        tot += (-1) ** k * gk / (1j * x) ** (k + 1)
    return float((-np.exp(1j * x * Y) * tot).real)


def cauchy_fourier_check(lam: float, x: float, quad_order: int = 200, phase: float = 40.0):
    """Compare ``exp(-lam |x|)`` with the Fourier transform of the Cauchy law.

    The right side ``int cos(x y) lam / (pi (lam^2 + y^2)) dy`` is
    integrated in ``y = lam tan(theta)``. The range ``|y| <= phase / |x|``
    is split into panels of bounded phase (plus geometric panels near the
    origin) with Gauss–Legendre on each; the remaining oscillatory tail is
    added from its asymptotic expansion.

    Returns
    -------
    (lhs, rhs, error)
    """
    if not lam > 0:
        raise ValidationError("lambda must be > 0")
    if quad_order < 20:
        raise ValidationError("quad_order must be >= 20")
    lhs = float(np.exp(-lam * abs(x)))
    ax = abs(float(x))
    if ax == 0:
        t, w = leggauss(quad_order)
        # density in theta is uniform: (1/pi) d theta on (-pi/2, pi/2)
        rhs = float(np.sum(w) / 2.0)
        return lhs, rhs, abs(rhs - lhs)
    panels = 20
    Y = phase / ax
    lin = np.linspace(0.0, Y, panels + 1)[1:]
    geo = []
    y = Y / panels / 2
    while y > lam:
        geo.append(y)
        y /= 2
    br = np.concatenate([[0.0], sorted(geo), lin])
    th = np.arctan(br / lam)
    q = max(quad_order // (len(th) - 1), 4)
    t, w = leggauss(q)
    tot = 0.0
    for a, b in zip(th[:-1], th[1:]):
        tt = 0.5 * (t + 1) * (b - a) + a
        tot += 0.5 * (b - a) * np.sum(w * np.cos(ax * lam * np.tan(tt)))
    rhs = 2.0 * tot / np.pi + 2.0 * _cauchy_tail(lam, ax, Y)
    return lhs, float(rhs), abs(float(rhs) - lhs)


# ------------------------------------------------------------ measure fit


@dataclass(frozen=True)
class FitResult:
    """Recovered measure with fit diagnostics."""

    measure: DiscreteMeasure
    residual: float
    max_abs_error: float
    grid: np.ndarray


def fit_measure(xs, ys, lambda_grid=None, atom_tol: float = 1e-12) -> FitResult:
    """Fit a nonnegative measure on a lambda grid to samples of ``phi``.

    Solves ``min ||A w - y||, w >= 0`` with ``A[i, j] = exp(-lambda_j |x_i|)``
    and keeps atoms with weight above ``atom_tol``.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValidationError("need at least two (x, phi(x)) samples")
    if len(np.unique(xs)) != len(xs):
        raise ValidationError("sample locations must be distinct")
    grid = DEFAULT_LAMBDA_GRID if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if np.any(grid < 0):
        raise ValidationError("lambda grid must be >= 0")
    A = np.exp(-np.outer(np.abs(xs), grid))
    w = nnls(A, ys)
    keep = w > atom_tol
    mu = DiscreteMeasure(grid[keep], w[keep])
    fit = eval_rp_function(mu, xs)
    return FitResult(
        mu,
        float(np.linalg.norm(fit - ys)),
        float(np.abs(fit - ys).max()),
        grid,
    )


# ------------------------------------------------------------------ cones


@dataclass(frozen=True)
class ConeSpec:
    """Open convex cone ``Omega`` in R^d with an involution ``tau``.

    ``x^# = -tau(x)`` must preserve ``Omega``.
    """

    dim: int
    tag: str
    tau: np.ndarray
    generators: np.ndarray | None = None

    def sharp(self, X) -> np.ndarray:
        return -np.asarray(X) @ self.tau.T

    def contains(self, X, margin: float = 0.0) -> np.ndarray:
        """Vectorised membership of rows of ``X`` (strict, with margin)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.tag == "orthant":
            return np.all(X > margin, axis=1)
        if self.tag == "lorentz":
            return X[:, 0] - np.linalg.norm(X[:, 1:], axis=1) > margin
        if self.tag == "halfspace":
            return X[:, 0] > margin
        if self.tag == "custom":
            return np.array([self._custom_depth(x) > margin for x in X])
        raise ValidationError(f"unknown cone tag {self.tag!r}")

    def _custom_depth(self, x) -> float:
        """``max t`` with ``x = G c``, ``c >= t`` (LP)."""
        G = self.generators
        m = G.shape[1]
        c = np.zeros(m + 1)
        c[-1] = -1.0
        A_eq = np.hstack([G, np.zeros((G.shape[0], 1))])
        A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
        res = linprog(
            c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=x,
            bounds=[(None, None)] * m + [(None, 1.0)], method="highs",
        )
        if res.status != 0:
            return -np.inf
        return float(-res.fun)

    def sample(self, k: int, rng) -> np.ndarray:
        """Random interior points."""
        d = self.dim
        if self.tag == "orthant":
            return rng.uniform(0.05, 1.5, (k, d))
        if self.tag == "lorentz":
            P = rng.uniform(-1, 1, (k, d))
            P[:, 0] = np.linalg.norm(P[:, 1:], axis=1) + rng.uniform(0.05, 1.0, k)
            return P
        if self.tag == "halfspace":
            P = rng.uniform(-1, 1, (k, d))
            P[:, 0] = rng.uniform(0.05, 1.5, k)
            return P
        if self.tag == "custom":
            c = rng.uniform(0.05, 1.0, (k, self.generators.shape[1]))
            return c @ self.generators.T
        raise ValidationError(f"unknown cone tag {self.tag!r}")


def make_cone(tag: str, dim: int, tau=None, generators=None) -> ConeSpec:
    """Build and validate a cone.

    Defaults: ``tau = -id`` for ``orthant``, ``lorentz`` and ``custom``;
    the time reflection ``diag(-1, 1, ..., 1)`` for ``halfspace``.
    """
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    if tau is None:
        if tag == "halfspace":
            tau = np.eye(dim)
            tau[0, 0] = -1.0
        else:
            tau = -np.eye(dim)
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (dim, dim) or np.abs(tau @ tau - np.eye(dim)).max() > 1e-12:
        raise ValidationError("tau must be a linear involution of R^dim")
    G = None
    if tag == "custom":
        if generators is None:
            raise ValidationError("custom cones need generators")
        G = np.asarray(generators, dtype=float)
        if G.shape[0] != dim:
            raise ValidationError("generators must be columns in R^dim")
        if np.linalg.matrix_rank(G) < dim:
            raise ValidationError("custom cone has empty interior")
        if np.abs(tau + np.eye(dim)).max() > 0:
            raise ValidationError("custom cones support tau = -id only")
    elif tag not in ("orthant", "lorentz", "halfspace"):
        raise ValidationError(f"unknown cone tag {tag!r}")
    if tag == "lorentz" and dim < 2:
        raise ValidationError("the Lorentz cone needs dim >= 2")
    cone = ConeSpec(dim, tag, tau, G)
    rng = np.random.default_rng(0)
    X = cone.sample(64, rng)
    if not np.all(cone.contains(cone.sharp(X))):
        raise ValidationError("cone is not invariant under x -> -tau(x)")
    return cone


@dataclass(frozen=True)
class DualCone:
    """Closed dual ``Omega_hat`` of functionals ``alpha = alpha_+ + alpha_-``.

    ``alpha_+ = P_+ alpha`` lives on the ``tau = +1`` eigenspace and enters
    as a phase; ``alpha_- = P_- alpha`` is nonnegative on the ``#``-fixed
    part of the cone.
    """

    cone: ConeSpec
    kind: str

    @property
    def p_plus(self) -> np.ndarray:
        return 0.5 * (np.eye(self.cone.dim) + self.cone.tau)

    @property
    def p_minus(self) -> np.ndarray:
        return 0.5 * (np.eye(self.cone.dim) - self.cone.tau)

    def contains(self, A, tol: float = 1e-12) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        Am = A @ self.p_minus.T
        if self.kind == "orthant":
            return np.all(Am >= -tol, axis=1)
        if self.kind == "lorentz":
            return Am[:, 0] - np.linalg.norm(Am[:, 1:], axis=1) >= -tol
        if self.kind == "halfspace":
            return Am[:, 0] >= -tol
        if self.kind == "custom":
            return np.all(Am @ self.cone.generators >= -tol, axis=1)
        raise ValidationError(f"unknown dual kind {self.kind!r}")

    def sample(self, k: int, rng) -> np.ndarray:
        d = self.cone.dim
        if self.kind == "orthant":
            return rng.uniform(0.0, 2.0, (k, d))
        if self.kind == "lorentz":
            A = rng.uniform(-1, 1, (k, d))
            A[:, 0] = np.linalg.norm(A[:, 1:], axis=1) + rng.uniform(0.0, 1.0, k)
            return A
        if self.kind == "halfspace":
            A = rng.uniform(-2, 2, (k, d)) @ self.p_plus.T
            A[:, 0] = rng.uniform(0.0, 2.0, k)
            return A
        if self.kind == "custom":
            # rejection sampling with a bounded-LP fallback for thin duals
            G = self.cone.generators
            out = []
            for _ in range(200 * k):
                a = rng.normal(size=d)
                if np.all(a @ G >= 0):
                    out.append(a)
                elif np.all(-a @ G >= 0):
                    out.append(-a)
                if len(out) == k:
                    break
            while len(out) < k:
                r = rng.normal(size=d)
                res = linprog(
                    -r, A_ub=-G.T, b_ub=np.zeros(G.shape[1]),
                    bounds=[(-1.0, 1.0)] * d, method="highs",
                )
                out.append(res.x)
            return np.array(out)
        raise ValidationError(f"unknown dual kind {self.kind!r}")


def dual_cone(cone: ConeSpec, probe_count: int = 200, seed: int = 0) -> DualCone:
    """Dual cone ``Omega_hat``, validated on random probes.

    orthant -> orthant, lorentz -> lorentz (self-dual), halfspace with the
    time reflection -> ``{alpha : alpha_0 >= 0}``, custom -> generator
    inequalities ``alpha(g_k) >= 0``.
    """
    dual = DualCone(cone, cone.tag)
    rng = np.random.default_rng(seed)
    A = dual.sample(max(probe_count // 10, 4), rng)
    X = cone.sample(probe_count, rng)
    # probe on #-fixed points x = (x + x^#) / 2 of the cone
    Xs = 0.5 * (X + cone.sharp(X))
    vals = (A @ dual.p_minus.T) @ Xs.T
    if vals.min() < -1e-12 * max(1.0, np.abs(vals).max()):
        raise ValidationError("dual cone probe failed: alpha(x) < 0 on a cone sample")
    return dual


def random_dual_measure(dual: DualCone, atoms: int, rng) -> DiscreteMeasure:
    """Random nonnegative atomic measure supported in the dual cone."""
    return DiscreteMeasure(dual.sample(atoms, rng), rng.uniform(0.0, 1.0, atoms))


def _characters(mu: DiscreteMeasure, X: np.ndarray, cone: ConeSpec) -> np.ndarray:
    """``e^{-i alpha_+(x)} e^{-alpha_-(x)}`` for all (x, atom) pairs."""
    A = mu.locations
    if A.ndim != 2 or A.shape[1] != cone.dim:
        raise ValidationError("measure atoms must be functionals on R^dim")
    P = 0.5 * (np.eye(cone.dim) + cone.tau)
    Ap = A @ P.T
    Am = A - Ap
    return np.exp(-1j * (X @ Ap.T) - X @ Am.T)


def fourier_laplace(mu: DiscreteMeasure, x, cone: ConeSpec):
    """``FL(mu)(x) = sum_k w_k e^{-i alpha_+k(x)} e^{-alpha_-k(x)}``.

    Returns a complex number (array for several points); it is real when
    ``tau = -id``.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(cone.contains(X)):
        raise DomainError("point lies outside the open cone")
    vals = _characters(mu, X, cone) @ mu.weights
    return vals[0] if np.ndim(x) == 1 else vals


def cone_pd_gram(
    mu: DiscreteMeasure, pts, cone: ConeSpec, tol: float = 1e-10
) -> tuple[np.ndarray, PsdVerdict]:
    """Gram ``G[i, j] = FL(mu)(x_i + x_j^#)`` with its PSD verdict."""
    X = np.atleast_2d(np.asarray(pts, dtype=float))
    if not np.all(cone.contains(X)):
        raise DomainError("configuration leaves the open cone")
    Z = X[:, None, :] + cone.sharp(X)[None, :, :]
    flat = Z.reshape(-1, cone.dim)
    if not np.all(cone.contains(flat)):
        raise DomainError("x_i + x_j^# leaves the cone: configuration is not #-invariant")
    G = (_characters(mu, flat, cone) @ mu.weights).reshape(len(X), len(X))
    if np.abs(cone.tau + np.eye(cone.dim)).max() == 0:
        G = G.real
    G = as_sym_matrix(G)
    return G, psd_check(G, tol)


def laplace_power_measure(alpha: float, h: float = 0.05, u_min: float = -40.0, u_max: float = 6.0):
    """Atoms on ``[0, inf)`` whose Laplace transform approximates
    ``Gamma(alpha) x^{-alpha}``.

    Discretises ``y^{alpha-1} dy`` by the trapezoid rule in ``y = e^u``.
    """
    if not alpha > 0:
        raise ValidationError("alpha must be > 0")
    u = np.arange(u_min, u_max + h / 2, h)
    y = np.exp(u)
    return DiscreteMeasure(y, h * y ** alpha)


def taylor_order_probe(
    mu: DiscreteMeasure, cone: ConeSpec, x0, direction, steps=(0.2, 0.1, 0.05, 0.025), degree: int = 6
) -> tuple[float, np.ndarray]:
    """Observed convergence order of the Taylor model of ``FL(mu)``.

    Derivatives along ``direction`` at ``x0`` are exact sums over atoms.
    The error of the degree-``degree`` model at ``x0 + h d`` should scale
    like ``h^(degree+1)``.

    Returns
    -------
    order : float
        Least-squares slope of ``log err`` against ``log h``.
    errors : ndarray
    """
    x0 = np.asarray(x0, dtype=float)
    d = np.asarray(direction, dtype=float)
    A = mu.locations
    P = 0.5 * (np.eye(cone.dim) + cone.tau)
    rate = -1j * (A @ P.T @ d) - (A @ (np.eye(cone.dim) - P).T @ d)
    base = _characters(mu, x0[None, :], cone)[0] * mu.weights
    derivs = [np.sum(base * rate ** k) for k in range(degree + 1)]
    errs = []
    for h in steps:
        exact = fourier_laplace(mu, x0 + h * d, cone)
        model = sum(derivs[k] * h ** k / factorial(k) for k in range(degree + 1))
        errs.append(abs(exact - model))
    errs = np.array(errs)
    hs = np.asarray(steps, dtype=float)
    # drop steps whose error sits at the rounding floor
    floor = 100 * np.finfo(float).eps * max(abs(derivs[0]), np.sum(mu.weights))
    keep = errs > floor
    if keep.sum() < 2:
        raise ValidationError("Taylor errors at rounding floor; use larger steps")
    slope = np.polyfit(np.log(hs[keep]), np.log(errs[keep]), 1)[0]
    return float(slope), errs
