"""Lorentz group O+(1, n+1) acting conformally on the sphere S^n.

Sphere points are vectors in R^(n+1). A sphere point ``x`` corresponds to
the null ray through ``(1, x)`` in R^(n+2) with the Lorentzian form
``[z, w] = z_0 w_0 - sum_j z_j w_j``; a Lorentz matrix ``g`` with blocks
``a, b, c, d`` acts by ``g.x = (c + d x) / (a + <b, x>)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ConstructionError, DomainError, PoleError, ValidationError

__all__ = [
    "minkowski_form",
    "lorentz_metric",
    "LorentzElement",
    "make_lorentz",
    "random_lorentz",
    "compose",
    "reproject",
    "sharp",
    "sphere_action",
    "conformal_factor",
    "stereographic",
    "stereographic_inv",
    "stereographic_factor",
    "cayley_map",
    "cross_ratio",
    "translation_generator",
    "dilation_generator",
    "chart_action",
    "CompressionResult",
    "compression_test",
    "cap_value",
]

GROUP_TOL = 1e-11
POLE_TOL = 1e-14
# a composed word of this many factors is re-projected onto the group
REPROJECT_AFTER = 8


def minkowski_form(x, y) -> float:
    """Lorentzian form ``x_0 y_0 - sum_{j>=1} x_j y_j``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise ValidationError(
            f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}"
        )
    return x[..., 0] * y[..., 0] - np.sum(x[..., 1:] * y[..., 1:], axis=-1)


def lorentz_metric(n: int) -> np.ndarray:
    """diag(1, -1, ..., -1) of size n + 2."""
    e = -np.ones(n + 2)
    e[0] = 1.0
    return np.diag(e)


@dataclass(frozen=True)
class LorentzElement:
    """An element of O(1, n+1) stored as an (n+2) x (n+2) matrix."""

    matrix: np.ndarray
    n: int

    @property
    def a(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def b(self) -> np.ndarray:
        return self.matrix[0, 1:]

    @property
    def c(self) -> np.ndarray:
        return self.matrix[1:, 0]

    @property
    def d(self) -> np.ndarray:
        return self.matrix[1:, 1:]

    @property
    def orthochronous(self) -> bool:
        return self.a > 0

    def defect(self) -> float:
        """``max |g^T eta g - eta|``."""
        eta = lorentz_metric(self.n)
        return float(np.abs(self.matrix.T @ eta @ self.matrix - eta).max())

    def inverse(self) -> "LorentzElement":
        eta = lorentz_metric(self.n)
        return LorentzElement(eta @ self.matrix.T @ eta, self.n)

    def __matmul__(self, other: "LorentzElement") -> "LorentzElement":
        if self.n != other.n:
            raise ValidationError("cannot compose elements of different rank")
        return LorentzElement(self.matrix @ other.matrix, self.n)


def reproject(g: LorentzElement) -> LorentzElement:
    """One Newton step pulling ``g`` back onto ``g^T eta g = eta``."""
    eta = lorentz_metric(g.n)
    delta = g.matrix.T @ eta @ g.matrix - eta
    m = g.matrix @ (np.eye(g.n + 2) - 0.5 * eta @ delta)
    return LorentzElement(m, g.n)


def _finalize(m: np.ndarray, n: int) -> LorentzElement:
    g = LorentzElement(np.asarray(m, dtype=float), n)
    if g.defect() > GROUP_TOL:
        g = reproject(g)
        if g.defect() > GROUP_TOL:
            raise ConstructionError(
                f"not a Lorentz matrix: ||g^T eta g - eta|| = {g.defect():.3e}"
            )
    return g


def compose(*gs: LorentzElement) -> LorentzElement:
    """Product of group elements, re-projected for long words."""
    if not gs:
        raise ValidationError("compose needs at least one element")
    out = gs[0]
    for k, g in enumerate(gs[1:], start=2):
        out = out @ g
        if k % REPROJECT_AFTER == 0:
            out = reproject(out)
    if len(gs) >= REPROJECT_AFTER:
        out = reproject(out)
    return out


def translation_generator(v) -> np.ndarray:
    """Lie algebra element whose exponential translates the chart by ``v``.

    Built as ``X w = [u, w] p - [p, w] u`` with ``p`` the null vector of
    the point at infinity and ``u = (0, 0, -v)``.
    """
    v = np.asarray(v, dtype=float)
    n = len(v)
    eta = lorentz_metric(n)
    p = np.zeros(n + 2)
    p[0], p[1] = 1.0, -1.0
    u = np.zeros(n + 2)
    u[2:] = -v
    return np.outer(p, eta @ u) - np.outer(u, eta @ p)


def dilation_generator(n: int) -> np.ndarray:
    """Boost generator along the sphere axis ``x_0`` (chart dilation)."""
    X = np.zeros((n + 2, n + 2))
    X[0, 1] = X[1, 0] = 1.0
    return X


def make_lorentz(kind: str, n: int, **kw) -> LorentzElement:
    """Construct a validated Lorentz element.

    Parameters
    ----------
    kind : str
        ``"identity"``, ``"rotation"`` (``R`` in O(n+1)), ``"boost"``
        (``direction`` in R^(n+1), ``rapidity``), ``"lie_exp"`` (``X`` in
        o(1, n+1)), ``"reflection_sigma"``, ``"cayley_c"``,
        ``"translation"`` (``v`` in R^n), ``"dilation"`` (``t``, acting
        as multiplication by ``exp(-t)`` in the stereographic chart).
    n : int
        Sphere dimension.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    N = n + 2
    if kind == "identity":
        return LorentzElement(np.eye(N), n)
    if kind == "rotation":
        R = np.asarray(kw["R"], dtype=float)
        if R.shape != (n + 1, n + 1):
            raise ValidationError(f"rotation block must be {(n + 1, n + 1)}")
        if np.abs(R.T @ R - np.eye(n + 1)).max() > 1e-12:
            raise ValidationError("rotation block is not orthogonal")
        m = np.eye(N)
        m[1:, 1:] = R
        return _finalize(m, n)
    if kind == "boost":
        u = np.asarray(kw["direction"], dtype=float)
        if u.shape != (n + 1,):
            raise ValidationError("boost direction must lie in R^(n+1)")
        u = u / np.linalg.norm(u)
        t = float(kw["rapidity"])
        e = np.zeros(N)
        e[0] = 1.0
        w = np.concatenate([[0.0], u])
        m = (
            np.eye(N)
            + np.sinh(t) * (np.outer(e, w) + np.outer(w, e))
            + (np.cosh(t) - 1.0) * (np.outer(e, e) + np.outer(w, w))
        )
        return _finalize(m, n)
    if kind == "lie_exp":
        X = np.asarray(kw["X"], dtype=float)
        eta = lorentz_metric(n)
        if X.shape != (N, N):
            raise ValidationError(f"Lie algebra element must be {(N, N)}")
        res = np.abs(X.T @ eta + eta @ X).max()
        if res > 1e-12 * max(1.0, np.abs(X).max()):
            raise ValidationError(f"X^T eta + eta X = {res:.3e}, not in o(1,n+1)")
        return _finalize(expm(X), n)
    if kind == "reflection_sigma":
        m = np.eye(N)
        m[1, 1] = -1.0
        return LorentzElement(m, n)
    if kind == "cayley_c":
        if n < 1:
            raise ValidationError("cayley_c needs n >= 1")
        m = np.eye(N)
        m[[1, 2]] = m[[2, 1]]
        return LorentzElement(m, n)
    if kind == "translation":
        return make_lorentz("lie_exp", n, X=translation_generator(kw["v"]))
    if kind == "dilation":
        return make_lorentz("lie_exp", n, X=float(kw["t"]) * dilation_generator(n))
    raise ValidationError(f"unknown Lorentz element kind {kind!r}")


def random_lorentz(n: int, rng, max_rapidity: float = 1.5) -> LorentzElement:
    """Random orthochronous element ``R1 * boost * R2``."""
    def rot():
        Q, R = np.linalg.qr(rng.normal(size=(n + 1, n + 1)))
        return Q * np.sign(np.diag(R))

    u = rng.normal(size=n + 1)
    b = make_lorentz(
        "boost", n, direction=u, rapidity=rng.uniform(0, max_rapidity)
    )
    r1 = make_lorentz("rotation", n, R=rot())
    r2 = make_lorentz("rotation", n, R=rot())
    return r1 @ b @ r2


def sharp(g: LorentzElement, tau: LorentzElement | None = None) -> LorentzElement:
    """``g^# = tau g^{-1} tau`` (default ``tau = sigma``)."""
    if tau is None:
        tau = make_lorentz("reflection_sigma", g.n)
    return tau @ g.inverse() @ tau


def _denominator(g: LorentzElement, x: np.ndarray) -> np.ndarray:
    den = g.a + x @ g.b
    if np.any(np.abs(den) < POLE_TOL):
        raise PoleError("a + <b, x> vanishes: point is mapped to the pole")
    return den


def sphere_action(g: LorentzElement, x) -> np.ndarray:
    """Conformal action ``(a + <b, x>)^{-1} (c + d x)`` on points of S^n.

    Accepts a single point or an array of shape (N, n+1).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.n + 1:
        raise ValidationError("point dimension does not match the group")
    den = _denominator(g, x)
    y = (x @ g.d.T + g.c) / den[..., None]
    norm = np.linalg.norm(y, axis=-1, keepdims=True)
    drift = np.abs(norm - 1.0)
    if np.any(drift > 1e-13):
        y = y / norm
    return y


def conformal_factor(g: LorentzElement, x) -> np.ndarray:
    """``J_g(x) = |a + <b, x>|^{-1}``; positive for orthochronous ``g``."""
    x = np.asarray(x, dtype=float)
    den = _denominator(g, x)
    if g.orthochronous and np.any(den <= 0):
        raise PoleError("a + <b, x> must be positive for orthochronous g")
    return 1.0 / np.abs(den)


def stereographic(x) -> np.ndarray:
    """Chart ``R^n -> S^n \\ {-e_0}``, ``x -> ((1-|x|^2), 2x) / (1+|x|^2)``."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([(1.0 - r2), 2.0 * x], axis=-1) / (1.0 + r2)


def stereographic_inv(y, tol: float = 1e-14) -> np.ndarray:
    """Inverse chart; the point ``-e_0`` has no preimage."""
    y = np.asarray(y, dtype=float)
    den = 1.0 + y[..., :1]
    if np.any(np.abs(den) < tol):
        raise DomainError("-e_0 is the point at infinity of the chart")
    return y[..., 1:] / den


def stereographic_factor(x) -> np.ndarray:
    """Conformal factor ``2 / (1 + |x|^2)`` of the chart."""
    x = np.asarray(x, dtype=float)
    return 2.0 / (1.0 + np.sum(x * x, axis=-1))


def cayley_map(x, tol: float = 1e-14) -> np.ndarray:
    """Involutive map exchanging the half-space ``x_0 > 0`` and the unit ball.

    ``phi(x) = (1 - |x|^2, 2 x_1, ..., 2 x_{n-1}) / (1 + |x|^2 + 2 x_0)``.
    Points with vanishing denominator map to ``inf`` entries.
    """
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    den = 1.0 + r2 + 2.0 * x[..., :1]
    num = np.concatenate([1.0 - r2, 2.0 * x[..., 1:]], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(np.abs(den) < tol, np.inf, out)


def chart_action(g: LorentzElement, x) -> np.ndarray:
    """``eta^{-1} o g o eta`` on chart points."""
    return stereographic_inv(sphere_action(g, stereographic(x)))


def cross_ratio(x, y, a, b, delta_min: float = 1e-10) -> float:
    """``(|y-a| / |y-b|) * (|x-b| / |x-a|)`` for distinct sphere points."""
    pts = [np.asarray(p, dtype=float) for p in (x, y, a, b)]
    for i in range(4):
        for j in range(i + 1, 4):
            if np.linalg.norm(pts[i] - pts[j]) <= delta_min:
                raise ValidationError("cross_ratio needs pairwise distinct points")
    x, y, a, b = pts
    dist = np.linalg.norm
    return float(dist(y - a) / dist(y - b) * dist(x - b) / dist(x - a))


# -------------------------------------------------------- compression tests

CAPS = {"ball": 0, "halfspace": 1}


def cap_value(cap: str, x) -> np.ndarray:
    """Coordinate whose positivity defines the cap (``x_0`` or ``x_1``)."""
    if cap not in CAPS:
        raise ValidationError(f"unknown cap {cap!r}; use 'ball' or 'halfspace'")
    return np.asarray(x)[..., CAPS[cap]]


def _cap_samples(n: int, cap: str, samples: int, rng) -> np.ndarray:
    k = CAPS[cap]
    nb = max(samples // 5, 1)
    pts = rng.normal(size=(samples, n + 1))
    pts[:nb, k] = 0.0
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts[:, k] = np.abs(pts[:, k])
    e = np.zeros(n + 1)
    e[k] = 1.0
    return np.vstack([e, pts])


@dataclass(frozen=True)
class CompressionResult:
    """Outcome of :func:`compression_test`."""

    inside: bool
    witness: np.ndarray | None
    min_value: float


def compression_test(
    g: LorentzElement,
    cap: str = "ball",
    samples: int = 400,
    margin: float = 0.0,
    seed: int = 0,
) -> CompressionResult:
    """Sample the closed cap and check whether ``g`` maps it into itself.

    The closed cap is sampled at random with one fifth of the samples on
    the boundary. Images pass when the cap coordinate is ``>= margin``
    (so boundary samples fail any positive margin). The test is
    one-sided: violations are exact, containment holds up to sampling.
    """
    if samples < 100:
        raise ValidationError("compression_test needs samples >= 100")
    rng = np.random.default_rng(seed)
    pts = _cap_samples(g.n, cap, samples, rng)
    vals = cap_value(cap, sphere_action(g, pts))
    thresh = margin - 1e-13 if margin == 0 else margin
    bad = np.nonzero(vals < thresh)[0]
    witness = pts[bad[0]].copy() if len(bad) else None
    return CompressionResult(len(bad) == 0, witness, float(vals.min()))
