"""Finite-sample models of reflection positive Hilbert spaces.

A model consists of sample points ``x_i`` of a space ``X`` carrying a
positive definite kernel ``K``, an involution ``tau`` of ``X`` leaving
``K`` invariant, and a set of "plus" points in a domain ``D`` with
``tau(D)`` disjoint from ``D``. Kernel columns ``K_x`` span the ambient
space ``E``; those with ``x`` in ``D`` span ``E_+``; ``theta K_x = K_{tau x}``.
The theta-twisted form on ``E_+`` is ``M[i, j] = K(tau p_i, p_j)`` and its
positive part is the quotient space ``E_hat``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .conformal import (
    LorentzElement,
    compression_test,
    conformal_factor,
    make_lorentz,
    sphere_action,
)
from .errors import (
    ReflectionPositivityError,
    SemigroupViolationError,
    ValidationError,
)
from .kernels import (
    KernelFamily,
    cap_bumps,
    gram,
    kernel_matrix,
    sigma_reflect,
    witness_search,
)
from .numerics import as_sym_matrix, psd_check

__all__ = [
    "RPSpace",
    "HatSpace",
    "SemigroupElement",
    "ActionMatrix",
    "build_rp_space",
    "hat_space",
    "shift",
    "lorentz_element_action",
    "semigroup_action_matrix",
    "contraction_margin",
    "sharp_symmetry_defect",
    "GNSReport",
    "gns_from_function",
    "character_expansion",
    "character_partial_sum",
    "DeltaVectorModel",
    "delta_vector_model",
    "semigroup_element_to",
    "smeared_theta_gram",
    "smeared_theta_witness",
]

NULL_RTOL = 1e-10
SAME_POINT_TOL = 1e-12


def _kernel_fn(kernel) -> tuple[Callable, KernelFamily | None]:
    if isinstance(kernel, KernelFamily):
        return (lambda X, Y: kernel_matrix(kernel, X, Y)), kernel
    if callable(kernel):
        return kernel, None
    raise ValidationError("kernel must be a KernelFamily or a callable K(X, Y)")


@dataclass(frozen=True)
class RPSpace:
    """Sampled triple ``(E, E_+, theta)``.

    Attributes
    ----------
    points : ndarray
        Ambient sample points.
    kernel : callable
        ``K(X, Y)`` returning the matrix of kernel values.
    tau : callable
        Point involution.
    plus_points : ndarray
        Points of ``D`` spanning the sampled ``E_+``.
    gram : ndarray or None
        Ambient Gram on ``points`` (``None`` when not checked).
    theta_form : ndarray
        ``M[i, j] = K(tau p_i, p_j)``.
    family : KernelFamily or None
    plus_predicate : callable
        Membership test for ``D``.
    """

    points: np.ndarray
    kernel: Callable
    tau: Callable
    plus_points: np.ndarray
    gram: np.ndarray | None
    theta_form: np.ndarray
    family: KernelFamily | None
    plus_predicate: Callable

    @property
    def plus_indices(self) -> np.ndarray:
        """Indices of ambient points lying in ``D``."""
        return np.nonzero(self.plus_predicate(self.points))[0]

    def theta(self, X, Y) -> np.ndarray:
        """Twisted kernel ``K(tau x, y)``."""
        return self.kernel(self.tau(X), Y)

    def with_plus_points(self, P) -> "RPSpace":
        """Same space with a different set of plus points."""
        P = np.asarray(P)
        _check_plus(self.plus_predicate, P)
        M = as_sym_matrix(self.theta(P, P))
        return replace(self, plus_points=P, theta_form=M)


def _check_plus(pred, P):
    inside = np.asarray(pred(P), dtype=bool)
    if not np.all(inside):
        raise ValidationError(
            f"plus point {int(np.argmin(inside))} lies outside the positive domain"
        )


def build_rp_space(
    kernel,
    points,
    tau: Callable,
    plus_predicate: Callable,
    *,
    check_ambient: bool = True,
    tol: float = 1e-10,
) -> RPSpace:
    """Assemble a sampled reflection positive Hilbert space.

    Parameters
    ----------
    kernel : KernelFamily or callable
        Positive definite kernel on ``X``.
    points : array_like
        Ambient sample points; those satisfying ``plus_predicate`` become
        the plus points.
    tau : callable
        Involution acting on arrays of points.
    plus_predicate : callable
        Boolean mask of ``D`` membership.
    check_ambient : bool
        Verify that the ambient Gram is PSD (singular families use a
        mollified point Gram).

    Raises
    ------
    ValidationError
        Kernel not tau-invariant, or ``tau(D)`` meets ``D`` on samples.
    ReflectionPositivityError
        Ambient Gram is not PSD (``condition="ambient"``).
    """
    K, fam = _kernel_fn(kernel)
    X = np.atleast_2d(np.asarray(points, dtype=float))
    TX = np.asarray(tau(X))
    if not np.allclose(np.asarray(tau(TX)), X, atol=1e-12, rtol=0):
        raise ValidationError("tau is not an involution on the samples")
    # tau-invariance on off-diagonal pairs
    if len(X) > 1:
        A = np.concatenate([K(X[i:i + 1], X[i + 1:])[0] for i in range(len(X) - 1)])
        B = np.concatenate([K(TX[i:i + 1], TX[i + 1:])[0] for i in range(len(X) - 1)])
        err = np.abs(A - B)
        if np.any(err > 1e-10 * np.maximum(np.abs(A), 1e-300)):
            raise ValidationError(
                f"kernel is not tau-invariant: max |K(tx,ty) - K(x,y)| = {err.max():.3e}"
            )
    mask = np.asarray(plus_predicate(X), dtype=bool)
    if np.any(np.asarray(plus_predicate(TX[mask]), dtype=bool)):
        raise ValidationError("tau(D) meets D on the samples")
    G = None
    if check_ambient:
        if fam is not None:
            G = gram(fam, X)
        else:
            G = as_sym_matrix(K(X, X))
        v = psd_check(G, tol)
        if not v.is_psd:
            raise ReflectionPositivityError(
                "ambient kernel not positive definite",
                witness=v.witness,
                condition="ambient",
                value=v.min_eigenvalue,
            )
    P = X[mask]
    M = as_sym_matrix(K(tau(P), P))
    return RPSpace(X, K, tau, P, G, M, fam, plus_predicate)


@dataclass(frozen=True)
class HatSpace:
    """Quotient ``E_hat`` of the sampled ``E_+`` by the null space.

    Attributes
    ----------
    eigenvalues, eigenvectors : ndarray
        Ascending spectrum of the twisted form.
    null_dim, rank : int
    quotient_basis : ndarray, shape (|P|, rank)
        ``B`` with ``B^T M B = I``.
    scale : float
    tol : float
    """

    source: RPSpace
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    null_dim: int
    rank: int
    quotient_basis: np.ndarray
    scale: float
    tol: float

    def quotient_map(self, v) -> np.ndarray:
        """Coordinates of ``q(v)`` in an orthonormal basis of ``E_hat``."""
        U = self.eigenvectors[:, self.null_dim:]
        lam = self.eigenvalues[self.null_dim:]
        v = np.asarray(v)
        scale = np.sqrt(lam)
        return (scale if v.ndim == 1 else scale[:, None]) * (U.conj().T @ v)

    def gram_of_quotients(self) -> np.ndarray:
        """Gram of ``q(e_i)`` for the plus points."""
        Q = self.quotient_map(np.eye(len(self.eigenvalues)))
        return Q.conj().T @ Q


def hat_space(rp: RPSpace, tol: float = NULL_RTOL) -> HatSpace:
    """Diagonalise the twisted form and split off its null space.

    Eigenvalues strictly below ``tol * scale`` count as null; an
    eigenvalue exactly at the threshold is kept.

    Raises
    ------
    ReflectionPositivityError
        If the twisted form is indefinite beyond ``-tol * scale``.
    """
    M = rp.theta_form
    w, U = np.linalg.eigh(M)
    scale = float(np.abs(w).max()) if len(w) else 0.0
    if len(w) and w[0] < -tol * scale:
        raise ReflectionPositivityError(
            f"theta-twisted form is indefinite: min eigenvalue {w[0]:.3e} "
            f"(scale {scale:.3e})",
            witness=U[:, 0],
            condition="theta",
            value=float(w[0]),
        )
    null = int(np.sum(w < tol * scale)) if scale > 0 else len(w)
    B = U[:, null:] / np.sqrt(w[null:])
    return HatSpace(rp, w, U, null, len(w) - null, B, scale, tol)


# ------------------------------------------------------- semigroup actions


@dataclass(frozen=True)
class SemigroupElement:
    """A point map ``g`` with a multiplier: ``pi(g) K_x = m(x) K_{g.x}``."""

    apply: Callable
    multiplier: Callable | None = None
    name: str = ""

    def weights(self, X) -> np.ndarray:
        if self.multiplier is None:
            return np.ones(len(X))
        return np.asarray(self.multiplier(X))


def shift(t: float) -> SemigroupElement:
    """Translation ``x -> x + t`` of R^d (no multiplier)."""
    return SemigroupElement(lambda X: np.asarray(X) + t, None, f"shift({t})")


def lorentz_element_action(g: LorentzElement, s: float) -> SemigroupElement:
    """Sphere action with multiplier ``J_g(x)^{s/2}``.

    With this exponent ``pi(g)`` preserves ``sphere_Q`` inner products,
    because ``1 - <gx, gy> = J_g(x) J_g(y) (1 - <x, y>)``.
    """
    return SemigroupElement(
        lambda X: sphere_action(g, X),
        lambda X: conformal_factor(g, X) ** (s / 2),
        "lorentz",
    )


def _as_element(rp: RPSpace, g) -> tuple[SemigroupElement, LorentzElement | None]:
    if isinstance(g, SemigroupElement):
        return g, None
    if isinstance(g, LorentzElement):
        if rp.family is None:
            raise ValidationError("Lorentz elements need a kernel family for the multiplier")
        return lorentz_element_action(g, float(rp.family.s)), g
    raise ValidationError("g must be a SemigroupElement or a LorentzElement")


def _merge(P: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Append rows of ``Y`` not already in ``P``; return indices of ``Y``."""
    pts = list(P)
    idx = []
    for y in Y:
        d = np.linalg.norm(np.asarray(pts) - y, axis=1)
        k = int(np.argmin(d))
        if d[k] <= SAME_POINT_TOL:
            idx.append(k)
        else:
            pts.append(y)
            idx.append(len(pts) - 1)
    return np.asarray(pts), np.asarray(idx)


@dataclass(frozen=True)
class ActionMatrix:
    """``pi(g)`` on the sampled ``E_+`` in an enlarged kernel-column basis.

    ``A[:, i]`` expresses ``pi(g) K_{p_i}`` in the basis of
    ``enlarged.plus_points``; the first ``|P|`` of those are the original
    plus points.
    """

    A: np.ndarray
    enlarged: RPSpace
    base_size: int


def semigroup_action_matrix(rp: RPSpace, g, check_compression: bool = True) -> ActionMatrix:
    """Matrix of ``pi(g)`` restricted to the sampled ``E_+``.

    The images ``g.p_i`` are appended to the plus points when new.

    Raises
    ------
    SemigroupViolationError
        If ``g`` maps a plus point, or (for Lorentz elements) a sample of
        the closed ball cap, outside the positive domain.
    """
    el, lor = _as_element(rp, g)
    P = rp.plus_points
    Y = np.asarray(el.apply(P))
    if not np.all(np.asarray(rp.plus_predicate(Y), dtype=bool)):
        raise SemigroupViolationError("g maps a plus point outside the positive domain")
    if check_compression and lor is not None:
        res = compression_test(lor, "ball", samples=200)
        if not res.inside:
            raise SemigroupViolationError(
                f"g fails the compression test at {res.witness.tolist()}"
            )
    P2, idx = _merge(P, Y)
    A = np.zeros((len(P2), len(P)), dtype=np.result_type(float, el.weights(P)))
    A[idx, np.arange(len(P))] = el.weights(P)
    return ActionMatrix(A, rp.with_plus_points(P2), len(P))


def contraction_margin(rp: RPSpace, hat: HatSpace, g) -> float:
    """Operator norm of the induced map ``pi_hat(g)`` on the sampled ``E_hat``.

    Solves the generalised eigenproblem ``A^T M' A v = mu M v`` on the
    range of ``M`` through the quotient basis.
    """
    act = semigroup_action_matrix(rp, g)
    M2 = act.enlarged.theta_form
    B = hat.quotient_basis
    if B.shape[1] == 0:
        return 0.0
    C = B.conj().T @ act.A.conj().T @ M2 @ act.A @ B
    top = float(np.linalg.eigvalsh(as_sym_matrix(0.5 * (C + C.conj().T)))[-1])
    return float(np.sqrt(max(top, 0.0)))


def sharp_symmetry_defect(rp: RPSpace, g, g_sharp) -> float:
    """Relative defect of ``<pi(g) v, w>_theta = <v, pi(g^#) w>_theta``."""
    e1, _ = _as_element(rp, g)
    e2, _ = _as_element(rp, g_sharp)
    P = rp.plus_points
    Y1 = np.asarray(e1.apply(P))
    Y2 = np.asarray(e2.apply(P))
    P2, idx1 = _merge(P, Y1)
    P3, idx2 = _merge(P2, Y2)
    big = rp.with_plus_points(P3)
    M = big.theta_form
    m = len(P3)
    A1 = np.zeros((m, len(P)))
    A1[idx1, np.arange(len(P))] = e1.weights(P)
    A2 = np.zeros((m, len(P)))
    A2[idx2, np.arange(len(P))] = e2.weights(P)
    E = np.zeros((m, len(P)))
    E[np.arange(len(P)), np.arange(len(P))] = 1.0
    lhs = A1.T @ M @ E
    rhs = E.T @ M @ A2
    return float(np.abs(lhs - rhs).max() / max(np.abs(M).max(), 1e-300))


# --------------------------------------------------------------------- GNS


@dataclass
class GNSReport:
    """Both sides of the reflection positive GNS correspondence."""

    rp1: bool
    rp2: bool
    rp3: bool
    rp1_min: float
    rp2_defect: float
    rp3_min: float
    rank: int | None = None
    spectrum: list = field(default_factory=list)
    equivalence_error: float | None = None
    roundtrip_error: float | None = None
    margins: dict = field(default_factory=dict)
    rp: RPSpace | None = None
    hat: HatSpace | None = None

    @property
    def failed(self) -> list[str]:
        return [c for c, ok in (("RP1", self.rp1), ("RP2", self.rp2), ("RP3", self.rp3)) if not ok]

    @property
    def passed(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        return {
            "RP1": self.rp1,
            "RP2": self.rp2,
            "RP3": self.rp3,
            "rp1_min_relative_eigenvalue": self.rp1_min,
            "rp2_defect": self.rp2_defect,
            "rp3_min_relative_eigenvalue": self.rp3_min,
            "failed": self.failed,
            "rank": self.rank,
            "spectrum": self.spectrum,
            "equivalence_error": self.equivalence_error,
            "roundtrip_error": self.roundtrip_error,
            "contraction_margins": self.margins,
        }


def gns_from_function(
    phi: Callable,
    s_points,
    group_points=None,
    shifts=(),
    tol: float = NULL_RTOL,
    raise_on_fail: bool = True,
) -> GNSReport:
    """Reflection positive GNS construction for ``(R, tau = -id, S = [0, inf))``.

    The group side is the kernel ``K(x, y) = phi(x - y)`` with
    ``theta K_x = K_{-x}`` and ``E_+`` spanned by ``K_s`` for ``s`` in the
    semigroup samples. The semigroup side is the Gram
    ``phi(s_j^# s_i) = phi(s_i + s_j)`` (``s^# = s`` here).

    Parameters
    ----------
    phi : callable
        Vectorised function on R.
    s_points : array_like
        Semigroup samples, ``s >= 0``.
    group_points : array_like, optional
        Group samples for (RP1) and (RP2); default ``S U -S U {0}``.
    shifts : sequence of float
        Semigroup elements ``t >= 0`` whose contraction margins are reported.
    raise_on_fail : bool
        Raise :class:`ReflectionPositivityError` naming the first failed
        condition instead of returning the report.
    """
    S = np.asarray(s_points, dtype=float).ravel()
    if np.any(S < 0):
        raise ValidationError("semigroup samples must be >= 0")
    if group_points is None:
        group_points = np.unique(np.concatenate([S, -S, [0.0]]))
    Xg = np.asarray(group_points, dtype=float).ravel()

    # (RP1) positive definiteness on the group; a non-Hermitian Gram fails outright
    G = np.asarray(phi(Xg[:, None] - Xg[None, :]))
    herm = float(np.abs(G - G.conj().T).max() / max(np.abs(G).max(), 1e-300))
    v1 = psd_check(0.5 * (G + G.conj().T), tol)
    rp1 = v1.is_psd and herm <= 1e-12
    # (RP2) tau-invariance on samples and their differences
    D = np.concatenate([Xg, (Xg[:, None] - Xg[None, :]).ravel(), S])
    f, ft = np.asarray(phi(D)), np.asarray(phi(-D))
    rp2_def = float(np.abs(f - ft).max() / max(np.abs(f).max(), 1e-300))
    # (RP3) positive definiteness on (S, #)
    Ms = as_sym_matrix(phi(S[:, None] + S[None, :]))
    v3 = psd_check(Ms, tol)
    rep = GNSReport(
        rp1, rp2_def <= 1e-10, v3.is_psd,
        v1.relative_min, rp2_def, v3.relative_min,
    )
    if not rep.passed:
        if raise_on_fail:
            cond = rep.failed[0]
            wit = {"RP1": v1.witness, "RP3": v3.witness}.get(cond)
            raise ReflectionPositivityError(
                f"({cond}) fails for the sampled function", witness=wit, condition=cond
            )
        return rep

    def K(X, Y):
        return phi(np.asarray(X)[:, :1] - np.asarray(Y)[:, 0][None, :])

    pts = np.unique(np.concatenate([Xg, S]))[:, None]
    rp = build_rp_space(
        K, pts, lambda X: -np.asarray(X), lambda X: np.asarray(X)[:, 0] > 0,
        check_ambient=True, tol=tol,
    )
    # use the semigroup samples, in the given order, as plus points
    if np.any(S == 0):
        raise ValidationError("semigroup samples must be > 0 for the plus domain")
    rp = rp.with_plus_points(S[:, None])
    hat = hat_space(rp, tol)
    rep.rp, rep.hat = rp, hat
    rep.rank = hat.rank
    rep.spectrum = [float(x) for x in hat.eigenvalues]
    rep.equivalence_error = float(np.abs(hat.gram_of_quotients() - Ms).max())
    # phi(s) = <K_0, pi(s) K_0> read off a factorisation G = V^H V
    w, U = np.linalg.eigh(rp.gram)
    V = np.sqrt(np.clip(w, 0, None))[:, None] * U.conj().T
    ambient = rp.points[:, 0]
    i0 = int(np.argmin(np.abs(ambient)))
    idx = [int(np.argmin(np.abs(ambient - s))) for s in S]
    rec = np.array([np.vdot(V[:, i0], V[:, j]) for j in idx]).real
    rep.roundtrip_error = float(np.abs(rec - phi(S)).max())
    for t in shifts:
        rep.margins[repr(float(t))] = contraction_margin(rp, hat, shift(float(t)))
    return rep


# ----------------------------------------------------- character expansion


def character_expansion(s: float, N: int) -> np.ndarray:
    """Coefficients ``c_k = binom(k - 1 + s, k)``, ``k = 0..N``.

    ``(1 - u)^{-s} = sum_k c_k u^k`` for ``|u| < 1``; all ``c_k >= 0``.

    Examples
    --------
    >>> character_expansion(2.0, 2).tolist()
    [1.0, 2.0, 3.0]
    """
    if s < 0:
        raise ValidationError("s must be >= 0")
    if N < 1:
        raise ValidationError("N must be >= 1")
    c = np.empty(N + 1)
    c[0] = 1.0
    for k in range(1, N + 1):
        c[k] = c[k - 1] * (k - 1 + s) / k
    return c


def character_partial_sum(s: float, N: int, u) -> np.ndarray:
    """Truncated series ``sum_{k<=N} c_k u^k`` (Horner)."""
    c = character_expansion(s, N)
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    for ck in c[::-1]:
        out = out * u + ck
    return out


# ----------------------------------------------------- delta vector model


def semigroup_element_to(x, target) -> LorentzElement:
    """Compression element ``R * boost`` sending an equator point into the cap.

    The boost along the sphere axis ``x_0`` with rapidity ``artanh(t_0)``
    raises ``x`` to height ``t_0``; an orthogonal map of the remaining
    coordinates (commuting with the reflection) turns it onto ``target``.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(target, dtype=float)
    n = len(x) - 1
    if not 0 < t[0] < 1:
        raise ValidationError("target must lie in the open cap x_0 > 0")
    D = make_lorentz("boost", n, direction=np.eye(n + 1)[0], rapidity=np.arctanh(t[0]))
    u = x[1:] / np.linalg.norm(x[1:])
    v = t[1:] / np.linalg.norm(t[1:])
    w = u - v
    H = np.eye(n)
    if w @ w > 1e-28:
        H = H - 2.0 * np.outer(w, w) / (w @ w)
    R = np.eye(n + 1)
    R[1:, 1:] = H
    return make_lorentz("rotation", n, R=R) @ D


def smeared_theta_gram(s: float, n: int, centers, radius: float, order: int = 8):
    """sigma-twisted Gram of disjoint cap bumps for ``sphere_Q``.

    ``M[i, j] = int int f_i(x) f_j(y) Q(sigma x, y) dmu dmu`` with all
    bumps supported in the open cap ``x_0 > 0``.
    """
    from .kernels import smeared_gram

    C = np.atleast_2d(np.asarray(centers, dtype=float))
    if np.any(C[:, 0] - np.sin(radius) <= 0):
        raise ValidationError("bump supports must stay inside the open cap")
    fam = KernelFamily("sphere_Q", s, n)
    quad, bumps = cap_bumps(C, radius, order)
    return smeared_gram(fam, bumps, quad, pairing="sigma")


@dataclass
class DeltaVectorModel:
    """Sampled distribution vector ``delta_x`` at an equator point."""

    x: np.ndarray
    column: np.ndarray
    sigma_defect: float
    elements: list
    gram: np.ndarray
    verdict: object
    labels: list


def delta_vector_model(
    s: float,
    n: int,
    x,
    targets,
    bump_centers=(),
    bump_radius: float = 0.05,
    order: int = 8,
    tol: float = 1e-10,
) -> DeltaVectorModel:
    """Realise ``delta_x`` as the kernel column ``Q_x`` and test theta-positivity.

    The vectors are the compression-semigroup translates
    ``pi(g_k) delta_x = J_{g_k}(x)^{s/2} Q_{g_k x}`` with ``g_k x`` the
    given cap targets, together with smooth bumps supported in the cap.
    Their sigma-twisted Gram is returned with a PSD verdict.
    """
    x = np.asarray(x, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-10 or abs(x[0]) > 1e-10:
        raise ValidationError("x must lie on the equator x_0 = 0 of S^n")
    if len(x) != n + 1:
        raise ValidationError("x must lie in R^(n+1)")
    T = np.atleast_2d(np.asarray(targets, dtype=float))
    fam = KernelFamily("sphere_Q", s, n)

    # sigma-fixedness of the column Q_x on probe points
    probes = np.vstack([T, sigma_reflect(T)])
    sig_def = float(np.abs(
        kernel_matrix(fam, sigma_reflect(x[None]), probes)
        - kernel_matrix(fam, x[None], probes)
    ).max())

    els = [semigroup_element_to(x, t) for t in T]
    Y = np.vstack([sphere_action(g, x[None])[0] for g in els])
    J = np.array([conformal_factor(g, x[None])[0] for g in els]) ** (s / 2)
    blocks = [[J[:, None] * kernel_matrix(fam, sigma_reflect(Y), Y) * J[None, :]]]
    labels = [f"delta@{i}" for i in range(len(Y))]
    C = np.atleast_2d(np.asarray(bump_centers, dtype=float)) if len(bump_centers) else None
    if C is not None:
        quad, bumps = cap_bumps(C, bump_radius, order)
        F = np.stack([b(quad.nodes) for b in bumps]).T * quad.weights[:, None]
        cross = J[:, None] * kernel_matrix(fam, sigma_reflect(Y), quad.nodes) @ F
        bb = F.T @ kernel_matrix(fam, sigma_reflect(quad.nodes), quad.nodes) @ F
        blocks = [[blocks[0][0], cross], [cross.T, bb]]
        labels += [f"bump@{i}" for i in range(len(C))]
        Mg = np.block(blocks)
    else:
        Mg = blocks[0][0]
    Mg = as_sym_matrix(0.5 * (Mg + Mg.T))
    column = kernel_matrix(fam, x[None], np.vstack([Y] + ([quad.nodes] if C is not None else [])))[0]
    return DeltaVectorModel(x, column, sig_def, els, Mg, psd_check(Mg, tol), labels)


def smeared_theta_witness(
    s: float,
    n: int,
    n_points: int = 8,
    restarts: int = 2000,
    seed: int = 0,
    radii=(0.05, 0.02, 0.01, 0.005),
    order: int = 8,
    tol: float = 1e-10,
):
    """Search for cap bumps whose sigma-twisted smeared Gram is indefinite.

    A point witness for the twisted kernel ``Q(sigma x, y)`` on the cap is
    found first; bumps of decreasing radius are then centred on its
    points until the smeared Gram is certified indefinite.

    Returns
    -------
    (Witness, ndarray, float, PsdVerdict) or None
        Point witness, smeared Gram, bump radius and verdict.
    """
    fam = KernelFamily("sphere_Q", s, n)
    w = witness_search(fam, n_points=n_points, restarts=restarts, seed=seed, pairing="sigma")
    if w is None:
        return None
    P = w.points
    ang = np.arccos(np.clip(P @ P.T, -1, 1))
    np.fill_diagonal(ang, np.inf)
    limit = min(0.45 * ang.min(), 0.9 * np.arcsin(P[:, 0].min()))
    for r in radii:
        r = min(r, limit)
        M = smeared_theta_gram(s, n, P, r, order)
        v = psd_check(M, tol)
        if not v.is_psd:
            return w, M, r, v
    return None
