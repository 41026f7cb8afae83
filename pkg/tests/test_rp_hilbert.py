import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import binom

from reflpos.conformal import make_lorentz, sharp, stereographic
from reflpos.errors import (
    ReflectionPositivityError,
    SemigroupViolationError,
    ValidationError,
)
from reflpos.kernels import KernelFamily, sigma_reflect, witness_search
from reflpos.rp_hilbert import (
    build_rp_space,
    character_expansion,
    character_partial_sum,
    contraction_margin,
    delta_vector_model,
    gns_from_function,
    hat_space,
    semigroup_action_matrix,
    semigroup_element_to,
    sharp_symmetry_defect,
    shift,
    smeared_theta_gram,
    smeared_theta_witness,
)
from reflpos.numerics import psd_check

seeds = st.integers(0, 2**32 - 1)


def exp_kernel(lam):
    return lambda X, Y: np.exp(-lam * np.abs(np.asarray(X)[:, None, 0] - np.asarray(Y)[None, :, 0]))


def neg(X):
    return -np.asarray(X)


def positive(X):
    return np.asarray(X)[:, 0] > 0


def line_space(lam=1.0, P=(0.3, 0.7, 1.2)):
    P = np.asarray(P, dtype=float)[:, None]
    return build_rp_space(exp_kernel(lam), np.vstack([P, -P]), neg, positive)


def cap_points(rng, k, n, r=0.8):
    B = rng.uniform(-1, 1, (k, n))
    B *= r / np.maximum(np.linalg.norm(B, axis=1, keepdims=True), r)
    return stereographic(B)


def sphere_space(rng, n=3, s=1.5, k=6):
    P = cap_points(rng, k, n)
    return build_rp_space(KernelFamily("sphere_Q", s, n), np.vstack([P, sigma_reflect(P)]),
                          sigma_reflect, lambda X: X[:, 0] > 0)


# ------------------------------------------------------------- RPSpace


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_line_theta_form(lam):
    rp = line_space(lam)
    p = rp.plus_points[:, 0]
    assert np.allclose(rp.theta_form, np.exp(-lam * (p[:, None] + p[None, :])), rtol=1e-14)
    assert np.array_equal(np.sort(rp.plus_indices), [0, 1, 2])


def test_sphere_theta_form_psd():
    rp = sphere_space(np.random.default_rng(0))
    assert psd_check(rp.theta_form).is_psd
    assert np.allclose(rp.theta_form, rp.theta_form.T)


def test_sphere_s0_rank_one():
    rp = sphere_space(np.random.default_rng(1), s=0.0)
    assert np.allclose(rp.theta_form, 1.0)
    assert hat_space(rp).rank == 1


def test_tau_must_be_involution():
    with pytest.raises(ValidationError):
        build_rp_space(exp_kernel(1.0), [[0.5], [-0.5]], lambda X: np.asarray(X) + 1, positive)


def test_kernel_must_be_tau_invariant():
    K = lambda X, Y: np.exp(np.asarray(X)[:, None, 0] + np.asarray(Y)[None, :, 0])  # noqa: E731
    with pytest.raises(ValidationError, match="tau-invariant"):
        build_rp_space(K, [[0.5], [-0.5], [0.2]], neg, positive)


def test_domain_must_be_separated_by_tau():
    with pytest.raises(ValidationError, match="meets"):
        build_rp_space(exp_kernel(1.0), [[0.5], [-0.5]], neg, lambda X: np.ones(len(X), bool))


def test_ambient_must_be_psd():
    K = lambda X, Y: -exp_kernel(1.0)(X, Y)  # noqa: E731
    with pytest.raises(ReflectionPositivityError) as exc:
        build_rp_space(K, [[0.5], [-0.5]], neg, positive)
    assert exc.value.condition == "ambient"
    assert exc.value.witness is not None


# ------------------------------------------------------------ HatSpace


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_line_hat_rank_one(lam):
    assert hat_space(line_space(lam, np.linspace(0.1, 2, 7))).rank == 1


def test_hat_indefinite_raises():
    w = witness_search(KernelFamily("halfspace_reflected", 1.0, 4), seed=0)
    P = w.points
    rp = build_rp_space(KernelFamily("riesz", 1.0, 4), np.vstack([P, sigma_reflect(P)]),
                        sigma_reflect, positive)
    # the reflected Riesz form is the half-space kernel
    from reflpos.kernels import gram

    assert np.allclose(rp.theta_form, gram(KernelFamily("halfspace_reflected", 1.0, 4), P))
    with pytest.raises(ReflectionPositivityError) as exc:
        hat_space(rp)
    assert exc.value.condition == "theta"
    v = exc.value.witness
    assert v @ rp.theta_form @ v < 0


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_quotient_map_isometry(seed):
    rng = np.random.default_rng(seed)
    hat = hat_space(sphere_space(rng))
    M = hat.source.theta_form
    v, w = rng.normal(size=(2, len(M)))
    qv, qw = hat.quotient_map(v), hat.quotient_map(w)
    assert qv @ qw == pytest.approx(v @ M @ w, rel=1e-9, abs=1e-9 * hat.scale * np.linalg.norm(v) * np.linalg.norm(w))
    B = hat.quotient_basis
    assert np.allclose(B.T @ M @ B, np.eye(hat.rank), atol=1e-8)


def test_null_vectors_collapse():
    hat = hat_space(line_space(1.0, [0.2, 0.5, 0.9, 1.4]))
    M = hat.source.theta_form
    null = hat.eigenvectors[:, 0]
    assert null @ M @ null <= hat.tol
    assert np.linalg.norm(hat.quotient_map(null)) <= np.sqrt(hat.tol) * hat.scale


def test_null_threshold_tie_kept():
    # an eigenvalue exactly at tol * scale is kept (conservative rank)
    from reflpos.rp_hilbert import RPSpace

    M = np.diag([1.0, 1e-10])
    rp = RPSpace(np.zeros((2, 1)), None, neg, np.zeros((2, 1)), None, M, None, positive)
    assert hat_space(rp, tol=1e-10).rank == 2
    assert hat_space(rp, tol=2e-10).rank == 1


def test_a_group_kernel_full_rank_and_character_spectrum():
    s = 0.7
    p = np.array([0.1, 0.3, 0.5, 0.7, 0.85])
    K = lambda X, Y: (1 + np.asarray(X)[:, None, 0] * np.asarray(Y)[None, :, 0]) ** (-s)  # noqa: E731
    pts = np.r_[p, -p][:, None]
    rp = build_rp_space(K, pts, neg, positive, check_ambient=False)
    hat = hat_space(rp)
    assert hat.rank == len(p)
    N = 200
    c = character_expansion(s, N)
    V = p[:, None] ** np.arange(N + 1)[None, :]
    M_series = (V * c) @ V.T
    assert np.allclose(np.linalg.eigvalsh(M_series), hat.eigenvalues, rtol=1e-6, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_rank_monotone_under_enlargement(seed):
    rng = np.random.default_rng(seed)
    rp = sphere_space(rng, k=4)
    r0 = hat_space(rp).rank
    extra = cap_points(rng, 3, 3)
    r1 = hat_space(rp.with_plus_points(np.vstack([rp.plus_points, extra]))).rank
    assert r1 >= r0


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_cauchy_schwarz_bound(seed):
    rng = np.random.default_rng(seed)
    lam = rng.uniform(0.2, 3)
    p = np.sort(rng.uniform(0.05, 3, 5))
    rp = line_space(lam, p)
    M = rp.theta_form
    G = exp_kernel(lam)(p[:, None], p[:, None])
    for _ in range(10):
        v = rng.normal(size=5)
        assert abs(v @ M @ v) <= v @ G @ v + 1e-10


# --------------------------------------------------- semigroup actions


def test_identity_action():
    rp = line_space()
    act = semigroup_action_matrix(rp, shift(0.0))
    assert np.array_equal(act.A, np.eye(3))
    hat = hat_space(rp)
    assert contraction_margin(rp, hat, shift(0.0)) == pytest.approx(1.0)


def test_shift_maps_columns():
    rp = line_space()
    act = semigroup_action_matrix(rp, shift(0.5))
    P2 = act.enlarged.plus_points[:, 0]
    assert np.allclose(P2[act.A.argmax(axis=0)], [0.8, 1.2, 1.7])
    assert np.allclose(act.A.sum(axis=0), 1.0)
    assert len(P2) == 5  # 1.2 already present


@pytest.mark.parametrize("lam,t", [(0.5, 0.3), (1.0, 1.0), (2.0, 0.25)])
def test_shift_margin_closed_form(lam, t):
    rp = line_space(lam)
    assert contraction_margin(rp, hat_space(rp), shift(t)) == pytest.approx(np.exp(-lam * t), rel=1e-9)


def test_negative_shift_violates():
    with pytest.raises(SemigroupViolationError):
        semigroup_action_matrix(line_space(), shift(-1.0))


def test_sphere_sigma_violates_compression():
    rp = sphere_space(np.random.default_rng(2))
    with pytest.raises(SemigroupViolationError):
        semigroup_action_matrix(rp, make_lorentz("reflection_sigma", 3))


def test_sphere_multiplier_per_column():
    rng = np.random.default_rng(3)
    rp = sphere_space(rng)
    g = make_lorentz("dilation", 3, t=0.3)
    act = semigroup_action_matrix(rp, g)
    from reflpos.conformal import conformal_factor

    expect = conformal_factor(g, rp.plus_points) ** (1.5 / 2)
    assert np.allclose(act.A.max(axis=0), expect)


def test_sphere_contraction_margins():
    rng = np.random.default_rng(4)
    for _ in range(100):
        rp = sphere_space(rng, k=4)
        hat = hat_space(rp)
        g = make_lorentz("dilation", 3, t=rng.uniform(0.05, 1.0))
        assert contraction_margin(rp, hat, g) <= 1 + 1e-8


def test_sharp_symmetry_line_and_sphere():
    rp = line_space(1.0, [0.2, 0.6, 1.1])
    assert sharp_symmetry_defect(rp, shift(0.4), shift(0.4)) < 1e-12
    rng = np.random.default_rng(5)
    rp = sphere_space(rng)
    for t in (0.2, 0.7):
        g = make_lorentz("dilation", 3, t=t)
        assert sharp_symmetry_defect(rp, g, sharp(g)) < 1e-9
    g = semigroup_element_to(np.eye(4)[1], rp.plus_points[0])
    assert sharp_symmetry_defect(rp, g, sharp(g)) < 1e-9


# ----------------------------------------------------------------- GNS


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_gns_exponential(lam):
    rep = gns_from_function(lambda x: np.exp(-lam * np.abs(x)), [0.3, 0.7, 1.2], shifts=[0.5, 1.0])
    assert rep.passed and rep.rank == 1
    assert rep.equivalence_error < 1e-9
    assert rep.roundtrip_error < 1e-10
    for k, v in rep.margins.items():
        assert v == pytest.approx(np.exp(-lam * float(k)), abs=1e-9)


def test_gns_cos_fails_rp3():
    with pytest.raises(ReflectionPositivityError) as exc:
        gns_from_function(np.cos, [0.3, 0.7, 1.2])
    assert exc.value.condition == "RP3"
    rep = gns_from_function(np.cos, [0.3, 0.7, 1.2], raise_on_fail=False)
    assert rep.failed == ["RP3"]


def test_gns_constant_passes():
    rep = gns_from_function(lambda x: np.ones_like(np.asarray(x, float)), [0.3, 0.7, 1.2], shifts=[1.0])
    assert rep.passed and rep.rank == 1
    assert rep.margins[repr(1.0)] == pytest.approx(1.0)


def test_gns_rp2_failure_named():
    phi = lambda x: np.exp(-np.abs(x)) * (1 + 0.3 * np.tanh(x))  # noqa: E731
    rep = gns_from_function(phi, [0.3, 0.7, 1.2], raise_on_fail=False)
    assert "RP2" in rep.failed


def test_gns_measure_function():
    from reflpos.integral_reps import DiscreteMeasure, eval_rp_function

    nu = DiscreteMeasure([0.4, 1.3, 2.0], [0.2, 0.5, 0.3])
    rep = gns_from_function(lambda x: eval_rp_function(nu, x), np.linspace(0.1, 2, 6), shifts=[0.5])
    assert rep.passed and rep.rank == 3
    assert rep.equivalence_error < 1e-9


# -------------------------------------------------- character expansion


def test_character_coefficients():
    assert np.allclose(character_expansion(1.0, 10), 1.0)
    assert np.allclose(character_expansion(2.0, 2), [1, 2, 3])
    k = np.arange(11)
    assert np.allclose(character_expansion(0.7, 10), binom(k - 1 + 0.7, k))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 5))
def test_character_coefficients_nonnegative(s):
    assert np.all(character_expansion(s, 60) >= 0)


def test_character_truncation():
    assert abs(character_partial_sum(0.7, 40, 0.5) - 0.5 ** -0.7) < 1e-6


# ------------------------------------------------- distribution vectors


def test_delta_vector_sigma_fixed_and_psd():
    rng = np.random.default_rng(0)
    T = cap_points(rng, 6, 3, 0.7)
    m = delta_vector_model(1.5, 3, np.eye(4)[1], T,
                           bump_centers=stereographic(0.3 * np.eye(3)), bump_radius=0.05)
    assert m.sigma_defect <= 1e-12
    assert m.verdict.is_psd
    assert len(m.labels) == 9


def test_delta_vector_rejects_off_equator():
    with pytest.raises(ValidationError):
        delta_vector_model(1.5, 3, np.array([0.1, 1.0, 0, 0]) / np.sqrt(1.01), [[1.0, 0, 0, 0]])


def test_semigroup_element_to_hits_target():
    rng = np.random.default_rng(1)
    from reflpos.conformal import compression_test, sphere_action

    x = np.eye(4)[2]
    for t in cap_points(rng, 5, 3):
        g = semigroup_element_to(x, t)
        assert np.allclose(sphere_action(g, x[None])[0], t, atol=1e-10)
        assert compression_test(g).inside


def test_smeared_theta_gram_psd_at_threshold():
    rng = np.random.default_rng(2)
    C = cap_points(rng, 6, 3, 0.6)
    for s in (1.0, 1.5, 2.5):
        assert psd_check(smeared_theta_gram(s, 3, C, 0.05)).is_psd


def test_smeared_theta_witness_below_threshold():
    res = smeared_theta_witness(0.5, 3, seed=0)
    assert res is not None
    w, M, r, v = res
    assert not v.is_psd
    assert v.witness @ M @ v.witness < -1e-8 * v.scale
