import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsqg.errors import DomainError
from gsqg.kernel import (
    KernelSpec,
    biot_savart,
    cutoff_ramp,
    gamma_fn,
    green_constant,
    green_profile,
    green_value,
    induced_velocity,
    kernel,
    kernel_bounds,
    kernel_profile,
    lipschitz_far_field_check,
    mollifier,
    pairwise_velocities,
    regularized_green,
    regularized_kernel,
)

# mpmath oracle values (40 digits), frozen before the implementation
GAMMA_QUARTER = 3.625609908221908
C_12 = 0.31280532883054345
C_15 = 0.5599830867156196
C_19 = 3.110211400854954
G_12_AT_2 = 0.17965948333097593
K_15_UNIT_Y = -0.2799915433578098
SUP_LOWER_15_01 = 8.85411002596468

ms = st.floats(1.01, 1.99)
vec = st.tuples(st.floats(-10, 10), st.floats(-10, 10)).filter(lambda v: math.hypot(*v) > 1e-3)


def test_gamma_known_values():
    assert gamma_fn(1.0) == pytest.approx(1.0, rel=1e-14)
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma_fn(0.25) == pytest.approx(GAMMA_QUARTER, rel=1e-13)


def test_gamma_matches_math_on_grid():
    xs = np.linspace(1e-3, 20.0, 2001)
    err = max(abs(gamma_fn(x) / math.gamma(x) - 1.0) for x in xs)
    assert err < 1e-12


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
def test_gamma_domain(x):
    with pytest.raises(DomainError):
        gamma_fn(x)


@pytest.mark.parametrize("m,c", [(1.2, C_12), (1.5, C_15), (1.9, C_19)])
def test_green_constant(m, c):
    assert green_constant(m) == pytest.approx(c, rel=1e-13)
    assert KernelSpec(m).constant == pytest.approx(c, rel=1e-13)


def test_green_value_examples():
    s = KernelSpec(1.5)
    assert green_value(s, 1.0) == pytest.approx(C_15, rel=1e-13)
    assert green_value(s, 4.0) / green_value(s, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert green_value(KernelSpec(1.2), 2.0) == pytest.approx(G_12_AT_2, rel=1e-13)
    with pytest.raises(DomainError):
        green_value(s, 0.0)
    with pytest.raises(DomainError):
        green_value(KernelSpec(1.5, "cutoff", 0.1), 1.0)


@pytest.mark.parametrize(
    "kw",
    [dict(m=1.0), dict(m=2.0), dict(m=1.5, regularization="cutoff"), dict(m=1.5, epsilon=0.1),
     dict(m=1.5, regularization="bogus", epsilon=0.1), dict(m=1.5, regularization="mollified", epsilon=0.1, quadrature_order=0)],
)
def test_kernel_spec_invalid(kw):
    with pytest.raises(DomainError):
        KernelSpec(**kw)


def test_kernel_spec_roundtrip():
    s = KernelSpec(1.7, "mollified", 0.2, 12)
    assert KernelSpec.from_dict(s.to_dict()) == s


def test_biot_savart_example():
    v = biot_savart(KernelSpec(1.5), [1.0, 0.0])
    assert v[0] == 0.0
    assert v[1] == pytest.approx(K_15_UNIT_Y, rel=1e-13)
    with pytest.raises(DomainError):
        biot_savart(KernelSpec(1.5), [0.0, 0.0])


def test_biot_savart_matches_fd_of_green():
    s = KernelSpec(1.5)
    h = 1e-6
    x = np.array([1.0, 0.0])
    g = lambda p: green_value(s, math.hypot(*p))
    d1 = (g(x + [h, 0]) - g(x - [h, 0])) / (2 * h)
    d2 = (g(x + [0, h]) - g(x - [0, h])) / (2 * h)
    fd = np.array([-d2, d1])
    assert np.allclose(biot_savart(s, x), fd, rtol=1e-6, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(ms, vec)
def test_orthogonality_and_oddness(m, x):
    s = KernelSpec(m)
    k = biot_savart(s, x)
    nk = np.linalg.norm(k)
    assert abs(np.dot(x, k)) <= 1e-12 * np.linalg.norm(x) * nk
    assert np.linalg.norm(k + biot_savart(s, -np.asarray(x))) <= 1e-12 * nk


@settings(max_examples=200, deadline=None)
@given(ms, vec, st.floats(0.1, 10.0))
def test_homogeneity(m, x, lam):
    s = KernelSpec(m)
    lhs = biot_savart(s, lam * np.asarray(x))
    rhs = lam ** (m - 3.0) * biot_savart(s, x)
    # vector-norm relative error; a subnormal component has no relative precision of its own
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_scaling_ratio_two():
    s = KernelSpec(1.3)
    x = np.array([0.3, -0.7])
    assert np.linalg.norm(biot_savart(s, 2 * x)) / np.linalg.norm(biot_savart(s, x)) == pytest.approx(2 ** (1.3 - 3), rel=1e-13)


def test_cutoff_ramp_shape():
    eps = 0.4
    assert cutoff_ramp(0.0, eps) == 0.0
    assert cutoff_ramp(0.2, eps) == 0.0
    assert cutoff_ramp(0.4, eps) == 1.0
    assert cutoff_ramp(3.0, eps) == 1.0
    r = np.linspace(0.2, 0.4, 1001)
    assert np.all(np.diff(cutoff_ramp(r, eps)) >= 0.0)


def test_cutoff_equals_singular_outside_eps():
    s = KernelSpec(1.5, "cutoff", 0.1)
    x = np.array([1.0, 0.0])
    assert np.array_equal(regularized_kernel(s, x), biot_savart(KernelSpec(1.5), x))
    assert np.array_equal(regularized_kernel(s, [0.0, 0.0]), [0.0, 0.0])
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(1000, 2))
    pts = pts[np.linalg.norm(pts, axis=1) >= 0.1]
    assert np.array_equal(regularized_kernel(s, pts), biot_savart(KernelSpec(1.5), pts))


def test_cutoff_continuity_across_transitions():
    s = KernelSpec(1.5, "cutoff", 0.1)
    for r0 in (0.05, 0.1):
        r = np.array([r0 - 1e-9, r0 + 1e-9])
        v = kernel_profile(s, r)
        assert abs(v[1] - v[0]) < 1e-5


def test_regularized_vanish_at_origin():
    for reg in ("cutoff", "mollified"):
        s = KernelSpec(1.5, reg, 0.1)
        assert np.array_equal(regularized_kernel(s, [0.0, 0.0]), [0.0, 0.0])
    with pytest.raises(DomainError):
        regularized_kernel(KernelSpec(1.5), [1.0, 0.0])


def test_mollified_refinement_oracle():
    s = KernelSpec(1.5, "mollified", 0.1)
    fine = KernelSpec(1.5, "mollified", 0.1, 2 * s.quadrature_order)
    x = np.array([0.05, 0.0])
    assert np.allclose(regularized_kernel(s, x), regularized_kernel(fine, x), rtol=1e-8, atol=0.0)


def test_mollified_odd_and_converges():
    s = KernelSpec(1.5, "mollified", 0.1)
    rng = np.random.default_rng(1)
    x = rng.normal(scale=0.1, size=(50, 2))
    a, b = regularized_kernel(s, x), regularized_kernel(s, -x)
    assert np.max(np.abs(a + b)) <= 1e-10 * np.max(np.abs(a))
    far = np.array([[1.0, 0.5]])
    sing = biot_savart(KernelSpec(1.5), far)
    errs = [np.linalg.norm(regularized_kernel(KernelSpec(1.5, "mollified", e), far) - sing) for e in (0.2, 0.1, 0.05)]
    assert errs[0] > errs[1] > errs[2]


def test_mollifier_normalized():
    # polar integral of the unit bump
    r = np.linspace(0.0, 1.0, 200001)
    vals = mollifier(np.stack([r, np.zeros_like(r)], axis=-1)) * 2 * np.pi * r
    assert np.trapezoid(vals, r) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("reg", ["cutoff", "mollified"])
def test_regularized_green_is_potential(reg):
    s = KernelSpec(1.6, reg, 0.3)
    r = np.array([0.07, 0.16, 0.22, 0.29, 0.5, 1.1])
    h = 1e-6
    dG = (green_profile(s, r + h) - green_profile(s, r - h)) / (2 * h)
    assert np.allclose(dG, kernel_profile(s, r), rtol=1e-6, atol=1e-8)


def test_regularized_green_bounds():
    s = KernelSpec(1.5, "cutoff", 0.2)
    r = np.linspace(1e-3, 1.0, 500)
    g = regularized_green(s, r)
    sing = green_profile(KernelSpec(1.5), r)
    assert np.all(g >= 0.0) and np.all(g <= sing * (1 + 1e-14))
    assert np.allclose(g[r >= 0.2], sing[r >= 0.2], rtol=1e-12)
    grad = np.abs(kernel_profile(s, r))
    assert np.all(grad <= np.abs(kernel_profile(KernelSpec(1.5), r)) * (1 + 1e-14))


def test_kernel_bounds_example():
    s = KernelSpec(1.5, "cutoff", 0.1)
    b = kernel_bounds(s)
    assert b.sup_norm >= SUP_LOWER_15_01
    assert b.c_eps == max(2 * b.sup_norm, b.lipschitz)
    assert kernel_bounds(KernelSpec(1.5, "cutoff", 0.05)).sup_norm >= b.sup_norm
    with pytest.raises(DomainError):
        kernel_bounds(KernelSpec(1.5))


@pytest.mark.parametrize("reg", ["cutoff", "mollified"])
def test_kernel_bounds_dominate_samples(reg):
    s = KernelSpec(1.5, reg, 0.1)
    b = kernel_bounds(s)
    rng = np.random.default_rng(2)
    x = rng.uniform(-0.3, 0.3, size=(2000, 2))
    y = x + rng.normal(scale=1e-3, size=x.shape)
    kx, ky = regularized_kernel(s, x), regularized_kernel(s, y)
    assert np.max(np.linalg.norm(kx, axis=1)) <= b.sup_norm
    lip = np.max(np.linalg.norm(kx - ky, axis=1) / np.linalg.norm(x - y, axis=1))
    assert lip <= b.lipschitz


def test_lipschitz_far_field_ratio_stable():
    s = KernelSpec(1.5)
    r = [lipschitz_far_field_check(s, d, 20000, seed=0).max_ratio for d in (0.1, 0.05, 0.025)]
    assert max(r) / min(r) < 2.0
    assert lipschitz_far_field_check(s, 0.1, 0).max_ratio == 0.0


def test_kernel_dispatch():
    x = np.array([0.3, 0.4])
    assert np.array_equal(kernel(KernelSpec(1.5), x), biot_savart(KernelSpec(1.5), x))
    s = KernelSpec(1.5, "cutoff", 1.0)
    assert np.array_equal(kernel(s, x), regularized_kernel(s, x))


@pytest.mark.parametrize("reg,eps", [("none", 0.0), ("cutoff", 0.3), ("mollified", 0.3)])
def test_pairwise_matches_direct_sum(reg, eps):
    s = KernelSpec(1.4, reg, eps)
    rng = np.random.default_rng(3)
    pos = rng.normal(size=(12, 2))
    w = rng.normal(size=12)
    vel, dmin, pair = pairwise_velocities(s, pos, w)
    direct = np.zeros_like(pos)
    for i in range(12):
        for k in range(12):
            if i != k:
                direct[i] += w[k] * kernel(s, pos[i] - pos[k])
    assert np.allclose(vel, direct, rtol=1e-12, atol=1e-13)
    d = np.linalg.norm(pos[:, None] - pos[None], axis=-1) + np.eye(12) * 1e9
    assert dmin == pytest.approx(d.min(), rel=1e-15)
    assert d[pair] == pytest.approx(dmin, rel=1e-15)
    tgt = rng.normal(size=(7, 2))
    if reg != "none":
        ind = induced_velocity(s, tgt, pos, w)
        ref = sum(w[k] * kernel(s, tgt - pos[k]) for k in range(12))
        assert np.allclose(ind, ref, rtol=1e-12, atol=1e-13)
