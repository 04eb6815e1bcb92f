import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsqg import vortex_dynamics as vd
from gsqg.errors import CollisionError, DomainError, NearCollisionError, SizeLimitError
from gsqg.kernel import KernelSpec, green_value

C_15 = 0.5599830867156196
PERIOD_15_D1 = 11.220312641996675
PERIOD_19_D2 = 43.30349551533316


def pair(d=1.0, g=(1.0, 1.0)):
    return vd.VortexConfiguration([[-d / 2, 0.0], [d / 2, 0.0]], g)


def random_config(rng, n, spread=1.0, signed=True):
    pos = rng.uniform(-spread, spread, size=(n, 2))
    g = rng.uniform(0.2, 2.0, size=n)
    if signed:
        g *= rng.choice([-1.0, 1.0], size=n)
    return vd.VortexConfiguration(pos, g)


def test_configuration_validation():
    with pytest.raises(ValueError):
        vd.VortexConfiguration([[0, 0]], [0.0])
    with pytest.raises(ValueError):
        vd.VortexConfiguration([[0, 0], [1, 1]], [1.0])
    with pytest.raises(ValueError):
        vd.VortexConfiguration([[0, np.nan]], [1.0])
    c = pair()
    with pytest.raises(ValueError):
        c.positions[0, 0] = 5.0
    assert vd.VortexConfiguration.from_dict(c.to_dict()).positions.tolist() == c.positions.tolist()


def test_rhs_single_vortex_at_rest():
    assert np.array_equal(vd.rhs_exact(KernelSpec(1.5), vd.VortexConfiguration([[1, 2]], [3.0])), [[0.0, 0.0]])


def test_rhs_two_vortex_example():
    # X1 moves up, X2 down: the perpendicular-gradient kernel with C (m-2) < 0
    u = vd.rhs_exact(KernelSpec(1.5), pair())
    assert u[0, 0] == 0.0 and u[1, 0] == 0.0
    assert u[0, 1] == pytest.approx(0.5 * C_15, rel=1e-13)
    assert u[1, 1] == pytest.approx(-0.5 * C_15, rel=1e-13)


def test_rhs_exact_collision():
    c = vd.VortexConfiguration([[0, 0], [1, 0], [0, 0]], [1, 1, 1])
    with pytest.raises(CollisionError) as exc:
        vd.rhs_exact(KernelSpec(1.5), c)
    assert set(exc.value.pair) == {0, 2}
    with pytest.raises(DomainError):
        vd.rhs_exact(KernelSpec(1.5, "cutoff", 0.1), c)


def test_rhs_regularized_examples():
    s = KernelSpec(1.5, "cutoff", 0.2)
    same = vd.VortexConfiguration([[0.3, 0.3]] * 4, [1, -2, 3, 1])
    assert np.array_equal(vd.rhs_regularized(s, same), np.zeros((4, 2)))
    close = pair(d=0.05)
    assert np.array_equal(vd.rhs_regularized(s, close), np.zeros((2, 2)))
    far = vd.VortexConfiguration([[0, 0], [1, 0.3], [-0.5, 0.9]], [1, -0.4, 2])
    assert np.array_equal(vd.rhs_regularized(s, far), vd.rhs_exact(KernelSpec(1.5), far))
    with pytest.raises(DomainError):
        vd.rhs_regularized(KernelSpec(1.5), far)


@pytest.mark.parametrize("m", [1.2, 1.5, 1.9])
def test_rhs_identities_random(m):
    rng = np.random.default_rng(int(10 * m))
    s = KernelSpec(m)
    for _ in range(1000):
        c = random_config(rng, int(rng.integers(2, 11)))
        u = vd.rhs_exact(s, c)
        g = c.intensities
        scale = np.sum(np.abs(g) * np.linalg.norm(u, axis=1))
        assert np.linalg.norm(g @ u) <= 1e-12 * scale
        mscale = np.sum(np.abs(g) * np.linalg.norm(c.positions, axis=1) * np.linalg.norm(u, axis=1))
        assert abs(g @ np.sum(c.positions * u, axis=1)) <= 1e-12 * mscale


@settings(max_examples=100, deadline=None)
@given(st.floats(1.05, 1.95), st.floats(0, 2 * math.pi), st.integers(0, 2**31))
def test_rotation_equivariance(m, theta, seed):
    c = random_config(np.random.default_rng(seed), 5)
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    s = KernelSpec(m)
    u = vd.rhs_exact(s, c)
    ur = vd.rhs_exact(s, c.moved(c.positions @ R.T))
    assert np.allclose(ur, u @ R.T, rtol=0, atol=1e-12 * np.max(np.abs(u)))


def test_hamiltonian_examples():
    s = KernelSpec(1.5)
    assert vd.hamiltonian(s, vd.VortexConfiguration([[0, 0]], [1.0])) == 0.0
    assert vd.hamiltonian(s, pair()) == pytest.approx(C_15, rel=1e-13)
    c = vd.VortexConfiguration([[0, 0], [1, 0.2], [-0.3, 1.1]], [1, -0.5, 2])
    assert vd.hamiltonian(s, c.moved(c.positions + [3.5, -2.25])) == pytest.approx(vd.hamiltonian(s, c), rel=1e-14)
    with pytest.raises(CollisionError):
        vd.hamiltonian(s, vd.VortexConfiguration([[0, 0], [0, 0]], [1, 1]))


def test_hamiltonian_brute_force():
    rng = np.random.default_rng(5)
    c = random_config(rng, 6)
    s = KernelSpec(1.3)
    ref = 0.5 * sum(
        c.intensities[j] * c.intensities[k] * green_value(s, np.linalg.norm(c.positions[j] - c.positions[k]))
        for j in range(6) for k in range(6) if j != k
    )
    assert vd.hamiltonian(s, c) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("spec", [KernelSpec(1.3), KernelSpec(1.8), KernelSpec(1.5, "cutoff", 0.4)])
def test_symplectic_relation(spec):
    rng = np.random.default_rng(7)
    for _ in range(20):
        c = random_config(rng, 4)
        if vd.min_pair_distance(c) < 0.1:
            continue
        assert vd.symplectic_residual(spec, c, h=1e-6) <= 1e-5


def test_centre_and_inertia_examples():
    c = vd.VortexConfiguration([[0.4, -0.7], [0.4, -0.7]], [1, -1])
    assert np.array_equal(vd.vortex_centre(c), [0.0, 0.0]) and vd.moment_of_inertia(c) == 0.0
    c = vd.VortexConfiguration([[1, 3]], [2.0])
    assert np.array_equal(vd.vortex_centre(c), [2.0, 6.0]) and vd.moment_of_inertia(c) == 20.0
    c = vd.VortexConfiguration([[0, 0], [1, 2], [3, -1]], [1, 2, -0.5])
    v = np.array([0.25, -1.5])
    assert np.allclose(vd.vortex_centre(c.moved(c.positions + v)), vd.vortex_centre(c) + 2.5 * v, rtol=1e-14)


def test_min_pair_distance_examples():
    assert vd.min_pair_distance(vd.VortexConfiguration([[0, 0], [3, 4]], [1, 1])) == 5.0
    assert vd.min_pair_distance(vd.VortexConfiguration([[0, 0], [0.7, 0], [1.4, 0]], [1, 1, 1])) == pytest.approx(0.7, rel=1e-15)
    with pytest.raises(ValueError):
        vd.min_pair_distance(vd.VortexConfiguration([[0, 0]], [1]))


def test_interaction_bound_and_phi():
    assert vd.interaction_bound_h(pair(), 1.5) == 0.0
    tri = vd.VortexConfiguration([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]], [1, 1, 1])
    assert vd.interaction_bound_h(tri, 1.5) == pytest.approx(6.0, rel=1e-13)
    rng = np.random.default_rng(8)
    pos = rng.uniform(-1, 1, size=(5, 2))
    ref = sum(
        np.linalg.norm(pos[i] - pos[j]) ** (1.5 - 3) * np.linalg.norm(pos[i] - pos[k]) ** (1.5 - 3)
        for i, j, k in itertools.permutations(range(5), 3)
    )
    assert vd.interaction_bound_h(vd.VortexConfiguration(pos, np.ones(5)), 1.5) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(CollisionError):
        vd.interaction_bound_h(vd.VortexConfiguration([[0, 0], [0, 0], [1, 1]], [1, 1, 1]), 1.5)
    c = vd.VortexConfiguration(pos, np.ones(5))
    full = vd.hamiltonian(KernelSpec(1.5), c)
    for eps in (0.05, 0.5, 2.0):
        assert vd.phi_eps(KernelSpec(1.5, "cutoff", eps), c) <= full * (1 + 1e-14)
    with pytest.raises(DomainError):
        vd.phi_eps(KernelSpec(1.5), c)


def test_period_oracle():
    assert vd.co_rotation_period(1.5, 1.0) == pytest.approx(PERIOD_15_D1, rel=1e-14)
    assert vd.co_rotation_period(1.9, 2.0) == pytest.approx(PERIOD_19_D2, rel=1e-14)


def test_two_vortex_period_return():
    T = vd.co_rotation_period(1.5, 1.0)
    rec = vd.integrate(KernelSpec(1.5), pair(), T, T / 1e4, record_every=500)
    err = np.max(np.linalg.norm(rec.states[-1].positions - pair().positions, axis=1))
    assert err <= 1e-6
    assert rec.min_distance() == pytest.approx(1.0, abs=1e-9)
    assert rec.times[-1] == T


def test_rk4_order_ratio():
    T = vd.co_rotation_period(1.5, 1.0)
    errs = []
    for n in (80, 160, 320):
        rec = vd.integrate(KernelSpec(1.5), pair(), T, T / n, record_every=n)
        errs.append(np.max(np.linalg.norm(rec.states[-1].positions - pair().positions, axis=1)))
    for a, b in zip(errs, errs[1:]):
        assert 12.0 <= a / b <= 20.0


def test_rk45_matches_rk4():
    T = vd.co_rotation_period(1.5, 1.0)
    rec = vd.integrate(KernelSpec(1.5), pair(), T, 0.1, method="rk45", atol=1e-11, rtol=1e-11)
    assert np.max(np.abs(rec.states[-1].positions - pair().positions)) < 1e-7
    assert rec.times[-1] == T


def test_integrate_zero_length_and_validation():
    rec = vd.integrate(KernelSpec(1.5), pair(), 0.0, 0.1)
    assert rec.times == [0.0] and len(rec.states) == 1
    with pytest.raises(ValueError):
        vd.integrate(KernelSpec(1.5), pair(), 1.0, 0.0)
    with pytest.raises(ValueError):
        vd.integrate(KernelSpec(1.5), pair(), 1.0, 0.1, method="euler")


def test_near_collision_abort():
    # the opposite-sign pair drifts in -y onto a third vortex; closest approach is about 0.053
    c = vd.VortexConfiguration([[-0.05, 0.0], [0.05, 0.0], [0.0, -0.3]], [1.0, -1.0, 0.5])
    with pytest.raises(NearCollisionError) as exc:
        vd.integrate(KernelSpec(1.5), c, 3.0, 1e-3, collision_floor=0.06)
    assert 0.0 < exc.value.t < 3.0 and exc.value.distance < 0.06


def test_regularized_agrees_with_exact_when_separated():
    c = vd.VortexConfiguration([[0, 0], [1, 0.2], [-0.3, 1.1]], [1.0, 0.8, 1.3])
    a = vd.integrate(KernelSpec(1.5), c, 2.0, 1e-2)
    assert a.min_distance() > 0.3
    b = vd.integrate(KernelSpec(1.5, "cutoff", 0.3), c, 2.0, 1e-2)
    assert np.max(np.abs(a.positions() - b.positions())) <= 1e-12


def test_conservation_short_run():
    c = vd.VortexConfiguration([[0, 0], [1, 0.2], [-0.3, 1.1], [-1.2, -0.4], [0.6, -1.0]], [1.0, 0.8, 1.3, 0.6, 1.1])
    rec = vd.integrate(KernelSpec(1.5), c, 1.0, 1e-3, record_every=100)
    H = np.array([d.hamiltonian for d in rec.diagnostics])
    J = np.array([d.inertia for d in rec.diagnostics])
    C = np.array([d.centre for d in rec.diagnostics])
    assert np.max(np.abs(H - H[0])) / abs(H[0]) <= 1e-8
    assert np.max(np.abs(J - J[0])) / abs(J[0]) <= 1e-8
    assert np.max(np.abs(C - C[0])) <= 1e-10
    assert all(np.array_equal(s.intensities, c.intensities) for s in rec.states)


def test_trajectory_export_roundtrip(tmp_path):
    rec = vd.integrate(KernelSpec(1.5, "cutoff", 0.1), pair(), 0.5, 0.05, record_every=2)
    text = rec.to_csv(tmp_path / "t.csv")
    assert text.splitlines()[0] == "t,x0,y0,x1,y1,H,C_x,C_y,J,min_dist"
    assert len(text.splitlines()) == len(rec.times) + 1
    back = vd.TrajectoryRecord.from_json(rec.to_json())
    assert back.to_json() == rec.to_json()
    assert back.times == rec.times
    with pytest.raises(ValueError):
        back.append(0.1, pair(), back.diagnostics[0])


def test_validate_intensities_examples():
    assert vd.validate_intensities([1, 1, 1]).admissible
    r = vd.validate_intensities([1, -1])
    assert not r.admissible and set(r.violating_subset) == {0, 1}
    assert vd.validate_intensities([2, -1, 3]).admissible
    r = vd.validate_intensities([0.1, 0.2, -0.3])
    assert not r.admissible and set(r.violating_subset) == {0, 1, 2}
    with pytest.raises(SizeLimitError):
        vd.validate_intensities(np.ones(25))


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(-6, 6).filter(lambda v: v != 0), min_size=1, max_size=9))
def test_validate_intensities_matches_brute_force(vals):
    r = vd.validate_intensities(vals)
    assert r.admissible == vd.brute_force_admissible(vals)
    if not r.admissible:
        assert sum(vals[i] for i in r.violating_subset) == 0


def test_validate_intensities_large_is_fast():
    import time

    rng = np.random.default_rng(9)
    g = rng.uniform(0.5, 1.5, 24) * rng.choice([-1, 1], 24)
    t = time.perf_counter()
    vd.validate_intensities(g)
    assert time.perf_counter() - t < 1.0
