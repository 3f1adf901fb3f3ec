import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beltrami.errors import NewtonStallError
from beltrami.field import (
    PeriodMap,
    bilip_from_samples,
    bilip_report,
    calibrate_eta,
    distortion_K,
    eta_shape,
    field_sweep,
    period,
    solve_for_a,
)
from beltrami.grid import GridSpec, make_operators
from beltrami.solver import residual
from beltrami.structure import CLinearH, RadialH, SmoothH, ZeroH, catalog

small = st.floats(0.05, 2.0)
angle = st.floats(0, 2 * np.pi)


def test_period_zero(ops64):
    for w in (1.0, 2 - 1j, 0.3j):
        assert period(ZeroH(), w, ops64) == pytest.approx(w, abs=1e-14)
    assert period(ZeroH(), 0, ops64) == 0


def test_period_radial(ops512):
    A = period(RadialH(1 / 3), 1.0, ops512)
    assert abs(A - 1) <= 0.01


def test_solve_for_a_zero(ops64):
    s = solve_for_a(ZeroH(), 3 - 1j, ops64)
    assert s.newton_iterations <= 1
    assert s.w == pytest.approx(3 - 1j)
    z = ops64.spec.z[10:14, 20:24]
    assert np.allclose(s.value(z), (3 - 1j) * z, atol=1e-13)


def test_solve_for_a_radial(ops256):
    H = RadialH(1 / 3)
    s = solve_for_a(H, 1.0, ops256)
    assert s.newton_iterations <= 3
    assert abs(s.w - 1) < 0.01
    s2 = solve_for_a(H, 2.0, ops256)
    assert abs(s2.value(1.0) - s2.value(0.0) - 2) <= 1e-8 * 2
    assert residual(H, s2.solution, ops256) <= 1e-6
    # 1-homogeneity: the slope scales with a
    assert s2.w == pytest.approx(2 * s.w, rel=1e-8)


def test_normalization_smooth(ops128):
    H = SmoothH(0.3, 0.5)
    for a in (1.0, 2 - 1j, -0.4j):
        s = solve_for_a(H, a, ops128)
        assert abs(s.value(0j)) <= 1e-12
        assert abs(s.value(1.0) - a) <= 1e-8 * max(1, abs(a))


def test_a_zero_is_trivial(ops64):
    for H in catalog().values():
        s = solve_for_a(H, 0, ops64)
        assert s.w == 0 and s.residual == 0 and s.newton_iterations == 0
        assert np.all(s.value_grid().values == 0)


def test_singular_jacobian(ops64):
    with pytest.raises(NewtonStallError):
        solve_for_a(SmoothH(0.3, 0.5), 1.0, ops64, w0=2.0, jac0=np.zeros((2, 2)))


def test_period_map_records(ops64):
    pm = PeriodMap()
    solve_for_a(SmoothH(0.3, 0.5), 1 + 1j, ops64, period_map=pm)
    assert len(pm.samples) >= 1
    assert pm.injectivity_violations() == []


def test_sweep_zero_roots_of_unity(ops64):
    a_set = np.exp(2j * np.pi * np.arange(8) / 8)
    res = field_sweep(ZeroH(), a_set, ops64)
    assert not res.failures
    assert np.allclose([s.w for s in res], a_set, atol=1e-14)


def test_sweep_warm_start_budget(ops256):
    H = RadialH(1 / 3)
    a_set = np.exp(2j * np.pi * np.arange(16) / 16)
    warm = field_sweep(H, a_set, ops256, warm=True)
    cold = field_sweep(H, a_set, ops256, warm=False)
    assert not warm.failures and not cold.failures
    assert warm.newton_iterations <= 4 * len(a_set)
    for s in warm:
        assert s.residual <= 1e-6


def test_sweep_with_zero_and_order(ops64):
    a_set = [1.0, 0.0, 1j, -1.0]
    res = field_sweep(SmoothH(0.3, 0.5), a_set, ops64)
    assert [s.a for s in res] == [complex(a) for a in a_set]
    assert res[1].w == 0 and res[1].residual == 0


def test_sweep_threads_match_serial(ops64):
    a_set = [1.0, 1j, 2 - 1j]
    H = SmoothH(0.3, 0.5)
    a = field_sweep(H, a_set, ops64, warm=False, workers=2)
    b = field_sweep(H, a_set, ops64, warm=False, workers=1)
    for x, y in zip(a, b):
        assert x.w == y.w
        assert np.array_equal(x.solution.omega.values, y.solution.omega.values)


def test_bilip_zero(ops64):
    rep = bilip_report(ZeroH(), 1.0, 2 + 1j, 2.0, ops64)
    assert rep.min_ratio == pytest.approx(0.5, abs=1e-12)
    assert rep.max_ratio == pytest.approx(2.0, abs=1e-12)
    assert rep.envelope_constant == pytest.approx(1.0, abs=1e-12)
    assert rep.K == 1


def test_bilip_radial_envelope(ops256):
    H = RadialH(1 / 3)
    K = distortion_K(H.k_bound)
    pairs = [(1.0, 2.0), (1.0, 1j), (0.5 - 0.5j, 2j)]
    reps = [bilip_report(H, a, b, 2.0, ops256) for a, b in pairs]
    C = calibrate_eta(reps)
    for r in reps:
        assert r.min_ratio > 0
        assert r.max_ratio / r.min_ratio <= (float(eta_shape(2.0, K)) * C) ** 2
        assert r.difference_min_jacobian > 0


def test_bilip_rejects_equal(ops64):
    with pytest.raises(ValueError):
        bilip_report(ZeroH(), 1.0, 1.0, 2.0, ops64)


def test_difference_of_clin_members_is_member(ops64):
    # linear field: phi_a - phi_b = phi_{a-b}
    H = CLinearH(0.3)
    pa, pb, pab = (solve_for_a(H, a, ops64) for a in (1 + 1j, 0.5, 0.5 + 1j))
    d = pa.value_grid().values - pb.value_grid().values
    assert np.max(np.abs(d - pab.value_grid().values)) < 1e-8


_ops64 = make_operators(GridSpec(64))


@settings(max_examples=12, deadline=None)
@given(r=small, th=angle)
def test_property_normalization(r, th):
    a = r * np.exp(1j * th)
    s = solve_for_a(SmoothH(0.3, 0.5), a, _ops64)
    assert abs(s.value(0j)) <= 1e-12
    assert abs(s.value(1.0) - a) <= 1e-8 * max(1, abs(a))


@settings(max_examples=8, deadline=None)
@given(r=small, th=angle, lam=st.floats(0.2, 5.0))
def test_property_radial_homogeneity(r, th, lam):
    H = RadialH(1 / 3)
    a = r * np.exp(1j * th)
    s1 = solve_for_a(H, a, _ops64)
    s2 = solve_for_a(H, lam * a, _ops64)
    g1 = s1.value_grid().values
    g2 = s2.value_grid().values
    assert np.max(np.abs(g2 - lam * g1)) <= 1e-7 * lam * max(1, abs(a))


@settings(max_examples=8, deadline=None)
@given(r1=small, t1=angle, r2=small, t2=angle)
def test_property_bilipschitz_bounds(r1, t1, r2, t2):
    a, b = r1 * np.exp(1j * t1), r2 * np.exp(1j * t2)
    if abs(a - b) < 1e-3:
        return
    H = SmoothH(0.3, 0.5)
    pa, pb = solve_for_a(H, a, _ops64), solve_for_a(H, b, _ops64)
    rep = bilip_from_samples(pa, pb, 2.0, distortion_K(H.k_bound))
    assert 0 < rep.min_ratio <= rep.max_ratio
    assert rep.difference_min_jacobian > 0
