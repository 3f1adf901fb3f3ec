import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beltrami.errors import DegenerateWronskianError
from beltrami.field import solve_for_a
from beltrami.grid import ComplexGrid
from beltrami.structure import CLinearH, RadialH, RLinearH, SmoothH, ZeroH
from beltrami.tangent import (
    default_step,
    directional_derivative,
    linear_residual,
    linearized_coefficients,
    nondegeneracy_report,
    tangent_data,
    verify_linearization,
    wronskian_coefficients,
)


def test_default_step():
    assert default_step(0.5) == 1e-3
    assert default_step(3j) == pytest.approx(3e-3)


def test_zero_derivative_is_linear(ops64):
    z = ops64.spec.z
    for e in (1.0, 1j, 2 - 1j):
        eta = directional_derivative(ZeroH(), 1 + 1j, e, ops64)
        assert np.max(np.abs(eta.value.values - e * z)) < 1e-10
        one = directional_derivative(ZeroH(), 1 + 1j, e, ops64, central=False)
        assert np.max(np.abs(one.value.values - e * z)) < 1e-10


def test_derivative_bad_step(ops64):
    with pytest.raises(ValueError):
        directional_derivative(ZeroH(), 1, 1, ops64, t=0)


def test_linearized_coefficients_linear_members(ops64):
    spec = ops64.spec
    H = CLinearH(0.3, profile="taper")
    for a in (1.0, 2j):
        mu, nu, undef = linearized_coefficients(H, solve_for_a(H, a, ops64))
        assert np.allclose(mu.values, H.mu(spec.z), atol=1e-15)
        assert np.all(nu.values == 0) and not undef.any()
    mu, nu, _ = linearized_coefficients(ZeroH(), solve_for_a(ZeroH(), 1.0, ops64))
    assert np.all(mu.values == 0) and np.all(nu.values == 0)


def test_radial_coefficients_undefined_only_where_gradient_vanishes(ops128):
    H = RadialH(1 / 3)
    phi = solve_for_a(H, 1.0, ops128)
    mu, nu, undef = linearized_coefficients(H, phi)
    assert np.all(np.abs(mu.values) + np.abs(nu.values) <= H.k_bound + 1e-12)
    assert undef.sum() <= 1


def test_rlin_linearization_is_exact(ops128):
    H = RLinearH(0.2, 0.1, profile="bump")
    rep = verify_linearization(H, 1.0, 1.0, ops128)
    scale = 1e-9
    assert max(rep.residuals) <= scale
    assert rep.cross_route_gap <= 1e-8


def test_smooth_ladder_and_cross_route(ops128):
    H = SmoothH(0.3, 0.5)
    rep = verify_linearization(H, 1.0, 1.0, ops128)
    assert rep.decreasing
    assert all(q <= 0.75 for q in rep.ratios)
    assert rep.cross_route_gap <= rep.gap_bound
    assert rep.ok()
    assert rep.w12_differences[1] < rep.w12_differences[0]
    d = rep.as_dict()
    assert len(d["residuals"]) == 3


def test_one_sided_is_first_order(ops64):
    H = SmoothH(0.3, 0.5)
    base = solve_for_a(H, 1.0, ops64, tol=1e-12, solver_tol=1e-13)
    mu, nu, _ = linearized_coefficients(H, base)
    r = [linear_residual(directional_derivative(H, 1.0, 1j, ops64, t, False, base), mu, nu) for t in (0.02, 0.01)]
    assert 0.4 < r[1] / r[0] < 0.6


def test_wronskian_conformal_pair(ops64):
    spec = ops64.spec
    one = np.ones((spec.n, spec.n), complex)
    zero = np.zeros_like(one)
    mu, nu = wronskian_coefficients((one, zero), (1j * one, zero))
    assert np.all(mu == 0) and np.all(nu == 0)
    assert np.all(np.imag(one * np.conj(1j * one)) == -1)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0, 0.95), th=st.floats(0, 2 * np.pi))
def test_wronskian_recovers_constant_coefficients(r, th):
    m0 = r * np.exp(1j * th)
    one = np.ones((4, 4), complex)
    # eta_1 = z + m0 zbar, eta_i = i(z + m0 zbar): C-linear with mu = m0
    mu, nu = wronskian_coefficients((one, m0 * one), (1j * one, 1j * m0 * one))
    assert np.allclose(mu, m0, atol=1e-14) and np.allclose(nu, 0, atol=1e-14)
    # eta_i = i(z - m0 zbar): the pair solves the anti-linear equation, nu = m0
    mu, nu = wronskian_coefficients((one, m0 * one), (1j * one, -1j * m0 * one))
    assert np.allclose(mu, 0, atol=1e-14) and np.allclose(nu, m0, atol=1e-14)


def test_wronskian_degenerate():
    p = np.array([1.0, 1.0], complex)
    q = np.zeros(2, complex)
    with pytest.raises(DegenerateWronskianError):
        wronskian_coefficients((p, q), (2 * p, q))
    mu, _ = wronskian_coefficients((p, q), (np.array([1j, 1.0]), q), raise_on_degenerate=False)
    assert np.isnan(mu[1]) and mu[0] == 0


def test_wronskian_matches_gradient_route(ops128):
    H = SmoothH(0.3, 0.5)
    data = tangent_data(H, 1.0, ops128)
    mu, nu = wronskian_coefficients(data.eta_1, data.eta_i, R=2.0)
    m = ops128.spec.disk_mask(2.0)
    gap = max(np.max(np.abs(mu - data.mu_a.values)[m]), np.max(np.abs(nu - data.nu_a.values)[m]))
    assert gap <= max(2 * data.t, 1e-4)


def test_nondegeneracy_zero(ops64):
    rep = nondegeneracy_report(ZeroH(), 1.0, ops64)
    assert rep.det_sign == -1
    assert rep.det_min == pytest.approx(-1, abs=1e-9) and rep.det_max == pytest.approx(-1, abs=1e-9)
    assert rep.slope_ratio_min == pytest.approx(1) and rep.slope_ratio_max == pytest.approx(1)


def test_nondegeneracy_radial(ops128):
    rep = nondegeneracy_report(RadialH(1 / 3), 1.0, ops128)
    assert rep.det_sign != 0 and rep.det_min_abs > 0
    assert rep.coeff_bound_excess <= 1e-9


def test_nondegeneracy_smooth_sweep(ops64):
    H = SmoothH(0.3, 0.5)
    signs = {nondegeneracy_report(H, 1.5 * np.exp(2j * np.pi * k / 8), ops64).det_sign for k in range(8)}
    assert signs == {-1}


def test_derivative_arithmetic(ops64):
    H = CLinearH(0.3)
    e1 = directional_derivative(H, 1.0, 1.0, ops64)
    ei = directional_derivative(H, 1.0, 1j, ops64)
    s = e1 + ei.scaled(2.0)
    assert s.e == 1 + 2j
    direct = directional_derivative(H, 1.0, 1 + 2j, ops64)
    assert np.max(np.abs(s.value.values - direct.value.values)) < 1e-8
    assert isinstance(s.value, ComplexGrid)
