import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beltrami.errors import GridSpecError, SpecMismatchError
from beltrami.grid import (
    ComplexGrid,
    DiscardedMeanWarning,
    GridSpec,
    beurling,
    bilinear,
    cauchy,
    d_z,
    d_zbar,
    l2_norm,
    make_operators,
    restrict,
)
from beltrami.io import read_grid, write_grid, write_grid_csv

from conftest import gaussian_mix


def test_make_operators_shapes():
    ops = make_operators(GridSpec(16, 4.0, 2.0))
    assert ops.beurling_mult.shape == (16, 16)
    assert ops.cauchy_mult.shape == (16, 16)
    assert make_operators(GridSpec(16, 4.0, 2.0)) is ops


@pytest.mark.parametrize("args", [(16, 4.0, 3.0), (24, 4.0, 2.0), (8, 4.0, 2.0), (16, -1.0, 0.5), (16, 4.0, 0.0)])
def test_invalid_specs_rejected(args):
    with pytest.raises(GridSpecError):
        GridSpec(*args)


def test_beurling_multiplier_unit_modulus(ops256):
    m = np.abs(ops256.beurling_mult)
    assert m[0, 0] == 0
    assert ops256.cauchy_mult[0, 0] == 0
    nz = np.ones(m.shape, bool)
    nz[0, 0] = False
    # unit modulus up to the rounding of a single complex division
    assert np.max(np.abs(m[nz] - 1.0)) <= 1e-15


def test_sample_layout():
    spec = GridSpec(16, 4.0, 2.0)
    h = spec.h
    assert spec.z[0, 0] == -4 - 4j
    assert spec.z[2, 3] == complex(-4 + 3 * h, -4 + 2 * h)
    assert spec.is_node(0j) and spec.is_node(1 + 0j)


def test_fourier_mode_derivative(ops128):
    spec = ops128.spec
    L = spec.half_width
    g = ComplexGrid(spec, np.exp(1j * math.pi * spec.z.real / L))
    want = (1j * math.pi / (2 * L)) * g.values
    got = d_z(g, ops128).values
    assert np.max(np.abs(got - want)) / np.max(np.abs(want)) <= 1e-12
    gb = d_zbar(g, ops128).values
    assert np.max(np.abs(gb - want)) / np.max(np.abs(want)) <= 1e-12


def test_imaginary_direction_mode(ops64):
    spec = ops64.spec
    L = spec.half_width
    g = ComplexGrid(spec, np.exp(1j * math.pi * spec.z.imag / L))
    # d/dy e^{i pi y/L} = (i pi/L) g, d_z = (d_x - i d_y)/2
    want = 0.5 * (-1j) * (1j * math.pi / L) * g.values
    assert np.allclose(d_z(g, ops64).values, want, rtol=0, atol=1e-12)


def test_constant_has_zero_derivatives(ops64):
    g = ComplexGrid(ops64.spec, np.full((64, 64), 2 - 3j))
    assert np.max(np.abs(d_z(g, ops64).values)) < 1e-13
    assert np.max(np.abs(d_zbar(g, ops64).values)) < 1e-13


def test_bump_derivative_has_zero_integral(ops128):
    spec = ops128.spec
    g = gaussian_mix(spec, [0.2 + 0.1j], [0.3], [1.0])
    assert abs(d_zbar(g, ops128).values.sum() * spec.cell_area) < 1e-12


def test_cauchy_of_zero(ops64):
    assert np.all(cauchy(ComplexGrid.zeros(ops64.spec), ops64).values == 0)
    assert np.all(beurling(ComplexGrid.zeros(ops64.spec), ops64).values == 0)


def test_cauchy_disk_closed_form(ops512):
    spec = ops512.spec
    chi = (spec.radius < 1).astype(float)
    m = chi.mean()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DiscardedMeanWarning)
        c = cauchy(ComplexGrid(spec, chi), ops512).values
    # the periodic transform drops the mean; add back its exact preimage m*zbar
    c = c + m * np.conj(spec.z)
    j0, k0 = spec.index_of(0j)
    c = c - c[j0, k0]
    inner = spec.radius < 0.9
    exact = np.conj(spec.z)
    rel = np.max(np.abs(c[inner] - exact[inner])) / np.max(np.abs(exact[inner]))
    assert rel <= 0.02


def test_cauchy_warns_on_large_mean(ops64):
    g = ComplexGrid(ops64.spec, np.ones((64, 64)))
    with pytest.warns(DiscardedMeanWarning):
        cauchy(g, ops64)


def test_beurling_disk_closed_form(ops512):
    spec = ops512.spec
    chi = (spec.radius < 1).astype(float)
    g = ComplexGrid(spec, chi - chi.mean())
    s = beurling(g, ops512).values
    ann = (spec.radius > 1.1) & (spec.radius < 1.9)
    exact = -1.0 / spec.z[ann] ** 2
    rel = np.linalg.norm(s[ann] - exact) / np.linalg.norm(exact)
    assert rel <= 0.03


def test_restrict():
    spec = GridSpec(256, 4.0, 2.0)
    g = ComplexGrid(spec, spec.z)
    one = restrict(g, 0.0)
    assert len(one) == 1 and one.z[0] == 0
    assert len(restrict(g, spec.support_radius)) == int(spec.disk_mask(spec.support_radius).sum())
    n1 = len(restrict(g, 1.0))
    expected = math.pi * (spec.n / (2 * spec.half_width)) ** 2
    assert abs(n1 - expected) / expected <= 0.02
    with pytest.raises(ValueError):
        restrict(g, 2.5)


def test_spec_mismatch():
    a = ComplexGrid.zeros(GridSpec(16))
    b = ComplexGrid.zeros(GridSpec(32))
    with pytest.raises(SpecMismatchError):
        a + b
    with pytest.raises(SpecMismatchError):
        d_z(b, make_operators(GridSpec(16)))


def test_nonfinite_rejected():
    v = np.zeros((16, 16), complex)
    v[3, 4] = np.nan
    with pytest.raises(ValueError):
        ComplexGrid(GridSpec(16), v)


def test_bilinear_exact_on_affine():
    spec = GridSpec(64)
    vals = (2 - 1j) * spec.z + 0.5 * np.conj(spec.z) + 3
    pts = np.array([0.123 + 0.456j, -1.01 + 0.7j, 1.5 - 1.3j])
    want = (2 - 1j) * pts + 0.5 * np.conj(pts) + 3
    assert np.allclose(bilinear(spec, vals, pts), want, atol=1e-12)
    assert bilinear(spec, vals, 1 + 0j) == vals[spec.index_of(1 + 0j)]


def test_belt_roundtrip(tmp_path):
    spec = GridSpec(32, 3.0, 1.5)
    g = ComplexGrid(spec, np.exp(1j * spec.z.real) * spec.radius)
    p = tmp_path / "g.belt"
    write_grid(p, g)
    raw = p.read_bytes()
    assert raw[:4] == b"BELT"
    assert len(raw) == 4 + 4 + 4 + 8 + 8 + 8 * 32 * 32
    back = read_grid(p)
    assert back.spec == spec
    assert np.allclose(back.values, g.values.astype(np.complex64))
    write_grid_csv(tmp_path / "g.csv", g, stride=8)
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "j,k,re_z,im_z,re_g,im_g" and len(lines) == 1 + 16


def test_belt_rejects_bad_magic(tmp_path):
    p = tmp_path / "x.belt"
    p.write_bytes(b"NOPE" + bytes(24))
    with pytest.raises(ValueError):
        read_grid(p)


smooth_fields = st.lists(
    st.tuples(
        st.complex_numbers(max_magnitude=1.2, allow_nan=False, allow_infinity=False),
        st.floats(0.15, 0.4),
        st.complex_numbers(min_magnitude=0.1, max_magnitude=2.0, allow_nan=False, allow_infinity=False),
    ),
    min_size=1,
    max_size=4,
)


@settings(max_examples=25, deadline=None)
@given(smooth_fields)
def test_beurling_isometry(params):
    ops = make_operators(GridSpec(64))
    spec = ops.spec
    g = gaussian_mix(spec, *zip(*params))
    g0 = g - g.mean()
    assert abs(l2_norm(beurling(g, ops)) - l2_norm(g0)) <= 1e-12 * max(1.0, l2_norm(g0))


@settings(max_examples=25, deadline=None)
@given(smooth_fields)
def test_cauchy_inverts_dzbar(params):
    ops = make_operators(GridSpec(64))
    g = gaussian_mix(ops.spec, *zip(*params))
    g0 = g - g.mean()
    back = d_zbar(cauchy(g0, ops), ops)
    assert np.max(np.abs(back.values - g0.values)) <= 1e-10 * np.max(np.abs(g0.values))
    assert abs(cauchy(g0, ops).mean()) < 1e-14 * max(1.0, np.max(np.abs(g0.values)))


@settings(max_examples=25, deadline=None)
@given(smooth_fields)
def test_beurling_commutes_with_derivatives(params):
    ops = make_operators(GridSpec(64))
    g = gaussian_mix(ops.spec, *zip(*params))
    lhs = beurling(d_zbar(g, ops), ops).values
    rhs = d_z(g, ops).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))
