import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beltrami.errors import ConfigError, EllipticityError
from beltrami.structure import (
    UNIQUENESS_THRESHOLD,
    CLinearH,
    RadialH,
    RLinearH,
    SmoothH,
    ZeroH,
    catalog,
    parse_structure,
    profile_values,
    verify_H1,
    w_gradient_fd,
)

finite = st.floats(-50, 50, allow_nan=False)
cplx = st.builds(complex, finite, finite)
zpts = st.builds(complex, st.floats(-1.2, 1.2), st.floats(-1.2, 1.2))


def test_catalog_members_and_bounds():
    cat = catalog()
    assert set(cat) == {"zero", "clin", "rlin", "radial", "smooth"}
    for H in cat.values():
        assert 0 <= H.k_bound < 1
        assert H.evaluate(0.3 + 0.2j, 0) == 0
        assert H.evaluate(1.5, 2 + 1j) == 0


def test_tags():
    cat = catalog()
    assert cat["clin"].tags.is_linear_C and cat["clin"].tags.is_linear_R
    assert cat["rlin"].tags.is_linear_R and not cat["rlin"].tags.is_linear_C
    assert cat["radial"].tags.is_homogeneous_1 and not cat["radial"].tags.is_linear_R
    assert cat["smooth"].tags.is_regular


def test_uniqueness_threshold_value():
    assert UNIQUENESS_THRESHOLD == pytest.approx(0.171572875, abs=1e-9)


def test_verify_zero():
    rep = verify_H1(ZeroH(), trials=500)
    assert rep.measured_k == 0 and not rep.violation


def test_verify_clin_quotient_is_mu():
    rep = verify_H1(CLinearH(0.3), trials=20_000)
    assert rep.measured_k <= 0.3 + 1e-12
    assert rep.measured_k > 0.3 - 1e-9
    assert rep.tail_k == 0 and rep.uniqueness_threshold_ok


def test_verify_radial_half():
    rep = verify_H1(RadialH(0.5), trials=100_000)
    assert rep.measured_k <= 0.5 * (1 + 1e-12)
    assert rep.uniqueness_threshold_ok and rep.tail_k == 0


def test_verify_reports_violation():
    H = CLinearH(0.3)
    H.k_bound = 0.2  # understated on purpose
    rep = verify_H1(H, trials=200)
    assert rep.violation and rep.witness is not None


def test_ellipticity_gate():
    with pytest.raises(EllipticityError):
        CLinearH(1.1)
    with pytest.raises(EllipticityError):
        RLinearH(0.6, 0.5)
    with pytest.raises(ConfigError):
        parse_structure("clin:mu=1.1") if False else parse_structure("nope")


def test_parse_structure_round_trip():
    H = parse_structure("rlin:mu=0.2+0.1i,nu=0.1,profile=taper")
    assert isinstance(H, RLinearH)
    assert H.mu(0) == pytest.approx(0.2 + 0.1j)
    assert parse_structure(H.ident).ident == H.ident
    assert isinstance(parse_structure("smooth:k=0.3,eps=0.5"), SmoothH)
    with pytest.raises(ConfigError):
        parse_structure("smooth:k=0.3,bogus=1")
    with pytest.raises(EllipticityError):
        parse_structure("clin:mu=1.1")


def test_profiles():
    r = np.array([0.0, 0.5, 0.95, 1.0, 1.2])
    assert list(profile_values("disk", r, 1.0)) == [1, 1, 1, 0, 0]
    t = profile_values("taper", r, 1.0)
    assert t[0] == t[1] == 1 and 0 < t[2] < 1 and t[3] == 0
    b = profile_values("bump", r, 1.0)
    assert b[0] == 1 and b[3] == 0 and np.all(np.diff(b) <= 0)


def test_fd_gradient_linear_members():
    z = np.array([0.1 + 0.2j, -0.4j, 0.7])
    w = np.array([1.0, 2 - 1j, -3j])
    H = CLinearH(0.3 - 0.1j)
    dw, dwb = w_gradient_fd(H, z, w, h_w=1e-3)
    assert np.allclose(dw, 0.3 - 0.1j, atol=1e-12) and np.allclose(dwb, 0, atol=1e-12)
    H = RLinearH(0.2, 0.1, profile="disk")
    dw, dwb = w_gradient_fd(H, z, w, h_w=1e-3)
    assert np.allclose(dw, 0.2, atol=1e-12) and np.allclose(dwb, 0.1, atol=1e-12)


def test_fd_gradient_radial_zero_unsupported():
    with pytest.raises(ValueError):
        w_gradient_fd(RadialH(), 0.3, 0.0)
    dw, _ = w_gradient_fd(RadialH(), 0.3, 0.0, strict=False)
    assert np.isnan(dw)


def test_radial_stretch_closed_form():
    H = RadialH(1 / 3)
    assert H.K == pytest.approx(2.0)
    z = 0.4 + 0.3j
    f = H.stretch(z)
    assert f == pytest.approx(z * abs(z))
    assert H.stretch(1.5 + 0j) == pytest.approx(1.5)


@settings(max_examples=60, deadline=None)
@given(z=zpts, w1=cplx, w2=cplx)
def test_lipschitz_in_w(z, w1, w2):
    for H in catalog().values():
        lhs = abs(H.evaluate(z, w1) - H.evaluate(z, w2))
        assert lhs <= H.k_bound * abs(w1 - w2) * (1 + 1e-9) + 1e-12


@settings(max_examples=60, deadline=None)
@given(z=zpts, w=cplx, lam=st.floats(0.01, 20))
def test_radial_positive_homogeneity(z, w, lam):
    H = RadialH(0.4)
    assert abs(H.evaluate(z, lam * w) - lam * H.evaluate(z, w)) <= 1e-12 * (1 + lam * abs(w))


@settings(max_examples=40, deadline=None)
@given(z=zpts, w=cplx)
def test_smooth_analytic_gradient_matches_fd(z, w):
    H = SmoothH(0.3, 0.5, profile="taper")
    dw, dwb = H.w_gradient(z, w)
    fw, fwb = w_gradient_fd(H, z, w, h_w=1e-5 * max(1, abs(w)))
    assert abs(dw - fw) + abs(dwb - fwb) <= 1e-6
    assert abs(dw) + abs(dwb) <= H.k_bound * (1 + 1e-9)
