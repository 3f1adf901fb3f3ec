import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beltrami.errors import OutsideChartError
from beltrami.reconstruction import (
    chart_a_set,
    default_w_probes,
    default_z_probes,
    gradient_chart,
    gradient_charts,
    invert_gradient,
    reconstruct_H,
    round_trip,
    winding_number,
)
from beltrami.structure import CLinearH, RLinearH, SmoothH, ZeroH


def test_chart_a_set_layout():
    a = chart_a_set((0.5, 1.0, 2.0), 16)
    assert len(a) == 1 + 48 and a[0] == 0
    assert sorted({round(abs(x), 12) for x in a[1:]}) == [0.5, 1.0, 2.0]
    b = chart_a_set((0.5, 1.0), 8, interior=3)
    assert all(0 < abs(x) < 0.5 for x in b[1:9])


@settings(max_examples=50, deadline=None)
@given(n=st.integers(3, 40), r=st.floats(0.1, 10), k=st.sampled_from([-2, -1, 1, 3]))
def test_winding_number_of_circles(n, r, k):
    t = 2 * np.pi * np.arange(n) / n
    curve = r * np.exp(1j * t)
    if n > 2 * abs(k):
        assert winding_number(r * np.exp(1j * k * t)) == k
    assert winding_number(curve, 2 * r) == 0


def test_probe_generators():
    zs = default_z_probes(16, 0.85)
    assert len(zs) == 16 and max(abs(z) for z in zs) <= 0.85
    ws = default_w_probes(0.5, 16, include_zero=True)
    assert len(ws) == 16 and ws[0] == 0 and max(abs(w) for w in ws) <= 0.5


def test_zero_chart_is_identity(ops64):
    chart = gradient_chart(ZeroH(), 0.3 + 0.1j, chart_a_set((0.5, 1, 2), 16), ops64)
    assert np.allclose(chart.F, chart.a, atol=1e-14)
    assert set(chart.windings.values()) == {1}
    assert chart.c == pytest.approx(1.0)
    inv = invert_gradient(chart, 0.7 - 0.2j)
    assert inv.a == pytest.approx(0.7 - 0.2j, abs=1e-12) and inv.newton_steps == 0
    assert reconstruct_H(ZeroH(), 0.3 + 0.1j, 0.7 - 0.2j, ops64, chart=chart) == 0


def test_outside_chart(ops64):
    chart = gradient_chart(ZeroH(), 0.3, chart_a_set((0.5, 1), 16), ops64)
    with pytest.raises(OutsideChartError):
        invert_gradient(chart, 5.0)
    with pytest.raises(ValueError):
        reconstruct_H(ZeroH(), 0.1, 0.2, ops64, chart=chart)


def test_clin_reconstruction_exact(ops64):
    H = CLinearH(0.3 - 0.1j, profile="taper")
    z = 0.2 + 0.1j
    chart = gradient_chart(H, z, chart_a_set((0.5, 1, 2), 16), ops64)
    for w in (0.4 + 0.3j, -0.8j, 1.1):
        got = reconstruct_H(H, z, w, ops64, chart=chart)
        want = H.evaluate(z, w)
        assert abs(got - want) <= 1e-6 * abs(want)


def test_smooth_chart_topology(ops64):
    H = SmoothH(0.3, 0.5)
    chart = gradient_chart(H, 0.2 + 0.1j, chart_a_set((2.0,), 64), ops64)
    assert abs(chart.windings[2.0]) == 1
    assert chart.injectivity_violations == []
    assert chart.c <= 10
    assert chart.covers(0.5) and not chart.covers(100.0)


def test_smooth_inversion_refines(ops64):
    H = SmoothH(0.3, 0.5)
    chart = gradient_chart(H, -0.3 + 0.4j, chart_a_set((0.5, 1, 2), 16), ops64)
    inv = invert_gradient(chart, 0.6 + 0.2j, tol=1e-10)
    assert inv.newton_steps >= 1
    assert abs(inv.solution.dz(-0.3 + 0.4j) - (0.6 + 0.2j)) <= 1e-10
    again = invert_gradient(chart, 0.6 + 0.21j, tol=1e-10, warm=inv)
    assert again.residual <= 1e-10


def test_round_trip_zero(ops64):
    rep = round_trip(ZeroH(), [0.1, -0.3j], [0, 0.5, 1j], ops64, a_set=chart_a_set((0.5, 1, 2), 16))
    assert rep.sup_error == 0 and rep.zero_value == 0 and not rep.failures


def test_round_trip_rlin_small(ops128, tmp_path):
    H = RLinearH(0.2, 0.1, profile="bump")
    zs = default_z_probes(4)
    rep = round_trip(H, zs, None, ops128, a_set=chart_a_set((0.5, 1, 2), 16))
    assert rep.count == 4 * 16 and not rep.failures
    assert rep.sup_relative <= 0.01
    assert rep.zero_value == 0
    assert rep.lipschitz_max <= H.k_bound + 0.01
    p = tmp_path / "rt.csv"
    rep.write_csv(p)
    assert len(p.read_text().splitlines()) == 1 + rep.count


def test_shared_sweep_matches_single(ops64):
    H = SmoothH(0.3, 0.5)
    a = chart_a_set((1.0,), 16)
    both = gradient_charts(H, [0.1, 0.4j], a, ops64)
    one = gradient_chart(H, 0.4j, a, ops64)
    assert np.allclose(both[1].F, one.F, atol=1e-12)
