"""Compact transition psi, arctan step Psi and the weight families built from them."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkdvlab.cutoffs import (
    Phi_time_derivative,
    Phi_weights,
    arctan_step,
    default_delta,
    default_sigma,
    global_weights,
    initial_shifts,
    midpoints,
    phi_weights,
    psi_eval,
)
from mkdvlab.grid import make_grid
from mkdvlab.profiles import BreatherParams, SolitonParams, make_profile_set

SCAN = np.linspace(-1, 1, 100_001)[1:-1]


@pytest.fixture(scope="module")
def three():
    return make_profile_set([SolitonParams(1.0), SolitonParams(2.0), SolitonParams(3.5)])


class TestPsi:
    def test_endpoints(self):
        assert psi_eval(-1.0) == 0.0
        assert psi_eval(1.0) == 1.0
        assert psi_eval(0.0) == 0.5
        assert psi_eval(-3.0) == 0.0 and psi_eval(3.0) == 1.0

    def test_nondecreasing(self):
        assert np.all(psi_eval(SCAN, 1) >= 0)

    def test_symmetry(self):
        np.testing.assert_allclose(psi_eval(-SCAN), 1 - psi_eval(SCAN), atol=1e-15)

    def test_power_bounds(self):
        p, p1 = psi_eval(SCAN), psi_eval(SCAN, 1)
        # 1 - psi(x) = psi(-x), exact without cancellation
        q = psi_eval(-SCAN)
        C0 = np.max(p1 ** (4 / 3) / p)
        C1 = np.max(p1 ** (4 / 3) / q)
        assert np.isfinite(C0) and C0 < 10
        assert np.isfinite(C1) and C1 < 10

    def test_derivatives_by_difference(self):
        x = np.linspace(-0.9, 0.9, 37)
        h = 1e-5
        for m in (1, 2, 3):
            fd = (psi_eval(x + h, m - 1) - psi_eval(x - h, m - 1)) / (2 * h)
            np.testing.assert_allclose(psi_eval(x, m), fd, atol=1e-6)

    def test_flat_outside(self):
        x = np.array([-2.0, -1.0, 1.0, 2.0])
        for m in (1, 2, 3):
            assert np.all(psi_eval(x, m) == 0)

    def test_order_validation(self):
        with pytest.raises(ValueError):
            psi_eval(0.0, 4)


class TestArctanStep:
    def test_midpoint(self):
        assert arctan_step(0.0, 0.3) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("sigma", [0.05, 0.25, 1.0])
    def test_reflection(self, sigma):
        x = np.linspace(-200, 200, 100_001)
        np.testing.assert_allclose(arctan_step(-x, sigma) + arctan_step(x, sigma), 1.0, atol=1e-15)

    @pytest.mark.parametrize("sigma", [0.05, 0.25, 1.0])
    def test_derivative_ratios(self, sigma):
        x = np.linspace(-200, 200, 100_001)
        d1, d2, d3 = (np.abs(arctan_step(x, sigma, m)) for m in (1, 2, 3))
        assert np.all(d2 <= np.sqrt(sigma) / 2 * d1 * (1 + 1e-12))
        assert np.all(d3 <= sigma / 4 * d1 * (1 + 1e-12))

    def test_derivatives_by_difference(self):
        x = np.linspace(-20, 20, 81)
        s, h = 0.4, 1e-5
        for m in (1, 2, 3):
            fd = (arctan_step(x + h, s, m - 1) - arctan_step(x - h, s, m - 1)) / (2 * h)
            np.testing.assert_allclose(arctan_step(x, s, m), fd, atol=1e-8)

    def test_decreasing_and_tails(self):
        assert np.all(arctan_step(np.linspace(-50, 50, 1001), 0.25, 1) < 0)
        assert arctan_step(1e4, 0.25) == 0.0
        assert arctan_step(-1e4, 0.25) == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            arctan_step(0.0, 0.0)
        with pytest.raises(ValueError):
            arctan_step(0.0, 1.0, order=5)


class TestPhiFamily:
    def test_partition_of_unity(self, three):
        g = make_grid(120.0, 1024)
        for t in (0.5, 3.0, 10.0):
            w = phi_weights(three, t, g)
            np.testing.assert_allclose(sum(w.w), 1.0, atol=1e-14)
            np.testing.assert_allclose(sum(w.d1), 0.0, atol=1e-14)

    def test_derivative_support(self, three):
        g = make_grid(120.0, 4096)
        t = 4.0
        w = phi_weights(three, t, g)
        delta = w.params[0]
        sig = midpoints(three)
        for j in range(3):
            near = np.zeros(g.N, bool)
            if j > 0:
                near |= np.abs(g.x - sig[j - 1] * t) <= delta * t
            if j < 2:
                near |= np.abs(g.x - sig[j] * t) <= delta * t
            assert np.all(w.d1[j][~near] == 0)

    def test_three_quarter_power_bound(self, three):
        g = make_grid(120.0, 8192)
        t = 4.0
        w = phi_weights(three, t, g)
        for j in range(3):
            mask = w.w[j] > 0
            ratio = np.abs(w.d1[j][mask]) / w.w[j][mask] ** 0.75
            assert np.max(ratio) < 10.0 / (w.params[0] * t)

    def test_shifts(self, three):
        g = make_grid(120.0, 1024)
        sh = initial_shifts(make_profile_set([SolitonParams(1.0, 1, -6.0), SolitonParams(2.0, 1, 6.0)]))
        assert sh == [0.0]
        with pytest.raises(ValueError):
            phi_weights(three, 1.0, g, shifts=[0.0])

    def test_rejects_bad_time_and_delta(self, three):
        g = make_grid(120.0, 1024)
        with pytest.raises(ValueError):
            phi_weights(three, 0.0, g)
        with pytest.raises(ValueError):
            phi_weights(three, 1.0, g, delta=0.5)

    def test_default_delta(self, three):
        assert default_delta(three) == pytest.approx(min(1.0, 1.0 / 4) / 2)

    def test_global(self):
        g = make_grid(20.0, 64)
        ps = make_profile_set([BreatherParams(1.0, 1.0)])
        assert np.all(global_weights(ps, g).w[0] == 1.0)
        with pytest.raises(ValueError):
            global_weights(make_profile_set([SolitonParams(1.0), SolitonParams(2.0)]), g)

    @settings(max_examples=20, deadline=None)
    @given(t=st.floats(0.1, 20), c2=st.floats(1.5, 4))
    def test_partition_property(self, t, c2):
        g = make_grid(100.0, 512)
        ps = make_profile_set([SolitonParams(1.0), SolitonParams(c2)])
        w = phi_weights(ps, t, g)
        assert np.max(np.abs(w.w[0] + w.w[1] - 1)) < 1e-14
        assert np.all(w.w[0] >= -1e-15) and np.all(w.w[1] >= -1e-15)


class TestPhiSteps:
    def test_default_sigma(self):
        ps = make_profile_set([SolitonParams(1.0), SolitonParams(2.0)])
        assert default_sigma(ps) == pytest.approx(0.25)

    def test_family_structure(self):
        g = make_grid(160.0, 1024)
        ps = make_profile_set([SolitonParams(1.0), SolitonParams(2.0), SolitonParams(3.0)])
        w = Phi_weights(ps, 2.0, g)
        assert len(w.w) == 4 and len(w.chi) == 3
        assert np.all(w.w[0] == 0) and np.all(w.w[-1] == 1)
        np.testing.assert_allclose(sum(w.chi), 1.0, atol=1e-14)

    def test_time_derivative_by_difference(self):
        g = make_grid(160.0, 1024)
        ps = make_profile_set([SolitonParams(1.0), SolitonParams(2.0)])
        t, h, s = 3.0, 1e-5, 0.25
        d = Phi_time_derivative(ps, t, g, s)
        fd = (Phi_weights(ps, t + h, g, s).w[1] - Phi_weights(ps, t - h, g, s).w[1]) / (2 * h)
        np.testing.assert_allclose(d[1], fd, atol=1e-8)
