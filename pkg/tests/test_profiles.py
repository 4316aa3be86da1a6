"""Exact soliton and breather profiles.

Reference values marked "40-digit" were computed once with mpmath from the
closed forms (arbitrary-precision differentiation of the arctan formula) and
frozen here.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkdvlab.grid import make_grid
from mkdvlab.profiles import (
    BreatherParams,
    ProfileSet,
    SolitonParams,
    breather_partial,
    derived_constants,
    eval_breather,
    eval_profile_sum,
    eval_soliton,
    kernel_basis,
    make_profile_set,
    sech_jet,
    soliton_c_derivatives,
    soliton_partial,
    soliton_y_jet,
)

# 40-digit references: (params, t, x) -> {(x_order, t_order, phase): value}
BREATHER_ORACLES = [
    (
        BreatherParams(1.0, 1.0, 0.3, -0.2),
        0.4,
        0.7,
        {
            (0, 0, (0, 0)): 1.1491183459017469435,
            (1, 0, (0, 0)): -2.6390416033286767531,
            (2, 0, (0, 0)): 1.753705799514647215,
            (0, 1, (0, 0)): 1.1062461344478473045,
            (0, 0, (1, 0)): -1.5960823352763002026,
            (0, 0, (0, 1)): -1.0429592680523765504,
        },
    ),
    (
        BreatherParams(2.0, 0.7, 0.1, 0.2),
        1.3,
        -14.7,
        {
            (0, 0, (0, 0)): -1.5792488121818686941,
            (1, 0, (0, 0)): -2.0509167118736623886,
            (2, 0, (0, 0)): 8.9855446014166132373,
            (0, 1, (0, 0)): -4.4289136432943926427,
            (0, 0, (1, 0)): -2.1355387205313431459,
            (0, 0, (0, 1)): 0.084622008657680757286,
        },
    ),
]

# Q_2 at y = 0.3 and its scale derivatives, 40-digit
SOLITON_C_ORACLE = {
    (0, 0): 1.8325790152580908976,
    (1, 0): 0.38029459919958482936,
    (2, 0): -0.14800090514160682025,
    (1, 1): -0.70569673788947483876,
}


class TestParams:
    def test_soliton_validation(self):
        with pytest.raises(ValueError):
            SolitonParams(0.0)
        with pytest.raises(ValueError):
            SolitonParams(1.0, kappa=2)

    def test_breather_validation(self):
        with pytest.raises(ValueError):
            BreatherParams(0.0, 1.0)
        with pytest.raises(ValueError):
            BreatherParams(1.0, -1.0)

    def test_breather_velocity(self):
        p = BreatherParams(1.0, 1.0)
        assert p.velocity == -2.0
        assert p.delta == -2.0 and p.gamma == 2.0

    def test_breather_center_moves_with_velocity(self):
        p = BreatherParams(1.2, 1.0, 0.0, -3.0)
        assert p.center(0.0) == 3.0
        assert p.center(2.0) == pytest.approx(3.0 + 2 * p.velocity)

    def test_two_soliton_constants(self):
        ps = make_profile_set([SolitonParams(2.0), SolitonParams(1.0)])
        v, beta, tau, theta = derived_constants(ps)
        assert v == [1.0, 2.0]
        assert (beta, tau, theta) == (1.0, 1.0, 1 / 32)

    def test_equal_velocity_rejected(self):
        with pytest.raises(ValueError):
            # beta^2 - 3 alpha^2 = 1
            make_profile_set([SolitonParams(1.0), BreatherParams(1.0, 2.0)])

    def test_sorted_by_velocity(self):
        ps = make_profile_set([SolitonParams(1.0), BreatherParams(1.0, 1.0), SolitonParams(0.5)])
        assert list(ps.velocities) == [-2.0, 0.5, 1.0]
        assert ps.breathers == [0] and ps.solitons == [1, 2]
        assert len(ps) == 3

    def test_single_object_tau(self):
        ps = make_profile_set([SolitonParams(1.0)])
        assert ps.tau == float("inf")

    def test_unknown_object(self):
        with pytest.raises(TypeError):
            ProfileSet(("soliton",))


class TestSoliton:
    def test_peak(self):
        g = make_grid(80.0, 2048)
        u = eval_soliton(SolitonParams(1.0), 0.0, g)
        assert u.values[g.N // 2] == pytest.approx(np.sqrt(2), abs=1e-15)

    def test_negative_peak_moves(self):
        p = SolitonParams(2.0, -1, 3.0)
        assert soliton_partial(p, 1.0, np.array([5.0]))[0] == pytest.approx(-2.0, abs=1e-15)

    @pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
    def test_profile_equation(self, c):
        y = np.linspace(-20, 20, 401)
        Q, _, Qyy = soliton_y_jet(c, y, 2)
        np.testing.assert_allclose(Qyy, c * Q - Q**3, atol=1e-13)

    def test_t_derivative_is_transport(self):
        p = SolitonParams(1.5, 1, 0.4)
        x = np.linspace(-10, 10, 51)
        np.testing.assert_allclose(soliton_partial(p, 0.3, x, 0, 1), -1.5 * soliton_partial(p, 0.3, x, 1, 0))

    def test_scale_derivatives_oracle(self):
        d = soliton_c_derivatives(2.0, np.array([0.3]))
        for key, ref in SOLITON_C_ORACLE.items():
            assert d[key][0] == pytest.approx(ref, rel=1e-13, abs=1e-14)

    def test_scale_derivatives_by_differences(self):
        y = np.linspace(-8, 8, 33)
        c, h = 1.3, 1e-4
        d = soliton_c_derivatives(c, y)
        for m in range(3):
            fd = (soliton_y_jet(c + h, y, m)[m] - soliton_y_jet(c - h, y, m)[m]) / (2 * h)
            np.testing.assert_allclose(d[(1, m)], fd, atol=1e-7)
        fd2 = (soliton_y_jet(c + h, y, 0)[0] - 2 * soliton_y_jet(c, y, 0)[0] + soliton_y_jet(c - h, y, 0)[0]) / h**2
        np.testing.assert_allclose(d[(2, 0)], fd2, atol=1e-5)

    def test_sech_jet_large_argument(self):
        z = np.array([-800.0, 800.0])
        for v in sech_jet(z, 4):
            assert np.all(np.isfinite(v))
            assert np.all(np.abs(v) < 1e-300)


class TestBreather:
    def test_peak_value(self):
        p = BreatherParams(1.0, 1.0)
        assert breather_partial(p, 0.0, np.array([0.0]))[0] == pytest.approx(2 * np.sqrt(2), abs=1e-14)

    def test_peak_value_by_difference_of_arctan(self):
        al, be = 1.0, 1.0
        h = 1e-5

        def G(x):
            return 2 * np.sqrt(2) * np.arctan(be / al * np.sin(al * x) / np.cosh(be * x))

        fd = (G(h) - G(-h)) / (2 * h)
        assert breather_partial(BreatherParams(al, be), 0.0, np.array([0.0]))[0] == pytest.approx(fd, abs=1e-8)

    @pytest.mark.parametrize("case", range(len(BREATHER_ORACLES)))
    def test_oracle_values(self, case):
        p, t, x, refs = BREATHER_ORACLES[case]
        for (xo, to, ph), ref in refs.items():
            val = breather_partial(p, t, np.array([x]), xo, to, ph)[0]
            assert val == pytest.approx(ref, rel=1e-12, abs=1e-13), (xo, to, ph)

    def test_jets_by_five_point_differences(self):
        p = BreatherParams(1.3, 0.8, 0.2, -0.4)
        x = np.linspace(-6, 6, 25)
        t, h = 0.35, 1e-3

        def fd(fn):
            return (-fn(2 * h) + 8 * fn(h) - 8 * fn(-h) + fn(-2 * h)) / (12 * h)

        ux = fd(lambda s: breather_partial(p, t, x + s))
        ut = fd(lambda s: breather_partial(p, t + s, x))
        uxxx = fd(lambda s: breather_partial(p, t, x + s, 2))
        np.testing.assert_allclose(breather_partial(p, t, x, 1), ux, atol=1e-9)
        np.testing.assert_allclose(breather_partial(p, t, x, 0, 1), ut, atol=1e-8)
        np.testing.assert_allclose(breather_partial(p, t, x, 3), uxxx, atol=1e-8)

    def test_half_period_shift_negates(self):
        g = make_grid(40.0, 512)
        p = BreatherParams(1.2, 0.9, 0.3, 0.5)
        q = BreatherParams(1.2, 0.9, 0.3 + np.pi / 1.2, 0.5)
        np.testing.assert_allclose(eval_breather(q, 0.7, g).values, -eval_breather(p, 0.7, g).values, atol=1e-13)

    def test_exponential_envelope(self):
        g = make_grid(80.0, 2048)
        p = BreatherParams(1.0, 1.0)
        t = 0.5
        u = np.abs(eval_breather(p, t, g).values)
        r = np.abs(g.x - p.center(t))
        # |B| <= C exp(-beta r); C = 4 sqrt(2) beta (1 + beta/alpha) covers the sech tail
        C = 4 * np.sqrt(2) * (1 + 1.0)
        assert np.all(u <= C * np.exp(-r) + 1e-300)

    def test_which_validation(self):
        g = make_grid(10.0, 16)
        with pytest.raises(ValueError):
            eval_breather(BreatherParams(1, 1), 0.0, g, which="d_x3")

    @settings(max_examples=20, deadline=None)
    @given(x1=st.floats(-3, 3), x2=st.floats(-3, 3), t=st.floats(-1, 1))
    def test_phase_derivatives_are_shifts(self, x1, x2, t):
        # d_x B = d_x1 B + d_x2 B since y1, y2 both contain x
        p = BreatherParams(1.0, 1.0, x1, x2)
        x = np.linspace(-5, 5, 11)
        lhs = breather_partial(p, t, x, 1)
        rhs = breather_partial(p, t, x, phase=(1, 0)) + breather_partial(p, t, x, phase=(0, 1))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestSums:
    def test_empty(self):
        g = make_grid(10.0, 16)
        assert np.all(eval_profile_sum([], 0.0, g).values == 0)

    def test_single(self):
        g = make_grid(40.0, 256)
        p = SolitonParams(1.5, -1, 2.0)
        np.testing.assert_array_equal(eval_profile_sum([p], 0.3, g).values, eval_soliton(p, 0.3, g).values)

    def test_separated_pair_near_soliton(self):
        g = make_grid(160.0, 4096)
        s, b = SolitonParams(1.0), BreatherParams(2.0, 1.0)
        ps = make_profile_set([s, b])
        t = 10.0
        near = np.abs(g.x - 10.0) < 5
        diff = eval_profile_sum(ps, t, g).values - eval_soliton(s, t, g).values
        assert np.max(np.abs(diff[near])) <= 10 * np.exp(-ps.beta_min * ps.tau * t / 2)

    def test_kernel_basis_soliton(self):
        g = make_grid(40.0, 512)
        p = SolitonParams(1.0)
        k1, k2 = kernel_basis(p, 0.0, g)
        np.testing.assert_allclose(k1.values, eval_soliton(p, 0.0, g, 1).values)
        assert abs(g.integrate(k1.values * k2.values)) < 1e-12
