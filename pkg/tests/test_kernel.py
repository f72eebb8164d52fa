import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chpeakon.kernel import (
    CHI0,
    PeakonState,
    chi,
    chi_gap,
    chi_prime,
    chi_tilde,
    energy,
    eval_profile,
    h1_distance,
    h1_norm,
    panel_breaks,
    panel_nodes,
    profile,
    source_P,
    source_Px,
)

from conftest import peakon_states

E = math.e


def periodized_exp(x, terms=60):
    n = np.arange(-terms, terms + 1)
    return float(np.exp(-np.abs(x - n)).sum())


def brute_energy(s, m=200_000):
    # midpoint rule, independent of the panel machinery
    x = (np.arange(m) + 0.5) / m
    u, ux = profile(s, x)
    return float(np.mean(u * u + ux * ux))


class TestChi:
    def test_values(self):
        assert chi(0.0) == pytest.approx((1 + E) / (E - 1), abs=1e-15)
        assert chi(0.0) == pytest.approx(2.163953, abs=1e-6)
        assert chi(0.5) == pytest.approx(2 * math.sqrt(E) / (E - 1), abs=1e-15)
        assert chi(0.5) == pytest.approx(1.919035, abs=1e-6)

    @pytest.mark.parametrize("x", [0.0, 0.13, 0.5, 0.77, -2.4, 3.9])
    def test_matches_periodized_exponential(self, x):
        assert chi(x) == pytest.approx(periodized_exp(x), abs=1e-12)

    @given(st.floats(-50, 50))
    def test_even_and_periodic(self, x):
        assert abs(chi(x + 1) - chi(x)) < 1e-12
        assert abs(chi(-x) - chi(x)) < 1e-12

    def test_vectorized(self):
        x = np.linspace(-1, 2, 7)
        assert np.allclose(chi(x), [chi(v) for v in x])


class TestChiPrime:
    def test_values(self):
        assert chi_prime(0.5) == pytest.approx(0.0, abs=1e-15)
        assert chi_prime(0.0) == pytest.approx(-1.0, abs=1e-15)
        assert chi_prime(0.25) == pytest.approx((E ** 0.25 - E ** 0.75) / (E - 1), abs=1e-15)
        assert chi_prime(0.25) == pytest.approx(-0.484, abs=1e-3)

    def test_matches_finite_difference(self):
        h = 1e-6
        fd = (chi(0.25 + h) - chi(0.25 - h)) / (2 * h)
        assert chi_prime(0.25) == pytest.approx(fd, abs=1e-8)

    def test_kink_flag(self):
        val, kink = chi_prime(np.array([0.0, 0.3, 2.0, -1.0]), return_kink=True)
        assert kink.tolist() == [True, False, True, True]
        assert val[0] == pytest.approx(-1.0)

    def test_jump_is_minus_two(self):
        jump = chi_prime(0.0) - chi_prime(np.nextafter(1.0, 0.0))
        assert abs(jump + 2.0) <= 1e-15

    @given(st.floats(0.001, 0.999))
    def test_odd(self, x):
        assert chi_prime(-x) == pytest.approx(-chi_prime(x), abs=1e-13)


class TestChiTilde:
    def test_values(self):
        assert chi_tilde(0.5) == pytest.approx(0.0, abs=1e-15)
        assert chi_tilde(0.0) == pytest.approx(1.0, abs=1e-15)
        assert chi_tilde(0.25) == pytest.approx(0.484, abs=1e-3)

    @given(st.floats(0.0, 1.0, exclude_min=True, exclude_max=True))
    def test_negative_of_derivative(self, x):
        assert abs(chi_tilde(x) + chi_prime(x)) <= 1e-14


@given(st.floats(-3, 3))
def test_chi_gap_matches_difference(x):
    assert chi_gap(x) == pytest.approx(CHI0 - chi(x), abs=1e-14)


def test_chi_gap_small_argument_is_accurate():
    # chi(0) - chi(g) = g - chi0 g^2 / 2 + O(g^3)
    g = 1e-9
    assert chi_gap(g) == pytest.approx(g - 0.5 * CHI0 * g * g, rel=1e-12)


def test_second_derivative_identity():
    from chpeakon.harness.suites import _second_difference

    x = np.random.default_rng(3).uniform(0.1, 0.9, 100)
    assert np.abs(_second_difference(chi, x) - chi(x)).max() <= 1e-10


class TestPeakonState:
    def test_canonical_sorting_and_reduction(self):
        s = PeakonState([1.0, 2.0, 3.0], [0.7, -0.2, 1.1])
        assert s.q.tolist() == pytest.approx([0.1, 0.7, 0.8])
        assert s.p.tolist() == [3.0, 1.0, 2.0]

    def test_rejects_mismatch_and_nonfinite(self):
        with pytest.raises(ValueError):
            PeakonState([1.0], [0.1, 0.2])
        with pytest.raises(ValueError):
            PeakonState([np.nan], [0.1])

    def test_immutable(self):
        s = PeakonState([1.0], [0.5])
        with pytest.raises(ValueError):
            s.p[0] = 2.0

    def test_min_gap_wraps(self):
        assert PeakonState([1, 1], [0.05, 0.95]).min_gap() == pytest.approx(0.1)
        assert PeakonState.empty().min_gap() == math.inf


class TestProfile:
    def test_empty(self):
        pt = eval_profile(PeakonState.empty(), 0.3)
        assert (pt.u, pt.ux, pt.theta) == (0.0, 0.0, 0.0)

    def test_single_peak_value(self):
        assert eval_profile(PeakonState([1.0], [0.0]), 0.0).u == pytest.approx(2.163953, abs=1e-6)

    def test_odd_pair_vanishes_at_midpoint(self):
        assert eval_profile(PeakonState([1.0, -1.0], [0.25, 0.75]), 0.5).u == pytest.approx(0, abs=1e-15)

    def test_right_limit_at_kink(self):
        assert eval_profile(PeakonState([1.0], [0.3]), 0.3).ux == pytest.approx(-1.0)

    @given(peakon_states())
    def test_theta_in_range(self, s):
        pt = eval_profile(s, 0.123)
        assert -math.pi < pt.theta < math.pi
        assert pt.theta == pytest.approx(2 * math.atan(pt.ux))


class TestQuadrature:
    def test_panel_breaks_contains_points(self):
        b = panel_breaks([0.3, 1.7], max_width=0.25)
        assert b[0] == 0.0 and b[-1] == 1.0
        assert np.isclose(b, 0.3).any() and np.isclose(b, 0.7).any()
        assert np.diff(b).max() <= 0.25 + 1e-15

    def test_panel_nodes_integrate_polynomial(self):
        x, w = panel_nodes([0.0, 0.4, 1.0])
        assert w @ x ** 5 == pytest.approx(1 / 6, abs=1e-15)


class TestEnergy:
    def test_empty(self):
        assert energy(PeakonState.empty()) == 0.0

    def test_single_peakon_closed_form(self):
        exact = 2 * (E * E - 1) / (E - 1) ** 2
        assert exact == pytest.approx(4.327906, abs=1e-6)
        assert energy(PeakonState([1.0], [0.37])) == pytest.approx(exact, rel=1e-13)

    @given(peakon_states())
    def test_quadratic_homogeneity(self, s):
        assert energy(s.scaled(2.0)) == pytest.approx(4 * energy(s), rel=1e-12)

    @given(peakon_states())
    def test_order_doubling_consistent(self, s):
        e16, e32 = energy(s, 16), energy(s, 32)
        assert abs(e16 - e32) <= 1e-12 * max(1.0, e32)

    def test_against_brute_force(self):
        s = PeakonState([0.7, -1.2, 0.4], [0.1, 0.35, 0.8])
        assert energy(s) == pytest.approx(brute_energy(s), rel=1e-8)

    @given(peakon_states(), st.floats(-1, 1))
    def test_translation_invariant(self, s, d):
        assert energy(s.shifted(d)) == pytest.approx(energy(s), rel=1e-12)


class TestH1:
    @given(peakon_states())
    def test_self_distance_and_empty(self, s):
        assert h1_distance(s, s) == 0.0
        assert h1_distance(s, PeakonState.empty()) == pytest.approx(h1_norm(s), rel=1e-12)

    @given(peakon_states(), peakon_states())
    def test_symmetric(self, a, b):
        assert h1_distance(a, b) == pytest.approx(h1_distance(b, a), rel=1e-12, abs=1e-15)

    @given(peakon_states(), peakon_states(), peakon_states())
    def test_triangle(self, a, b, c):
        assert h1_distance(a, c) <= h1_distance(a, b) + h1_distance(b, c) + 1e-12


class TestSources:
    def test_empty(self):
        assert source_P(PeakonState.empty(), 0.3) == 0.0
        assert source_Px(PeakonState.empty(), 0.3) == 0.0

    def test_symmetric_peak_has_flat_source(self):
        assert source_Px(PeakonState([1.0], [0.5]), 0.5) == pytest.approx(0.0, abs=1e-14)

    @given(peakon_states())
    def test_bounded_by_energy(self, s):
        x = np.linspace(0, 1, 9)
        e = energy(s)
        assert np.abs(source_P(s, x)).max() <= e * (1 + 1e-12)
        assert np.abs(source_Px(s, x)).max() <= e * (1 + 1e-12)

    def test_px_is_derivative_of_p(self):
        s = PeakonState([0.8, -0.5], [0.2, 0.6])
        h = 1e-5
        fd = (source_P(s, 0.41 + h) - source_P(s, 0.41 - h)) / (2 * h)
        assert source_Px(s, 0.41) == pytest.approx(fd, abs=1e-8)

    @given(peakon_states())
    def test_sup_norm_bound(self, s):
        u, _ = profile(s, np.linspace(0, 1, 257))
        assert np.abs(u).max() <= 2 * math.sqrt(energy(s)) + 1e-12
