import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from chpeakon.dynamics import (
    CollisionChart,
    CollisionRequired,
    EventInWindow,
    SingularChart,
    SolverConfig,
    UnsupportedInteraction,
    characteristic_flow,
    collision_candidates,
    detect_collision,
    energy_at,
    evolve,
    extrapolated_atom,
    from_rescaled,
    hamiltonian,
    l2_speed,
    l2_speed_bound,
    momentum,
    residual_check,
    rhs_regular,
    rhs_rescaled,
    to_rescaled,
)
from chpeakon.kernel import CHI0, PeakonState, chi, energy, h1_distance, profile

from conftest import peakon_states

PAIR = PeakonState([1.0, -1.0], [0.4, 0.6])


def naive_h(s):
    d = s.q[:, None] - s.q[None, :]
    return 0.5 * float(s.p @ chi(d) @ s.p)


@pytest.fixture(scope="module")
def pair_traj():
    return evolve(PAIR, 3.0)


class TestRegularField:
    def test_single_peakon(self):
        dp, dq = rhs_regular(PeakonState([1.0], [0.3]))
        assert dp[0] == 0.0
        assert dq[0] == pytest.approx(2.163953, abs=1e-6)

    def test_odd_pair(self):
        dp, dq = rhs_regular(PAIR)
        assert dq[0] + dq[1] == pytest.approx(0.0, abs=1e-14)
        # strengths grow apart: p1 -> +inf, p2 -> -inf
        assert dp[0] == pytest.approx(-dp[1], abs=1e-14)
        assert dp[0] > 0

    @given(peakon_states(n_min=2))
    def test_momentum_rate_vanishes(self, s):
        dp, _ = rhs_regular(s)
        assert abs(dp.sum()) <= 1e-13 * max(1.0, np.abs(dp).max())

    def test_coincident_positions(self):
        with pytest.raises(CollisionRequired):
            rhs_regular(PeakonState([1.0, 2.0], [0.3, 0.3]))

    @given(peakon_states(n_min=2))
    def test_is_hamiltonian_gradient(self, s):
        dp, dq = rhs_regular(s)
        h = 1e-6
        for i in range(len(s)):
            e = np.zeros(len(s))
            e[i] = h
            dh_dp = (hamiltonian(PeakonState(s.p + e, s.q)) - hamiltonian(PeakonState(s.p - e, s.q))) / (2 * h)
            assert dq[i] == pytest.approx(dh_dp, abs=1e-6)


class TestHamiltonian:
    def test_single(self):
        assert hamiltonian(PeakonState([1.0], [0.2])) == pytest.approx(CHI0 / 2, abs=1e-15)
        assert CHI0 / 2 == pytest.approx(1.081977, abs=1e-6)

    def test_antipodal_pair(self):
        h = hamiltonian(PeakonState([1.0, -1.0], [0.0, 0.5]))
        assert h == pytest.approx(CHI0 - chi(0.5), abs=1e-14)
        assert h == pytest.approx(0.244919, abs=1e-6)

    @given(peakon_states())
    def test_matches_double_sum(self, s):
        assert hamiltonian(s) == pytest.approx(naive_h(s), rel=1e-12, abs=1e-12)

    @given(peakon_states())
    def test_translation_invariant(self, s):
        assert hamiltonian(s.shifted(0.3)) == pytest.approx(hamiltonian(s), rel=1e-12, abs=1e-13)

    def test_energy_relation(self):
        # the profile energy equals four times H for any multipeakon
        s = PeakonState([0.5, -1.0, 0.7], [0.1, 0.4, 0.75])
        assert energy(s) == pytest.approx(2 * hamiltonian(s) * 2, rel=1e-12)


class TestDetection:
    def test_steep_pair_detected(self):
        s = PeakonState([60.0, -60.0], [0.496, 0.504])
        assert detect_collision(s) == (0, 1)

    def test_same_sign_ignored(self):
        assert detect_collision(PeakonState([60.0, 30.0], [0.495, 0.505])) is None

    def test_separating_pair_ignored(self):
        assert detect_collision(PeakonState([-60.0, 60.0], [0.495, 0.505])) is None

    def test_backward_direction_flips(self):
        s = PeakonState([-60.0, 60.0], [0.496, 0.504])
        assert detect_collision(s, direction=-1.0) == (0, 1)

    def test_well_separated(self):
        assert detect_collision(PeakonState([1.0, -1.0, 0.5], [0.1, 0.4, 0.7])) is None

    def test_two_disjoint_pairs(self):
        s = PeakonState([60, -60, 60, -60], [0.1, 0.105, 0.6, 0.605])
        assert collision_candidates(s.p, s.q, SolverConfig()) == [(0, 1), (2, 3)]

    def test_pair_across_wrap(self):
        s = PeakonState([-60.0, 60.0], [0.002, 0.996])
        assert detect_collision(s) == (1, 0)


class TestChart:
    def test_example_values(self):
        c = to_rescaled(PeakonState([0.0, 2.0], [0.4, 0.6]), 0)
        assert c.z == pytest.approx(2.0)
        assert c.w == pytest.approx(2 * math.atan(2.0))
        assert c.w == pytest.approx(2.214297, abs=1e-6)
        assert c.eta == pytest.approx(1.0)
        assert c.zeta == pytest.approx(0.8)

    @given(peakon_states(n_min=2, n_max=4, min_gap=0.05), st.integers(0, 3))
    def test_round_trip(self, s, k):
        k = k % len(s)
        assume(abs(s.p[(k + 1) % len(s)] - s.p[k]) > 1e-3)
        back = from_rescaled(to_rescaled(s, k))
        for p, q in zip(s.p, s.q):
            dist = np.abs(np.mod(back.q - q + 0.5, 1.0) - 0.5)
            m = int(np.argmin(dist))
            assert dist[m] <= 1e-12
            assert back.p[m] == pytest.approx(p, abs=1e-12)

    def test_equal_strengths_rejected(self):
        with pytest.raises(ValueError):
            to_rescaled(PeakonState([1.0, 1.0], [0.0, 0.25]), 0)

    def test_gap_closes_as_angle_approaches_pi(self):
        gaps = []
        for eps in (1e-1, 1e-2, 1e-3):
            c = CollisionChart(0.0, math.pi - eps, 1.0, 0.6, PeakonState.empty())
            s = from_rescaled(c)
            gaps.append(s.q[1] - s.q[0])
        assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-5

    def test_singular_at_pi(self):
        with pytest.raises(SingularChart):
            from_rescaled(CollisionChart(0.0, math.pi, 1.0, 0.6, PeakonState.empty()))

    @given(peakon_states(n_min=2, n_max=5, min_gap=0.02), st.integers(0, 4))
    def test_chain_rule_oracle(self, s, k):
        k = k % len(s)
        j = (k + 1) % len(s)
        assume(abs(s.p[j] - s.p[k]) > 1e-3)
        dp, dq = rhs_regular(s)
        c = to_rescaled(s, k)
        dz, dw, deta, dzeta, dps, dqs = rhs_rescaled(c)
        p1, p2 = s.p[k], s.p[j]
        gap = np.mod(s.q[j] - s.q[k], 1.0)
        d, dd = p2 - p1, dp[j] - dp[k]
        scale = 1 + np.abs(dp).max() + np.abs(dq).max()
        assert dz == pytest.approx(dp[k] + dp[j], abs=1e-8 * scale)
        assert deta == pytest.approx(dq[k] + dq[j], abs=1e-8 * scale)
        assert dw == pytest.approx(2 * dd / (1 + d * d), abs=1e-8 * scale)
        assert dzeta == pytest.approx(2 * d * dd * gap + d * d * (dq[j] - dq[k]),
                                      abs=1e-8 * scale * (1 + d * d))
        rest = [i for i in range(len(s)) if i not in (k, j)]
        sp = c.spectators
        order = np.argsort(s.q[rest])
        assert np.allclose(dps, dp[rest][order], atol=1e-8 * scale)
        assert np.allclose(dqs, dq[rest][order], atol=1e-8 * scale)

    def test_symmetric_pair_keeps_center(self):
        for w in (math.pi - 0.3, math.pi, math.pi + 0.3):
            dz, dw, deta, *_ = rhs_rescaled(CollisionChart(0.0, w, 1.0, 0.6, PeakonState.empty()))
            assert dz == pytest.approx(0.0, abs=1e-14)
            assert deta == pytest.approx(0.0, abs=1e-14)

    def test_angle_decreases_near_collision(self):
        for w in np.linspace(math.pi - 0.2, math.pi + 0.2, 9):
            c = CollisionChart(0.3, w, 1.0, 0.6, PeakonState([0.5], [0.1]))
            assert rhs_rescaled(c)[1] < 0

    def test_spectator_inside_window(self):
        c = CollisionChart(0.0, math.pi - 0.1, 1.0, 0.6, PeakonState([0.5], [0.5]))
        with pytest.raises(UnsupportedInteraction):
            rhs_rescaled(c)


class TestEvolve:
    def test_traveling_peakon(self):
        tr = evolve(PeakonState([1.0], [0.0]), 1.0)
        s = tr.state_at(1.0)
        assert s.p[0] == 1.0
        assert s.q[0] == pytest.approx(CHI0 - 2, abs=1e-9)
        assert s.q[0] == pytest.approx(0.163953, abs=1e-6)

    def test_empty(self):
        tr = evolve(PeakonState.empty(), 1.0)
        assert len(tr.state_at(0.5)) == 0

    def test_zero_strength_peakons_dropped(self):
        tr = evolve(PeakonState([1.0, 0.0, -1.0], [0.4, 0.5, 0.6]), 2.0)
        assert len(tr.state_at(2.0)) == 2
        assert len(tr.events) == 1

    def test_coincident_initial_data(self):
        with pytest.raises(CollisionRequired):
            evolve(PeakonState([1.0, -1.0], [0.3, 0.3]), 1.0)

    def test_sample_times_increase(self, pair_traj):
        t = pair_traj.times
        assert np.all(np.diff(t) > 0)
        lo, hi = pair_traj.t_range
        assert all(lo < e.tau < hi for e in pair_traj.events)

    def test_collision_example(self, pair_traj):
        assert len(pair_traj.events) == 1
        ev = pair_traj.events[0]
        assert ev.qbar == pytest.approx(0.5, abs=1e-10)
        assert ev.atom >= 0
        assert ev.atom == pytest.approx(energy(PAIR), rel=1e-8)
        kinds = [k for _, k in pair_traj.regime_log]
        assert kinds == ["regular", "chart", "regular"]
        assert pair_traj.in_chart(ev.tau)

    def test_energy_across_collision(self, pair_traj):
        (a, b), _ = next(r for r in pair_traj.regime_log if r[1] == "chart")
        e_a, e_b = energy_at(pair_traj, a), energy_at(pair_traj, b)
        assert abs(e_b - e_a) / e_a <= 1e-4

    def test_pair_reemerges_with_swapped_signs(self, pair_traj):
        s = pair_traj.state_at(3.0)
        assert s.p[0] < 0 < s.p[1]

    def test_atom_matches_gap_energy_limit(self, pair_traj):
        ev = pair_traj.events[0]
        assert abs(ev.atom - extrapolated_atom(pair_traj, ev)) <= 0.05 * ev.atom

    def test_odd_symmetry(self, pair_traj):
        x = np.linspace(0, 1, 101)
        for t in np.linspace(0, 3, 31):
            s = pair_traj.state_at(t)
            assert np.abs(profile(s, x)[0] + profile(s, 1 - x)[0]).max() <= 1e-6

    def test_simultaneous_disjoint_collisions(self):
        s = PeakonState([1.0, -1.0, 1.0, -1.0], [0.1, 0.3, 0.6, 0.8])
        tr = evolve(s, 1.5)
        assert len(tr.events) == 2
        assert tr.events[0].tau == pytest.approx(tr.events[1].tau, abs=1e-8)
        h0 = tr.hamiltonian_at(0.0)
        assert max(abs(tr.hamiltonian_at(t) - h0) for t in tr.times) <= 1e-8 * (1 + h0)

    @given(peakon_states(n_max=4, min_gap=0.05))
    def test_conservation(self, s):
        tr = evolve(s, 0.5)
        h0, m0 = tr.hamiltonian_at(0.0), momentum(s)
        for t in tr.times:
            assert abs(tr.hamiltonian_at(t) - h0) <= 1e-8 * (1 + abs(h0))
            assert abs(momentum(tr.state_at(t)) - m0) <= 1e-8

    def test_regular_state_matches_hamiltonian_in_chart_variables(self, pair_traj):
        for t in np.linspace(0, 3, 13):
            assert pair_traj.hamiltonian_at(t) == pytest.approx(
                hamiltonian(pair_traj.state_at(t)), abs=1e-9)

    def test_positive_peakons_never_collide(self):
        tr = evolve(PeakonState([1.0, 0.2, 0.5], [0.1, 0.3, 0.6]), 2.0)
        assert tr.events == []
        assert np.all(tr.state_at(2.0).p > 0)

    def test_time_reversal_without_collision(self):
        cfg = SolverConfig(rel_tol=1e-12, abs_tol=1e-14)
        s = PeakonState([1.0, 0.6, 0.8], [0.1, 0.45, 0.7])
        end = evolve(s, 0.5, cfg).state_at(0.5)
        back = evolve(end, 0.0, cfg, t0=0.5).state_at(0.0)
        assert h1_distance(back, s) <= 1e-6

    def test_time_reversal_across_collision(self, pair_traj):
        back = evolve(pair_traj.state_at(2.0), 0.0, t0=2.0)
        assert len(back.events) == 1
        assert h1_distance(back.state_at(0.0), PAIR) <= 1e-4

    def test_negative_final_time(self):
        tr = evolve(PeakonState([1.0], [0.5]), -0.25)
        assert tr.state_at(-0.25).q[0] == pytest.approx((0.5 - 0.25 * CHI0) % 1.0, abs=1e-9)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(gap_threshold=0.6)
        with pytest.raises(ValueError):
            SolverConfig(chart_exit_margin=2.0)
        with pytest.raises(ValueError):
            SolverConfig(rel_tol=0.0)


class TestCharacteristics:
    def test_empty_is_identity(self):
        tr = evolve(PeakonState.empty(), 1.0)
        assert characteristic_flow(tr, 0.0, 1.0, 0.3) == 0.3

    def test_follows_the_peak(self):
        tr = evolve(PeakonState([1.0], [0.2]), 1.0)
        assert characteristic_flow(tr, 0.0, 0.7, 0.2) == pytest.approx(0.2 + 0.7 * CHI0, abs=1e-8)

    @given(st.lists(st.floats(0, 1), min_size=2, max_size=6, unique=True))
    def test_order_preserved(self, xs):
        tr = evolve(PeakonState([1.0, 0.6, -0.3], [0.1, 0.45, 0.7]), 0.3)
        xs = np.sort(xs)
        assume(np.diff(xs).min() > 1e-9)
        out = characteristic_flow(tr, 0.0, 0.3, xs)
        assert np.all(np.diff(out) > 0)

    def test_event_in_window(self, pair_traj):
        with pytest.raises(EventInWindow):
            characteristic_flow(pair_traj, 0.0, 2.0, 0.1)


class TestResidual:
    def test_single_peakon(self):
        tr = evolve(PeakonState([1.0], [0.3]), 1.0)
        assert residual_check(tr, 0.5) <= 1e-4

    def test_empty(self):
        tr = evolve(PeakonState.empty(), 1.0)
        assert residual_check(tr, 0.5) == 0.0

    def test_three_peakons(self):
        tr = evolve(PeakonState([1.0, 0.6, 0.8], [0.1, 0.45, 0.7]), 1.0)
        assert residual_check(tr, 0.5) <= 1e-3

    def test_shrinks_with_step(self):
        tr = evolve(PeakonState([1.0, -0.4, 0.8], [0.1, 0.45, 0.7]), 1.0)
        assert residual_check(tr, 0.3, dt=1e-3) > residual_check(tr, 0.3, dt=5e-4)

    def test_detects_wrong_dynamics(self):
        # a peakon frozen in place does not solve the equation
        from chpeakon.dynamics import Trajectory
        s = PeakonState([1.0], [0.3])
        tr = Trajectory(samples=[(0.0, s), (1.0, s)])
        tr._segments = []
        tr.samples = [(0.0, s)]
        tr.samples.append((1.0, s))
        assert residual_check(tr, 0.5) > 0.1


def test_l2_speed_bound():
    tr = evolve(PeakonState([1.0, -0.5, 0.8], [0.1, 0.4, 0.7]), 0.5)
    for t in (0.1, 0.3):
        assert l2_speed(tr, t) <= l2_speed_bound(tr.state_at(t))
