import math

import numpy as np
import pytest

from jacobi_orbits import model
from jacobi_orbits.errors import NonFinite
from jacobi_orbits.geometry import reconstruct_velocity
from jacobi_orbits.integrate import (
    brake_speed_threshold,
    detect_brake_points,
    path_deviation,
    propagate,
    rk4_step,
    section_crossings,
    simulate,
    trajectory_energies,
)
from jacobi_orbits.model import MechParams, State
from jacobi_orbits.relaxation import DiscreteString, init_closed_string

UNIT = MechParams()


class TestRk4Step:
    def test_equilibrium_fixed_point(self):
        s = State([0.0, 0.0], [0.0, 0.0])
        out = rk4_step(s, 1e-2, UNIT)
        assert np.array_equal(out.q, s.q)
        assert np.array_equal(out.qd, s.qd)

    def test_fourth_order_richardson(self):
        s = State([0.4, -0.2], [1.0, 0.5])
        ref = propagate(s, 0.1, 0.1 / 1000, UNIT)

        def err(dt):
            got = propagate(s, 0.1, dt, UNIT)
            return np.linalg.norm(np.concatenate([got.q - ref.q, got.qd - ref.qd]))

        ratio = err(0.1) / err(0.05)
        assert 8.0 < ratio < 32.0

    def test_time_reversal(self):
        s = State([0.4, -0.2], [1.0, 0.5])
        dt = 1e-3
        fwd = rk4_step(s, dt, UNIT)
        back = rk4_step(State(fwd.q, -fwd.qd), dt, UNIT)
        assert np.linalg.norm(back.q - s.q) < 10 * dt**5

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            rk4_step(State([0, 0], [0, 0]), 0.0, UNIT)


class TestSimulate:
    def test_sample_count_exact(self):
        tr = simulate(State([0.1, 0.0], [0.0, 0.0]), 10.0, 1e-3, UNIT)
        assert len(tr.times) == math.floor(10.0 / 1e-3) + 1
        assert np.allclose(np.diff(tr.times), 1e-3)

    def test_small_oscillation_period(self):
        lin = model.linearize([0.0, 0.0], UNIT)
        tr = simulate(State(1e-3 * lin.modes[:, 0], [0.0, 0.0]), 6.0, 1e-3, UNIT)
        times = np.array([t for t, _ in detect_brake_points(tr, UNIT)])
        period = 2.0 * np.mean(np.diff(times))
        expected = 2.0 * np.pi / lin.frequencies[0]
        assert abs(period - expected) / expected < 0.01

    def test_energy_drift_bound(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            s = State(rng.uniform(-np.pi, np.pi, 2), rng.uniform(-2.0, 2.0, 2))
            e = abs(float(model.total_energy(s, UNIT)))
            tr = simulate(s, 10.0, 1e-3, UNIT)
            assert tr.energy_drift <= 1e-6 * e

    def test_drift_fourth_order_scaling(self):
        rng = np.random.default_rng(8)
        d = {}
        s = State(rng.uniform(-np.pi, np.pi, 2), rng.uniform(-2.0, 2.0, 2))
        for dt in (4e-3, 2e-3, 1e-3):
            d[dt] = simulate(s, 10.0, dt, UNIT).energy_drift
        assert 8.0 < d[4e-3] / d[2e-3] < 32.0
        assert 8.0 < d[2e-3] / d[1e-3] < 32.0

    def test_zero_gravity_relative_equilibrium(self):
        p = MechParams(grav=0.0)
        tr = simulate(State([0.3, 0.0], [2.0, 0.0]), 4.0, 1e-3, p)
        assert np.abs(tr.q[:, 1]).max() < 1e-10
        assert np.abs(tr.q[:, 0] - (0.3 + 2.0 * tr.times)).max() < 1e-9

    def test_divergence_detected(self):
        # an absurdly large step makes the state blow up
        with pytest.raises(NonFinite):
            simulate(State([0.1, 0.2], [8.0, -7.0]), 50.0, 2.0, UNIT)

    def test_deterministic(self):
        s = State([0.5, -0.3], [1.0, 2.0])
        a = simulate(s, 1.0, 1e-3, UNIT)
        b = simulate(s, 1.0, 1e-3, UNIT)
        assert np.array_equal(a.q, b.q) and np.array_equal(a.qd, b.qd)


class TestBrakePoints:
    def test_linear_mode_alternates_two_per_period(self):
        lin = model.linearize([0.0, 0.0], UNIT)
        tr = simulate(State(1e-3 * lin.modes[:, 0], [0.0, 0.0]), 6.0, 1e-3, UNIT)
        ev = detect_brake_points(tr, UNIT)
        assert len(ev) == 5  # release + two per period over ~2.3 periods
        proj = np.array([q @ lin.modes[:, 0] for _, q in ev])
        assert np.all(np.sign(proj[:-1]) == -np.sign(proj[1:]))

    def test_release_from_rest_event_at_zero(self):
        tr = simulate(State([0.4, -0.2], [0.0, 0.0]), 1.0, 1e-3, UNIT)
        ev = detect_brake_points(tr, UNIT)
        assert ev and ev[0][0] == 0.0

    def test_toroidal_energy_has_no_brakes(self):
        e = 1.5 * model.potential_max(UNIT)
        s0 = reconstruct_velocity([0.0, 0.0], [1.0, 0.0], e, UNIT)
        ev = detect_brake_points(simulate(s0, 5.0, 1e-3, UNIT), UNIT)
        assert ev == []

    def test_brake_configurations_on_energy_level(self):
        s = State([0.4, -0.2], [0.0, 0.0])
        e = float(model.total_energy(s, UNIT))
        tr = simulate(s, 5.0, 1e-3, UNIT)
        for _, q in detect_brake_points(tr, UNIT):
            assert abs(float(model.potential(q, UNIT)) - e) <= 1e-6 * abs(e)


class TestSectionCrossings:
    def test_uniform_rotation_one_crossing_per_turn(self):
        p = MechParams(grav=0.0)
        tr = simulate(State([0.0, 0.0], [2.0, 0.0]), 9.0, 1e-3, p)
        ups = section_crossings(tr, (0, np.pi, 1), p)
        # q1 = 2t passes pi, 3pi, 5pi: three crossings with positive rate
        assert len(ups) == 3
        for st in ups:
            assert abs(st.q[0] % (2.0 * np.pi) - np.pi) <= 1e-9

    def test_crossing_refined_to_tolerance(self):
        tr = simulate(State([0.7, -0.4], [1.3, 0.6], ), 4.0, 1e-3, UNIT)
        crossings = section_crossings(tr, (1, 0.1, 1), UNIT)
        assert crossings
        for st in crossings:
            err = (st.q[1] - 0.1 + np.pi) % (2.0 * np.pi) - np.pi
            assert abs(err) <= 1e-9

    def test_direction_filter_partitions(self):
        tr = simulate(State([0.7, -0.4], [1.3, 0.6]), 6.0, 1e-3, UNIT)
        ups = section_crossings(tr, (1, 0.1, 1), UNIT)
        downs = section_crossings(tr, (1, 0.1, -1), UNIT)
        x = np.pi - np.mod(np.pi - (tr.q[:, 1] - 0.1), 2.0 * np.pi)
        brackets = int(
            np.sum((x[:-1] * x[1:] < 0.0) & (np.abs(np.diff(x)) < np.pi))
        )
        assert len(ups) + len(downs) == brackets
        assert all(st.qd[1] > 0 for st in ups)
        assert all(st.qd[1] < 0 for st in downs)


class TestPathDeviation:
    def test_self_distance_zero(self):
        t = np.linspace(0.0, 1.0, 300)
        pts = np.stack([np.sin(2 * t), np.cos(3 * t) - 1.0], axis=1)
        curve = DiscreteString(pts)
        assert path_deviation(pts, curve) <= 1e-12

    def test_invariant_under_full_torus_shift(self):
        t = np.linspace(0.0, 1.0, 300)
        pts = np.stack([np.sin(2 * t), np.cos(3 * t) - 1.0], axis=1)
        curve = DiscreteString(pts + 0.03)
        d0 = path_deviation(pts, curve)
        shifted_curve = DiscreteString(pts + 0.03 + 2.0 * np.pi)
        d1 = path_deviation(pts + 2.0 * np.pi, shifted_curve)
        assert d0 == pytest.approx(d1, abs=1e-12)

    def test_closed_curve_multiple_wraps(self):
        # trajectory winding twice around a closed (1,0) loop stays near it
        count = 128
        s = init_closed_string((1, 0), count)
        t = np.linspace(0.0, 2.0, 900)  # two full wraps, unwrapped coordinates
        pts = np.stack([2.0 * np.pi * t, np.zeros_like(t)], axis=1)
        assert path_deviation(pts, s) <= 1e-12

    def test_known_offset(self):
        t = np.linspace(0.0, 1.0, 200)
        base = np.stack([t, np.zeros_like(t)], axis=1)
        curve = DiscreteString(base)
        pts = base + np.array([0.0, 0.005])
        assert path_deviation(pts, curve) == pytest.approx(0.005, rel=1e-9)


class TestThreshold:
    def test_scale_awareness(self):
        lo = brake_speed_threshold(model.potential_min(UNIT) + 0.01, UNIT)
        hi = brake_speed_threshold(model.potential_min(UNIT) + 10.0, UNIT)
        assert 0.0 < lo < hi

    def test_energy_helper(self):
        s = State([0.5, -0.3], [1.0, 2.0])
        tr = simulate(s, 0.5, 1e-3, UNIT)
        h = trajectory_energies(tr, UNIT)
        assert h.shape == tr.times.shape
        assert np.abs(h - h[0]).max() == tr.energy_drift
