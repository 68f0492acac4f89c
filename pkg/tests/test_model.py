import numpy as np
import pytest

from jacobi_orbits import model
from jacobi_orbits.errors import NotAnEquilibrium
from jacobi_orbits.model import MechParams, State

UNIT = MechParams()


def cartesian_kinetic(q, qd, p):
    """Oracle: kinetic energy from Cartesian mass velocities, not from M(q)."""
    q1, q2 = q
    qd1, qd2 = qd
    v1 = p.l1 * qd1 * np.array([np.cos(q1), np.sin(q1)])
    v2 = v1 + p.l2 * (qd1 + qd2) * np.array([np.cos(q1 + q2), np.sin(q1 + q2)])
    return 0.5 * p.m1 * v1 @ v1 + 0.5 * p.m2 * v2 @ v2


def mass_from_quadratic_form(q, p):
    """Oracle: extract M from T's exact quadratic form in qd."""
    e = np.eye(2)
    M = np.empty((2, 2))
    for i in range(2):
        M[i, i] = 2.0 * cartesian_kinetic(q, e[i], p)
    M[0, 1] = M[1, 0] = (
        cartesian_kinetic(q, e[0] + e[1], p)
        - cartesian_kinetic(q, e[0], p)
        - cartesian_kinetic(q, e[1], p)
    )
    return M


def potential_from_heights(q, p):
    """Oracle: U as sum of m_i g y_i with the heights written out by hand."""
    q1, q2 = q
    y1 = -p.l1 * np.cos(q1)
    y2 = y1 - p.l2 * np.cos(q1 + q2)
    return p.m1 * p.grav * y1 + p.m2 * p.grav * y2


class TestMassMatrix:
    def test_hanging_unit_params(self):
        assert np.allclose(model.mass_matrix([0.0, 0.0], UNIT), [[5.0, 2.0], [2.0, 1.0]])

    def test_right_angle_kills_coupling(self):
        for q1 in (0.0, 0.7, -2.0):
            assert np.allclose(
                model.mass_matrix([q1, np.pi / 2], UNIT), [[3.0, 1.0], [1.0, 1.0]]
            )

    def test_matches_kinetic_quadratic_form(self):
        rng = np.random.default_rng(0)
        p = MechParams(m1=1.3, m2=0.7, l1=0.9, l2=1.4)
        for q in rng.uniform(-np.pi, np.pi, size=(50, 2)):
            assert np.allclose(model.mass_matrix(q, p), mass_from_quadratic_form(q, p),
                               atol=1e-12)

    def test_torus_periodicity(self):
        rng = np.random.default_rng(1)
        q = rng.uniform(-np.pi, np.pi, size=(100, 2))
        shifted = q + 2.0 * np.pi * rng.integers(-3, 4, size=(100, 2))
        assert np.allclose(model.mass_matrix(q, UNIT), model.mass_matrix(shifted, UNIT))

    def test_spd_over_configuration_space(self):
        rng = np.random.default_rng(2)
        q = rng.uniform(-10.0, 10.0, size=(10_000, 2))
        eig = np.linalg.eigvalsh(model.mass_matrix(q, UNIT))
        assert eig.min() > 0.0


class TestPotential:
    def test_hanging_and_upright(self):
        assert model.potential([0.0, 0.0], UNIT) == pytest.approx(-29.43)
        assert model.potential([np.pi, 0.0], UNIT) == pytest.approx(29.43)

    def test_matches_height_oracle(self):
        rng = np.random.default_rng(3)
        p = MechParams(m1=2.0, m2=0.5, l1=1.1, l2=0.4, grav=3.7)
        for q in rng.uniform(-4.0, 4.0, size=(50, 2)):
            assert model.potential(q, p) == pytest.approx(potential_from_heights(q, p))

    def test_zero_gravity(self):
        p = MechParams(grav=0.0)
        rng = np.random.default_rng(4)
        q = rng.uniform(-np.pi, np.pi, size=(20, 2))
        assert np.all(model.potential(q, p) == 0.0)

    def test_extrema_values(self):
        assert model.potential_min(UNIT) == pytest.approx(-29.43)
        assert model.potential_max(UNIT) == pytest.approx(29.43)

    def test_energy_invariant_under_full_turns(self):
        rng = np.random.default_rng(5)
        q = rng.uniform(-np.pi, np.pi, size=(200, 2))
        qd = rng.uniform(-2.0, 2.0, size=(200, 2))
        k = rng.integers(-2, 3, size=(200, 2))
        e0 = model.total_energy(State(q, qd), UNIT)
        e1 = model.total_energy(State(q + 2.0 * np.pi * k, qd), UNIT)
        assert np.allclose(e0, e1, atol=1e-9)


class TestGravityVector:
    def test_equilibria(self):
        assert np.allclose(model.gravity_vector([0.0, 0.0], UNIT), 0.0)
        assert np.allclose(model.gravity_vector([np.pi, 0.0], UNIT), 0.0, atol=1e-14)

    def test_matches_finite_difference_gradient(self):
        rng = np.random.default_rng(6)
        h = 1e-6
        for q in rng.uniform(-np.pi, np.pi, size=(1000, 2)):
            fd = np.empty(2)
            for i in range(2):
                dq = np.zeros(2)
                dq[i] = h
                fd[i] = (model.potential(q + dq, UNIT) - model.potential(q - dq, UNIT)) / (2 * h)
            g = model.gravity_vector(q, UNIT)
            assert np.allclose(g, fd, rtol=1e-6, atol=1e-6)


class TestCoriolis:
    def test_zero_velocity(self):
        assert np.allclose(model.coriolis_matrix([0.3, -1.2], [0.0, 0.0], UNIT), 0.0)

    def test_mdot_minus_2c_skew(self):
        rng = np.random.default_rng(7)
        h = 1e-6
        for _ in range(1000):
            q = rng.uniform(-np.pi, np.pi, size=2)
            qd = rng.uniform(-3.0, 3.0, size=2)
            mdot = (model.mass_matrix(q + h * qd, UNIT) - model.mass_matrix(q - h * qd, UNIT)) / (2 * h)
            S = mdot - 2.0 * model.coriolis_matrix(q, qd, UNIT)
            assert np.allclose(S, -S.T, atol=1e-8)

    def test_energy_rate_vanishes(self):
        # central difference of H along a short RK4 step of the free dynamics
        from jacobi_orbits.integrate import rk4_step

        rng = np.random.default_rng(8)
        h = 1e-4
        for _ in range(100):
            s = State(rng.uniform(-np.pi, np.pi, size=2), rng.uniform(-3.0, 3.0, size=2))
            fwd = rk4_step(s, h, UNIT)
            back = State(s.q, -s.qd)
            bwd = rk4_step(back, h, UNIT)
            rate = (model.total_energy(fwd, UNIT) - model.total_energy(bwd, UNIT)) / (2 * h)
            assert abs(rate) < 1e-8


class TestAccel:
    def test_equilibria_at_rest(self):
        assert np.allclose(model.accel(State([0.0, 0.0], [0.0, 0.0]), UNIT), 0.0)
        assert np.allclose(model.accel(State([np.pi, 0.0], [0.0, 0.0]), UNIT), 0.0, atol=1e-14)

    def test_manipulator_form_residual(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            q = rng.uniform(-np.pi, np.pi, size=2)
            qd = rng.uniform(-4.0, 4.0, size=2)
            qdd = model.accel(State(q, qd), UNIT)
            res = (
                model.mass_matrix(q, UNIT) @ qdd
                + model.coriolis_matrix(q, qd, UNIT) @ qd
                + model.gravity_vector(q, UNIT)
            )
            assert np.linalg.norm(res) < 1e-12


class TestTotalEnergy:
    def test_rest_equals_potential(self):
        assert model.total_energy(State([0.0, 0.0], [0.0, 0.0]), UNIT) == pytest.approx(-29.43)

    def test_kinetic_scales_quadratically(self):
        s1 = State([0.4, 1.1], [0.7, -0.3])
        s2 = State(s1.q, 2.0 * s1.qd)
        u = model.potential(s1.q, UNIT)
        t1 = model.total_energy(s1, UNIT) - u
        t2 = model.total_energy(s2, UNIT) - u
        assert t2 == pytest.approx(4.0 * t1)


class TestLinearize:
    def test_hanging_frequencies_match_characteristic_polynomial(self):
        # det(K - w^2 M) = 0 at the hanging point with unit parameters reduces
        # (by hand) to w^4 - 4 g w^2 + 2 g^2 = 0, so w^2 = g (2 -+ sqrt(2)).
        lin = model.linearize([0.0, 0.0], UNIT)
        g = UNIT.grav
        expected = np.sqrt(np.array([g * (2.0 - np.sqrt(2.0)), g * (2.0 + np.sqrt(2.0))]))
        assert np.allclose(lin.frequencies, expected, rtol=1e-12)
        assert lin.frequencies[0] == pytest.approx(2.39720, abs=1e-4)
        assert lin.frequencies[1] == pytest.approx(5.78735, abs=1e-4)

    def test_eigenpairs_satisfy_generalized_problem(self):
        lin = model.linearize([0.0, 0.0], UNIT)
        for i in range(2):
            v = lin.modes[:, i]
            res = lin.stiffness @ v - lin.frequencies[i] ** 2 * (lin.mass @ v)
            assert np.linalg.norm(res) < 1e-10

    def test_modes_mass_orthogonal(self):
        lin = model.linearize([0.0, 0.0], UNIT)
        cross = lin.modes[:, 0] @ lin.mass @ lin.modes[:, 1]
        assert abs(cross) < 1e-10

    def test_rejects_non_equilibrium(self):
        with pytest.raises(NotAnEquilibrium):
            model.linearize([0.0, np.pi / 4], UNIT)


class TestParamValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(m1=0.0), dict(m2=-1.0), dict(l1=0.0), dict(l2=-0.1), dict(grav=-9.81)],
    )
    def test_bad_params_rejected(self, kwargs):
        with pytest.raises(ValueError):
            MechParams(**kwargs)

    def test_state_requires_finite(self):
        with pytest.raises(ValueError):
            State([np.nan, 0.0], [0.0, 0.0])
