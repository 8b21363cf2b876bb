import math

import numpy as np
import pytest

from areosync.dynamics import (SOL, DynamicsError, MoonField, MoonModel,
                               PerturbationAccel, SatelliteTruthState,
                               ThrustCommand, constant_set, moon_accelerations,
                               moon_perturbation, moon_position,
                               planar_rates, specific_angular_momentum,
                               specific_energy, total_perturbation,
                               truth_derivatives, wrap_angle)
from areosync.engine import rk4_step

R_D = 20428.2e3


def cartesian_perturbation(r, theta, moon, t):
    """Moon pull built in x-y and projected on the radial/tangential axes."""
    sat = np.array([r * math.cos(theta), r * math.sin(theta)])
    r_p, theta_p = moon_position(moon, t)
    body = np.array([r_p * math.cos(theta_p), r_p * math.sin(theta_p)])
    d = sat - body
    accel = -moon.mu_p / np.linalg.norm(d) ** 3 * d
    e_r = np.array([math.cos(theta), math.sin(theta)])
    e_theta = np.array([-math.sin(theta), math.cos(theta)])
    return accel @ e_r, accel @ e_theta


class TestTruthDerivatives:
    @classmethod
    def setup_class(cls):
        cls.planet, cls.moons = constant_set('mars-example')
        cls.phobos, cls.deimos = cls.moons
        cls.omega_d = math.sqrt(cls.planet.mu / R_D ** 3)

    def state(self, **values):
        fields = dict(r=R_D, v=0.0, omega=self.omega_d, theta=0.0, mass=100.0)
        fields.update(values)
        return SatelliteTruthState(**fields)

    def derivatives(self, state, thrust=None, perturb=None):
        return truth_derivatives(state, thrust or ThrustCommand(),
                                 perturb or PerturbationAccel(), self.planet)

    def test_circular_orbit_is_stationary(self):
        r_dot, v_dot, omega_dot, theta_dot = self.derivatives(self.state())
        assert r_dot == 0.0
        assert abs(v_dot) < 1e-15
        assert omega_dot == 0.0
        assert theta_dot == self.omega_d

    def test_free_fall(self):
        _, v_dot, omega_dot, _ = self.derivatives(self.state(omega=0.0))
        assert v_dot == pytest.approx(-self.planet.mu / R_D ** 2, rel=1e-15)
        assert omega_dot == 0.0

    def test_areostationary_rate(self):
        assert self.omega_d == pytest.approx(7.0879496e-5, rel=1e-7)
        _, v_dot, _, _ = self.derivatives(self.state())
        assert abs(v_dot) < 1e-6

    def test_thrust_and_perturbation_terms(self):
        state = self.state(v=2.0, omega=7e-5)
        base = self.derivatives(state)
        pushed = self.derivatives(state, ThrustCommand(0.05, 0.02),
                                  PerturbationAccel(1e-7, 2e-7))
        assert pushed[1] - base[1] == pytest.approx(0.05 / 100 + 1e-7,
                                                    rel=1e-6)
        assert pushed[2] - base[2] == pytest.approx(
            0.02 / (100 * R_D) + 2e-7 / R_D, rel=1e-6)

    def test_rejects_nonpositive_radius(self):
        state = self.state()
        state.r = -1.0
        with pytest.raises(DynamicsError) as info:
            truth_derivatives(state, ThrustCommand(), PerturbationAccel(),
                              self.planet, sat_index=3, t=10.0)
        assert info.value.sat_index == 3
        assert info.value.t == 10.0

    def test_rejects_non_finite_thrust(self):
        with pytest.raises(DynamicsError) as info:
            truth_derivatives(self.state(), ThrustCommand(float('nan'), 0.0),
                              PerturbationAccel(), self.planet, sat_index=4)
        assert info.value.sat_index == 4

    def test_state_validation(self):
        with pytest.raises(ValueError):
            SatelliteTruthState(0.0, 0.0, 0.0, 0.0, 100.0)
        with pytest.raises(ValueError):
            SatelliteTruthState(R_D, 0.0, 0.0, 0.0, 0.0)

    def test_vectorised_rates_match_scalar(self):
        rng = np.random.default_rng(1)
        r = R_D + rng.uniform(-1e3, 1e3, 5)
        v = rng.uniform(-1, 1, 5)
        omega = self.omega_d + rng.uniform(-1e-6, 1e-6, 5)
        rates = planar_rates(r, v, omega, 0.0, 0.0, 0.0, 0.0, 100.0,
                             self.planet.mu)
        for i in range(5):
            single = self.derivatives(
                SatelliteTruthState(r[i], v[i], omega[i], 0.0, 100.0))
            for column in range(4):
                assert rates[column][i] == pytest.approx(single[column],
                                                         rel=1e-14, abs=1e-20)

    def test_unforced_motion_keeps_its_invariants(self):
        mu = self.planet.mu
        r0 = np.array([R_D, 1.05 * R_D, 0.95 * R_D])
        v0 = np.array([5.0, -20.0, 0.0])
        omega0 = self.omega_d * np.array([1.001, 0.98, 1.02])

        def field(t, x):
            r, v, omega, _ = np.split(x, 4)
            return np.concatenate(planar_rates(r, v, omega, 0.0, 0.0, 0.0,
                                               0.0, 100.0, mu))

        h0 = specific_angular_momentum(r0, omega0)
        energy0 = specific_energy(r0, v0, omega0, mu)
        assert (energy0 < 0).all()
        x = np.concatenate([r0, v0, omega0, np.zeros(3)])
        t = 0.0
        for _ in range(100000):
            x = rk4_step(field, x, t, 10.0)
            t += 10.0
        r, v, omega, theta = np.split(x, 4)
        assert (theta > 5 * 2 * math.pi).all()
        np.testing.assert_allclose(specific_angular_momentum(r, omega), h0,
                                   rtol=1e-9, atol=0)
        np.testing.assert_allclose(specific_energy(r, v, omega, mu), energy0,
                                   rtol=1e-9, atol=0)


class TestMoons:
    @classmethod
    def setup_class(cls):
        cls.planet, moons = constant_set('mars-example')
        cls.phobos, cls.deimos = moons

    def test_position(self):
        assert moon_position(self.phobos, 0.0) == (9234.42e3, 0.0)
        period = 2 * math.pi / self.phobos.angular_rate
        _, theta_p = moon_position(self.phobos, period)
        assert theta_p == pytest.approx(2 * math.pi, rel=1e-14)

    def test_phobos_rate(self):
        assert self.phobos.angular_rate == pytest.approx(2.333e-4, rel=2e-3)
        period_hours = 2 * math.pi / self.phobos.angular_rate / 3600
        assert 7.4 < period_hours < 7.6

    def test_constant_set_phases(self):
        _, moons = constant_set('mars-example', {'deimos': 1.5})
        assert moons[0].initial_phase == 0.0
        assert moons[1].initial_phase == 1.5
        with pytest.raises(ValueError):
            constant_set('venus-example')

    def test_massless_moon(self):
        moon = MoonModel.about(self.planet, 'dust', 0.0, 9234.42e3)
        state = SatelliteTruthState(R_D, 0.0, 7e-5, 0.3, 100.0)
        assert moon_perturbation(state, moon, 0.0) == PerturbationAccel(0.0, 0.0)

    def test_collinear_pull(self):
        state = SatelliteTruthState(R_D, 0.0, 7e-5, 0.0, 100.0)
        accel = moon_perturbation(state, self.phobos, 0.0)
        assert accel.a_theta == 0.0
        assert accel.a_r < 0
        expected = self.phobos.mu_p / (R_D - self.phobos.orbit_radius) ** 2
        assert -accel.a_r == pytest.approx(expected, rel=1e-14)

    def test_quarter_turn_matches_cartesian(self):
        state = SatelliteTruthState(R_D, 0.0, 7e-5, math.pi / 2, 100.0)
        accel = moon_perturbation(state, self.deimos, 0.0)
        a_r, a_theta = cartesian_perturbation(R_D, math.pi / 2, self.deimos,
                                              0.0)
        assert accel.a_r == pytest.approx(a_r, rel=1e-12)
        assert accel.a_theta == pytest.approx(a_theta, rel=1e-12)

    def test_random_configurations_match_cartesian(self):
        rng = np.random.default_rng(7)
        r = rng.uniform(15000e3, 30000e3, 1000)
        theta = rng.uniform(-10, 10, 1000)
        t = rng.uniform(0, 100 * SOL)
        a_r, a_theta = moon_accelerations(r, theta, [self.deimos], t)
        for i in range(1000):
            expected = cartesian_perturbation(r[i], theta[i], self.deimos, t)
            norm = math.hypot(*expected)
            assert abs(a_r[i] - expected[0]) <= 1e-12 * norm
            assert abs(a_theta[i] - expected[1]) <= 1e-12 * norm

    def test_magnitude_follows_inverse_square(self):
        state = SatelliteTruthState(R_D, 0.0, 7e-5, 1.1, 100.0)
        accel = moon_perturbation(state, self.phobos, 5000.0)
        r_p, theta_p = moon_position(self.phobos, 5000.0)
        d2 = (R_D ** 2 + r_p ** 2 - 2 * R_D * r_p * math.cos(1.1 - theta_p))
        assert math.hypot(accel.a_r, accel.a_theta) == pytest.approx(
            self.phobos.mu_p / d2, rel=1e-12)

    def test_total_is_sum_of_moons(self):
        state = SatelliteTruthState(R_D, 0.0, 7e-5, 2.0, 100.0)
        total = total_perturbation(state, [self.phobos, self.deimos], 1e4)
        parts = (moon_perturbation(state, self.phobos, 1e4)
                 + moon_perturbation(state, self.deimos, 1e4))
        assert total.a_r == pytest.approx(parts.a_r, rel=1e-14)
        assert total.a_theta == pytest.approx(parts.a_theta, rel=1e-14)
        assert total_perturbation(state, [], 1e4) == PerturbationAccel()
        assert (total_perturbation(state, [self.phobos], 1e4)
                == moon_perturbation(state, self.phobos, 1e4))

    def test_collision_guard(self):
        state = SatelliteTruthState(self.deimos.orbit_radius + 500.0, 0.0, 7e-5,
                                    0.0, 100.0)
        with pytest.raises(DynamicsError):
            moon_perturbation(state, self.deimos, 0.0)
        moon_perturbation(state, self.deimos, 0.0, min_separation=100.0)

    def test_field_sums_its_moons(self):
        rng = np.random.default_rng(3)
        r = rng.uniform(15000e3, 30000e3, 50)
        theta = rng.uniform(0, 2 * math.pi, 50)
        field = MoonField([self.phobos, self.deimos])
        assert field and not MoonField([])
        a_r, a_theta = field.accelerations(r, theta, 2e4)
        for i in range(50):
            parts = [cartesian_perturbation(r[i], theta[i], moon, 2e4)
                     for moon in (self.phobos, self.deimos)]
            expected_r = parts[0][0] + parts[1][0]
            expected_theta = parts[0][1] + parts[1][1]
            scale = sum(math.hypot(*part) for part in parts)
            assert abs(a_r[i] - expected_r) <= 1e-12 * scale
            assert abs(a_theta[i] - expected_theta) <= 1e-12 * scale

    def test_field_guard_names_satellite_and_moon(self):
        r = np.array([R_D, self.deimos.orbit_radius + 500.0])
        field = MoonField([self.phobos, self.deimos])
        with pytest.raises(DynamicsError) as excinfo:
            field.accelerations(r, np.zeros(2), 0.0)
        assert excinfo.value.sat_index == 1
        assert self.deimos.name in str(excinfo.value)

    def test_wrap_angle(self):
        wrapped = wrap_angle(np.array([-0.5, 0.5, 7.0, 4 * math.pi]))
        assert (wrapped >= 0).all() and (wrapped < 2 * math.pi).all()
        assert wrapped[1] == 0.5
        assert wrapped[2] == pytest.approx(7.0 - 2 * math.pi)
