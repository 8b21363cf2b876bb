import logging
import math

import numpy as np
import pytest

from areosync.controller import (ACQUISITION, AS_PRINTED, CLAMP,
                                 STATION_KEEPING, WARN_ONLY, DesiredOrbit,
                                 GainSet, kc_phase, kc_rate, kc_schedule,
                                 radial_thrust, saturate, tangential_thrust)
from areosync.dynamics import (SOL, PerturbationAccel, SatelliteTruthState,
                               ThrustCommand, constant_set, truth_derivatives)

R_D = 20428.2e3


class TestSchedule:
    @classmethod
    def setup_class(cls):
        cls.gains = GainSet()

    def test_start_and_floor(self):
        assert kc_schedule(0.0, self.gains) == 1e11
        assert kc_schedule(1e12, self.gains) == 1e9
        assert kc_phase(0.0, self.gains) == ACQUISITION
        assert kc_phase(self.gains.t_f, self.gains) == ACQUISITION
        assert kc_phase(self.gains.t_f + 1, self.gains) == STATION_KEEPING

    def test_end_of_acquisition(self):
        value = kc_schedule(self.gains.t_f, self.gains)
        assert value == pytest.approx(1e9 + 99e9 * math.exp(-30), rel=1e-14)
        assert value == pytest.approx(1e9, rel=1e-4)

    def test_explicit_phase(self):
        assert kc_schedule(0.0, self.gains, STATION_KEEPING) == 1e9
        assert kc_rate(0.0, self.gains, STATION_KEEPING) == 0.0

    def test_monotone_and_bounded(self):
        rng = np.random.default_rng(3)
        times = np.sort(rng.uniform(0, 2 * self.gains.t_f, 500))
        values = [kc_schedule(t, self.gains) for t in times]
        assert all(1e9 <= v <= 1e11 for v in values)
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_rate_is_derivative(self):
        t, h = 50 * SOL, 10.0
        numeric = (kc_schedule(t + h, self.gains)
                   - kc_schedule(t - h, self.gains)) / (2 * h)
        assert kc_rate(t, self.gains) == pytest.approx(numeric, rel=1e-6)
        assert kc_rate(t, self.gains) < 0
        assert kc_rate(2 * self.gains.t_f, self.gains) == 0.0

    def test_gain_validation(self):
        with pytest.raises(ValueError):
            GainSet(k_r=-1.0)
        with pytest.raises(ValueError):
            GainSet(k_v=0.0)
        with pytest.raises(ValueError):
            GainSet(kc_bar=1e9, kc_floor=1e9)
        with pytest.raises(ValueError):
            GainSet(radial_convention='newtons')


class TestThrustLaws:
    @classmethod
    def setup_class(cls):
        cls.planet, _ = constant_set('mars-example')
        cls.desired = DesiredOrbit.for_planet(cls.planet, R_D)
        cls.gains = GainSet()

    def state(self, **values):
        fields = dict(r=R_D, v=0.0, omega=self.desired.omega_d, theta=0.0,
                      mass=100.0)
        fields.update(values)
        return SatelliteTruthState(**fields)

    def closed_loop(self, state, u, k_c, gains=None):
        gains = gains or self.gains
        thrust = ThrustCommand(radial_thrust(state, gains, self.desired),
                               tangential_thrust(state, gains, self.desired,
                                                 u, k_c))
        return truth_derivatives(state, thrust, PerturbationAccel(),
                                 self.planet)

    def test_desired_orbit(self):
        assert self.desired.v_d == 0.0
        assert self.desired.omega_d == math.sqrt(self.planet.mu / R_D ** 3)
        with pytest.raises(ValueError):
            DesiredOrbit(0.0, self.planet.mu)

    def test_equilibrium_needs_no_thrust(self):
        state = self.state()
        assert abs(radial_thrust(state, self.gains, self.desired)) < 1e-12
        assert tangential_thrust(state, self.gains, self.desired, 0.0,
                                 1e11) == 0.0

    def test_radial_offset(self):
        state = self.state(r=R_D + 100.0)
        tau_r = radial_thrust(state, self.gains, self.desired)
        omega_d = self.desired.omega_d
        gravity = 100.0 * (-(R_D + 100) * omega_d ** 2
                           + self.planet.mu / (R_D + 100) ** 2)
        assert tau_r == pytest.approx(gravity - 100.0 * 1e-5 * 100.0, rel=1e-9)
        _, v_dot, _, _ = self.closed_loop(state, 0.0, 1e11)
        assert v_dot == pytest.approx(-1e-5 * 100.0, abs=1e-15)

    def test_coordination_channel(self):
        state = self.state()
        u, k_c = 3e-3, 1e10
        tau_theta = tangential_thrust(state, self.gains, self.desired, u, k_c)
        assert tau_theta == pytest.approx(100.0 * R_D * u / k_c, rel=1e-14)
        _, _, omega_dot, _ = self.closed_loop(state, u, k_c)
        assert omega_dot == pytest.approx(u / k_c, rel=1e-12)

    def test_closed_loop_reduction(self):
        rng = np.random.default_rng(11)
        mu = self.planet.mu
        for _ in range(10000):
            state = self.state(r=R_D + rng.uniform(-5e3, 5e3),
                               v=rng.uniform(-1, 1),
                               omega=self.desired.omega_d
                               + rng.uniform(-1e-6, 1e-6))
            u = rng.uniform(-1e-2, 1e-2)
            k_c = rng.uniform(1e9, 1e11)
            _, v_dot, omega_dot, _ = self.closed_loop(state, u, k_c)
            expected_v = (-1e-4 * state.v - 1e-5 * (state.r - R_D))
            expected_omega = (-1e4 / state.r * (state.omega
                                                - self.desired.omega_d)
                              + u / k_c)
            # the residual is set by cancelling the gravity term
            scale = mu / state.r ** 2
            assert abs(v_dot - expected_v) <= 1e-12 * max(abs(expected_v),
                                                          scale)
            assert omega_dot == pytest.approx(expected_omega, rel=1e-12,
                                              abs=1e-24)

    def test_as_printed_gains_divide_by_mass(self):
        gains = GainSet(radial_convention=AS_PRINTED)
        assert gains.effective_radial_gains(100.0) == pytest.approx((1e-7,
                                                                     1e-6))
        assert self.gains.effective_radial_gains(100.0) == (1e-5, 1e-4)
        state = self.state(r=R_D + 100.0)
        _, v_dot, _, _ = self.closed_loop(state, 0.0, 1e11, gains)
        assert v_dot == pytest.approx(-1e-7 * 100.0, abs=1e-15)


class TestSaturation:
    def test_within_limit(self):
        cmd = ThrustCommand(0.05, -0.09)
        assert saturate(cmd, 0.1) == ThrustCommand(0.05, -0.09, False)
        assert saturate(cmd, 0.1, CLAMP) == ThrustCommand(0.05, -0.09, False)

    def test_clamp(self):
        result = saturate(ThrustCommand(0.2, -0.3), 0.1, CLAMP)
        assert result == ThrustCommand(0.1, -0.1, True)

    def test_warn_only(self, caplog):
        with caplog.at_level(logging.WARNING, logger='areosync.controller'):
            result = saturate(ThrustCommand(0.2, 0.0), 0.1, WARN_ONLY)
        assert result == ThrustCommand(0.2, 0.0, True)
        assert 'exceeds' in caplog.text

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            saturate(ThrustCommand(), 0.0)
        with pytest.raises(ValueError):
            saturate(ThrustCommand(), 0.1, 'ignore')
