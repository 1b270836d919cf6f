"""Single-robot dynamics against independently coded Euler oracles."""

import math

import numpy as np
import pytest

from nte.game import (ContractViolation, DynamicsModel, GameSpec, RobotState,
                      Team, step_double_integrator, step_dubins3d)


def di_oracle(vec, accel, dt):
    """Matrix-form Euler step for the double integrator (independent path)."""
    A = np.array([[1, 0, dt, 0],
                  [0, 1, 0, dt],
                  [0, 0, 1, 0],
                  [0, 0, 0, 1]], dtype=float)
    B = np.array([[0, 0], [0, 0], [dt, 0], [0, dt]], dtype=float)
    return A @ vec + B @ accel


def dubins_oracle(vec, action, dt, gravity, v_min, v_max, bank):
    """Scalar Euler step of the 3D fixed-wing model (independent path)."""
    x, y, z, psi, gam, phi, v = [float(c) for c in vec]
    out = [x + v * math.cos(gam) * math.sin(psi) * dt,
           y + v * math.cos(gam) * math.cos(psi) * dt,
           z - v * math.sin(gam) * dt,
           psi + gravity / v * math.tan(phi) * dt,
           gam + float(action[0]) * dt,
           phi + float(action[1]) * dt,
           v + float(action[2]) * dt]
    out[5] = max(-bank, min(bank, out[5]))
    out[6] = max(v_min, min(v_max, out[6]))
    return np.array(out)


DUBINS_SPEC = GameSpec(team_a_count=1, team_b_count=1, pos_bound=5.0,
                       goal_position=(2.0, 0.0, 0.0),
                       dynamics_model=DynamicsModel.DUBINS_3D)


def test_di_direct_example():
    s = RobotState(np.array([0.0, 0.0, 1.0, 0.0]))
    out = step_double_integrator(s, np.array([0.0, 2.0]), 0.1)
    assert np.allclose(out.vector, [0.1, 0.0, 1.0, 0.2], atol=0, rtol=0)


def test_di_zero_input_fixed_point():
    s = RobotState(np.array([1.0, 1.0, 0.0, 0.0]))
    for dt in (0.01, 0.1, 2.0):
        out = step_double_integrator(s, np.zeros(2), dt)
        assert np.array_equal(out.vector, s.vector)


def test_di_random_oracle():
    rng = np.random.default_rng(7)
    for _ in range(100):
        vec = rng.normal(size=4)
        accel = rng.normal(size=2)
        dt = rng.uniform(0.01, 0.5)
        out = step_double_integrator(RobotState(vec.copy()), accel, dt)
        assert np.max(np.abs(out.vector - di_oracle(vec, accel, dt))) <= 1e-12


def test_di_rejects_inactive_and_bad_dims():
    with pytest.raises(ContractViolation):
        step_double_integrator(RobotState(np.zeros(4), active=False), np.zeros(2), 0.1)
    with pytest.raises(ContractViolation):
        step_double_integrator(RobotState(np.zeros(4)), np.zeros(3), 0.1)


def test_dubins_straight_level_flight():
    s = RobotState(np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), team=Team.B)
    out = step_dubins3d(s, np.zeros(3), 0.1, DUBINS_SPEC)
    assert np.allclose(out.vector[:3], [0.0, 0.1, 0.0], atol=1e-15)
    assert np.array_equal(out.vector[3:6], [0.0, 0.0, 0.0])


def test_dubins_pure_dive():
    s = RobotState(np.array([0.0, 0.0, 0.0, 0.0, math.pi / 2, 0.0, 1.0]))
    out = step_dubins3d(s, np.zeros(3), 0.1, DUBINS_SPEC)
    assert abs(out.vector[2] - (-0.1)) <= 1e-15
    assert np.allclose(out.vector[:2], [0.0, 0.0], atol=1e-15)


def test_dubins_random_oracle():
    rng = np.random.default_rng(11)
    v_min, v_max = DUBINS_SPEC.dubins_speed_range
    for _ in range(100):
        vec = np.concatenate([rng.normal(size=3),
                              rng.uniform(-math.pi, math.pi, size=3),
                              [rng.uniform(v_min, v_max)]])
        vec[5] = rng.uniform(-1.0, 1.0)  # keep tan(bank) sane
        action = rng.uniform(-0.6, 0.6, size=3)
        dt = rng.uniform(0.01, 0.3)
        out = step_dubins3d(RobotState(vec.copy()), action, dt, DUBINS_SPEC)
        expect = dubins_oracle(vec, action, dt, DUBINS_SPEC.dubins_gravity,
                               v_min, v_max, DUBINS_SPEC.bank_bound)
        assert np.max(np.abs(out.vector - expect)) <= 1e-12


def test_dubins_speed_and_bank_projected():
    rng = np.random.default_rng(3)
    v_min, v_max = DUBINS_SPEC.dubins_speed_range
    s = RobotState(np.array([0, 0, 0, 0, 0, 0, v_min], dtype=float))
    for _ in range(200):
        out = step_dubins3d(s, rng.uniform(-5, 5, size=3), 0.1, DUBINS_SPEC)
        assert v_min <= out.vector[6] <= v_max
        assert abs(out.vector[5]) <= DUBINS_SPEC.bank_bound
        s = out


def test_dubins_rejects_nonpositive_speed():
    s = RobotState(np.array([0, 0, 0, 0, 0, 0, 0.0]))
    with pytest.raises(ContractViolation):
        step_dubins3d(s, np.zeros(3), 0.1, DUBINS_SPEC)
