"""Admissibility, inactivation, stepping and termination rules."""

import numpy as np
import pytest

from nte.game import (ContractViolation, GameSpec, RobotEvent, Team,
                      check_admissible, game_step, is_terminal, joint_state,
                      terminal_value, uniform_joint_action)

SPEC_1V1 = GameSpec(team_a_count=1, team_b_count=1, pos_bound=3.0,
                    goal_position=(1.5, 0.0))
SPEC_2V2 = GameSpec(team_a_count=2, team_b_count=2, pos_bound=3.0,
                    goal_position=(1.5, 0.0))


def di_state(spec, positions, velocities=None, **kw):
    vec = np.zeros((spec.n_robots, 4))
    vec[:, :2] = positions
    if velocities is not None:
        vec[:, 2:] = velocities
    return joint_state(spec, vec, **kw)


def test_attacker_on_goal_is_reached():
    s = di_state(SPEC_1V1, [[1.5, 0.0], [1.5, 1.0]])
    assert check_admissible(0, s, SPEC_1V1) is RobotEvent.REACHED


def test_tag_at_paper_radius():
    s = di_state(SPEC_1V1, [[0.0, 0.0], [0.15, 0.0]])
    assert SPEC_1V1.tag_radius == 0.2
    assert check_admissible(0, s, SPEC_1V1) is RobotEvent.TAGGED
    # the defender itself is only in collision range if closer
    assert check_admissible(1, s, SPEC_1V1) is RobotEvent.NONE


def test_position_bound_violation():
    s = di_state(SPEC_1V1, [[3.01, 0.0], [2.0, 0.0]])
    assert check_admissible(0, s, SPEC_1V1) is RobotEvent.VIOLATED


def test_velocity_bound_violation():
    s = di_state(SPEC_1V1, [[0.0, 0.0], [2.0, 0.0]], [[0.8, 0.8], [0.0, 0.0]])
    assert check_admissible(0, s, SPEC_1V1) is RobotEvent.VIOLATED


def test_reached_beats_tag_beats_violation():
    # attacker sits on the goal while inside tag range and outside the arena?
    # reached wins over both.
    spec = GameSpec(team_a_count=1, team_b_count=1, pos_bound=1.0,
                    goal_position=(0.9, 0.0))
    s = di_state(spec, [[0.9, 0.0], [0.95, 0.0]])
    assert check_admissible(0, s, spec) is RobotEvent.REACHED
    # tagged (and colliding) but not at the goal: tag wins over collision
    s2 = di_state(spec, [[0.0, 0.0], [0.05, 0.0]])
    assert check_admissible(0, s2, spec) is RobotEvent.TAGGED
    assert check_admissible(1, s2, spec) is RobotEvent.VIOLATED


def test_teammate_collision_deactivates_both():
    s = di_state(SPEC_2V2, [[0.0, 0.0], [0.05, 0.0], [2.0, 1.0], [2.0, -1.0]])
    out, ev = game_step(s, np.zeros((4, 2)), SPEC_2V2)
    assert set(ev.violated) == {0, 1}
    assert not out.active[0] and not out.active[1]
    assert out.active[2] and out.active[3]


def test_obstacle_is_inadmissible():
    spec = GameSpec(team_a_count=1, team_b_count=1, pos_bound=3.0,
                    goal_position=(1.5, 0.0), obstacles=(((0.0, 1.0), 0.3),))
    s = di_state(spec, [[0.1, 1.1], [2.0, 0.0]])
    assert check_admissible(0, s, spec) is RobotEvent.VIOLATED


def test_inactive_robot_rejected():
    s = di_state(SPEC_1V1, [[0.0, 0.0], [1.0, 0.0]])
    s.active[0] = False
    with pytest.raises(ContractViolation):
        check_admissible(0, s, SPEC_1V1)


def test_step_terminal_state_only_advances_clock():
    s = di_state(SPEC_1V1, [[0.0, 0.0], [1.0, 0.0]])
    s.active[:] = False
    out, ev = game_step(s, np.ones((2, 2)), SPEC_1V1)
    assert ev.terminal
    assert np.array_equal(out.vectors, s.vectors)
    assert out.step_index == s.step_index + 1


def test_one_step_goal_capture():
    spec = GameSpec(team_a_count=1, team_b_count=0, pos_bound=3.0,
                    goal_position=(1.5, 0.0))
    s = di_state(spec, [[1.25, 0.0]], [[0.9, 0.0]])
    out, ev = game_step(s, np.zeros((1, 2)), spec)
    assert ev.reached == (0,)
    assert ev.terminal
    assert out.reached_count == 1
    assert terminal_value(out, spec) == 1


def test_action_shape_mismatch():
    s = di_state(SPEC_1V1, [[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ContractViolation):
        game_step(s, np.zeros((3, 2)), SPEC_1V1)


def test_terminal_value_requires_terminal():
    s = di_state(SPEC_1V1, [[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ContractViolation):
        terminal_value(s, SPEC_1V1)


def test_random_rollouts_consistency():
    """n_rg is monotone, inactive robots freeze, and the final count matches
    a recount of reached events over the full trajectory log."""
    rng = np.random.default_rng(42)
    for game in range(20):
        pos = np.concatenate([rng.uniform(-2.0, 0.0, (2, 2)),
                              rng.uniform(0.0, 2.0, (2, 2))])
        s = di_state(SPEC_2V2, pos)
        reached_log = []
        prev = s
        frozen = {}
        while not is_terminal(s, SPEC_2V2):
            a = uniform_joint_action(s, SPEC_2V2, rng)
            nxt, ev = game_step(s, a, SPEC_2V2)
            reached_log.extend(ev.reached)
            assert nxt.reached_count >= s.reached_count
            for i in range(4):
                if not s.active[i]:
                    frozen.setdefault(i, s.vectors[i].copy())
                    assert np.array_equal(nxt.vectors[i], frozen[i])
            prev, s = s, nxt
        assert terminal_value(s, SPEC_2V2) == len(reached_log) == s.reached_count


def test_determinism_bit_identical():
    rng = np.random.default_rng(5)
    s = di_state(SPEC_2V2, rng.uniform(-1, 1, (4, 2)))
    a = uniform_joint_action(s, SPEC_2V2, rng)
    out1, ev1 = game_step(s, a, SPEC_2V2)
    out2, ev2 = game_step(s, a, SPEC_2V2)
    assert np.array_equal(out1.vectors, out2.vectors)
    assert np.array_equal(out1.active, out2.active)
    assert ev1 == ev2


def test_horizon_terminates():
    spec = GameSpec(team_a_count=1, team_b_count=1, pos_bound=50.0, horizon=3,
                    goal_position=(40.0, 0.0))
    s = di_state(spec, [[0.0, 0.0], [1.0, 0.0]])
    for _ in range(3):
        assert not is_terminal(s, spec)
        s, ev = game_step(s, np.zeros((2, 2)), spec)
    assert is_terminal(s, spec)
    assert ev.terminal
    assert terminal_value(s, spec) == 0


def test_kernel_matches_reference_check():
    """The fast adjudication kernel agrees with check_admissible everywhere."""
    from nte import kernels
    rng = np.random.default_rng(9)
    for _ in range(200):
        pos = rng.uniform(-3.2, 3.2, (4, 2))
        vel = rng.uniform(-1.2, 1.2, (4, 2))
        s = di_state(SPEC_2V2, pos, vel)
        events = np.empty(4, dtype=np.int8)
        kernels.adjudicate(s.vectors, s.active, 2, 0, SPEC_2V2.pos_bound,
                           SPEC_2V2.vel_bound, SPEC_2V2.tag_radius,
                           SPEC_2V2.collision_radius, SPEC_2V2.goal_radius,
                           SPEC_2V2._goal3, SPEC_2V2._obstacles_arr, events)
        for i in range(4):
            assert events[i] == int(check_admissible(i, s, SPEC_2V2))
