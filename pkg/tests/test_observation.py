"""Observation model, state reconstruction and the value-network encoding."""

import numpy as np
import pytest

from nte.game import (ContractViolation, DynamicsModel, GameSpec, Team,
                      joint_state, observe, reconstruct_state,
                      value_observation)

SPEC = GameSpec(team_a_count=2, team_b_count=2, pos_bound=3.0,
                goal_position=(1.0, 0.0), sense_radius=2.0)


def di_state(spec, positions, velocities=None, **kw):
    vec = np.zeros((spec.n_robots, 4))
    vec[:, :2] = positions
    if velocities is not None:
        vec[:, 2:] = velocities
    return joint_state(spec, vec, **kw)


def sorted_rows(arr):
    return arr[np.lexsort(arr.T[::-1])] if len(arr) else arr


def test_goal_relative_direct():
    s = di_state(SPEC, [[0.0, 0.0], [2.9, 2.9], [2.9, -2.9], [-2.9, 2.9]])
    z = observe(0, s, SPEC)
    assert np.array_equal(z.goal_relative, [1.0, 0.0, 0.0, 0.0])
    assert z.neighbors_a.shape == (0, 4) and z.neighbors_b.shape == (0, 4)


def test_sense_radius_filters():
    assert SPEC.sense_radius == 2.0
    s = di_state(SPEC, [[0.0, 0.0], [3.0, 0.0], [1.9, 0.0], [-2.5, 0.0]])
    z = observe(0, s, SPEC)
    assert z.neighbors_a.shape == (0, 4)          # teammate at 3 m: excluded
    assert z.neighbors_b.shape == (1, 4)          # defender at 1.9 m: included
    assert np.array_equal(z.neighbors_b[0][:2], [1.9, 0.0])


def test_inactive_robots_invisible_and_observer_must_be_active():
    s = di_state(SPEC, [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.5, 0.0]])
    s.active[1] = False
    s.active[2] = False
    z = observe(0, s, SPEC)
    assert z.neighbors_a.shape == (0, 4)
    assert z.neighbors_b.shape == (1, 4)
    with pytest.raises(ContractViolation):
        observe(1, s, SPEC)


def test_permutation_equivariance():
    rng = np.random.default_rng(2)
    pos = rng.uniform(-1, 1, (4, 2))
    s = di_state(SPEC, pos)
    z = observe(0, s, SPEC)
    # swap the two defenders: set contents permute, membership identical
    perm = pos[[0, 1, 3, 2]]
    z2 = observe(0, di_state(SPEC, perm), SPEC)
    assert np.array_equal(sorted_rows(z.neighbors_b), sorted_rows(z2.neighbors_b))
    assert np.array_equal(z.goal_relative, z2.goal_relative)


def test_reconstruction_full_visibility_roundtrip():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pos = rng.uniform(-0.8, 0.8, (4, 2))        # everyone in sense range
        vel = rng.uniform(-0.5, 0.5, (4, 2))
        s = di_state(SPEC, pos, vel, step_index=4, reached_count=0)
        for i in range(4):
            z = observe(i, s, SPEC)
            recon, idx, sub = reconstruct_state(z, SPEC.team_of(i), SPEC,
                                                reached_count=0, step_index=4)
            assert sub.team_a_count == 2 and sub.team_b_count == 2
            assert np.max(np.abs(recon.vectors[idx] - s.vectors[i])) <= 1e-12
            assert np.max(np.abs(sorted_rows(recon.vectors) -
                                 sorted_rows(s.vectors))) <= 1e-12
            assert recon.step_index == 4


def test_reconstruction_partial_visibility():
    spec = GameSpec(team_a_count=2, team_b_count=1, pos_bound=3.0,
                    goal_position=(1.0, 0.0), sense_radius=1.0)
    s = di_state(spec, [[0.0, 0.0], [0.5, 0.0], [2.5, 0.0]])
    z = observe(0, s, spec)
    recon, idx, sub = reconstruct_state(z, Team.A, spec)
    assert sub.team_a_count == 2 and sub.team_b_count == 0
    assert idx == 0
    assert np.max(np.abs(recon.vectors[1] - s.vectors[1])) <= 1e-12


def test_reconstruction_empty_neighbors():
    spec = GameSpec(team_a_count=1, team_b_count=1, pos_bound=3.0,
                    goal_position=(1.0, 0.0), sense_radius=0.1)
    s = di_state(spec, [[0.0, 0.0], [2.0, 0.0]])
    recon, idx, sub = reconstruct_state(observe(0, s, spec), Team.A, spec)
    assert recon.n == 1 and idx == 0
    assert sub.team_a_count == 1 and sub.team_b_count == 0
    # defender observer reconstructs a sub-game with no attackers
    recon_b, idx_b, sub_b = reconstruct_state(observe(1, s, spec), Team.B, spec)
    assert recon_b.n == 1 and idx_b == 0
    assert sub_b.team_a_count == 0 and sub_b.team_b_count == 1


def test_value_observation_contents():
    s = di_state(SPEC, [[1.0, 0.0], [0.5, 0.5], [2.0, 0.0], [2.0, 1.0]],
                 reached_count=1)
    s.active[0] = False   # reached robots drop out of the sets
    y = value_observation(s, SPEC)
    assert y.set_a.shape == (1, 4)
    assert y.set_b.shape == (2, 4)
    assert y.reached_count == 1
    assert np.array_equal(y.set_a[0], [-0.5, 0.5, 0.0, 0.0])


def test_value_observation_zero_row_at_goal():
    spec = GameSpec(team_a_count=1, team_b_count=0, pos_bound=3.0,
                    goal_position=(1.0, 0.0))
    s = di_state(spec, [[1.0, 0.0]])
    y = value_observation(s, spec)
    assert np.array_equal(y.set_a[0], np.zeros(4))


def test_dubins_goal_embed():
    spec = GameSpec(team_a_count=1, team_b_count=0, pos_bound=5.0,
                    goal_position=(1.0, 2.0, 0.5),
                    dynamics_model=DynamicsModel.DUBINS_3D)
    vec = np.zeros((1, 7))
    vec[0, 6] = 1.0
    s = joint_state(spec, vec)
    z = observe(0, s, spec)
    assert np.array_equal(z.goal_relative, [1.0, 2.0, 0.5, 0.0, 0.0, 0.0, -1.0])
