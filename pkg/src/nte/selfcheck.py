"""Fast invariant fuzz suites behind `nte selftest`.

Each check returns (name, passed, detail). These are smoke-level versions of
the property suites in the test tree, runnable without pytest on an
installed package.
"""

from __future__ import annotations

import numpy as np

from .game import (DynamicsModel, GameSpec, RobotState, check_admissible,
                   game_step, joint_state, observe, reconstruct_state,
                   step_robot, uniform_joint_action)
from .nets import (TrainingSample, batch_loss, forward, gradient, init_params,
                   pad_samples, policy_arch, value_arch, SetInput)
from .search import SearchConfig, search

DI_SPEC = GameSpec(team_a_count=2, team_b_count=2, pos_bound=3.0,
                   goal_position=(1.5, 0.0))
DUBINS_SPEC = GameSpec(team_a_count=1, team_b_count=1, pos_bound=5.0,
                       goal_position=(2.0, 0.0, 0.0),
                       dynamics_model=DynamicsModel.DUBINS_3D)


def _random_state(spec, rng):
    vec = np.zeros((spec.n_robots, spec.state_dim))
    vec[:, : spec.pos_dim] = rng.uniform(-0.8, 0.8, (spec.n_robots, spec.pos_dim)) * spec.pos_bound
    if spec.dynamics_model is DynamicsModel.DOUBLE_INTEGRATOR_2D:
        vec[:, 2:] = rng.uniform(-0.5, 0.5, (spec.n_robots, 2))
    else:
        vec[:, 3:6] = rng.uniform(-0.5, 0.5, (spec.n_robots, 3))
        vec[:, 6] = rng.uniform(*spec.dubins_speed_range, spec.n_robots)
    return joint_state(spec, vec)


def check_dynamics_kernels() -> tuple[str, bool, str]:
    """game_step propagation agrees with the per-robot reference ops to 1e-12."""
    rng = np.random.default_rng(0)
    worst = 0.0
    for spec in (DI_SPEC, DUBINS_SPEC):
        for _ in range(100):
            s = _random_state(spec, rng)
            act = uniform_joint_action(s, spec, rng)
            nxt, _ = game_step(s, act, spec)
            for i in range(spec.n_robots):
                ref = step_robot(RobotState(s.vectors[i].copy()), act[i], spec)
                worst = max(worst, float(np.max(np.abs(nxt.vectors[i] - ref.vector))))
    return ("dynamics kernels vs reference ops", worst <= 1e-12, f"max |err| = {worst:.2e}")


def check_rule_kernels() -> tuple[str, bool, str]:
    """Fast adjudication agrees with check_admissible on random states."""
    from . import kernels
    rng = np.random.default_rng(1)
    for _ in range(200):
        s = _random_state(DI_SPEC, rng)
        events = np.empty(DI_SPEC.n_robots, dtype=np.int8)
        kernels.adjudicate(s.vectors, s.active, DI_SPEC.team_a_count, 0,
                           DI_SPEC.pos_bound, DI_SPEC.vel_bound,
                           DI_SPEC.tag_radius, DI_SPEC.collision_radius,
                           DI_SPEC.goal_radius, DI_SPEC._goal3,
                           DI_SPEC._obstacles_arr, events)
        for i in range(DI_SPEC.n_robots):
            if events[i] != int(check_admissible(i, s, DI_SPEC)):
                return ("rule kernel vs check_admissible", False, f"mismatch at robot {i}")
    return ("rule kernel vs check_admissible", True, "200 states")


def check_search_invariants() -> tuple[str, bool, str]:
    """Widening bound and visit conservation hold through fuzzed searches."""
    rng = np.random.default_rng(2)
    iters = 0
    for trial in range(8):
        budget = int(rng.integers(50, 300))
        s = _random_state(DI_SPEC, rng)
        cfg = SearchConfig(budget=budget, rng_seed=trial, check_invariants=True)
        try:
            _, stats = search(s, None, cfg, DI_SPEC)
        except Exception as exc:  # noqa: BLE001
            return ("search invariants", False, str(exc))
        if stats.root_visits != budget:
            return ("search invariants", False,
                    f"root visits {stats.root_visits} != budget {budget}")
        iters += budget
    return ("search invariants", True, f"{iters} fuzzed iterations")


def check_permutation_invariance() -> tuple[str, bool, str]:
    """Network outputs are bit-identical under within-set permutations."""
    rng = np.random.default_rng(3)
    for arch in (policy_arch(4, 2), value_arch(4)):
        params = init_params(arch, 5)
        for _ in range(100):
            na, nb = rng.integers(0, 5), rng.integers(0, 5)
            inp = SetInput(rng.normal(size=arch.self_dim) if arch.self_dim else None,
                           rng.normal(size=(na, 4)), rng.normal(size=(nb, 4)),
                           1.0 if arch.has_count else None)
            ref = forward(params, inp)
            out = forward(params, SetInput(inp.self_features,
                                           inp.set_a[rng.permutation(na)],
                                           inp.set_b[rng.permutation(nb)],
                                           inp.count))
            if not (np.array_equal(ref.mean, out.mean) and np.array_equal(ref.std, out.std)):
                return ("permutation invariance", False, "bit mismatch")
    return ("permutation invariance", True, "200 fuzz cases")


def check_gradients() -> tuple[str, bool, str]:
    """Spot finite-difference agreement of the analytic gradient."""
    rng = np.random.default_rng(4)
    arch = policy_arch(4, 2)
    params = init_params(arch, 6)
    samples = [TrainingSample(
        SetInput(rng.normal(size=4), rng.normal(size=(rng.integers(0, 3), 4)),
                 rng.normal(size=(rng.integers(0, 3), 4)), None),
        rng.normal(size=2)) for _ in range(5)]
    pb = pad_samples(samples, arch)
    g, _ = gradient(params, pb)
    worst = 0.0
    for j in rng.choice(arch.param_count, size=20, replace=False):
        h = 1e-5
        keep = params.theta[j]
        params.theta[j] = keep + h
        up = batch_loss(params, pb)
        params.theta[j] = keep - h
        down = batch_loss(params, pb)
        params.theta[j] = keep
        fd = (up - down) / (2 * h)
        worst = max(worst, abs(fd - g[j]) / max(abs(fd), abs(g[j]), 1e-6))
    return ("gradient finite differences", worst <= 1e-4, f"max rel err = {worst:.2e}")


def check_reconstruction() -> tuple[str, bool, str]:
    """observe -> reconstruct is the identity on visible robots."""
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        s = _random_state(DI_SPEC, rng)
        for i in range(DI_SPEC.n_robots):
            z = observe(i, s, DI_SPEC)
            recon, idx, _ = reconstruct_state(z, DI_SPEC.team_of(i), DI_SPEC)
            worst = max(worst, float(np.max(np.abs(recon.vectors[idx] - s.vectors[i]))))
    return ("observation round trip", worst <= 1e-12, f"max |err| = {worst:.2e}")


ALL_CHECKS = (check_dynamics_kernels, check_rule_kernels, check_search_invariants,
              check_permutation_invariance, check_gradients, check_reconstruction)


def run_all() -> list[tuple[str, bool, str]]:
    return [chk() for chk in ALL_CHECKS]
