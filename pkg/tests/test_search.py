"""Tree search: widening, selection, gates, conservation, oracle agreement."""

import numpy as np
import pytest

from nte.game import (ContractViolation, GameSpec, Team, game_step,
                      joint_state, observe)
from nte.nets import NetworkParameters, policy_arch, value_arch
from nte.search import (NetBundle, PosgEngine, SearchConfig, TreeNode,
                        backpropagate, best_child, default_policy, expand,
                        explore_exponent, learner_policy, search, search_tree,
                        widen_threshold)
from toy_engine import MatrixGameEngine, ToyState, build_payoff, minimax_root_action

SPEC = GameSpec(team_a_count=1, team_b_count=1, pos_bound=1.0,
                goal_position=(0.3, 0.0))


def di_state(spec, positions, velocities=None, **kw):
    vec = np.zeros((spec.n_robots, 4))
    vec[:, :2] = positions
    if velocities is not None:
        vec[:, 2:] = velocities
    return joint_state(spec, vec, **kw)


def start_state():
    return di_state(SPEC, [[-0.6, 0.0], [0.6, 0.0]])


def constant_net(arch, mean, raw_std=-40.0):
    params = NetworkParameters(arch, np.zeros(arch.param_count))
    params.c2[: arch.out_dim] = mean
    params.c2[arch.out_dim:] = raw_std
    return params


def test_explore_exponent_schedule():
    assert explore_exponent(0) == pytest.approx(0.0485)
    assert explore_exponent(9) == pytest.approx((1 - 3 / 10) / 20)
    assert explore_exponent(10) == 0.01      # singular depth: clamp floor
    for d in range(0, 40):
        assert 0.01 <= explore_exponent(d) <= 0.5


def test_widen_threshold_direct_formula():
    cfg = SearchConfig(budget=1, c_pw=1.0, alpha_pw=0.25)
    assert widen_threshold(16, cfg) == 2
    assert widen_threshold(0, cfg) == 1
    assert widen_threshold(625, cfg) == 5


def test_selection_perspective_flip():
    root = TreeNode(start_state())
    root.visits = 10
    for mean in (0.5, 0.2):
        child = TreeNode(None, root, 1)
        child.visits = 5
        child.value_sum = mean * 5
        root.children.append(child)
    cfg = SearchConfig(budget=1)
    assert best_child(root, cfg, Team.A) is root.children[0]
    assert best_child(root, cfg, Team.B) is root.children[1]


def test_budget_one_returns_single_child_edge():
    action, stats = search(start_state(), None, SearchConfig(budget=1, rng_seed=3), SPEC)
    assert len(stats.visits) == 1
    assert stats.root_visits == 1
    assert np.array_equal(action, stats.actions[0])


def test_search_rejects_terminal_and_bad_budget():
    s = start_state()
    s.active[0] = False
    with pytest.raises(ContractViolation):
        search(s, None, SearchConfig(budget=10), SPEC)
    with pytest.raises(ValueError):
        SearchConfig(budget=0)


def test_seeded_determinism():
    cfg = SearchConfig(budget=300, rng_seed=11)
    a1, s1 = search(start_state(), None, cfg, SPEC)
    a2, s2 = search(start_state(), None, cfg, SPEC)
    assert np.array_equal(a1, a2)
    assert s1.visits == s2.visits
    assert s1.mean_values == s2.mean_values
    assert all(np.array_equal(x, y) for x, y in zip(s1.actions, s2.actions))


def test_visit_conservation_and_widening_fuzz():
    rng = np.random.default_rng(0)
    for trial in range(6):
        budget = int(rng.integers(20, 200))
        cfg = SearchConfig(budget=budget, rng_seed=trial, check_invariants=True,
                           c_pw=float(rng.choice([1.0, 2.0])))
        _, stats = search(start_state(), None, cfg, SPEC)
        assert stats.root_visits == budget
        assert sum(stats.visits) == budget


def test_expand_gate_frequency():
    counts = {"neural": 0, "uniform": 0}

    class CountingEngine(PosgEngine):
        def policy_joint(self, state, rng):
            counts["neural"] += 1
            return super().policy_joint(state, rng)

        def uniform_joint(self, state, rng):
            counts["uniform"] += 1
            return super().uniform_joint(state, rng)

    nets = NetBundle(policy_a=constant_net(policy_arch(4, 2), 0.0),
                     policy_b=constant_net(policy_arch(4, 2), 0.0))
    engine = CountingEngine(SPEC, nets)
    cfg = SearchConfig(budget=1, beta_pi=0.5)
    rng = np.random.default_rng(123)
    node = TreeNode(start_state())
    for _ in range(10_000):
        expand(node, engine, cfg, rng)
    freq = counts["neural"] / 10_000
    assert abs(freq - 0.5) <= 0.02


def test_expand_unbiased_when_gate_closed_or_no_nets():
    engine = PosgEngine(SPEC, None)
    cfg = SearchConfig(budget=1, beta_pi=1.0)      # nets absent: forced uniform
    rng = np.random.default_rng(1)
    node = TreeNode(start_state())
    child = expand(node, engine, cfg, rng)
    assert child is node.children[0]
    cfg0 = SearchConfig(budget=1, beta_pi=0.0)     # closed gate with nets present
    nets = NetBundle(policy_a=constant_net(policy_arch(4, 2), 1.0))
    counts = []

    class Probe(PosgEngine):
        def policy_joint(self, state, rng):
            counts.append(1)
            return super().policy_joint(state, rng)

    probe = Probe(SPEC, nets)
    for _ in range(50):
        expand(node, probe, cfg0, rng)
    assert counts == []


def test_expand_degenerate_policy_hits_mean():
    mean = np.array([0.7, -0.3])
    nets = NetBundle(policy_a=constant_net(policy_arch(4, 2), mean),
                     policy_b=constant_net(policy_arch(4, 2), mean))
    engine = PosgEngine(SPEC, nets)
    cfg = SearchConfig(budget=1, beta_pi=1.0)
    rng = np.random.default_rng(2)
    node = TreeNode(start_state())
    for _ in range(20):
        expand(node, engine, cfg, rng)
    for act in node.edge_actions:
        assert np.max(np.abs(act - mean)) <= 1e-2


def test_default_policy_terminal_short_circuit():
    s = start_state()
    s.active[0] = False       # attacker tagged: terminal, nothing reached
    engine = PosgEngine(SPEC, NetBundle(value=constant_net(value_arch(4), 0.9)))
    for beta in (0.0, 1.0):
        cfg = SearchConfig(budget=1, beta_v=beta)
        v = default_policy(s, engine, cfg, np.random.default_rng(0))
        assert v == 0.0


def test_default_policy_constant_value_net():
    nets = NetBundle(value=constant_net(value_arch(4), 0.7))
    engine = PosgEngine(SPEC, nets)
    cfg = SearchConfig(budget=1, beta_v=1.0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        v = default_policy(start_state(), engine, cfg, rng)
        assert abs(v - 0.7) <= 1e-3


def test_default_policy_rollout_from_goal_doorstep():
    spec = GameSpec(team_a_count=1, team_b_count=0, pos_bound=1.0,
                    goal_position=(0.3, 0.0))
    s = di_state(spec, [[0.25, 0.0]], [[0.3, 0.0]])   # drifts onto the goal
    engine = PosgEngine(spec, None)
    cfg = SearchConfig(budget=1, beta_v=0.0)
    rng = np.random.default_rng(4)
    wins = sum(default_policy(s, engine, cfg, rng) == 1.0 for _ in range(1000))
    assert wins / 1000 >= 0.2


def test_backpropagate_path_counts():
    root = TreeNode(None)
    a = TreeNode(None, root, 1)
    b = TreeNode(None, a, 2)
    leaf = TreeNode(None, b, 3)
    backpropagate(leaf, 1.0)
    for node in (root, a, b, leaf):
        assert node.visits == 1 and node.value_sum == 1.0
    backpropagate(leaf, 0.25)
    assert root.visits == 2 and 0.0 <= root.value_sum / root.visits <= 1.0


def test_root_children_absorb_every_iteration():
    _, stats = search(start_state(), None, SearchConfig(budget=157, rng_seed=5), SPEC)
    assert sum(stats.visits) == 157


def test_tree_mean_values_in_unit_interval():
    cfg = SearchConfig(budget=400, rng_seed=6, check_invariants=True)
    _, stats = search(start_state(), None, cfg, SPEC)
    for q in stats.mean_values:
        assert 0.0 <= q <= 1.0
        assert abs((1.0 - q) - (1.0 - q)) == 0.0


def test_minimax_oracle_smoke():
    payoff = build_payoff(0)
    want = minimax_root_action(payoff)
    engine = MatrixGameEngine(payoff)
    hits = 0
    for seed in range(10):
        cfg = SearchConfig(budget=3000, c_pw=16.0, beta_pi=0.0, beta_v=0.0,
                           rng_seed=seed)
        action, _ = search_tree(engine, ToyState(), cfg, Team.A)
        hits += (int(action[0]), int(action[1])) == want
    assert hits >= 9


def test_learner_matches_expert_under_full_visibility():
    s = start_state()
    cfg = SearchConfig(budget=400, rng_seed=9)
    expert_action, _ = search(s, None, cfg, SPEC, Team.A,
                              np.random.default_rng(99))
    learner_action = learner_policy(0, observe(0, s, SPEC), None, SPEC, cfg,
                                    rng=np.random.default_rng(99))
    assert np.array_equal(expert_action[0], learner_action)


def test_learner_zero_action_when_subgame_unsearchable():
    spec = GameSpec(team_a_count=1, team_b_count=1, pos_bound=3.0,
                    goal_position=(1.0, 0.0), sense_radius=0.5)
    s = di_state(spec, [[-2.0, 0.0], [2.0, 0.0]])
    act = learner_policy(1, observe(1, s, spec), None, spec,
                         SearchConfig(budget=100, rng_seed=0))
    assert np.array_equal(act, np.zeros(2))


def test_learner_alone_makes_progress_toward_goal():
    spec = GameSpec(team_a_count=1, team_b_count=0, pos_bound=1.0,
                    goal_position=(0.5, 0.0))
    cfg = SearchConfig(budget=200, beta_pi=0.0, beta_v=0.0)
    start_d, end_d = [], []
    for seed in range(50):
        s = di_state(spec, [[-0.5, 0.0]])
        rng = np.random.default_rng(seed)
        start_d.append(np.linalg.norm(s.vectors[0, :2] - [0.5, 0.0]))
        for _ in range(10):
            if not s.active[0]:
                break
            a = learner_policy(0, observe(0, s, spec), None, spec, cfg,
                               s.reached_count, s.step_index, rng)
            actions = np.zeros((1, 2))
            actions[0] = a
            s, _ = game_step(s, actions, spec)
        end_d.append(np.linalg.norm(s.vectors[0, :2] - [0.5, 0.0]))
    assert np.mean(end_d) < np.mean(start_d) - 0.05
