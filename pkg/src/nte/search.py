"""Continuous-action Monte Carlo tree search with learned expansion and value gates.

Each tree edge carries a full joint action for all robots; progressive
widening caps a node's child count at ceil(c_pw * visits**alpha_pw). Child
actions are drawn either from the per-robot policy networks (with
probability beta_pi) or uniformly from the admissible action set. Leaf
values come from a value-network sample (probability beta_v) or a uniform
random playout. Values are stored from team A's perspective in [0, 1];
selection flips the sign of exploitation depending on whose turn a depth is
(the root depth belongs to the searching team, alternating below).

The same search serves two roles: a centralized "expert" over the true
joint state with a large node budget, and a decentralized "learner" that
first reconstructs the visible sub-game from one robot's observation and
searches it with a small budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nets as _nets
from .game import (ContractViolation, GameSpec, JointState, Team, game_step,
                   is_terminal, observe, project_action, reconstruct_state,
                   rollout_uniform, uniform_joint_action, value_observation)


@dataclass
class SearchConfig:
    budget: int = 500
    c_p: float = 2.0
    c_pw: float = 1.0
    alpha_pw: float = 0.25          # progressive-widening exponent
    beta_pi: float = 0.5            # frequency of network-generated expansions
    beta_v: float = 0.5             # frequency of value-network leaf estimates
    rollout_cap: int | None = None  # extra cap on playout length (horizon always applies)
    rng_seed: int = 0
    check_invariants: bool = False

    def __post_init__(self):
        if not (0.0 <= self.beta_pi <= 1.0 and 0.0 <= self.beta_v <= 1.0):
            raise ValueError("beta_pi and beta_v must lie in [0, 1]")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


def explore_exponent(depth: int) -> float:
    """Depth schedule for the selection exploration term, clamped to [0.01, 0.5].

    The raw schedule (1 - 3/(100 - 10 d))/20 blows up at depth 10; past the
    singularity the clamp floor applies.
    """
    denom = 100.0 - 10.0 * depth
    if denom == 0.0:
        return 0.01
    raw = (1.0 - 3.0 / denom) / 20.0
    return min(max(raw, 0.01), 0.5)


def widen_threshold(visits: int, cfg: SearchConfig) -> int:
    return max(1, math.ceil(cfg.c_pw * visits ** cfg.alpha_pw))


@dataclass
class NetBundle:
    """Optional policy nets (one per team) and value net used to bias the search."""

    policy_a: _nets.NetworkParameters | None = None
    policy_b: _nets.NetworkParameters | None = None
    value: _nets.NetworkParameters | None = None

    def policy_for(self, team: Team):
        return self.policy_a if team is Team.A else self.policy_b

    @property
    def has_policy(self) -> bool:
        return self.policy_a is not None or self.policy_b is not None

    @property
    def has_value(self) -> bool:
        return self.value is not None


class TreeNode:
    __slots__ = ("state", "parent", "depth", "visits", "value_sum",
                 "children", "edge_actions")

    def __init__(self, state, parent=None, depth=0):
        self.state = state
        self.parent = parent
        self.depth = depth
        self.visits = 0
        self.value_sum = 0.0
        self.children: list[TreeNode] = []
        self.edge_actions: list[np.ndarray] = []

    @property
    def mean_value(self) -> float:
        return self.value_sum / self.visits if self.visits else 0.0


@dataclass
class RootStats:
    """Per-child statistics of the root after a completed search."""

    actions: list
    visits: list
    mean_values: list
    root_visits: int

    def to_json(self) -> dict:
        return {"root_visits": self.root_visits,
                "children": [{"action": np.asarray(a).tolist(), "visits": int(n),
                              "mean_value": float(q)}
                             for a, n, q in zip(self.actions, self.visits, self.mean_values)]}


class PosgEngine:
    """Bridges the search to the game: stepping, sampling, values, networks."""

    def __init__(self, spec: GameSpec, netbundle: NetBundle | None = None):
        self.spec = spec
        self.nets = netbundle or NetBundle()

    @property
    def has_policy(self) -> bool:
        return self.nets.has_policy

    @property
    def has_value(self) -> bool:
        return self.nets.has_value

    def step(self, state, action):
        return game_step(state, action, self.spec)[0]

    def is_terminal(self, state) -> bool:
        return is_terminal(state, self.spec)

    def leaf_value(self, state) -> float:
        return state.reached_count / self.spec.team_a_count

    def uniform_joint(self, state, rng):
        return uniform_joint_action(state, self.spec, rng)

    def policy_joint(self, state, rng):
        """Per-robot policy-network samples, projected; uniform where a net is absent."""
        spec = self.spec
        actions = np.zeros((spec.n_robots, spec.action_dim))
        for i in range(spec.n_robots):
            if not state.active[i]:
                continue
            net = self.nets.policy_for(spec.team_of(i))
            if net is None:
                from .game import uniform_robot_action
                actions[i] = uniform_robot_action(spec, rng)
                continue
            out = _nets.forward(net, _nets.policy_input(observe(i, state, spec)))
            raw = _nets.sample(out, rng.standard_normal(spec.action_dim))
            actions[i] = project_action(raw, spec)
        return actions

    def value_sample(self, state, rng) -> float:
        out = _nets.forward(self.nets.value, _nets.value_input(value_observation(state, self.spec)))
        v = _nets.sample(out, rng.standard_normal(1))[0]
        return min(max(float(v), 0.0), 1.0)

    def rollout(self, state, rng, cap) -> float:
        seed = int(rng.integers(0, 2 ** 31 - 1))
        reached, _ = rollout_uniform(state, self.spec, seed, cap)
        return reached / self.spec.team_a_count


def acting_team(depth: int, root_team: Team) -> Team:
    """The root depth acts for the searching team; turns alternate below."""
    return Team((int(root_team) + depth) % 2)


def best_child(node: TreeNode, cfg: SearchConfig, root_team: Team) -> TreeNode:
    """UCB descent step: exploitation from the acting team's perspective."""
    numer = cfg.c_p * math.sqrt(node.visits ** explore_exponent(node.depth))
    flip = acting_team(node.depth, root_team) is Team.B
    best, best_score = None, -math.inf
    for child in node.children:
        q = child.value_sum / child.visits
        if flip:
            q = 1.0 - q
        score = q + numer / math.sqrt(child.visits)
        if score > best_score:
            best, best_score = child, score
    return best


def select(root: TreeNode, cfg: SearchConfig, root_team: Team, engine) -> TreeNode:
    """Descend until a node the widening rule allows to grow (or a terminal node)."""
    node = root
    while True:
        if engine.is_terminal(node.state):
            return node
        if len(node.children) < widen_threshold(node.visits, cfg):
            return node
        node = best_child(node, cfg, root_team)


def expand(node: TreeNode, engine, cfg: SearchConfig, rng: np.random.Generator) -> TreeNode:
    """Create one child via a network-sampled or uniform joint action."""
    u = rng.random()
    if u < cfg.beta_pi and engine.has_policy:
        action = engine.policy_joint(node.state, rng)
    else:
        action = engine.uniform_joint(node.state, rng)
    child = TreeNode(engine.step(node.state, action), node, node.depth + 1)
    node.children.append(child)
    node.edge_actions.append(action)
    return child


def default_policy(state, engine, cfg: SearchConfig, rng: np.random.Generator) -> float:
    """Leaf evaluation in [0, 1]: terminal short-circuit, value net, or playout."""
    if engine.is_terminal(state):
        return engine.leaf_value(state)
    if rng.random() < cfg.beta_v and engine.has_value:
        return engine.value_sample(state, rng)
    cap = cfg.rollout_cap if cfg.rollout_cap is not None else (1 << 30)
    return engine.rollout(state, rng, cap)


def backpropagate(node: TreeNode, value: float) -> None:
    while node is not None:
        node.visits += 1
        node.value_sum += value
        node = node.parent


def _assert_tree_invariants(root: TreeNode, cfg: SearchConfig, iteration: int) -> None:
    stack = [root]
    while stack:
        node = stack.pop()
        limit = max(1, math.ceil(cfg.c_pw * node.visits ** cfg.alpha_pw))
        if len(node.children) > limit:
            raise AssertionError(
                f"widening bound violated at iteration {iteration}: "
                f"{len(node.children)} children with {node.visits} visits")
        child_visits = sum(c.visits for c in node.children)
        expected = child_visits if node.parent is None else 1 + child_visits
        if node.visits != expected:
            raise AssertionError(
                f"visit bookkeeping violated at iteration {iteration}: "
                f"{node.visits} != {expected}")
        stack.extend(node.children)


def search_tree(engine, state, cfg: SearchConfig, root_team: Team = Team.A,
                rng: np.random.Generator | None = None) -> tuple[np.ndarray, RootStats]:
    """Run the full search and return (best root edge action, root statistics).

    The returned action is the edge of the most-visited root child; ties
    break on higher mean value, then insertion order. Fully deterministic
    given (state, cfg, networks, seed).
    """
    if cfg.budget < 1:
        raise ContractViolation("search budget must be >= 1")
    if engine.is_terminal(state):
        raise ContractViolation("cannot search from a terminal state")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    root = TreeNode(state)
    for it in range(cfg.budget):
        node = select(root, cfg, root_team, engine)
        child = expand(node, engine, cfg, rng)
        value = default_policy(child.state, engine, cfg, rng)
        backpropagate(child, value)
        if cfg.check_invariants:
            _assert_tree_invariants(root, cfg, it)
    best = max(range(len(root.children)),
               key=lambda i: (root.children[i].visits, root.children[i].mean_value, -i))
    stats = RootStats(
        actions=[a.copy() for a in root.edge_actions],
        visits=[c.visits for c in root.children],
        mean_values=[c.mean_value for c in root.children],
        root_visits=root.visits)
    return root.edge_actions[best].copy(), stats


def search(state: JointState, netbundle: NetBundle | None, cfg: SearchConfig,
           spec: GameSpec, team: Team = Team.A,
           rng: np.random.Generator | None = None) -> tuple[np.ndarray, RootStats]:
    """Search the full game from a joint state (see `search_tree`)."""
    return search_tree(PosgEngine(spec, netbundle), state, cfg, team, rng)


def expert_policy(state: JointState, netbundle: NetBundle | None, spec: GameSpec,
                  cfg: SearchConfig, team: Team = Team.A,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Centralized perfect-information search; returns the full joint action.

    The caller keeps its own team's sub-actions; the remaining entries are
    the search's prediction of the opposing team's response.
    """
    action, _ = search(state, netbundle, cfg, spec, team, rng)
    return action


def learner_policy(i: int, obs, netbundle: NetBundle | None, spec: GameSpec,
                   cfg: SearchConfig, reached_count: int = 0, step_index: int = 0,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Decentralized search from one robot's observation; returns its own action.

    Reconstructs the visible sub-game, searches it with the learner budget,
    and extracts robot i's sub-action from the joint result. If the
    reconstruction is unsearchable (no visible team A robot, or the horizon
    is spent) the robot holds with a zero action.
    """
    team = spec.team_of(i)
    state, idx, sub = reconstruct_state(obs, team, spec, reached_count, step_index)
    if is_terminal(state, sub):
        return np.zeros(spec.action_dim)
    action, _ = search(state, netbundle, cfg, sub, team, rng)
    return action[idx].copy()
