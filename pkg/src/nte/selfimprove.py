"""Self-improvement loop: curriculum games, self-play, expert labels, training.

Each iteration k plays decentralized learner self-play to collect states,
queries the centralized expert on those states to build visit-weighted
action labels, trains one policy network per team (robots are homogeneous),
then rolls out the fresh policies without search to label a value dataset
and trains the value network. Artifacts of an iteration (datasets,
checkpoints, loss traces) are written before the next one starts and never
touched again; lineage.json records the whole chain.

Expert labeling and self-play parallelize across states/games with
per-item seed substreams, so results do not depend on worker scheduling.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import RunConfig, config_hash
from .game import (DynamicsModel, GameSpec, JointState, RobotEvent, Team,
                   check_admissible, game_step, is_terminal, joint_state,
                   observe, project_action, terminal_value,
                   uniform_robot_action, value_observation)
from .io import (rng_for, save_checkpoint, save_dataset, save_lineage,
                 save_loss_trace, seed_for)
from .nets import (TrainingSample, forward, init_params, policy_arch,
                   policy_input, sample, train, value_arch, value_input)
from .search import NetBundle, SearchConfig, learner_policy, search

log = logging.getLogger(__name__)


@dataclass
class GameInstance:
    spec: GameSpec
    state: JointState


def worker_count() -> int:
    env = os.environ.get("NTE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _team_tag(team: Team) -> str:
    return "a" if team is Team.A else "b"


# ---------------------------------------------------------------------------
# curriculum
# ---------------------------------------------------------------------------

def _sample_placement(spec: GameSpec, rng: np.random.Generator) -> JointState | None:
    p = spec.pos_bound
    vec = np.zeros((spec.n_robots, spec.state_dim))
    for i in range(spec.n_robots):
        if spec.team_of(i) is Team.A:
            x = rng.uniform(-0.85 * p, -0.35 * p)
        else:
            x = rng.uniform(0.35 * p, 0.85 * p)
        y = rng.uniform(-0.7 * p, 0.7 * p)
        if spec.dynamics_model is DynamicsModel.DOUBLE_INTEGRATOR_2D:
            vec[i, :2] = (x, y)
        else:
            v_min, v_max = spec.dubins_speed_range
            vec[i, :3] = (x, y, rng.uniform(-0.3 * p, 0.3 * p))
            vec[i, 3] = rng.uniform(-math.pi, math.pi)
            vec[i, 6] = 0.5 * (v_min + v_max)
    state = joint_state(spec, vec)
    for i in range(spec.n_robots):
        if check_admissible(i, state, spec) is not RobotEvent.NONE:
            return None
    return state


def make_posg(curriculum, base_game: GameSpec, k: int, root_seed: int,
              count: int | None = None) -> list[GameInstance]:
    """Sample game instances: team sizes, arena size, goal, initial placement.

    Teams start on opposite sides of the arena with the goal on the
    defenders' side. Placements are rejection-sampled until admissible.
    Deterministic in (curriculum, base_game, k, root_seed).
    """
    rng = rng_for(root_seed, "posg", k)
    lo, hi = curriculum.team_size_range
    games = []
    for _ in range(count if count is not None else curriculum.games_per_iteration):
        na = int(rng.integers(lo, hi + 1))
        nb = int(rng.integers(lo, hi + 1))
        arena = float(curriculum.arena_sizes[rng.integers(len(curriculum.arena_sizes))])
        goal = [float(rng.uniform(0.25 * arena, 0.55 * arena)),
                float(rng.uniform(-0.4 * arena, 0.4 * arena))]
        if base_game.pos_dim == 3:
            goal.append(0.0)
        spec = replace(base_game, team_a_count=na, team_b_count=nb,
                       pos_bound=arena, goal_position=tuple(goal))
        state = None
        for _attempt in range(1000):
            state = _sample_placement(spec, rng)
            if state is not None:
                break
        if state is None:
            raise RuntimeError(
                f"could not place {na}v{nb} robots in a {arena} m arena after 1000 tries")
        games.append(GameInstance(spec, state))
    return games


def shared_initial_state(base_game: GameSpec, seed_keys: tuple, root_seed: int) -> JointState:
    """One admissible initial placement for a fixed spec (paired evaluation)."""
    rng = rng_for(root_seed, *seed_keys)
    for _ in range(1000):
        state = _sample_placement(base_game, rng)
        if state is not None:
            return state
    raise RuntimeError("could not place robots after 1000 tries")


# ---------------------------------------------------------------------------
# self-play state collection
# ---------------------------------------------------------------------------

def _play_learner_game(instance: GameInstance, nets: NetBundle | None,
                       cfg: SearchConfig, rng: np.random.Generator,
                       collect) -> JointState:
    """Roll one game where every active robot acts through the learner."""
    spec = instance.spec
    state = instance.state
    while not is_terminal(state, spec):
        collect(state)
        actions = np.zeros((spec.n_robots, spec.action_dim))
        for i in range(spec.n_robots):
            if not state.active[i]:
                continue
            actions[i] = learner_policy(i, observe(i, state, spec), nets, spec,
                                        cfg, state.reached_count,
                                        state.step_index, rng)
        state, _ = game_step(state, actions, spec)
    return state


def _selfplay_task(args):
    instance, nets, cfg, root_seed, k, tag, game_idx, per_game = args
    rng = rng_for(root_seed, "selfplay", k, tag, game_idx)
    traj = []
    _play_learner_game(instance, nets, cfg, rng, traj.append)
    if not traj:
        return []
    take = min(per_game, len(traj))
    picks = rng.choice(len(traj), size=take, replace=False)
    return [(instance.spec, traj[int(j)]) for j in sorted(picks)]


def self_play_states(nets: NetBundle | None, games: list[GameInstance],
                     per_game_samples: int, quota: int, cfg: SearchConfig,
                     root_seed: int, k: int = 0, tag: str = "a",
                     workers: int | None = None) -> list[tuple[GameSpec, JointState]]:
    """Collect non-terminal states visited by learner self-play.

    States are subsampled uniformly along each trajectory (t=0 eligible)
    until the quota is met or the game list is exhausted.
    """
    tasks = [(g, nets, cfg, root_seed, k, tag, i, per_game_samples)
             for i, g in enumerate(games)]
    states: list[tuple[GameSpec, JointState]] = []
    for result in _map_tasks(_selfplay_task, tasks, workers, needed=lambda: len(states) >= quota):
        states.extend(result)
        if len(states) >= quota:
            break
    if len(states) < quota:
        log.warning("self-play produced %d states for a quota of %d", len(states), quota)
    return states[:quota]


def _map_tasks(fn, tasks, workers, needed=None):
    """Ordered map over tasks, in-process or across a fork pool."""
    n_workers = workers if workers is not None else worker_count()
    if n_workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield fn(t)
            if needed is not None and needed():
                return
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for result in pool.map(fn, tasks, chunksize=max(1, len(tasks) // (8 * n_workers))):
                yield result
                if needed is not None and needed():
                    return


# ---------------------------------------------------------------------------
# expert labeling
# ---------------------------------------------------------------------------

def _label_task(args):
    spec, state, nets, cfg, team, root_seed, k, idx = args
    rng = rng_for(root_seed, "label", k, _team_tag(team), idx)
    try:
        _, stats = search(state, nets, cfg, spec, team, rng)
    except Exception as exc:  # noqa: BLE001 - a bad state skips, the run continues
        log.warning("expert search failed on state %d: %s", idx, exc)
        return []
    weights = np.asarray(stats.visits, float) / stats.root_visits
    samples = []
    lo = 0 if team is Team.A else spec.team_a_count
    hi = spec.team_a_count if team is Team.A else spec.n_robots
    for i in range(lo, hi):
        if not state.active[i]:
            continue
        label = np.zeros(spec.action_dim)
        for w, act in zip(weights, stats.actions):
            label += w * act[i]
        samples.append(TrainingSample(policy_input(observe(i, state, spec)), label))
    return samples


def build_policy_dataset(states, nets: NetBundle | None, team: Team,
                         cfg: SearchConfig, root_seed: int, k: int = 0,
                         workers: int | None = None) -> list[TrainingSample]:
    """Visit-weighted expert action labels paired with per-robot observations.

    The label for robot i is the mean of the root children's sub-actions for
    i, weighted by relative visit counts; one sample per active robot of the
    given team per state.
    """
    tasks = [(spec, state, nets, cfg, team, root_seed, k, idx)
             for idx, (spec, state) in enumerate(states)]
    samples: list[TrainingSample] = []
    for result in _map_tasks(_label_task, tasks, workers):
        samples.extend(result)
    return samples


# ---------------------------------------------------------------------------
# value dataset
# ---------------------------------------------------------------------------

def _policy_rollout_task(args):
    instance, nets, root_seed, k, game_idx = args
    spec = instance.spec
    rng = rng_for(root_seed, "value", k, game_idx)
    state = instance.state
    traj = [state]
    while not is_terminal(state, spec):
        actions = np.zeros((spec.n_robots, spec.action_dim))
        for i in range(spec.n_robots):
            if not state.active[i]:
                continue
            net = None if nets is None else nets.policy_for(spec.team_of(i))
            if net is None:
                actions[i] = uniform_robot_action(spec, rng)
            else:
                out = forward(net, policy_input(observe(i, state, spec)))
                actions[i] = project_action(
                    sample(out, rng.standard_normal(spec.action_dim)), spec)
        state, _ = game_step(state, actions, spec)
        traj.append(state)
    outcome = terminal_value(state, spec) / spec.team_a_count
    return [TrainingSample(value_input(value_observation(s, spec)), np.array([outcome]))
            for s in traj]


def build_value_dataset(nets: NetBundle | None, games: list[GameInstance],
                        quota: int, root_seed: int, k: int = 0,
                        workers: int | None = None) -> list[TrainingSample]:
    """Game outcomes labeled onto every state of direct policy-network rollouts.

    No tree search is involved: each robot samples its policy network (or a
    uniform action when no network exists yet), which makes value data cheap.
    Every state of a game carries that game's normalized terminal score.
    """
    tasks = [(g, nets, root_seed, k, i) for i, g in enumerate(games)]
    samples: list[TrainingSample] = []
    for result in _map_tasks(_policy_rollout_task, tasks, workers,
                             needed=lambda: len(samples) >= quota):
        samples.extend(result)
        if len(samples) >= quota:
            break
    if len(samples) > quota:
        rng = rng_for(root_seed, "valuesub", k)
        picks = rng.choice(len(samples), size=quota, replace=False)
        samples = [samples[int(j)] for j in sorted(picks)]
    return samples


# ---------------------------------------------------------------------------
# the meta loop
# ---------------------------------------------------------------------------

def _train_seed(root_seed: int, *keys) -> int:
    return int(seed_for(root_seed, *keys).generate_state(1)[0])


def meta_learn(run_cfg: RunConfig, out_dir, seed: int,
               workers: int | None = None) -> dict:
    """Run iterations k = 0..K of the improvement loop; returns the lineage.

    Iteration k self-plays and labels with the iteration-k networks (none at
    k=0, i.e. unbiased search everywhere), trains the k+1 policy networks
    from scratch, rolls them out for the value dataset and trains the k+1
    value network. All artifacts land under out_dir/iter_<k>.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curriculum = run_cfg.curriculum
    cfg_hash = config_hash(run_cfg)
    sd = run_cfg.game.state_dim
    ad = run_cfg.game.action_dim
    lo, hi = curriculum.team_size_range
    state_quota = math.ceil(curriculum.dataset_size / ((lo + hi) / 2))
    nets = NetBundle()
    lineage_iterations = []
    prev_paths = {"policy_a": None, "policy_b": None, "value": None}
    for k in range(curriculum.iterations + 1):
        it_dir = out_dir / f"iter_{k}"
        it_dir.mkdir(parents=True, exist_ok=True)
        games = make_posg(curriculum, run_cfg.game, k, seed)
        biased = nets.has_policy or nets.has_value
        learner_cfg = run_cfg.search.learner(biased=biased)
        expert_cfg = run_cfg.search.expert(biased=biased)
        entry = {"k": k, "datasets": {}, "checkpoints": {}, "parents": dict(prev_paths)}
        new_nets = NetBundle()
        for team in (Team.A, Team.B):
            tag = _team_tag(team)
            log.info("iteration %d: self-play for team %s", k, tag)
            states = self_play_states(None if not biased else nets, games,
                                      curriculum.per_game_samples, state_quota,
                                      learner_cfg, seed, k, tag, workers)
            log.info("iteration %d: expert labeling for team %s (%d states)",
                     k, tag, len(states))
            dataset = build_policy_dataset(states, None if not biased else nets,
                                           team, expert_cfg, seed, k, workers)
            ds_path = save_dataset(it_dir / f"policy_{tag}_dataset", dataset,
                                   policy_arch(sd, ad), kind="policy_dataset",
                                   team=tag, iteration=k, seed=seed,
                                   config_hash=cfg_hash,
                                   source={"states": len(states), "k": k})
            ds_path = ds_path.relative_to(out_dir)
            params0 = init_params(policy_arch(sd, ad), _train_seed(seed, "init", k, tag))
            result = train(params0, dataset, run_cfg.train.epochs,
                           run_cfg.train.batch_size, run_cfg.train.learning_rate,
                           run_cfg.train.momentum, _train_seed(seed, "train", k, tag))
            save_loss_trace(it_dir / f"policy_{tag}_loss.csv", result.trace)
            ck_path = save_checkpoint(it_dir / f"policy_{tag}", result.params,
                                      role="policy", team=tag, iteration=k + 1,
                                      seed=seed, config_hash=cfg_hash,
                                      parents={"checkpoint": prev_paths[f"policy_{tag}"]},
                                      datasets=[str(ds_path)]).relative_to(out_dir)
            entry["datasets"][f"policy_{tag}"] = str(ds_path)
            entry["checkpoints"][f"policy_{tag}"] = str(ck_path)
            if team is Team.A:
                new_nets.policy_a = result.params
            else:
                new_nets.policy_b = result.params
        log.info("iteration %d: value rollouts", k)
        value_data = build_value_dataset(new_nets, games, curriculum.dataset_size,
                                         seed, k, workers)
        ds_path = save_dataset(it_dir / "value_dataset", value_data, value_arch(sd),
                               kind="value_dataset", team=None, iteration=k,
                               seed=seed, config_hash=cfg_hash,
                               source={"games": len(games), "k": k}).relative_to(out_dir)
        params0 = init_params(value_arch(sd), _train_seed(seed, "init", k, "v"))
        result = train(params0, value_data, run_cfg.train.epochs,
                       run_cfg.train.batch_size, run_cfg.train.learning_rate,
                       run_cfg.train.momentum, _train_seed(seed, "train", k, "v"))
        save_loss_trace(it_dir / "value_loss.csv", result.trace)
        ck_path = save_checkpoint(it_dir / "value", result.params, role="value",
                                  team=None, iteration=k + 1, seed=seed,
                                  config_hash=cfg_hash,
                                  parents={"checkpoint": prev_paths["value"]},
                                  datasets=[str(ds_path)]).relative_to(out_dir)
        new_nets.value = result.params
        entry["datasets"]["value"] = str(ds_path)
        entry["checkpoints"]["value"] = str(ck_path)
        lineage_iterations.append(entry)
        prev_paths = {
            "policy_a": entry["checkpoints"]["policy_a"],
            "policy_b": entry["checkpoints"]["policy_b"],
            "value": entry["checkpoints"]["value"],
        }
        save_lineage(out_dir / "lineage.json", seed=seed, config_hash=cfg_hash,
                     iterations=lineage_iterations)
        nets = new_nets
        log.info("iteration %d complete", k)
    return {"kind": "lineage", "seed": seed, "config_hash": cfg_hash,
            "iterations": lineage_iterations}


def load_iteration_nets(out_dir, k: int) -> NetBundle:
    """Networks after k learning iterations (k >= 1), resolved via lineage.json."""
    from .io import load_checkpoint, load_lineage
    if k < 1:
        return NetBundle()
    lineage = load_lineage(Path(out_dir) / "lineage.json")
    root = Path(out_dir)
    for entry in lineage["iterations"]:
        if entry["k"] == k - 1:
            cks = entry["checkpoints"]
            return NetBundle(
                policy_a=load_checkpoint(root / cks["policy_a"])[0],
                policy_b=load_checkpoint(root / cks["policy_b"])[0],
                value=load_checkpoint(root / cks["value"])[0])
    raise ValueError(f"lineage in {out_dir} has no iteration producing k={k} networks")
