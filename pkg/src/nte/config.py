"""Run configuration: schema, profile presets, parsing and hashing.

A run config is one JSON document with sections game / search / curriculum /
train / paths on top of a named profile preset. Unknown keys are rejected
with their full path; validation failures name the offending field the same
way (e.g. "game.tag_radius").
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field

from .game import GameSpec
from .search import SearchConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SearchParams:
    l_expert: int = 10_000
    l_learner: int = 500
    c_p: float = 2.0
    c_pw: float = 1.0
    alpha_pw: float = 0.25
    beta_pi: float = 0.5
    beta_v: float = 0.5
    rollout_cap: int | None = None

    def expert(self, *, biased: bool, seed: int = 0, budget: int | None = None) -> SearchConfig:
        return self._cfg(budget or self.l_expert, biased, seed)

    def learner(self, *, biased: bool, seed: int = 0, budget: int | None = None) -> SearchConfig:
        return self._cfg(budget or self.l_learner, biased, seed)

    def _cfg(self, budget: int, biased: bool, seed: int) -> SearchConfig:
        return SearchConfig(
            budget=budget, c_p=self.c_p, c_pw=self.c_pw, alpha_pw=self.alpha_pw,
            beta_pi=self.beta_pi if biased else 0.0,
            beta_v=self.beta_v if biased else 0.0,
            rollout_cap=self.rollout_cap, rng_seed=seed)


@dataclass(frozen=True)
class CurriculumSpec:
    team_size_range: tuple = (1, 5)
    arena_sizes: tuple = (1.0, 2.0, 3.0)
    games_per_iteration: int = 300
    iterations: int = 2              # meta loop runs k = 0..iterations inclusive
    dataset_size: int = 80_000
    per_game_samples: int = 40
    opponent_pool: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "team_size_range", tuple(int(x) for x in self.team_size_range))
        object.__setattr__(self, "arena_sizes", tuple(float(x) for x in self.arena_sizes))
        object.__setattr__(self, "opponent_pool", tuple(self.opponent_pool))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 1028
    learning_rate: float = 1e-3
    momentum: float = 0.9


@dataclass(frozen=True)
class PathsConfig:
    output_dir: str = "nte_out"
    checkpoint_dir: str | None = None

    def resolved_checkpoint_dir(self) -> str:
        return self.checkpoint_dir or self.output_dir


@dataclass(frozen=True)
class RunConfig:
    game: GameSpec = field(default_factory=GameSpec)
    search: SearchParams = field(default_factory=SearchParams)
    curriculum: CurriculumSpec = field(default_factory=CurriculumSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    profile: str = "desk_scale"


PROFILES: dict[str, dict] = {
    "paper_defaults": {
        "game": {
            "team_a_count": 3, "team_b_count": 2, "pos_bound": 3.0,
            "vel_bound": 1.0, "acc_bound": 2.0, "tag_radius": 0.2,
            "collision_radius": 0.1, "sense_radius": 2.0, "goal_radius": 0.2,
            "goal_position": [1.5, 0.0], "timestep": 0.1, "horizon": 300,
            "dynamics_model": "double_integrator_2d", "obstacles": [],
            "dubins_gravity": 0.98, "dubins_rate_bound": 0.6283185307179586,
            "dubins_speed_range": [0.5, 2.0],
        },
        "search": {
            "l_expert": 10_000, "l_learner": 500, "c_p": 2.0, "c_pw": 1.0,
            "alpha_pw": 0.25, "beta_pi": 0.5, "beta_v": 0.5, "rollout_cap": None,
        },
        "curriculum": {
            "team_size_range": [1, 5], "arena_sizes": [1.0, 2.0, 3.0],
            "games_per_iteration": 300, "iterations": 2,
            "dataset_size": 80_000, "per_game_samples": 40, "opponent_pool": [],
        },
        "train": {"epochs": 300, "batch_size": 1028, "learning_rate": 1e-3,
                  "momentum": 0.9},
        "paths": {"output_dir": "nte_out", "checkpoint_dir": None},
    },
    "desk_scale": {
        "game": {
            "team_a_count": 1, "team_b_count": 1, "pos_bound": 1.0,
            "vel_bound": 1.0, "acc_bound": 2.0, "tag_radius": 0.2,
            "collision_radius": 0.1, "sense_radius": 2.0, "goal_radius": 0.2,
            "goal_position": [0.3, 0.0], "timestep": 0.1, "horizon": 300,
            "dynamics_model": "double_integrator_2d", "obstacles": [],
            "dubins_gravity": 0.98, "dubins_rate_bound": 0.6283185307179586,
            "dubins_speed_range": [0.5, 2.0],
        },
        "search": {
            "l_expert": 1000, "l_learner": 500, "c_p": 2.0, "c_pw": 1.0,
            "alpha_pw": 0.25, "beta_pi": 0.5, "beta_v": 0.5, "rollout_cap": None,
        },
        "curriculum": {
            "team_size_range": [1, 1], "arena_sizes": [1.0],
            "games_per_iteration": 400, "iterations": 2,
            "dataset_size": 5000, "per_game_samples": 40, "opponent_pool": [],
        },
        "train": {"epochs": 150, "batch_size": 256, "learning_rate": 1e-3,
                  "momentum": 0.9},
        "paths": {"output_dir": "nte_out", "checkpoint_dir": None},
    },
}

_SECTIONS = ("game", "search", "curriculum", "train", "paths")


def _merge(base: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path} {message}")


def parse_config(document=None) -> RunConfig:
    """Validate a JSON document (dict, JSON string or None) into a RunConfig."""
    if document is None:
        document = {}
    if isinstance(document, str):
        document = json.loads(document)
    if not isinstance(document, dict):
        raise ConfigError("config document must be a JSON object")
    document = copy.deepcopy(document)
    profile = document.pop("profile", "desk_scale")
    if profile not in PROFILES:
        raise ConfigError(f"profile must be one of {sorted(PROFILES)}, got {profile!r}")
    base = {sec: copy.deepcopy(PROFILES[profile][sec]) for sec in _SECTIONS}
    merged = _merge(base, document, "")

    g = merged["game"]
    try:
        game = GameSpec(**g)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"game.{exc}") from exc

    s = merged["search"]
    _require(int(s["l_expert"]) >= 1, "search.l_expert", "must be >= 1")
    _require(int(s["l_learner"]) >= 1, "search.l_learner", "must be >= 1")
    _require(s["c_p"] >= 0, "search.c_p", "must be >= 0")
    _require(s["c_pw"] > 0, "search.c_pw", "must be > 0")
    _require(0 < s["alpha_pw"] <= 1, "search.alpha_pw", "must lie in (0, 1]")
    _require(0 <= s["beta_pi"] <= 1, "search.beta_pi", "must lie in [0, 1]")
    _require(0 <= s["beta_v"] <= 1, "search.beta_v", "must lie in [0, 1]")
    if s["rollout_cap"] is not None:
        _require(int(s["rollout_cap"]) >= 1, "search.rollout_cap", "must be >= 1 or null")
    search = SearchParams(
        l_expert=int(s["l_expert"]), l_learner=int(s["l_learner"]),
        c_p=float(s["c_p"]), c_pw=float(s["c_pw"]), alpha_pw=float(s["alpha_pw"]),
        beta_pi=float(s["beta_pi"]), beta_v=float(s["beta_v"]),
        rollout_cap=None if s["rollout_cap"] is None else int(s["rollout_cap"]))

    c = merged["curriculum"]
    _require(len(c["team_size_range"]) == 2, "curriculum.team_size_range", "must be [lo, hi]")
    lo, hi = (int(x) for x in c["team_size_range"])
    _require(1 <= lo <= hi, "curriculum.team_size_range", "must satisfy 1 <= lo <= hi")
    _require(len(c["arena_sizes"]) > 0, "curriculum.arena_sizes", "must be nonempty")
    _require(all(x > 0 for x in c["arena_sizes"]), "curriculum.arena_sizes", "must be positive")
    _require(int(c["games_per_iteration"]) >= 1, "curriculum.games_per_iteration", "must be >= 1")
    _require(int(c["iterations"]) >= 0, "curriculum.iterations", "must be >= 0")
    _require(int(c["dataset_size"]) > 0, "curriculum.dataset_size", "must be > 0")
    _require(int(c["per_game_samples"]) >= 1, "curriculum.per_game_samples", "must be >= 1")
    curriculum = CurriculumSpec(
        team_size_range=(lo, hi), arena_sizes=tuple(c["arena_sizes"]),
        games_per_iteration=int(c["games_per_iteration"]),
        iterations=int(c["iterations"]), dataset_size=int(c["dataset_size"]),
        per_game_samples=int(c["per_game_samples"]),
        opponent_pool=tuple(c["opponent_pool"]))

    t = merged["train"]
    _require(int(t["epochs"]) >= 0, "train.epochs", "must be >= 0")
    _require(int(t["batch_size"]) >= 1, "train.batch_size", "must be >= 1")
    _require(t["learning_rate"] > 0, "train.learning_rate", "must be > 0")
    _require(0 <= t["momentum"] < 1, "train.momentum", "must lie in [0, 1)")
    train = TrainConfig(int(t["epochs"]), int(t["batch_size"]),
                        float(t["learning_rate"]), float(t["momentum"]))

    p = merged["paths"]
    paths = PathsConfig(str(p["output_dir"]),
                        None if p["checkpoint_dir"] is None else str(p["checkpoint_dir"]))
    return RunConfig(game, search, curriculum, train, paths, profile)


def serialize_config(cfg: RunConfig) -> dict:
    """Canonical JSON form; parse_config(serialize_config(cfg)) == cfg."""
    game = asdict(cfg.game)
    game["dynamics_model"] = cfg.game.dynamics_model.value
    game["goal_position"] = list(cfg.game.goal_position)
    game["dubins_speed_range"] = list(cfg.game.dubins_speed_range)
    game["obstacles"] = [[list(ctr), r] for ctr, r in cfg.game.obstacles]
    return {
        "profile": cfg.profile,
        "game": game,
        "search": asdict(cfg.search),
        "curriculum": {**asdict(cfg.curriculum),
                       "team_size_range": list(cfg.curriculum.team_size_range),
                       "arena_sizes": list(cfg.curriculum.arena_sizes),
                       "opponent_pool": list(cfg.curriculum.opponent_pool)},
        "train": asdict(cfg.train),
        "paths": asdict(cfg.paths),
    }


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(serialize_config(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
