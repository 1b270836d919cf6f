"""Tournament evaluation of policy variants with paired initial conditions.

Every (attacker variant, defender variant, seed) triple is rolled out; the
initial state for a seed is shared bit-identically across all variant pairs
so comparisons are paired. Learner variants act per robot from local
observations; expert variants run one centralized search per team per step;
the random variant samples uniformly. Decision wall-clock is logged per
variant so latency excludes the opponent's thinking time.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .game import (GameSpec, JointState, Team, game_step, is_terminal,
                   observe, uniform_robot_action)
from .io import FLOAT_FMT, rng_for
from .search import NetBundle, SearchConfig, learner_policy, search

log = logging.getLogger(__name__)

KINDS = ("learner", "expert", "random")


@dataclass
class Variant:
    """One policy under evaluation; k=0 means unbiased (no networks)."""

    name: str
    kind: str                      # learner | expert | random
    k: int = 0
    budget: int | None = None
    nets: NetBundle | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"variant kind must be one of {KINDS}, got {self.kind!r}")
        if self.k > 0 and self.nets is None:
            raise ValueError(f"variant {self.name}: k={self.k} requires checkpoints")

    def search_config(self, params) -> SearchConfig:
        biased = self.k > 0
        if self.kind == "expert":
            return params.expert(biased=biased, budget=self.budget)
        return params.learner(biased=biased, budget=self.budget)


def variant_from_json(doc: dict, search_params, ckpt_root=None) -> Variant:
    kind = doc.get("kind", "learner")
    k = int(doc.get("k", 0))
    name = doc.get("name") or (f"{kind}_k{k}" if kind != "random" else "random")
    nets = None
    if k > 0:
        from .selfimprove import load_iteration_nets
        if ckpt_root is None:
            raise ValueError(f"variant {name}: biased variants need a checkpoint root")
        nets = load_iteration_nets(ckpt_root, k)
    budget = doc.get("budget")
    return Variant(name, kind, k, None if budget is None else int(budget), nets)


@dataclass
class MatchResult:
    attacker: str
    defender: str
    seed: int
    n_rg: int
    steps: int
    team_a_count: int
    attacker_ms: list = field(default_factory=list)
    defender_ms: list = field(default_factory=list)

    @property
    def attacker_score(self) -> float:
        return self.n_rg / self.team_a_count

    @property
    def defender_score(self) -> float:
        return 1.0 - self.n_rg / self.team_a_count

    def to_json(self) -> dict:
        return {"attacker": self.attacker, "defender": self.defender,
                "seed": self.seed, "n_rg": self.n_rg, "steps": self.steps,
                "team_a_count": self.team_a_count,
                "attacker_ms": [round(x, 4) for x in self.attacker_ms],
                "defender_ms": [round(x, 4) for x in self.defender_ms]}


def performance_score(result: MatchResult, side: Team) -> float:
    """Attackers score the reached fraction; defenders one minus it."""
    return result.attacker_score if side is Team.A else result.defender_score


def _team_actions(variant: Variant, team: Team, state: JointState, spec: GameSpec,
                  params, rng, clock: list) -> np.ndarray:
    lo = 0 if team is Team.A else spec.team_a_count
    hi = spec.team_a_count if team is Team.A else spec.n_robots
    actions = np.zeros((spec.n_robots, spec.action_dim))
    if variant.kind == "random":
        t0 = time.perf_counter()
        for i in range(lo, hi):
            if state.active[i]:
                actions[i] = uniform_robot_action(spec, rng)
        clock.append((time.perf_counter() - t0) * 1e3)
        return actions
    cfg = variant.search_config(params)
    if variant.kind == "expert":
        t0 = time.perf_counter()
        joint, _ = search(state, variant.nets, cfg, spec, team, rng)
        clock.append((time.perf_counter() - t0) * 1e3)
        actions[lo:hi] = joint[lo:hi]
        return actions
    for i in range(lo, hi):
        if not state.active[i]:
            continue
        t0 = time.perf_counter()
        actions[i] = learner_policy(i, observe(i, state, spec), variant.nets,
                                    spec, cfg, state.reached_count,
                                    state.step_index, rng)
        clock.append((time.perf_counter() - t0) * 1e3)
    return actions


def play_match(attacker: Variant, defender: Variant, spec: GameSpec,
               initial: JointState, params, seed: int, root_seed: int,
               on_step=None) -> MatchResult:
    """Roll one game between two variants from a shared initial state."""
    rng_a = rng_for(root_seed, "match", attacker.name, defender.name, seed, "a")
    rng_b = rng_for(root_seed, "match", attacker.name, defender.name, seed, "b")
    state = initial.copy()
    result = MatchResult(attacker.name, defender.name, seed, 0, 0, spec.team_a_count)
    while not is_terminal(state, spec):
        act = _team_actions(attacker, Team.A, state, spec, params, rng_a,
                            result.attacker_ms)
        act += _team_actions(defender, Team.B, state, spec, params, rng_b,
                             result.defender_ms)
        state, events = game_step(state, act, spec)
        if on_step is not None:
            on_step(state, act, events)
    result.n_rg = state.reached_count
    result.steps = state.step_index - initial.step_index
    return result


def _match_task(args):
    attacker, defender, spec, initial, params, seed, root_seed = args
    try:
        return play_match(attacker, defender, spec, initial, params, seed, root_seed)
    except Exception as exc:  # noqa: BLE001 - tournaments record and continue
        log.warning("match %s vs %s seed %d failed: %s",
                    attacker.name, defender.name, seed, exc)
        return MatchResult(attacker.name, defender.name, seed, -1, 0, spec.team_a_count)


def run_tournament(variants_a: list[Variant], variants_b: list[Variant],
                   n_seeds: int, spec: GameSpec, params, root_seed: int = 0,
                   workers: int | None = None) -> list[MatchResult]:
    """Every (attacker, defender, seed) combination with paired initial states."""
    if not variants_a or not variants_b:
        raise ValueError("both variant lists must be nonempty")
    from .selfimprove import shared_initial_state, worker_count
    initials = {s: shared_initial_state(spec, ("arena_init", s), root_seed)
                for s in range(n_seeds)}
    tasks = [(va, vb, spec, initials[s], params, s, root_seed)
             for va in variants_a for vb in variants_b for s in range(n_seeds)]
    n_workers = workers if workers is not None else worker_count()
    if n_workers <= 1 or len(tasks) <= 1:
        results = [_match_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_match_task, tasks, chunksize=1))
    failed = [r for r in results if r.n_rg < 0]
    if failed:
        log.warning("%d of %d matches failed", len(failed), len(results))
    return results


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

PLOT_COLUMNS = ("variant", "role", "k", "mean_score", "var_score",
                "n_games", "p50_ms", "p95_ms")


def export_plot_data(results: list[MatchResult],
                     variants_a: list[Variant], variants_b: list[Variant]) -> list[dict]:
    """Aggregate per (variant, role): mean/population-variance score and latency."""
    rows = []
    for role, variants, side in (("attacker", variants_a, Team.A),
                                 ("defender", variants_b, Team.B)):
        for v in variants:
            mine = [r for r in results
                    if (r.attacker if side is Team.A else r.defender) == v.name]
            if not mine:
                continue
            scores = np.array([performance_score(r, side) for r in mine])
            lat = np.concatenate([np.asarray(r.attacker_ms if side is Team.A
                                             else r.defender_ms) for r in mine]) \
                if any((r.attacker_ms if side is Team.A else r.defender_ms) for r in mine) \
                else np.zeros(1)
            rows.append({
                "variant": v.name, "role": role, "k": v.k,
                "mean_score": float(scores.mean()),
                "var_score": float(scores.var()),
                "n_games": len(mine),
                "p50_ms": float(np.percentile(lat, 50)),
                "p95_ms": float(np.percentile(lat, 95)),
            })
    return rows


def _fmt(x) -> str:
    if isinstance(x, float):
        return FLOAT_FMT % x
    return str(x)


def write_plot_csv(rows: list[dict], path, cfg_hash: str) -> Path:
    path = Path(path)
    lines = [f"# config_hash={cfg_hash}", ",".join(PLOT_COLUMNS)]
    lines += [",".join(_fmt(row[c]) for c in PLOT_COLUMNS) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


RESULT_COLUMNS = ("attacker", "defender", "seed", "n_rg", "steps",
                  "attacker_score", "defender_score")


def write_results_csv(results: list[MatchResult], path, cfg_hash: str) -> Path:
    """Deterministic per-match table (no wall-clock columns)."""
    path = Path(path)
    lines = [f"# config_hash={cfg_hash}", ",".join(RESULT_COLUMNS)]
    for r in results:
        lines.append(",".join([r.attacker, r.defender, str(r.seed), str(r.n_rg),
                               str(r.steps), _fmt(r.attacker_score),
                               _fmt(r.defender_score)]))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_results_jsonl(results: list[MatchResult], path, cfg_hash: str) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(json.dumps({"kind": "match_log", "config_hash": cfg_hash}) + "\n")
        for r in results:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    return path
