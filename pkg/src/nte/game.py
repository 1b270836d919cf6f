"""Two-team reach-avoid game environment.

Team A robots score by entering the goal region; team B robots defend by
tagging them first. Robots leave play ("inactive") when tagged, when they
reach the goal, or when they violate the admissible-space constraints
(position/velocity bounds, pairwise collisions, static obstacles). Inactive
robots are frozen forever. The transition is deterministic: one joint action
per step, explicit Euler integration, simultaneous adjudication of all rules
on the post-step state.

Two dynamics models are supported: a planar double integrator and a 3D
fixed-wing (Dubins-style) vehicle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import kernels
from .kernels import EV_NONE, EV_REACHED, EV_TAGGED, EV_VIOLATED


class ContractViolation(ValueError):
    """An operation was called outside its stated contract."""


class Team(enum.IntEnum):
    A = 0
    B = 1


class DynamicsModel(str, enum.Enum):
    DOUBLE_INTEGRATOR_2D = "double_integrator_2d"
    DUBINS_3D = "dubins_3d"

    @property
    def state_dim(self) -> int:
        return 4 if self is DynamicsModel.DOUBLE_INTEGRATOR_2D else 7

    @property
    def action_dim(self) -> int:
        return 2 if self is DynamicsModel.DOUBLE_INTEGRATOR_2D else 3

    @property
    def pos_dim(self) -> int:
        return 2 if self is DynamicsModel.DOUBLE_INTEGRATOR_2D else 3

    @property
    def code(self) -> int:
        return kernels.DYN_DI2D if self is DynamicsModel.DOUBLE_INTEGRATOR_2D else kernels.DYN_DUBINS3D


class RobotEvent(enum.IntEnum):
    NONE = EV_NONE
    REACHED = EV_REACHED
    TAGGED = EV_TAGGED
    VIOLATED = EV_VIOLATED


@dataclass(frozen=True)
class GameSpec:
    """All physical and game parameters. Units: meters, seconds, radians."""

    team_a_count: int = 1
    team_b_count: int = 1
    pos_bound: float = 1.0          # half-width of the square/cube arena
    vel_bound: float = 1.0
    acc_bound: float = 2.0
    tag_radius: float = 0.2
    collision_radius: float = 0.1
    sense_radius: float = 2.0
    goal_radius: float = 0.2
    goal_position: tuple = (0.3, 0.0)
    timestep: float = 0.1
    horizon: int = 300
    dynamics_model: DynamicsModel = DynamicsModel.DOUBLE_INTEGRATOR_2D
    obstacles: tuple = ()           # ((center...), radius) pairs
    dubins_gravity: float = 0.98
    dubins_rate_bound: float = math.radians(36.0)
    dubins_speed_range: tuple = (0.5, 2.0)

    def __post_init__(self):
        if isinstance(self.dynamics_model, str):
            object.__setattr__(self, "dynamics_model", DynamicsModel(self.dynamics_model))
        object.__setattr__(self, "goal_position", tuple(float(x) for x in self.goal_position))
        object.__setattr__(self, "dubins_speed_range", tuple(float(x) for x in self.dubins_speed_range))
        object.__setattr__(
            self, "obstacles",
            tuple((tuple(float(c) for c in ctr), float(r)) for ctr, r in self.obstacles))
        for name in ("tag_radius", "collision_radius", "sense_radius", "goal_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.collision_radius >= self.tag_radius:
            raise ValueError("collision_radius must be < tag_radius")
        if self.timestep <= 0:
            raise ValueError("timestep must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.team_a_count < 0 or self.team_b_count < 0 or self.n_robots == 0:
            raise ValueError("team counts must be nonnegative and sum to >= 1")
        if self.pos_bound <= 0 or self.vel_bound <= 0 or self.acc_bound <= 0:
            raise ValueError("pos_bound, vel_bound and acc_bound must be > 0")
        if len(self.goal_position) != self.dynamics_model.pos_dim:
            raise ValueError("goal_position dimension does not match dynamics_model")
        if self.dynamics_model is DynamicsModel.DUBINS_3D:
            v_min, v_max = self.dubins_speed_range
            if v_min <= 0 or v_max < v_min:
                raise ValueError("dubins_speed_range must satisfy 0 < v_min <= v_max")
            if self.dubins_rate_bound <= 0:
                raise ValueError("dubins_rate_bound must be > 0")

    @property
    def n_robots(self) -> int:
        return self.team_a_count + self.team_b_count

    @property
    def state_dim(self) -> int:
        return self.dynamics_model.state_dim

    @property
    def action_dim(self) -> int:
        return self.dynamics_model.action_dim

    @property
    def pos_dim(self) -> int:
        return self.dynamics_model.pos_dim

    @property
    def bank_bound(self) -> float:
        return math.radians(60.0)

    def team_of(self, i: int) -> Team:
        return Team.A if i < self.team_a_count else Team.B

    @cached_property
    def goal_embed(self) -> np.ndarray:
        """Goal position embedded in the robot state space (zeros elsewhere)."""
        g = np.zeros(self.state_dim)
        g[: self.pos_dim] = self.goal_position
        return g

    @cached_property
    def _goal3(self) -> np.ndarray:
        g = np.zeros(3)
        g[: self.pos_dim] = self.goal_position
        return g

    @cached_property
    def _obstacles_arr(self) -> np.ndarray:
        arr = np.zeros((len(self.obstacles), 4))
        for m, (ctr, r) in enumerate(self.obstacles):
            arr[m, : len(ctr)] = ctr
            arr[m, 3] = r
        return arr


@dataclass
class RobotState:
    vector: np.ndarray
    active: bool = True
    team: Team = Team.A


@dataclass
class JointState:
    """States of all robots (team A rows first), plus step/score bookkeeping."""

    vectors: np.ndarray            # (n_robots, state_dim)
    active: np.ndarray             # (n_robots,) bool
    step_index: int = 0
    reached_count: int = 0

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def copy(self) -> "JointState":
        return JointState(self.vectors.copy(), self.active.copy(),
                          self.step_index, self.reached_count)

    def robot(self, i: int, spec: GameSpec) -> RobotState:
        return RobotState(self.vectors[i].copy(), bool(self.active[i]), spec.team_of(i))


@dataclass(frozen=True)
class StepEvents:
    reached: tuple = ()
    tagged: tuple = ()
    violated: tuple = ()
    terminal: bool = False


@dataclass
class Observation:
    """Relative-state measurement of one robot (goal plus per-team neighbor sets)."""

    goal_relative: np.ndarray      # (state_dim,)
    neighbors_a: np.ndarray        # (n_a, state_dim) relative states
    neighbors_b: np.ndarray        # (n_b, state_dim)


@dataclass
class ValueObservation:
    """Goal-relative set encoding of the whole game used by the value network."""

    set_a: np.ndarray              # (n_a, state_dim), s_j - goal_embed, active A robots
    set_b: np.ndarray
    reached_count: int


def joint_state(spec: GameSpec, vectors, active=None, step_index=0, reached_count=0) -> JointState:
    vectors = np.asarray(vectors, dtype=float)
    if vectors.shape != (spec.n_robots, spec.state_dim):
        raise ContractViolation(
            f"expected vectors of shape {(spec.n_robots, spec.state_dim)}, got {vectors.shape}")
    if active is None:
        active = np.ones(spec.n_robots, dtype=bool)
    return JointState(vectors.copy(), np.asarray(active, dtype=bool).copy(),
                      step_index, reached_count)


# ---------------------------------------------------------------------------
# dynamics (reference, per-robot)
# ---------------------------------------------------------------------------

def step_double_integrator(state: RobotState, accel, dt: float) -> RobotState:
    """One Euler step of the planar double integrator: p' = p + v dt, v' = v + a dt."""
    if not state.active:
        raise ContractViolation("cannot step an inactive robot")
    accel = np.asarray(accel, dtype=float)
    if state.vector.shape != (4,) or accel.shape != (2,):
        raise ContractViolation("double integrator expects a 4-vector state and 2-vector action")
    out = state.vector.copy()
    out[0:2] += out[2:4] * dt
    out[2:4] += accel * dt
    return RobotState(out, state.active, state.team)


def step_dubins3d(state: RobotState, action, dt: float, spec: GameSpec) -> RobotState:
    """One Euler step of the 3D fixed-wing model.

    State is [x, y, z, heading, flight-path angle, bank angle, speed]; the
    action commands the three rates [d(flight path), d(bank), d(speed)].
    Speed is projected into the configured range and bank into its bound
    after the step; z decreases when the flight-path angle is positive.
    """
    if not state.active:
        raise ContractViolation("cannot step an inactive robot")
    action = np.asarray(action, dtype=float)
    if state.vector.shape != (7,) or action.shape != (3,):
        raise ContractViolation("dubins model expects a 7-vector state and 3-vector action")
    x, y, z, psi, gam, phi, v = state.vector
    if v <= 0:
        raise ContractViolation("dubins speed must be > 0")
    v_min, v_max = spec.dubins_speed_range
    out = np.empty(7)
    out[0] = x + v * math.cos(gam) * math.sin(psi) * dt
    out[1] = y + v * math.cos(gam) * math.cos(psi) * dt
    out[2] = z - v * math.sin(gam) * dt
    out[3] = psi + (spec.dubins_gravity / v) * math.tan(phi) * dt
    out[4] = gam + action[0] * dt
    out[5] = min(max(phi + action[1] * dt, -spec.bank_bound), spec.bank_bound)
    out[6] = min(max(v + action[2] * dt, v_min), v_max)
    return RobotState(out, state.active, state.team)


def step_robot(state: RobotState, action, spec: GameSpec) -> RobotState:
    if spec.dynamics_model is DynamicsModel.DOUBLE_INTEGRATOR_2D:
        return step_double_integrator(state, action, spec.timestep)
    return step_dubins3d(state, action, spec.timestep, spec)


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------

def check_admissible(i: int, state: JointState, spec: GameSpec) -> RobotEvent:
    """Classify robot i against the current joint state.

    Precedence for team A robots: reached > tagged > violated; a robot that
    reaches the goal this step scores even if simultaneously in tag range.
    Only active robots participate in tag/collision pair checks. Comparisons
    are on squared distances, matching the fast kernel bit for bit.
    """
    if not state.active[i]:
        raise ContractViolation("check_admissible expects an active robot")
    pd = spec.pos_dim
    vec = state.vectors
    p = vec[i, :pd]
    if spec.team_of(i) is Team.A:
        d2 = float(np.sum((p - spec._goal3[:pd]) ** 2))
        if d2 <= spec.goal_radius ** 2:
            return RobotEvent.REACHED
        for j in range(spec.team_a_count, spec.n_robots):
            if not state.active[j]:
                continue
            d2 = float(np.sum((vec[j, :pd] - p) ** 2))
            if d2 <= spec.tag_radius ** 2:
                return RobotEvent.TAGGED
    if np.max(np.abs(p)) > spec.pos_bound:
        return RobotEvent.VIOLATED
    if spec.dynamics_model is DynamicsModel.DOUBLE_INTEGRATOR_2D:
        if vec[i, 2] ** 2 + vec[i, 3] ** 2 > spec.vel_bound ** 2:
            return RobotEvent.VIOLATED
    else:
        if vec[i, 6] > spec.vel_bound:
            return RobotEvent.VIOLATED
    for j in range(spec.n_robots):
        if j == i or not state.active[j]:
            continue
        d2 = float(np.sum((vec[j, :pd] - p) ** 2))
        if d2 <= spec.collision_radius ** 2:
            return RobotEvent.VIOLATED
    for ctr, r in spec.obstacles:
        d2 = float(np.sum((p - np.asarray(ctr)) ** 2))
        if d2 <= r ** 2:
            return RobotEvent.VIOLATED
    return RobotEvent.NONE


def is_terminal(state: JointState, spec: GameSpec) -> bool:
    """Terminal iff every team A robot is inactive or the horizon is spent."""
    if state.step_index >= spec.horizon:
        return True
    return not bool(state.active[: spec.team_a_count].any())


def game_step(state: JointState, actions, spec: GameSpec) -> tuple[JointState, StepEvents]:
    """Advance the joint state by one step.

    Active robots are propagated with the configured dynamics, then all rules
    are adjudicated simultaneously on the post-step state; deactivations and
    the reached-goal count are applied afterwards. Actions of inactive robots
    are ignored. Stepping a terminal state only advances the step counter.
    """
    actions = np.asarray(actions, dtype=float)
    if actions.shape != (spec.n_robots, spec.action_dim):
        raise ContractViolation(
            f"expected actions of shape {(spec.n_robots, spec.action_dim)}, got {actions.shape}")
    if is_terminal(state, spec):
        nxt = state.copy()
        nxt.step_index += 1
        return nxt, StepEvents(terminal=True)
    vec = state.vectors.copy()
    active = state.active.copy()
    v_min, v_max = spec.dubins_speed_range
    kernels.step_robots(vec, active, actions, spec.dynamics_model.code, spec.timestep,
                        spec.dubins_gravity, v_min, v_max, spec.bank_bound)
    events = np.empty(spec.n_robots, dtype=np.int8)
    kernels.adjudicate(vec, active, spec.team_a_count, spec.dynamics_model.code,
                       spec.pos_bound, spec.vel_bound, spec.tag_radius,
                       spec.collision_radius, spec.goal_radius, spec._goal3,
                       spec._obstacles_arr, events)
    reached = tuple(int(i) for i in np.flatnonzero(events == EV_REACHED))
    tagged = tuple(int(i) for i in np.flatnonzero(events == EV_TAGGED))
    violated = tuple(int(i) for i in np.flatnonzero(events == EV_VIOLATED))
    active[events != EV_NONE] = False
    nxt = JointState(vec, active, state.step_index + 1, state.reached_count + len(reached))
    return nxt, StepEvents(reached, tagged, violated, is_terminal(nxt, spec))


def terminal_value(state: JointState, spec: GameSpec) -> int:
    """Number of team A robots that reached the goal; only valid at terminal states."""
    if not is_terminal(state, spec):
        raise ContractViolation("terminal_value called on a non-terminal state")
    return state.reached_count


# ---------------------------------------------------------------------------
# observations
# ---------------------------------------------------------------------------

def observe(i: int, state: JointState, spec: GameSpec) -> Observation:
    """Relative observation of robot i: goal and all active robots in sense range."""
    if not state.active[i]:
        raise ContractViolation("observe expects an active robot")
    pd = spec.pos_dim
    own = state.vectors[i]
    rel_a, rel_b = [], []
    for j in range(spec.n_robots):
        if j == i or not state.active[j]:
            continue
        d2 = float(np.sum((state.vectors[j, :pd] - own[:pd]) ** 2))
        if d2 > spec.sense_radius ** 2:
            continue
        (rel_a if spec.team_of(j) is Team.A else rel_b).append(state.vectors[j] - own)
    sd = spec.state_dim
    return Observation(
        goal_relative=spec.goal_embed - own,
        neighbors_a=np.array(rel_a).reshape(len(rel_a), sd),
        neighbors_b=np.array(rel_b).reshape(len(rel_b), sd))


def reconstruct_state(obs: Observation, observer_team: Team, spec: GameSpec,
                      reached_count: int = 0, step_index: int = 0
                      ) -> tuple[JointState, int, GameSpec]:
    """Rebuild a joint state of the visible sub-game from one observation.

    The observer knows the absolute goal location, so its own state is
    goal_embed - goal_relative and neighbors follow by adding their relative
    vectors. Unobserved robots are absent. The reached count and step index
    are not observable through the measurement and are carried from the
    caller's bookkeeping. Returns (state, observer row index, sub-game spec).
    """
    own = spec.goal_embed - obs.goal_relative
    rows_a = [own + r for r in obs.neighbors_a]
    rows_b = [own + r for r in obs.neighbors_b]
    if observer_team is Team.A:
        rows_a.insert(0, own)
        observer_idx = 0
    else:
        rows_b.insert(0, own)
        observer_idx = len(rows_a)
    sub = replace(spec, team_a_count=len(rows_a), team_b_count=len(rows_b))
    vectors = np.array(rows_a + rows_b).reshape(len(rows_a) + len(rows_b), spec.state_dim)
    return (JointState(vectors, np.ones(len(vectors), dtype=bool), step_index, reached_count),
            observer_idx, sub)


def value_observation(state: JointState, spec: GameSpec) -> ValueObservation:
    """Goal-relative states of all active robots per team, plus the reached count."""
    rel = state.vectors - spec.goal_embed
    a_mask = state.active[: spec.team_a_count]
    b_mask = state.active[spec.team_a_count:]
    return ValueObservation(
        set_a=rel[: spec.team_a_count][a_mask],
        set_b=rel[spec.team_a_count:][b_mask],
        reached_count=state.reached_count)


# ---------------------------------------------------------------------------
# action space
# ---------------------------------------------------------------------------

def project_action(action, spec: GameSpec) -> np.ndarray:
    """Project a per-robot action into the admissible action set.

    Double integrator: radial scaling onto the acceleration disc (direction
    preserved). Dubins: componentwise clamp of the two angular rates and the
    linear acceleration.
    """
    a = np.asarray(action, dtype=float).copy()
    if spec.dynamics_model is DynamicsModel.DOUBLE_INTEGRATOR_2D:
        norm = math.hypot(a[0], a[1])
        if norm > spec.acc_bound:
            a *= spec.acc_bound / norm
        return a
    rb = spec.dubins_rate_bound
    a[0] = min(max(a[0], -rb), rb)
    a[1] = min(max(a[1], -rb), rb)
    a[2] = min(max(a[2], -spec.acc_bound), spec.acc_bound)
    return a


def uniform_robot_action(spec: GameSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one action uniformly from the admissible action set."""
    if spec.dynamics_model is DynamicsModel.DOUBLE_INTEGRATOR_2D:
        r = spec.acc_bound * math.sqrt(rng.random())
        th = 2.0 * math.pi * rng.random()
        return np.array([r * math.cos(th), r * math.sin(th)])
    return np.array([
        spec.dubins_rate_bound * (2.0 * rng.random() - 1.0),
        spec.dubins_rate_bound * (2.0 * rng.random() - 1.0),
        spec.acc_bound * (2.0 * rng.random() - 1.0)])


def uniform_joint_action(state: JointState, spec: GameSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform action per active robot; inactive rows are zero (ignored by game_step)."""
    actions = np.zeros((spec.n_robots, spec.action_dim))
    for i in range(spec.n_robots):
        if state.active[i]:
            actions[i] = uniform_robot_action(spec, rng)
    return actions


def rollout_uniform(state: JointState, spec: GameSpec, seed: int,
                    cap_steps: int | None = None) -> tuple[int, int]:
    """Uniform-random playout from `state`; returns (reached_count, step_index)."""
    vec = state.vectors.copy()
    active = state.active.copy()
    v_min, v_max = spec.dubins_speed_range
    cap = spec.horizon - state.step_index if cap_steps is None else cap_steps
    return kernels.uniform_rollout(
        vec, active, spec.team_a_count, state.reached_count, state.step_index,
        spec.horizon, cap, spec.dynamics_model.code, spec.timestep,
        spec.pos_bound, spec.vel_bound, spec.acc_bound, spec.tag_radius,
        spec.collision_radius, spec.goal_radius, spec._goal3,
        spec._obstacles_arr, spec.dubins_gravity, spec.dubins_rate_bound,
        v_min, v_max, spec.bank_bound, seed)
