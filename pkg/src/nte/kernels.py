"""Numba kernels for the simulation hot path.

These are the tight loops behind game stepping and uniform rollouts. The
reference semantics live in `nte.game` as plain numpy functions; the kernels
must stay numerically identical to them (the test suite fuzzes equivalence).
All adjudication uses squared distances so the reference implementation has
to compare squared quantities as well.
"""

import numpy as np
from numba import njit

DYN_DI2D = 0
DYN_DUBINS3D = 1

EV_NONE = 0
EV_REACHED = 1
EV_TAGGED = 2
EV_VIOLATED = 3


@njit(cache=True)
def step_robots(vec, active, actions, dyn, dt, gravity, v_min, v_max, bank_bound):
    """Euler-propagate every active robot in place. Inactive rows are frozen."""
    n = vec.shape[0]
    for i in range(n):
        if not active[i]:
            continue
        if dyn == DYN_DI2D:
            vec[i, 0] += vec[i, 2] * dt
            vec[i, 1] += vec[i, 3] * dt
            vec[i, 2] += actions[i, 0] * dt
            vec[i, 3] += actions[i, 1] * dt
        else:
            # state row: x, y, z, heading, flight path angle, bank angle, speed
            v = vec[i, 6]
            cg = np.cos(vec[i, 4])
            vec[i, 0] += v * cg * np.sin(vec[i, 3]) * dt
            vec[i, 1] += v * cg * np.cos(vec[i, 3]) * dt
            vec[i, 2] -= v * np.sin(vec[i, 4]) * dt
            vec[i, 3] += (gravity / v) * np.tan(vec[i, 5]) * dt
            vec[i, 4] += actions[i, 0] * dt
            phi = vec[i, 5] + actions[i, 1] * dt
            if phi > bank_bound:
                phi = bank_bound
            elif phi < -bank_bound:
                phi = -bank_bound
            vec[i, 5] = phi
            v = v + actions[i, 2] * dt
            if v > v_max:
                v = v_max
            elif v < v_min:
                v = v_min
            vec[i, 6] = v


@njit(cache=True)
def adjudicate(vec, active, a_count, dyn, pos_bound, vel_bound, tag_radius,
               collision_radius, goal_radius, goal, obstacles, events):
    """Classify every robot against the post-step state.

    Writes one event code per robot into `events`. All pair checks read the
    incoming `active` flags, so the adjudication is simultaneous: a robot
    deactivated this step still tags/collides this step. Precedence for team
    A is reached > tagged > violated.
    """
    n = vec.shape[0]
    pd = 2 if dyn == DYN_DI2D else 3
    for i in range(n):
        events[i] = EV_NONE
        if not active[i]:
            continue
        if i < a_count:
            d2 = 0.0
            for c in range(pd):
                dd = vec[i, c] - goal[c]
                d2 += dd * dd
            if d2 <= goal_radius * goal_radius:
                events[i] = EV_REACHED
                continue
            tagged = False
            for j in range(a_count, n):
                if not active[j]:
                    continue
                d2 = 0.0
                for c in range(pd):
                    dd = vec[j, c] - vec[i, c]
                    d2 += dd * dd
                if d2 <= tag_radius * tag_radius:
                    tagged = True
                    break
            if tagged:
                events[i] = EV_TAGGED
                continue
        viol = False
        for c in range(pd):
            if np.abs(vec[i, c]) > pos_bound:
                viol = True
        if not viol:
            if dyn == DYN_DI2D:
                if vec[i, 2] * vec[i, 2] + vec[i, 3] * vec[i, 3] > vel_bound * vel_bound:
                    viol = True
            else:
                if vec[i, 6] > vel_bound:
                    viol = True
        if not viol:
            for j in range(n):
                if j == i or not active[j]:
                    continue
                d2 = 0.0
                for c in range(pd):
                    dd = vec[j, c] - vec[i, c]
                    d2 += dd * dd
                if d2 <= collision_radius * collision_radius:
                    viol = True
                    break
        if not viol:
            for m in range(obstacles.shape[0]):
                d2 = 0.0
                for c in range(pd):
                    dd = vec[i, c] - obstacles[m, c]
                    d2 += dd * dd
                if d2 <= obstacles[m, 3] * obstacles[m, 3]:
                    viol = True
                    break
        if viol:
            events[i] = EV_VIOLATED


@njit(cache=True)
def uniform_rollout(vec, active, a_count, reached_count, step_index, horizon,
                    cap_steps, dyn, dt, pos_bound, vel_bound, acc_bound,
                    tag_radius, collision_radius, goal_radius, goal, obstacles,
                    gravity, rate_bound, v_min, v_max, bank_bound, seed):
    """Play uniformly random joint actions until terminal or a step cap.

    Mutates `vec`/`active` (pass copies). Returns (reached_count, step_index)
    at exit. Uses numba's own RNG stream seeded per rollout so that the whole
    rollout costs one seed draw on the caller's generator.
    """
    np.random.seed(seed)
    n = vec.shape[0]
    events = np.empty(n, dtype=np.int8)
    steps = 0
    while step_index < horizon and steps < cap_steps:
        alive_a = False
        for i in range(a_count):
            if active[i]:
                alive_a = True
                break
        if not alive_a:
            break
        for i in range(n):
            if not active[i]:
                continue
            if dyn == DYN_DI2D:
                r = acc_bound * np.sqrt(np.random.random())
                th = 2.0 * np.pi * np.random.random()
                vec[i, 0] += vec[i, 2] * dt
                vec[i, 1] += vec[i, 3] * dt
                vec[i, 2] += r * np.cos(th) * dt
                vec[i, 3] += r * np.sin(th) * dt
            else:
                a0 = rate_bound * (2.0 * np.random.random() - 1.0)
                a1 = rate_bound * (2.0 * np.random.random() - 1.0)
                a2 = acc_bound * (2.0 * np.random.random() - 1.0)
                v = vec[i, 6]
                cg = np.cos(vec[i, 4])
                vec[i, 0] += v * cg * np.sin(vec[i, 3]) * dt
                vec[i, 1] += v * cg * np.cos(vec[i, 3]) * dt
                vec[i, 2] -= v * np.sin(vec[i, 4]) * dt
                vec[i, 3] += (gravity / v) * np.tan(vec[i, 5]) * dt
                vec[i, 4] += a0 * dt
                phi = vec[i, 5] + a1 * dt
                if phi > bank_bound:
                    phi = bank_bound
                elif phi < -bank_bound:
                    phi = -bank_bound
                vec[i, 5] = phi
                v = v + a2 * dt
                if v > v_max:
                    v = v_max
                elif v < v_min:
                    v = v_min
                vec[i, 6] = v
        adjudicate(vec, active, a_count, dyn, pos_bound, vel_bound, tag_radius,
                   collision_radius, goal_radius, goal, obstacles, events)
        for i in range(n):
            if events[i] != EV_NONE:
                active[i] = False
                if events[i] == EV_REACHED:
                    reached_count += 1
        step_index += 1
        steps += 1
    return reached_count, step_index
