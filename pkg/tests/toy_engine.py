"""A tiny enumerable two-ply joint-action game for search oracle tests.

Both sides pick one of three moves simultaneously at each of two plies, so
there are 9 joint moves per ply and 81 outcomes. Payoffs are team A's value
in [0, 1]. The engine satisfies the same duck-typed protocol as the game
engine used by the real search.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ToyState:
    ply: int = 0
    first: int = -1
    second: int = -1


class MatrixGameEngine:
    has_policy = False
    has_value = False

    def __init__(self, payoff: np.ndarray):
        assert payoff.shape == (9, 9)
        self.payoff = payoff

    def is_terminal(self, s: ToyState) -> bool:
        return s.ply >= 2

    def step(self, s: ToyState, action) -> ToyState:
        if self.is_terminal(s):
            return s
        c = 3 * int(action[0]) + int(action[1])
        if s.ply == 0:
            return ToyState(1, c, -1)
        return ToyState(2, s.first, c)

    def leaf_value(self, s: ToyState) -> float:
        return float(self.payoff[s.first, s.second])

    def uniform_joint(self, s: ToyState, rng) -> np.ndarray:
        return np.array([rng.integers(0, 3), rng.integers(0, 3)], dtype=float)

    def rollout(self, s: ToyState, rng, cap) -> float:
        while not self.is_terminal(s):
            s = self.step(s, self.uniform_joint(s, rng))
        return self.leaf_value(s)


def build_payoff(seed: int = 0, best_joint: int = 4) -> np.ndarray:
    """Payoff tensor with one clearly best first joint move.

    Every first-ply joint move indexes a row; the row's maximin value is what
    a two-ply minimax sees. One designated row dominates by a wide margin so
    sampling noise cannot flip the ordering.
    """
    rng = np.random.default_rng(seed)
    payoff = 0.20 + 0.25 * rng.random((9, 9))
    payoff[best_joint] = 0.78 + 0.10 * rng.random(9)
    return payoff


def minimax_root_action(payoff: np.ndarray) -> tuple[int, int]:
    """Exhaustive maximin over the 81-outcome tree: A maximizes the row minimum."""
    row_values = payoff.min(axis=1)
    best = int(np.argmax(row_values))
    return best // 3, best % 3
