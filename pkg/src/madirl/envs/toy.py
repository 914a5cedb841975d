"""Exactly solvable cooperative grid game used by the verification suite.

Two agents move on a 4x4 grid (single-cell moves, clipped at the border);
each is privately assigned a goal cell. Rewards are cooperative proximity
bonuses weighted toward an agent's own goal:

    r_i = scale * (1 - (0.75 * d_i + 0.25 * d_other) / D)

with ``d_i`` the Manhattan distance of agent i to its own goal and ``D`` the
grid's Manhattan diameter, so r_i is in [0, scale]. Agents do not interact
physically and every step changes a distance by at most one, so walking
straight to the goal is pointwise optimal and the joint optimum decomposes
per agent; with the symmetric start/goal distribution the weighted mix drops
out of the expectation, making the optimal expected score an exact
enumeration over the uniform start/goal cells.
"""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from .core import GameSpec, MultiAgentEnv

GRID = 4
MAX_DIST = 2 * (GRID - 1)       # Manhattan diameter
REWARD_SCALE = 10.0
OWN_WEIGHT = 0.75

# action set: stay, +x, -x, +y, -y
_MOVES = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]])


class ToyCoopEnv(MultiAgentEnv):
    """Observation per agent (4 dims): own cell (centered, scaled) and own
    goal offset (scaled). The other agent's goal is private and never
    observable; positions of others do not enter the observation either."""

    def __init__(self):
        super().__init__()
        self.spec = GameSpec(env_id="toy_coop", n_agents=2,
                             obs_dims=(4, 4), n_actions=(5, 5),
                             roles=("walker", "walker"))
        self.cells = np.zeros((2, 2), dtype=np.int64)
        self.goals = np.zeros((2, 2), dtype=np.int64)

    def _reset(self, rng):
        self.cells = rng.integers(GRID, size=(2, 2))
        self.goals = rng.integers(GRID, size=(2, 2))
        return self._obs()

    def _obs(self):
        half = (GRID - 1) / 2.0
        out = []
        for i in range(2):
            out.append(np.asarray([
                (self.cells[i, 0] - half) / half,
                (self.cells[i, 1] - half) / half,
                (self.goals[i, 0] - self.cells[i, 0]) / (GRID - 1),
                (self.goals[i, 1] - self.cells[i, 1]) / (GRID - 1),
            ], dtype=np.float32))
        return out

    def _step(self, actions):
        self.cells = np.clip(self.cells + _MOVES[actions], 0, GRID - 1)
        d = np.abs(self.cells - self.goals).sum(axis=1)
        mix = OWN_WEIGHT * d + (1.0 - OWN_WEIGHT) * d[::-1]
        return self._obs(), REWARD_SCALE * (1.0 - mix / MAX_DIST)

    def manhattan_distances(self):
        return np.abs(self.cells - self.goals).sum(axis=1)


def toy_optimal_score(env):
    """Exact per-agent expected episode score of the optimal joint policy.

    Under the greedy straight-to-goal policy the distance after step t is
    max(d0 - t, 0), which lower-bounds any policy pointwise, so the summed
    distance over an episode is d0*(d0-1)/2; the own/other weights average
    out because both agents draw from the same start/goal distribution. The
    expectation enumerates that distribution exactly.
    """
    if not isinstance(env, ToyCoopEnv):
        raise UsageError("toy_optimal_score is defined for the toy grid game only")
    T = env.spec.episode_length

    axis_counts = np.zeros(GRID, dtype=np.int64)
    for s in range(GRID):
        for g in range(GRID):
            axis_counts[abs(s - g)] += 1
    # distribution of d0 = dx + dy over independent axes
    d_counts = np.zeros(2 * (GRID - 1) + 1, dtype=np.int64)
    for dx in range(GRID):
        for dy in range(GRID):
            d_counts[dx + dy] += axis_counts[dx] * axis_counts[dy]
    total = d_counts.sum()
    expected_dist_sum = sum(c * d * (d - 1) / 2 for d, c in enumerate(d_counts)) / total

    score = REWARD_SCALE * (1.0 - expected_dist_sum / (T * MAX_DIST))
    return np.array([score, score])
