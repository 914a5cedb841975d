"""Shared machinery for partially observable Markov games.

All tasks run fixed 25-step episodes; per-step ground-truth rewards are
divided by the episode length at the source, so an episode score (the
per-agent sum over steps) equals the mean raw per-step reward. Raw per-step
reward magnitude is capped at 10 before the division.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, UsageError

EPISODE_LENGTH = 25
RAW_REWARD_CAP = 10.0

# particle kinematics
DT = 0.1
DAMPING = 0.25
ACCEL = 5.0
RADIUS = 0.1
ARENA_BOUND = 1.5       # positions clamped to [-bound, bound] per axis
SPAWN_BOUND = 1.0       # initial placements uniform in [-spawn, spawn]

# movement action set: no-op, +x, -x, +y, -y
MOVE_DIRS = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
N_MOVE_ACTIONS = 5


@dataclass(frozen=True)
class GameSpec:
    """Static description of a game: agent count, per-agent observation sizes
    and discrete action counts, role labels, and the fixed episode length."""

    env_id: str
    n_agents: int
    obs_dims: tuple
    n_actions: tuple
    roles: tuple
    episode_length: int = EPISODE_LENGTH

    def __post_init__(self):
        if self.n_agents < 1:
            raise ShapeError("GameSpec needs at least one agent")
        for name in ("obs_dims", "n_actions", "roles"):
            if len(getattr(self, name)) != self.n_agents:
                raise ShapeError(f"GameSpec.{name} length != n_agents")

    def to_dict(self):
        return {
            "env_id": self.env_id,
            "n_agents": self.n_agents,
            "obs_dims": list(self.obs_dims),
            "n_actions": list(self.n_actions),
            "roles": list(self.roles),
            "episode_length": self.episode_length,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(env_id=d["env_id"], n_agents=int(d["n_agents"]),
                   obs_dims=tuple(int(x) for x in d["obs_dims"]),
                   n_actions=tuple(int(x) for x in d["n_actions"]),
                   roles=tuple(d["roles"]),
                   episode_length=int(d["episode_length"]))


@dataclass
class JointTransition:
    """One environment step for all agents. ``gt_rewards`` are already divided
    by the episode length and are logged for evaluation only, never consumed
    by reward-learning updates."""

    obs: list                      # N float32 vectors
    actions: np.ndarray            # (N,) int
    next_obs: list
    gt_rewards: np.ndarray         # (N,) float32
    done: bool
    step_index: int


class MultiAgentEnv:
    """Base environment: episode bookkeeping and action validation.

    Subclasses implement ``_reset(rng) -> obs`` and
    ``_step(actions) -> (next_obs, raw_rewards)``; raw rewards are capped and
    divided by the episode length here. Dynamics are deterministic given the
    reset seed and the action sequence.
    """

    spec: GameSpec

    def __init__(self):
        self._step_index = None

    def reset(self, seed):
        rng = np.random.default_rng(seed)
        self._step_index = 0
        return self._reset(rng)

    def step(self, actions):
        if self._step_index is None:
            raise UsageError("step called before reset")
        if self._step_index >= self.spec.episode_length:
            raise UsageError("step called after the episode finished")
        acts = np.asarray(actions, dtype=np.int64)
        if acts.shape != (self.spec.n_agents,):
            raise ShapeError(f"expected {self.spec.n_agents} actions, got shape {acts.shape}")
        for i, a in enumerate(acts):
            if not 0 <= a < self.spec.n_actions[i]:
                raise ShapeError(f"action {a} out of range for agent {i} "
                                 f"({self.spec.n_actions[i]} actions)")
        next_obs, raw = self._step(acts)
        raw = np.clip(np.asarray(raw, dtype=np.float64), -RAW_REWARD_CAP, RAW_REWARD_CAP)
        rewards = (raw / self.spec.episode_length).astype(np.float32)
        self._step_index += 1
        done = self._step_index >= self.spec.episode_length
        return next_obs, rewards, done

    @property
    def step_index(self):
        return self._step_index

    # subclass hooks -----------------------------------------------------------
    def _reset(self, rng):
        raise NotImplementedError

    def _step(self, actions):
        raise NotImplementedError


def episode_score(gt_rewards):
    """Per-agent episode score: the sum of per-step (pre-divided) rewards.

    ``gt_rewards`` is a (episode_length, N) array or a list of such rows.
    """
    arr = np.asarray(gt_rewards, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != EPISODE_LENGTH:
        raise ShapeError(f"episode_score expects a complete {EPISODE_LENGTH}-step episode, "
                         f"got shape {arr.shape}")
    return arr.sum(axis=0)


def integrate_movers(positions, velocities, mover_mask, actions):
    """Apply discrete acceleration actions to the masked agents and integrate
    one step: damped velocity, forward Euler position, arena clamp."""
    accel = np.zeros_like(positions)
    accel[mover_mask] = MOVE_DIRS[actions[mover_mask]] * ACCEL
    velocities *= (1.0 - DAMPING)
    velocities += accel * DT
    positions += velocities * DT
    np.clip(positions, -ARENA_BOUND, ARENA_BOUND, out=positions)


def resolve_overlap(positions, i, j, radius=RADIUS):
    """Elastic displacement: push entities i and j apart along the line of
    centers until they just touch. A deterministic axis breaks exact overlap."""
    delta = positions[j] - positions[i]
    dist = float(np.hypot(*delta))
    min_dist = 2.0 * radius
    if dist >= min_dist:
        return False
    axis = delta / dist if dist > 0 else np.array([1.0, 0.0])
    push = 0.5 * (min_dist - dist)
    positions[i] -= axis * push
    positions[j] += axis * push
    np.clip(positions, -ARENA_BOUND, ARENA_BOUND, out=positions)
    return True
