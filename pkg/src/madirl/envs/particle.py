"""Particle tasks with simplified point-mass kinematics.

Movers pick one of five accelerations (no-op, +/-x, +/-y) integrated with
damping 0.25 and dt 0.1; collision handling is an overlap test at radius 0.1
with elastic displacement (no contact-force solver). Static communicators
emit one discrete message per step which lands in the receiver's observation
at the next step.

Per-task raw reward bounds (pre-division): distances are bounded by the
arena diagonal (~4.25), so keep_away and coop_comm stay within +/-4.25,
rover_tower within 4.25, and coop_nav within the global cap of 10 (three
distance terms plus collision penalties, clipped).
"""

from __future__ import annotations

import numpy as np

from .core import (ARENA_BOUND, EPISODE_LENGTH, N_MOVE_ACTIONS, RADIUS,
                   SPAWN_BOUND, GameSpec, MultiAgentEnv, integrate_movers,
                   resolve_overlap)


def _dist(a, b):
    return float(np.hypot(*(a - b)))


def _f32(vec):
    return np.asarray(vec, dtype=np.float32)


class KeepAwayEnv(MultiAgentEnv):
    """Two movers and one goal landmark: the reacher is rewarded for being
    close to the goal, the pusher for the reacher being far; overlap between
    them shoves both apart.

    Observations (both agents, 8 dims): own velocity, own position,
    goal relative position, other agent relative position.
    """

    def __init__(self):
        super().__init__()
        self.spec = GameSpec(env_id="keep_away", n_agents=2,
                             obs_dims=(8, 8), n_actions=(5, 5),
                             roles=("reacher", "pusher"))
        self.pos = np.zeros((2, 2))
        self.vel = np.zeros((2, 2))
        self.goal = np.zeros(2)
        self._mover_mask = np.array([True, True])

    def _reset(self, rng):
        self.pos = rng.uniform(-SPAWN_BOUND, SPAWN_BOUND, size=(2, 2))
        self.vel = np.zeros((2, 2))
        self.goal = rng.uniform(-SPAWN_BOUND, SPAWN_BOUND, size=2)
        return self._obs()

    def _obs(self):
        out = []
        for i in range(2):
            other = 1 - i
            out.append(_f32(np.concatenate([
                self.vel[i], self.pos[i],
                self.goal - self.pos[i],
                self.pos[other] - self.pos[i],
            ])))
        return out

    def _step(self, actions):
        integrate_movers(self.pos, self.vel, self._mover_mask, actions)
        resolve_overlap(self.pos, 0, 1)
        d = _dist(self.pos[0], self.goal)
        return self._obs(), np.array([-d, d])


class CoopCommEnv(MultiAgentEnv):
    """Static speaker and mobile listener; one of three landmarks is the goal,
    visible only to the speaker. Both agents are rewarded by the listener's
    proximity to the goal landmark.

    Speaker observation (3 dims): goal landmark one-hot.
    Listener observation (11 dims): own velocity, landmark relative
    positions, and the message received at the previous step.
    """

    N_LANDMARKS = 3

    def __init__(self):
        super().__init__()
        self.spec = GameSpec(env_id="coop_comm", n_agents=2,
                             obs_dims=(3, 11), n_actions=(3, 5),
                             roles=("speaker", "listener"))
        self.pos = np.zeros((2, 2))
        self.vel = np.zeros((2, 2))
        self.landmarks = np.zeros((self.N_LANDMARKS, 2))
        self.goal_idx = 0
        self.message = np.zeros(self.N_LANDMARKS)
        self._mover_mask = np.array([False, True])

    def _reset(self, rng):
        self.pos = rng.uniform(-SPAWN_BOUND, SPAWN_BOUND, size=(2, 2))
        self.vel = np.zeros((2, 2))
        self.landmarks = rng.uniform(-SPAWN_BOUND, SPAWN_BOUND, size=(self.N_LANDMARKS, 2))
        self.goal_idx = int(rng.integers(self.N_LANDMARKS))
        self.message = np.zeros(self.N_LANDMARKS)
        return self._obs()

    def _obs(self):
        goal_onehot = np.zeros(self.N_LANDMARKS)
        goal_onehot[self.goal_idx] = 1.0
        listener = np.concatenate([
            self.vel[1],
            (self.landmarks - self.pos[1]).ravel(),
            self.message,
        ])
        return [_f32(goal_onehot), _f32(listener)]

    def _step(self, actions):
        integrate_movers(self.pos, self.vel, self._mover_mask, actions)
        # message sent now is observed by the listener from the next step on
        self.message = np.zeros(self.N_LANDMARKS)
        self.message[actions[0]] = 1.0
        d = _dist(self.pos[1], self.landmarks[self.goal_idx])
        return self._obs(), np.array([-d, -d])


class CoopNavEnv(MultiAgentEnv):
    """Three movers cover three landmarks: every agent receives the shared
    coverage penalty (sum over landmarks of the closest agent's distance)
    minus one per other agent it overlaps with.

    Observations (14 dims): own velocity, own position, landmark relative
    positions, other agents' relative positions.
    """

    N_AGENTS = 3
    N_LANDMARKS = 3

    def __init__(self):
        super().__init__()
        n = self.N_AGENTS
        self.spec = GameSpec(env_id="coop_nav", n_agents=n,
                             obs_dims=(14,) * n, n_actions=(5,) * n,
                             roles=("mover",) * n)
        self.pos = np.zeros((n, 2))
        self.vel = np.zeros((n, 2))
        self.landmarks = np.zeros((self.N_LANDMARKS, 2))
        self._mover_mask = np.ones(n, dtype=bool)

    def _reset(self, rng):
        self.pos = rng.uniform(-SPAWN_BOUND, SPAWN_BOUND, size=(self.N_AGENTS, 2))
        self.vel = np.zeros((self.N_AGENTS, 2))
        self.landmarks = rng.uniform(-SPAWN_BOUND, SPAWN_BOUND, size=(self.N_LANDMARKS, 2))
        return self._obs()

    def _obs(self):
        out = []
        for i in range(self.N_AGENTS):
            others = [self.pos[j] - self.pos[i] for j in range(self.N_AGENTS) if j != i]
            out.append(_f32(np.concatenate([
                self.vel[i], self.pos[i],
                (self.landmarks - self.pos[i]).ravel(),
                np.concatenate(others),
            ])))
        return out

    def _step(self, actions):
        integrate_movers(self.pos, self.vel, self._mover_mask, actions)
        coverage = 0.0
        for lm in self.landmarks:
            coverage -= min(_dist(self.pos[i], lm) for i in range(self.N_AGENTS))
        rewards = np.full(self.N_AGENTS, coverage)
        for i in range(self.N_AGENTS):
            for j in range(self.N_AGENTS):
                if j != i and _dist(self.pos[i], self.pos[j]) < 2 * RADIUS:
                    rewards[i] -= 1.0
        return self._obs(), rewards


class RoverTowerEnv(MultiAgentEnv):
    """N/2 mobile rovers paired at reset (uniform random perfect matching)
    with N/2 static towers. Each tower is privately assigned a goal landmark
    and can only help by messaging; its paired rover observes the message one
    step later. Each pair shares the negative rover-to-goal distance.

    Rover observation: own velocity, own position, landmark relative
    positions, received message one-hot. Tower observation: goal one-hot.
    """

    def __init__(self, n_agents):
        super().__init__()
        if n_agents < 2 or n_agents % 2 != 0:
            raise ValueError(f"rover_tower needs an even agent count >= 2, got {n_agents}")
        self.n_pairs = n_agents // 2
        k = self.n_pairs
        rover_obs = 2 + 2 + 2 * k + k
        self.spec = GameSpec(env_id=f"rover_tower:{n_agents}", n_agents=n_agents,
                             obs_dims=(rover_obs,) * k + (k,) * k,
                             n_actions=(N_MOVE_ACTIONS,) * k + (k,) * k,
                             roles=("rover",) * k + ("tower",) * k)
        self.pos = np.zeros((n_agents, 2))
        self.vel = np.zeros((n_agents, 2))
        self.landmarks = np.zeros((k, 2))
        self.tower_of_rover = np.arange(k)       # rover i -> tower index (0-based pair id)
        self.goal_of_tower = np.zeros(k, dtype=np.int64)
        self.messages = np.zeros((k, k))         # row: rover, one-hot from its tower
        self._mover_mask = np.zeros(n_agents, dtype=bool)
        self._mover_mask[:k] = True

    def _reset(self, rng):
        n, k = self.spec.n_agents, self.n_pairs
        self.pos = rng.uniform(-SPAWN_BOUND, SPAWN_BOUND, size=(n, 2))
        self.vel = np.zeros((n, 2))
        self.landmarks = rng.uniform(-SPAWN_BOUND, SPAWN_BOUND, size=(k, 2))
        perm = rng.permutation(k)
        self.tower_of_rover = perm               # rover i paired with tower perm[i]
        self.goal_of_tower = rng.integers(k, size=k)
        self.messages = np.zeros((k, k))
        return self._obs()

    def _obs(self):
        k = self.n_pairs
        out = []
        for i in range(k):
            out.append(_f32(np.concatenate([
                self.vel[i], self.pos[i],
                (self.landmarks - self.pos[i]).ravel(),
                self.messages[i],
            ])))
        for t in range(k):
            goal_onehot = np.zeros(k)
            goal_onehot[self.goal_of_tower[t]] = 1.0
            out.append(_f32(goal_onehot))
        return out

    def _step(self, actions):
        k = self.n_pairs
        integrate_movers(self.pos, self.vel, self._mover_mask, actions)
        for i in range(k):
            t = self.tower_of_rover[i]
            msg = np.zeros(k)
            msg[actions[k + t]] = 1.0
            self.messages[i] = msg
        rewards = np.zeros(self.spec.n_agents)
        for i in range(k):
            t = self.tower_of_rover[i]
            goal = self.landmarks[self.goal_of_tower[t]]
            r = -_dist(self.pos[i], goal)
            rewards[i] = r
            rewards[k + t] = r
        return self._obs(), rewards
