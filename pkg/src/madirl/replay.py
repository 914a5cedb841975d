"""Experience replay and the expert demonstration store.

The replay buffer is a fixed-capacity ring over per-agent numpy arrays: FIFO
eviction, uniform sampling with replacement. Demonstrations serialize to a
single ``.demos`` file: a JSON header (environment id, game spec, episode
count, provenance, payload checksum) followed by one binary record per
episode holding per-step per-agent float32 observation arrays, int32 action
indices, and the logged per-step reward matrix.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .envs import GameSpec, JointTransition
from .errors import FormatError, ShapeError, UsageError

_MAGIC = b"MADEMOS1"


@dataclass
class Batch:
    """A sampled minibatch of joint transitions. ``gt_rewards`` is carried for
    reward-providing callers (expert training); reward-learning code paths
    receive rewards as a separate argument and never read it."""

    obs: list                 # per agent (B, obs_dim) float32
    actions: list             # per agent (B,) int64
    next_obs: list
    done: np.ndarray          # (B,) float32
    gt_rewards: np.ndarray    # (B, N) float32

    @property
    def size(self):
        return int(self.done.shape[0])


class ReplayBuffer:
    """FIFO ring buffer of joint transitions."""

    def __init__(self, spec: GameSpec, capacity):
        if capacity < 1:
            raise ShapeError(f"capacity must be positive, got {capacity}")
        self.spec = spec
        self.capacity = int(capacity)
        n = spec.n_agents
        self._obs = [np.zeros((capacity, d), dtype=np.float32) for d in spec.obs_dims]
        self._next_obs = [np.zeros((capacity, d), dtype=np.float32) for d in spec.obs_dims]
        self._actions = [np.zeros(capacity, dtype=np.int64) for _ in range(n)]
        self._done = np.zeros(capacity, dtype=np.float32)
        self._gt = np.zeros((capacity, n), dtype=np.float32)
        self._ptr = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, transition: JointTransition):
        spec = self.spec
        if len(transition.obs) != spec.n_agents:
            raise ShapeError(f"transition has {len(transition.obs)} agents, "
                             f"spec says {spec.n_agents}")
        for i in range(spec.n_agents):
            if transition.obs[i].shape != (spec.obs_dims[i],):
                raise ShapeError(f"agent {i}: obs shape {transition.obs[i].shape} "
                                 f"!= ({spec.obs_dims[i]},)")
            if not 0 <= transition.actions[i] < spec.n_actions[i]:
                raise ShapeError(f"agent {i}: action {transition.actions[i]} out of range")
            self._obs[i][self._ptr] = transition.obs[i]
            self._next_obs[i][self._ptr] = transition.next_obs[i]
            self._actions[i][self._ptr] = transition.actions[i]
        self._done[self._ptr] = float(transition.done)
        self._gt[self._ptr] = transition.gt_rewards
        self._ptr = (self._ptr + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size, rng):
        """Uniform with replacement over current contents."""
        if self._size == 0:
            raise UsageError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(obs=[o[idx] for o in self._obs],
                     actions=[a[idx] for a in self._actions],
                     next_obs=[o[idx] for o in self._next_obs],
                     done=self._done[idx],
                     gt_rewards=self._gt[idx])

    def contents_gt(self):
        """Logged rewards of the current contents in insertion order (oldest
        first); test hook for eviction-order checks."""
        if self._size < self.capacity:
            return self._gt[:self._size].copy()
        return np.roll(self._gt, -self._ptr, axis=0).copy()


@dataclass
class DemoEpisode:
    """One recorded expert episode as per-agent arrays over the 25 steps."""

    obs: list                 # per agent (T, obs_dim) float32
    actions: list             # per agent (T,) int32
    next_obs: list
    gt_rewards: np.ndarray    # (T, N) float32


@dataclass
class DemoSet:
    """Ordered expert episodes plus provenance metadata."""

    spec: GameSpec
    episodes: list
    meta: dict = field(default_factory=dict)
    _flat: Batch = None

    def __post_init__(self):
        T = self.spec.episode_length
        for k, ep in enumerate(self.episodes):
            for i in range(self.spec.n_agents):
                if ep.obs[i].shape != (T, self.spec.obs_dims[i]):
                    raise FormatError(f"episode {k}, agent {i}: obs shape "
                                      f"{ep.obs[i].shape} != ({T}, {self.spec.obs_dims[i]})")
            if ep.gt_rewards.shape != (T, self.spec.n_agents):
                raise FormatError(f"episode {k}: reward shape {ep.gt_rewards.shape}")

    def __len__(self):
        return len(self.episodes)

    def mean_scores(self):
        """Per-agent episode score averaged over the stored episodes."""
        scores = np.array([ep.gt_rewards.sum(axis=0) for ep in self.episodes],
                          dtype=np.float64)
        return scores.mean(axis=0)

    def _flatten(self):
        if self._flat is None:
            n = self.spec.n_agents
            T = self.spec.episode_length
            obs = [np.concatenate([ep.obs[i] for ep in self.episodes]) for i in range(n)]
            nxt = [np.concatenate([ep.next_obs[i] for ep in self.episodes]) for i in range(n)]
            act = [np.concatenate([ep.actions[i] for ep in self.episodes]).astype(np.int64)
                   for i in range(n)]
            done = np.tile(np.eye(1, T, T - 1, dtype=np.float32)[0], len(self.episodes))
            gt = np.concatenate([ep.gt_rewards for ep in self.episodes])
            self._flat = Batch(obs=obs, actions=act, next_obs=nxt, done=done, gt_rewards=gt)
        return self._flat

    @property
    def n_transitions(self):
        return len(self.episodes) * self.spec.episode_length

    def sample(self, batch_size, rng):
        """Uniform transitions (with replacement) across all episodes."""
        flat = self._flatten()
        if flat.size == 0:
            raise UsageError("cannot sample from an empty demo set")
        idx = rng.integers(0, flat.size, size=batch_size)
        return Batch(obs=[o[idx] for o in flat.obs],
                     actions=[a[idx] for a in flat.actions],
                     next_obs=[o[idx] for o in flat.next_obs],
                     done=flat.done[idx],
                     gt_rewards=flat.gt_rewards[idx])


def _episode_payload(spec, ep):
    parts = []
    for i in range(spec.n_agents):
        parts.append(np.ascontiguousarray(ep.obs[i], dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(ep.next_obs[i], dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(ep.actions[i], dtype="<i4").tobytes())
    parts.append(np.ascontiguousarray(ep.gt_rewards, dtype="<f4").tobytes())
    return b"".join(parts)


def save_demos(demos: DemoSet, path):
    """Write a DemoSet to a ``.demos`` file (checksummed, losslessly)."""
    payload = b"".join(_episode_payload(demos.spec, ep) for ep in demos.episodes)
    header = {
        "format_version": 1,
        "env_id": demos.spec.env_id,
        "game_spec": demos.spec.to_dict(),
        "n_episodes": len(demos.episodes),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "meta": demos.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(payload)


def load_demos(path, expected_spec: GameSpec = None):
    """Read a ``.demos`` file; verifies magic, checksum, sizes, and (when
    given) consistency with the expected game spec."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise FormatError(f"cannot read demo file: {e}")
    if raw[:8] != _MAGIC:
        raise FormatError(f"{path}: not a demo file (bad magic)")
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<I", raw[8:12])
    if len(raw) < 12 + hlen:
        raise FormatError(f"{path}: truncated header block")
    try:
        header = json.loads(raw[12:12 + hlen])
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: unreadable header ({e})")
    if header.get("format_version") != 1:
        raise FormatError(f"{path}: unsupported format version")
    spec = GameSpec.from_dict(header["game_spec"])
    if spec.episode_length != 25:
        raise FormatError(f"{path}: episode length {spec.episode_length} != 25")
    if expected_spec is not None and spec != expected_spec:
        raise FormatError(f"{path}: demos were generated for '{spec.env_id}' "
                          f"{spec.to_dict()}, expected '{expected_spec.env_id}' "
                          f"{expected_spec.to_dict()}")
    payload = raw[12 + hlen:]
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise FormatError(f"{path}: payload checksum mismatch")

    T = spec.episode_length
    n = spec.n_agents
    ep_bytes = sum(T * d * 4 + T * d * 4 + T * 4 for d in spec.obs_dims) + T * n * 4
    if len(payload) != header["n_episodes"] * ep_bytes:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected "
                          f"{header['n_episodes'] * ep_bytes}")
    episodes = []
    off = 0
    for _ in range(header["n_episodes"]):
        obs, nxt, act = [], [], []
        for i in range(n):
            d = spec.obs_dims[i]
            obs.append(np.frombuffer(payload, "<f4", T * d, off).reshape(T, d).copy())
            off += T * d * 4
            nxt.append(np.frombuffer(payload, "<f4", T * d, off).reshape(T, d).copy())
            off += T * d * 4
            act.append(np.frombuffer(payload, "<i4", T, off).copy())
            off += T * 4
        gt = np.frombuffer(payload, "<f4", T * n, off).reshape(T, n).copy()
        off += T * n * 4
        episodes.append(DemoEpisode(obs=obs, actions=act, next_obs=nxt, gt_rewards=gt))
    return DemoSet(spec=spec, episodes=episodes, meta=header.get("meta", {}))


def episodes_from_transitions(spec, transition_lists):
    """Pack rollout transition lists (one list per episode) into DemoEpisodes."""
    episodes = []
    for transitions in transition_lists:
        if len(transitions) != spec.episode_length:
            raise ShapeError(f"episode has {len(transitions)} steps, "
                             f"expected {spec.episode_length}")
        obs = [np.stack([t.obs[i] for t in transitions]) for i in range(spec.n_agents)]
        nxt = [np.stack([t.next_obs[i] for t in transitions]) for i in range(spec.n_agents)]
        act = [np.array([t.actions[i] for t in transitions], dtype=np.int32)
               for i in range(spec.n_agents)]
        gt = np.stack([t.gt_rewards for t in transitions])
        episodes.append(DemoEpisode(obs=obs, actions=act, next_obs=nxt, gt_rewards=gt))
    return episodes
