"""Shared fixtures: tiny game specs, random batches, parameter zeroing."""

import numpy as np

from madirl.envs import GameSpec
from madirl.replay import Batch


def tiny_spec(n_agents=2, obs_dim=4, n_actions=3, env_id="synthetic"):
    return GameSpec(env_id=env_id, n_agents=n_agents,
                    obs_dims=(obs_dim,) * n_agents,
                    n_actions=(n_actions,) * n_agents,
                    roles=("agent",) * n_agents)


def random_batch(spec, size, rng, dtype=np.float32, done_rate=0.0):
    done = (rng.random(size) < done_rate).astype(np.float32)
    return Batch(
        obs=[rng.normal(size=(size, d)).astype(dtype) for d in spec.obs_dims],
        actions=[rng.integers(a, size=size) for a in spec.n_actions],
        next_obs=[rng.normal(size=(size, d)).astype(dtype) for d in spec.obs_dims],
        done=done,
        gt_rewards=rng.normal(size=(size, spec.n_agents)).astype(np.float32),
    )


def zero_module(module):
    for p in module.parameters():
        p.values[:] = 0.0


def set_all(module, value):
    for p in module.parameters():
        p.values[:] = value
