"""Per-agent discrete policies."""

from __future__ import annotations

import numpy as np

from ..autodiff import MLP, Module, Tensor, log_softmax, no_grad, softmax
from ..errors import ShapeError, UsageError


def sample_categorical(probs, rng):
    """One draw per row via inverse CDF; deterministic given the generator."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random((probs.shape[0], 1))
    return np.minimum((cdf < u).sum(axis=1), probs.shape[1] - 1).astype(np.int64)


class DiscretePolicy(Module):
    """Two-hidden-layer network mapping an observation to action logits."""

    def __init__(self, obs_dim, n_actions, rng, hidden_dim=128, dtype=np.float32):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.net = MLP([obs_dim, hidden_dim, hidden_dim, n_actions], rng, dtype=dtype)
        self._dtype = dtype

    def logits(self, obs):
        if not isinstance(obs, Tensor):
            obs = Tensor(np.asarray(obs, dtype=self._dtype))
        if obs.values.ndim != 2 or obs.shape[1] != self.obs_dim:
            raise ShapeError(f"policy expects (B, {self.obs_dim}) observations, got {obs.shape}")
        return self.net(obs)

    def probs(self, obs):
        return softmax(self.logits(obs))

    def log_probs(self, obs):
        return log_softmax(self.logits(obs))

    def probs_array(self, obs):
        """Forward-only action probabilities as a plain array."""
        with no_grad():
            return self.probs(obs).values

    def sample_actions(self, obs, rng):
        return sample_categorical(self.probs_array(obs), rng)

    def act(self, obs_vec, mode="sample", rng=None):
        """Single-observation action selection.

        ``sample`` draws from the categorical distribution; ``argmax`` picks
        the most probable action, ties broken by the lowest index.
        """
        p = self.probs_array(np.asarray(obs_vec, dtype=self._dtype)[None, :])[0]
        if mode == "argmax":
            return int(np.argmax(p))
        if mode == "sample":
            if rng is None:
                raise UsageError("sample mode needs a random generator")
            return int(sample_categorical(p[None, :], rng)[0])
        raise UsageError(f"unknown action mode {mode!r}")
