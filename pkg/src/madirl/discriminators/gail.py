"""Per-agent classifier baseline: sigmoid discriminators over local
(observation, action) pairs, rewarding agents with log D. Trained with the
same orientation as the structured model (expert toward 1, replayed agent
toward 0) and the same entropy bonus on the classifier output."""

from __future__ import annotations

import numpy as np

from ..autodiff import (MLP, Module, Tensor, concat, log_sigmoid, mul, narrow,
                        neg, no_grad, one_hot, reduce_mean, reduce_sum, sigmoid)
from ..errors import UsageError


class GailDiscriminator(Module):
    def __init__(self, spec, rng, hidden_dim=128, dtype=np.float32):
        self.spec = spec
        self._dtype = dtype
        self.nets = [MLP([spec.obs_dims[i] + spec.n_actions[i], hidden_dim, hidden_dim, 1],
                         rng, dtype=dtype)
                     for i in range(spec.n_agents)]

    def _onehots(self, actions):
        return [one_hot(actions[i], self.spec.n_actions[i], self._dtype)
                for i in range(self.spec.n_agents)]

    def logits(self, obs, acts_onehot):
        out = []
        for i, net in enumerate(self.nets):
            o = obs[i] if isinstance(obs[i], Tensor) else Tensor(np.asarray(obs[i], dtype=self._dtype))
            a = acts_onehot[i] if isinstance(acts_onehot[i], Tensor) else Tensor(acts_onehot[i])
            out.append(net(concat([o, a], axis=1)))
        return out

    def d_values(self, batch):
        """Classifier outputs (B, N), strictly inside (0, 1), detached."""
        with no_grad():
            z = self.logits(batch.obs, self._onehots(batch.actions))
            return np.stack([1.0 / (1.0 + np.exp(-z[i].values[:, 0]))
                             for i in range(self.spec.n_agents)], axis=1)

    def rewards(self, batch):
        """Per-agent log D rewards (B, N), detached; strictly negative."""
        from ..autodiff import kernels

        with no_grad():
            z = self.logits(batch.obs, self._onehots(batch.actions))
            return np.stack([kernels.log_sigmoid(z[i].values[:, 0])
                             for i in range(self.spec.n_agents)], axis=1)

    def loss(self, agent_batch, expert_batch, entropy_coef=0.01):
        if agent_batch.size == 0 or expert_batch.size == 0:
            raise UsageError("discriminator update needs non-empty batches")
        n = self.spec.n_agents
        ba = agent_batch.size
        obs = [np.concatenate([agent_batch.obs[i], expert_batch.obs[i]])
               for i in range(n)]
        acts = [np.concatenate([agent_batch.actions[i], expert_batch.actions[i]])
                for i in range(n)]
        z_all = self.logits(obs, self._onehots(acts))
        z_agent = [narrow(z, 0, 0, ba) for z in z_all]
        z_expert = [narrow(z, 0, ba, expert_batch.size) for z in z_all]

        ce = None
        for i in range(n):
            term = reduce_mean(neg(log_sigmoid(z_expert[i]))) \
                + reduce_mean(neg(log_sigmoid(neg(z_agent[i]))))
            ce = term if ce is None else ce + term

        ent = None
        for z in z_agent + z_expert:
            h = mul(sigmoid(z), neg(log_sigmoid(z))) \
                + mul(sigmoid(neg(z)), neg(log_sigmoid(neg(z))))
            term = reduce_sum(reduce_mean(h, axis=0))
            ent = term if ent is None else ent + term
        ent = mul(ent, 1.0 / (2 * n))

        return ce + mul(ent, -entropy_coef)
