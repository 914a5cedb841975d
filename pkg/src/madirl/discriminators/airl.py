"""Structured adversarial discriminators with a portable reward head.

Per agent the discriminator scores a transition with
``f = g(obs-part, action-part) + gamma * h(next-obs-part) - h(obs-part)``
and classifies against the current policy's action probability:
``D = exp(f) / (exp(f) + pi)``, evaluated in log space as
``sigmoid(f - log pi)``. The reward handed to the policy learner is
``log D - log(1 - D)``, which simplifies algebraically to ``f - log pi``.
``g`` alone is the exportable reward used by the retraining protocol.

Variants:
  decentralized            - per-agent nets over (o_i, a_i, o'_i) only;
  centralized              - one trunk over the joint (obs, action) with N
                             scalar heads (and a joint-obs potential trunk);
  centralized_obs_only     - centralized, but g ignores all actions.

The potential ``h`` never consumes actions in any variant. Policy
probabilities enter D as constants: they carry no gradient to either the
discriminator parameters or the policy.
"""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import (MLP, Module, Tensor, concat, log_sigmoid, mul, narrow,
                        neg, no_grad, one_hot, reduce_mean, reduce_sum, sigmoid)
from ..errors import ConfigError, ShapeError, UsageError

VARIANTS = ("decentralized", "centralized", "centralized_obs_only")


def d_value(f, pi):
    """Classifier output exp(f)/(exp(f) + pi), computed as sigmoid(f - log pi)."""
    if not 0.0 < pi <= 1.0:
        raise ConfigError(f"policy probability must be in (0, 1], got {pi}")
    z = f - math.log(pi)
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    return math.exp(z) / (1.0 + math.exp(z))


def reward_value(f, pi):
    """log D - log(1 - D) in its simplified form f - log pi."""
    if not 0.0 < pi <= 1.0:
        raise ConfigError(f"policy probability must be in (0, 1], got {pi}")
    return f - math.log(pi)


class _AgentDisc(Module):
    def __init__(self, obs_dim, n_actions, hidden, rng, dtype):
        self.g = MLP([obs_dim + n_actions, hidden, hidden, 1], rng, dtype=dtype)
        self.h = MLP([obs_dim, hidden, hidden, 1], rng, dtype=dtype)


class _CentralDisc(Module):
    def __init__(self, obs_sum, act_sum, n_agents, hidden, rng, dtype, obs_only):
        g_in = obs_sum if obs_only else obs_sum + act_sum
        self.g = MLP([g_in, hidden, hidden, n_agents], rng, dtype=dtype)
        self.h = MLP([obs_sum, hidden, hidden, n_agents], rng, dtype=dtype)


class AirlDiscriminator(Module):
    def __init__(self, spec, variant, gamma, rng, hidden_dim=128, dtype=np.float32):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown discriminator variant {variant!r}; "
                              f"one of {VARIANTS}")
        if not 0.0 <= gamma <= 1.0:
            raise ConfigError(f"discount must be in [0, 1], got {gamma}")
        self.spec = spec
        self.variant = variant
        self.gamma = gamma
        self.hidden_dim = hidden_dim
        self._dtype = dtype
        if variant == "decentralized":
            self.nets = [_AgentDisc(spec.obs_dims[i], spec.n_actions[i],
                                    hidden_dim, rng, dtype)
                         for i in range(spec.n_agents)]
        else:
            self.central = _CentralDisc(sum(spec.obs_dims), sum(spec.n_actions),
                                        spec.n_agents, hidden_dim, rng, dtype,
                                        obs_only=(variant == "centralized_obs_only"))

    # -- forward -------------------------------------------------------------
    def _as_tensors(self, arrays):
        return [a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=self._dtype))
                for a in arrays]

    def _check(self, obs, acts, next_obs):
        n = self.spec.n_agents
        if not (len(obs) == len(acts) == len(next_obs) == n):
            raise ShapeError(f"discriminator expects {n} per-agent inputs")
        for i in range(n):
            if obs[i].shape[1] != self.spec.obs_dims[i]:
                raise ShapeError(f"agent {i}: obs dim {obs[i].shape[1]} != "
                                 f"{self.spec.obs_dims[i]}")
            if acts[i].shape[1] != self.spec.n_actions[i]:
                raise ShapeError(f"agent {i}: action width {acts[i].shape[1]} != "
                                 f"{self.spec.n_actions[i]}")

    def g_values(self, obs, acts_onehot):
        """Per-agent portable reward g, shape (B, 1) each. Never sees next
        observations; in the observation-only variant, never sees actions."""
        obs = self._as_tensors(obs)
        acts_onehot = self._as_tensors(acts_onehot)
        if self.variant == "decentralized":
            return [net.g(concat([obs[i], acts_onehot[i]], axis=1))
                    for i, net in enumerate(self.nets)]
        joint_obs = concat(obs, axis=1)
        if self.variant == "centralized_obs_only":
            out = self.central.g(joint_obs)
        else:
            out = self.central.g(concat([joint_obs] + acts_onehot, axis=1))
        return [narrow(out, 1, i, 1) for i in range(self.spec.n_agents)]

    def _h_values(self, obs):
        if self.variant == "decentralized":
            return [net.h(obs[i]) for i, net in enumerate(self.nets)]
        out = self.central.h(concat(obs, axis=1))
        return [narrow(out, 1, i, 1) for i in range(self.spec.n_agents)]

    def f_values(self, obs, acts_onehot, next_obs):
        """Per-agent f = g + gamma*h(next) - h(current), shape (B, 1) each.

        The potential runs once over [obs; next_obs] stacked along the batch
        axis and is split afterwards."""
        obs = self._as_tensors(obs)
        acts_onehot = self._as_tensors(acts_onehot)
        next_obs = self._as_tensors(next_obs)
        self._check(obs, acts_onehot, next_obs)
        b = obs[0].shape[0]
        g = self.g_values(obs, acts_onehot)
        stacked = [concat([obs[i], next_obs[i]], axis=0)
                   for i in range(self.spec.n_agents)]
        h_both = self._h_values(stacked)
        out = []
        for i in range(self.spec.n_agents):
            h_now = narrow(h_both[i], 0, 0, b)
            h_next = narrow(h_both[i], 0, b, b)
            out.append(g[i] + mul(h_next, self.gamma) + neg(h_now))
        return out

    # -- numpy-facing reward APIs (forward only) --------------------------------
    def _onehots(self, actions):
        return [one_hot(actions[i], self.spec.n_actions[i], self._dtype)
                for i in range(self.spec.n_agents)]

    def rewards(self, batch, log_pi):
        """Per-agent adversarial rewards f - log pi for a batch, detached.

        ``log_pi`` is (B, N): current-policy log probabilities of the batch
        actions, treated as constants.
        """
        with no_grad():
            f = self.f_values(batch.obs, self._onehots(batch.actions), batch.next_obs)
            out = np.stack([f[i].values[:, 0] for i in range(self.spec.n_agents)], axis=1)
        return out - np.asarray(log_pi)

    def g_rewards(self, obs, actions):
        """Per-agent portable rewards (B, N) from g only, detached."""
        with no_grad():
            g = self.g_values(self._as_tensors(obs), self._onehots(actions))
            return np.stack([g[i].values[:, 0] for i in range(self.spec.n_agents)], axis=1)

    def d_values(self, batch, log_pi):
        """Classifier outputs (B, N), detached."""
        z = self.rewards(batch, log_pi)
        return 1.0 / (1.0 + np.exp(-z))

    # -- training objective -------------------------------------------------------
    def loss(self, agent_batch, agent_log_pi, expert_batch, expert_log_pi,
             entropy_coef=0.01):
        """Cross-entropy pushing expert transitions toward D=1 and replayed
        agent transitions toward D=0, minus an entropy bonus on the classifier
        outputs over both batches."""
        if agent_batch.size == 0 or expert_batch.size == 0:
            raise UsageError("discriminator update needs non-empty batches")
        n = self.spec.n_agents
        ba = agent_batch.size

        # one pass over [agent; expert] rows, split afterwards
        obs = [np.concatenate([agent_batch.obs[i], expert_batch.obs[i]])
               for i in range(n)]
        nxt = [np.concatenate([agent_batch.next_obs[i], expert_batch.next_obs[i]])
               for i in range(n)]
        acts = [np.concatenate([agent_batch.actions[i], expert_batch.actions[i]])
                for i in range(n)]
        log_pi = np.concatenate([np.asarray(agent_log_pi, dtype=self._dtype),
                                 np.asarray(expert_log_pi, dtype=self._dtype)])
        f = self.f_values(obs, self._onehots(acts), nxt)
        z_agent, z_expert = [], []
        for i in range(n):
            z = f[i] + (-log_pi[:, i:i + 1])
            z_agent.append(narrow(z, 0, 0, ba))
            z_expert.append(narrow(z, 0, ba, expert_batch.size))
        return self._objective(z_agent, z_expert, entropy_coef)

    def loss_from_f(self, f_agent, agent_log_pi, expert_batch, expert_log_pi,
                    entropy_coef=0.01):
        """Same objective, reusing tracked agent-side f tensors from the
        round's reward computation (valid because actor updates in between do
        not touch discriminator parameters)."""
        if expert_batch.size == 0:
            raise UsageError("discriminator update needs non-empty batches")
        n = self.spec.n_agents
        lpa = np.asarray(agent_log_pi, dtype=self._dtype)
        z_agent = [f_agent[i] + (-lpa[:, i:i + 1]) for i in range(n)]
        f_exp = self.f_values(expert_batch.obs, self._onehots(expert_batch.actions),
                              expert_batch.next_obs)
        lpe = np.asarray(expert_log_pi, dtype=self._dtype)
        z_expert = [f_exp[i] + (-lpe[:, i:i + 1]) for i in range(n)]
        return self._objective(z_agent, z_expert, entropy_coef)

    def _objective(self, z_agent, z_expert, entropy_coef):
        n = self.spec.n_agents
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
        # mean binary entropy over every D output across both batches
        ent = mul(ent, 1.0 / (2 * n))

        return ce + mul(ent, -entropy_coef)
