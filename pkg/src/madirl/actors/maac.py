"""Off-policy actor updates around the shared attention critic.

The critic minimizes a Huber TD loss against targets bootstrapped through
slowly tracking target networks; policies ascend a score-function gradient
weighted by a counterfactual advantage (the value of the taken action minus
the policy-weighted average over that agent's alternatives, other agents'
actions held fixed) plus an entropy bonus. Rewards enter from outside: the
environment's during expert training, a learned reward model's otherwise.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (Adam, Tensor, clip_grad_norm, copy_values, gather,
                        huber, log_softmax, mul, neg, no_grad, one_hot,
                        reduce_mean, reduce_sum, softmax)
from ..errors import ConfigError, ShapeError, UsageError
from .attention_critic import AttentionCritic
from .policy import DiscretePolicy, sample_categorical


def soft_update(target, online, tau):
    """target <- (1 - tau) * target + tau * online, element-wise.

    Computed as target + tau * (online - target): an exact fixed point when
    the parameters already coincide. tau = 1 copies exactly.
    """
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"soft-update rate must be in (0, 1], got {tau}")
    src = online.named_parameters()
    for name, t in target.named_parameters().items():
        if name not in src:
            raise ShapeError(f"online module lacks parameter '{name}'")
        o = src[name].values
        if o.shape != t.values.shape:
            raise ShapeError(f"parameter '{name}': target shape {t.values.shape} "
                             f"!= online shape {o.shape}")
        if tau == 1.0:
            t.values[...] = o
        else:
            t.values += (tau * (o - t.values)).astype(t.values.dtype, copy=False)


def counterfactual_advantage(q_values, probs, actions):
    """Advantage of the taken action against the policy-weighted average of
    the same agent's action values (other agents' actions fixed).

    Accepts a single row (q (A,), probs (A,), int action) or a batch
    ((B, A), (B, A), (B,) actions). The policy-weighted mean of the advantage
    over actions is zero by construction.
    """
    q = np.asarray(q_values, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if q.shape != p.shape:
        raise ShapeError(f"q shape {q.shape} != probs shape {p.shape}")
    if q.ndim == 1:
        return float(q[int(actions)] - np.dot(p, q))
    idx = np.asarray(actions, dtype=np.int64)
    baseline = (p * q).sum(axis=1)
    return q[np.arange(q.shape[0]), idx] - baseline


class MAACLearner:
    """Policies + shared attention critic + target copies + their optimizers."""

    def __init__(self, spec, init_rng, update_rng, *, hidden_dim=128, n_heads=4,
                 gamma=0.995, lr_policy=1e-3, lr_critic=1e-3, tau_policy=0.01,
                 tau_critic=0.01, entropy_coef=0.01, critic_clip=1.0,
                 huber_delta=1.0, dtype=np.float32):
        if not 0.0 <= gamma < 1.0:
            raise ConfigError(f"discount must be in [0, 1), got {gamma}")
        self.spec = spec
        self.gamma = gamma
        self.entropy_coef = entropy_coef
        self.critic_clip = critic_clip
        self.huber_delta = huber_delta
        self.tau_policy = tau_policy
        self.tau_critic = tau_critic
        self.hidden_dim = hidden_dim
        self.n_heads = n_heads
        self._dtype = dtype
        self._rng = update_rng

        self.policies = [DiscretePolicy(spec.obs_dims[i], spec.n_actions[i],
                                        init_rng, hidden_dim, dtype)
                         for i in range(spec.n_agents)]
        self.critic = AttentionCritic(spec, init_rng, hidden_dim, n_heads, dtype)
        tgt_rng = np.random.default_rng(0)  # values overwritten below
        self.target_policies = [DiscretePolicy(spec.obs_dims[i], spec.n_actions[i],
                                               tgt_rng, hidden_dim, dtype)
                                for i in range(spec.n_agents)]
        self.target_critic = AttentionCritic(spec, tgt_rng, hidden_dim, n_heads, dtype)
        for t, o in zip(self.target_policies, self.policies):
            copy_values(t, o)
        copy_values(self.target_critic, self.critic)

        self.policy_opts = [Adam(p.parameters(), lr_policy) for p in self.policies]
        self.critic_opt = Adam(self.critic.parameters(), lr_critic)

    # -- acting ------------------------------------------------------------------
    def act(self, obs_list, mode, rng=None):
        return np.array([self.policies[i].act(obs_list[i], mode, rng)
                         for i in range(self.spec.n_agents)], dtype=np.int64)

    # -- updates -----------------------------------------------------------------
    def _onehots(self, actions):
        return [one_hot(actions[i], self.spec.n_actions[i], self._dtype)
                for i in range(self.spec.n_agents)]

    def td_targets(self, batch, rewards):
        """y_i = r_i + gamma * Q'(o', a') with a' one joint draw from the
        target policies; terminal rows keep y_i = r_i."""
        rewards = np.asarray(rewards)
        n = self.spec.n_agents
        with no_grad():
            next_actions = [self.target_policies[i].sample_actions(batch.next_obs[i], self._rng)
                            for i in range(n)]
            qvecs = self.target_critic.values(batch.next_obs, self._onehots(next_actions))
            rows = np.arange(rewards.shape[0])
            not_done = 1.0 - np.asarray(batch.done, dtype=np.float64)
            y = np.empty_like(rewards, dtype=np.float64)
            for i in range(n):
                q_next = qvecs[i].values[rows, next_actions[i]]
                y[:, i] = rewards[:, i] + self.gamma * not_done * q_next
        return y

    def update_critic(self, batch, rewards):
        """One Huber TD step on the critic; returns the scalar loss."""
        if batch.size == 0:
            raise UsageError("update_critic needs a non-empty batch")
        y = self.td_targets(batch, rewards)
        qvecs = self.critic.values(batch.obs, self._onehots(batch.actions))
        loss = None
        for i in range(self.spec.n_agents):
            term = huber(gather(qvecs[i], batch.actions[i]),
                         y[:, i].astype(self._dtype), self.huber_delta)
            loss = term if loss is None else loss + term
        self.critic.zero_grad()
        loss.backward()
        grads = [p.grad for p in self.critic.parameters() if p.grad is not None]
        clip_grad_norm(grads, self.critic_clip)
        self.critic_opt.step()
        self.critic.zero_grad()
        return float(loss.values)

    def update_policies(self, batch):
        """Score-function policy step with the counterfactual baseline and an
        entropy bonus; joint actions are re-sampled from the current policies
        at the batch observations. Returns per-agent surrogate losses."""
        if batch.size == 0:
            raise UsageError("update_policies needs a non-empty batch")
        n = self.spec.n_agents
        # one tracked forward per agent; its values drive both the joint
        # resample and the surrogate loss
        all_logits = [self.policies[i].logits(batch.obs[i]) for i in range(n)]
        all_logp = [log_softmax(lg) for lg in all_logits]
        all_probs = [softmax(lg) for lg in all_logits]
        sampled = [sample_categorical(all_probs[i].values, self._rng) for i in range(n)]
        with no_grad():
            qvecs = self.critic.values(batch.obs, self._onehots(sampled))
        advantages = [counterfactual_advantage(qvecs[i].values, all_probs[i].values,
                                               sampled[i]) for i in range(n)]

        losses = []
        for i in range(n):
            logp_taken = gather(all_logp[i], sampled[i])
            entropy = reduce_mean(neg(reduce_sum(mul(all_probs[i], all_logp[i]), axis=1)))
            adv = advantages[i].astype(self._dtype)
            loss = reduce_mean(mul(neg(logp_taken), adv)) + mul(entropy, -self.entropy_coef)
            self.policies[i].zero_grad()
            loss.backward()
            self.policy_opts[i].step()
            self.policies[i].zero_grad()
            losses.append(float(loss.values))
        return losses

    def update_targets(self):
        for t, o in zip(self.target_policies, self.policies):
            soft_update(t, o, self.tau_policy)
        soft_update(self.target_critic, self.critic, self.tau_critic)

    # -- persistence ---------------------------------------------------------------
    def named_values(self, include_targets=True):
        out = {}
        for i, p in enumerate(self.policies):
            out.update(p.value_dict(prefix=f"policy/{i}/"))
        out.update(self.critic.checkpoint_values(prefix="critic/"))
        if include_targets:
            for i, p in enumerate(self.target_policies):
                out.update(p.value_dict(prefix=f"target/policy/{i}/"))
            out.update(self.target_critic.checkpoint_values(prefix="target/critic/"))
        return out

    def load_named_values(self, named):
        for i, p in enumerate(self.policies):
            p.load_values(named, prefix=f"policy/{i}/")
        self.critic.load_checkpoint_values(named, prefix="critic/")
        has_targets = any(k.startswith("target/") for k in named)
        if has_targets:
            for i, p in enumerate(self.target_policies):
                p.load_values(named, prefix=f"target/policy/{i}/")
            self.target_critic.load_checkpoint_values(named, prefix="target/critic/")
        else:
            for t, o in zip(self.target_policies, self.policies):
                copy_values(t, o)
            copy_values(self.target_critic, self.critic)

    def net_config(self):
        return {"hidden_dim": self.hidden_dim, "n_heads": self.n_heads,
                "gamma": self.gamma}
