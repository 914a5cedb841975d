"""Shared attention critic.

Every agent gets its own (observation, action) embedding, an observation-only
encoder whose output drives that agent's attention query, and a head emitting
a value for each of its actions. Key, query and value projections are one
shared parameter set referenced by all agents, so the critic's size grows
linearly with the agent count. The query uses the observation-only encoding;
an agent's own action therefore enters its value vector only through the
final per-action output, which keeps the whole vector valid for
counterfactual action swaps in a single forward pass.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (MLP, Linear, Module, Tensor, add, concat, leaky_relu,
                        matmul, mul, narrow, reduce_sum, reshape, softmax)
from ..errors import ShapeError, UsageError


class _SharedProjections(Module):
    def __init__(self, hidden_dim, n_heads, rng, dtype):
        head_dim = hidden_dim // n_heads
        self.keys = [Linear(hidden_dim, head_dim, rng, bias=False, dtype=dtype)
                     for _ in range(n_heads)]
        self.queries = [Linear(hidden_dim, head_dim, rng, bias=False, dtype=dtype)
                        for _ in range(n_heads)]
        self.values = [Linear(hidden_dim, head_dim, rng, dtype=dtype)
                       for _ in range(n_heads)]


class _AgentNets(Module):
    def __init__(self, obs_dim, n_actions, hidden_dim, rng, dtype):
        self.sa_encoder = Linear(obs_dim + n_actions, hidden_dim, rng, dtype=dtype)
        self.obs_encoder = Linear(obs_dim, hidden_dim, rng, dtype=dtype)
        self.head = MLP([2 * hidden_dim, hidden_dim, n_actions], rng, dtype=dtype)


class AttentionCritic(Module):
    def __init__(self, spec, rng, hidden_dim=128, n_heads=4, dtype=np.float32):
        if spec.n_agents < 2:
            raise UsageError("the attention critic needs at least two agents")
        if hidden_dim % n_heads != 0:
            raise ShapeError(f"hidden_dim {hidden_dim} not divisible by {n_heads} heads")
        self.spec = spec
        self.hidden_dim = hidden_dim
        self.n_heads = n_heads
        self.head_dim = hidden_dim // n_heads
        self.shared = _SharedProjections(hidden_dim, n_heads, rng, dtype)
        self.agents = [_AgentNets(spec.obs_dims[i], spec.n_actions[i], hidden_dim, rng, dtype)
                       for i in range(spec.n_agents)]
        self._dtype = dtype

    # -- forward ---------------------------------------------------------------
    def _check_inputs(self, obs, acts_onehot):
        n = self.spec.n_agents
        if len(obs) != n or len(acts_onehot) != n:
            raise ShapeError(f"critic expects {n} observation and action tensors")
        for i in range(n):
            if obs[i].shape[1] != self.spec.obs_dims[i]:
                raise ShapeError(f"agent {i}: obs dim {obs[i].shape[1]} != "
                                 f"{self.spec.obs_dims[i]}")
            if acts_onehot[i].shape[1] != self.spec.n_actions[i]:
                raise ShapeError(f"agent {i}: action one-hot width {acts_onehot[i].shape[1]} "
                                 f"!= {self.spec.n_actions[i]}")

    def _as_tensors(self, arrays):
        return [a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=self._dtype))
                for a in arrays]

    def _encode(self, obs, acts_onehot):
        sa = [leaky_relu(self.agents[j].sa_encoder(concat([obs[j], acts_onehot[j]], axis=1)))
              for j in range(self.spec.n_agents)]
        so = [leaky_relu(self.agents[i].obs_encoder(obs[i]))
              for i in range(self.spec.n_agents)]
        return sa, so

    def _attend(self, sa, so):
        """Returns (per-agent list over heads of attended features,
        per-agent list over heads of attention weight rows over j != i).

        The per-head projections stay separate parameters (one shared storage
        each) but are evaluated as one fused matmul per agent and split."""
        n = self.spec.n_agents
        hd = self.head_dim
        scale = 1.0 / np.sqrt(hd)
        w_keys = concat([lin.W for lin in self.shared.keys], axis=1)
        w_queries = concat([lin.W for lin in self.shared.queries], axis=1)
        w_values = concat([lin.W for lin in self.shared.values], axis=1)
        b_values = concat([reshape(lin.b, (1, hd)) for lin in self.shared.values], axis=1)
        keys = [matmul(e, w_keys) for e in sa]                       # (B, H*hd)
        vals = [leaky_relu(add(matmul(e, w_values), b_values)) for e in sa]
        queries = [matmul(s, w_queries) for s in so]

        attended = [[] for _ in range(n)]
        weights = [[] for _ in range(n)]
        for h in range(self.n_heads):
            for i in range(n):
                others = [j for j in range(n) if j != i]
                q = narrow(queries[i], 1, h * hd, hd)
                cols = [reduce_sum(mul(q, narrow(keys[j], 1, h * hd, hd)),
                                   axis=1, keepdims=True) for j in others]
                logits = mul(concat(cols, axis=1), scale)
                w = softmax(logits)
                weights[i].append(w)
                acc = None
                for col, j in enumerate(others):
                    term = mul(narrow(w, 1, col, 1), narrow(vals[j], 1, h * hd, hd))
                    acc = term if acc is None else add(acc, term)
                attended[i].append(acc)
        return attended, weights

    def values(self, obs, acts_onehot):
        """Per-agent action-value vectors (B, n_actions_i) given the joint
        observation and joint action one-hots."""
        obs = self._as_tensors(obs)
        acts_onehot = self._as_tensors(acts_onehot)
        self._check_inputs(obs, acts_onehot)
        sa, so = self._encode(obs, acts_onehot)
        attended, _ = self._attend(sa, so)
        return [self.agents[i].head(concat([so[i]] + attended[i], axis=1))
                for i in range(self.spec.n_agents)]

    def attention_weights(self, obs, acts_onehot, agent):
        """Attention rows of ``agent`` over the other agents, one (B, N-1)
        array per head; each row is a normalized distribution."""
        if self.spec.n_agents < 2:
            raise UsageError("attention weights need at least two agents")
        obs = self._as_tensors(obs)
        acts_onehot = self._as_tensors(acts_onehot)
        self._check_inputs(obs, acts_onehot)
        sa, so = self._encode(obs, acts_onehot)
        _, weights = self._attend(sa, so)
        return [w.values for w in weights[agent]]

    # -- checkpoint layout -------------------------------------------------------
    def checkpoint_values(self, prefix="critic/"):
        out = self.shared.value_dict(prefix=f"{prefix}shared/")
        for i, a in enumerate(self.agents):
            out.update(a.value_dict(prefix=f"{prefix}agent{i}/"))
        return out

    def load_checkpoint_values(self, named, prefix="critic/"):
        self.shared.load_values(named, prefix=f"{prefix}shared/")
        for i, a in enumerate(self.agents):
            a.load_values(named, prefix=f"{prefix}agent{i}/")
