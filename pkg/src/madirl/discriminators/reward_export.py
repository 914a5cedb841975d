"""Export and reconstruction of the learned portable reward.

The export is a parameter archive of the g networks only, plus metadata
(variant, game spec / input layout, discount, and the score baselines of the
originating run) sufficient to rebuild the reward function exactly and to
evaluate retraining against the same normalization.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import load_params, save_params
from ..envs import GameSpec
from ..errors import FormatError
from .airl import AirlDiscriminator


def g_checkpoint_values(disc: AirlDiscriminator):
    out = {}
    if disc.variant == "decentralized":
        for i, net in enumerate(disc.nets):
            out.update(net.g.value_dict(prefix=f"g/agent{i}/"))
    else:
        out.update(disc.central.g.value_dict(prefix="g/shared/"))
    return out


def disc_checkpoint_values(disc: AirlDiscriminator):
    out = g_checkpoint_values(disc)
    if disc.variant == "decentralized":
        for i, net in enumerate(disc.nets):
            out.update(net.h.value_dict(prefix=f"h/agent{i}/"))
    else:
        out.update(disc.central.h.value_dict(prefix="h/shared/"))
    return out


def save_reward_export(path, disc: AirlDiscriminator, extra=None):
    meta = {
        "kind": "reward_export",
        "variant": disc.variant,
        "gamma": disc.gamma,
        "hidden_dim": disc.hidden_dim,
        "game_spec": disc.spec.to_dict(),
    }
    meta.update(extra or {})
    save_params(path, g_checkpoint_values(disc), extra=meta)


class LearnedReward:
    """The exported g reward, reconstructed and frozen for retraining."""

    def __init__(self, disc: AirlDiscriminator, meta):
        self.disc = disc
        self.meta = meta
        self.spec = disc.spec
        self.variant = disc.variant

    @classmethod
    def load(cls, path):
        named, meta = load_params(path)
        if meta.get("kind") != "reward_export":
            raise FormatError(f"{path}: not a reward export archive")
        spec = GameSpec.from_dict(meta["game_spec"])
        rng = np.random.default_rng(0)  # placeholder init, overwritten next
        disc = AirlDiscriminator(spec, meta["variant"], float(meta["gamma"]),
                                 rng, hidden_dim=int(meta["hidden_dim"]))
        if disc.variant == "decentralized":
            for i, net in enumerate(disc.nets):
                net.g.load_values(named, prefix=f"g/agent{i}/")
        else:
            disc.central.g.load_values(named, prefix="g/shared/")
        return cls(disc, meta)

    def rewards(self, batch):
        """Per-agent rewards (B, N) from g only."""
        return self.disc.g_rewards(batch.obs, batch.actions)
