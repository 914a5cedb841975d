"""Adversarial reward models: structured transition discriminators and the
plain classifier baseline."""

from .airl import VARIANTS, AirlDiscriminator, d_value, reward_value
from .gail import GailDiscriminator
from .reward_export import (LearnedReward, disc_checkpoint_values,
                            g_checkpoint_values, save_reward_export)

__all__ = ["VARIANTS", "AirlDiscriminator", "d_value", "reward_value",
           "GailDiscriminator", "LearnedReward", "disc_checkpoint_values",
           "g_checkpoint_values", "save_reward_export"]
