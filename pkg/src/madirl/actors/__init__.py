"""Policies, the shared attention critic, and their update rules."""

from .attention_critic import AttentionCritic
from .maac import MAACLearner, counterfactual_advantage, soft_update
from .policy import DiscretePolicy, sample_categorical

__all__ = ["AttentionCritic", "MAACLearner", "counterfactual_advantage",
           "soft_update", "DiscretePolicy", "sample_categorical"]
