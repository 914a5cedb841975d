"""Training loops, configuration, seeding, and the command-line interface."""

from .config import ALGORITHMS, DISC_VARIANTS, ExperimentConfig
from .rng import StreamSet, derive_rng
from .runner import (evaluate_checkpoint, generate_demos, random_baseline,
                     retrain, rollout_episode, train_expert, train_irl,
                     worker_count)

__all__ = ["ALGORITHMS", "DISC_VARIANTS", "ExperimentConfig", "StreamSet",
           "derive_rng", "evaluate_checkpoint", "generate_demos",
           "random_baseline", "retrain", "rollout_episode", "train_expert",
           "train_irl", "worker_count"]
