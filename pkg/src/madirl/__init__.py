"""madirl: multi-agent inverse reinforcement learning with attention critics.

Subpackages:
  autodiff        - reverse-mode tape, layers, optimizers, checkpoints
  envs            - partially observable Markov games (particle tasks + grid toy)
  actors          - per-agent policies, shared attention critic, off-policy updates
  discriminators  - structured adversarial reward models and the classifier baseline
  replay          - experience ring buffer and demonstration store
  orchestrator    - training loops, configuration, seeding, CLI
  evaluation      - score normalization, reward correlation, parameter accounting
"""

__version__ = "0.1.0"
