"""Experiment configuration: one dataclass covering every run kind, with
per-algorithm defaults for the fields whose published values differ between
expert training and adversarial reward learning. Every field is validated
before a run starts and the fully resolved config is written into the run
directory."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from ..errors import ConfigError

ALGORITHMS = ("expert-maac", "ma-daac", "ma-gail", "retrain")
DISC_VARIANTS = {"dec": "decentralized", "cen": "centralized",
                 "cen-obs": "centralized_obs_only"}
RETRAIN_REWARDS = ("learned", "ground_truth", "zero")

# per-algorithm defaults for fields left unset
_ALGO_DEFAULTS = {
    "expert-maac": {"buffer_size": 50_000, "tau_policy": 0.01, "tau_critic": 0.01},
    "ma-daac": {"buffer_size": 1_250_000, "tau_policy": 0.0005, "tau_critic": 0.0005},
    "ma-gail": {"buffer_size": 1_250_000, "tau_policy": 0.0005, "tau_critic": 0.0005},
    "retrain": {"buffer_size": 50_000, "tau_policy": 0.01, "tau_critic": 0.01},
}


@dataclass
class ExperimentConfig:
    env: str
    algorithm: str
    seed: int = 0
    episodes: int = 5000

    gamma: float = 0.995
    batch_size: int = 1000
    update_period: int = 100          # environment steps per training event
    updates_per_event: int = 4        # gradient rounds per training event
    hidden_dim: int = 128
    attn_heads: int = 4
    lr_policy: float = 1e-3
    lr_critic: float = 1e-3
    entropy_coef: float = 0.01
    critic_clip: float = 1.0
    huber_delta: float = 1.0

    buffer_size: int = None
    tau_policy: float = None
    tau_critic: float = None

    disc_variant: str = "decentralized"
    lr_disc: float = 5e-4
    disc_entropy_coef: float = 0.01
    disc_clip: float = 10.0
    demo_count: int = None

    eval_every: int = 100
    eval_episodes: int = 10
    random_episodes: int = 500
    expert_eval_episodes: int = 500
    early_stop_nss: float = None
    early_stop_score: float = None
    retrain_reward: str = "learned"
    workers: int = 1

    def resolved(self):
        """Copy with per-algorithm defaults filled in; validates everything."""
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, "
                              f"got {self.algorithm!r}")
        cfg = dataclasses.replace(self)
        for field, value in _ALGO_DEFAULTS[self.algorithm].items():
            if getattr(cfg, field) is None:
                setattr(cfg, field, value)
        cfg.validate()
        return cfg

    def validate(self):
        def _require(cond, msg):
            if not cond:
                raise ConfigError(msg)

        from ..envs import make_env  # env id validation
        make_env(self.env)

        _require(self.algorithm in ALGORITHMS,
                 f"algorithm must be one of {ALGORITHMS}")
        _require(self.episodes >= 1, "episodes must be >= 1")
        _require(0.0 <= self.gamma < 1.0, f"gamma must be in [0, 1), got {self.gamma}")
        _require(self.batch_size >= 1, "batch_size must be >= 1")
        _require(self.update_period >= 1, "update_period must be >= 1")
        _require(self.updates_per_event >= 1, "updates_per_event must be >= 1")
        _require(self.hidden_dim >= 1 and self.hidden_dim % self.attn_heads == 0,
                 "hidden_dim must be a positive multiple of attn_heads")
        for name in ("lr_policy", "lr_critic", "lr_disc"):
            _require(getattr(self, name) > 0, f"{name} must be positive")
        _require(self.entropy_coef >= 0, "entropy_coef must be >= 0")
        _require(self.disc_entropy_coef >= 0, "disc_entropy_coef must be >= 0")
        _require(self.critic_clip > 0, "critic_clip must be positive")
        _require(self.disc_clip > 0, "disc_clip must be positive")
        _require(self.huber_delta > 0, "huber_delta must be positive")
        _require(self.buffer_size is not None and self.buffer_size >= 1,
                 "buffer_size must be >= 1")
        for name in ("tau_policy", "tau_critic"):
            v = getattr(self, name)
            _require(v is not None and 0.0 < v <= 1.0,
                     f"{name} must be in (0, 1], got {v}")
        _require(self.disc_variant in DISC_VARIANTS.values(),
                 f"disc_variant must be one of {sorted(DISC_VARIANTS.values())}, "
                 f"got {self.disc_variant!r}")
        _require(self.retrain_reward in RETRAIN_REWARDS,
                 f"retrain_reward must be one of {RETRAIN_REWARDS}")
        _require(self.eval_every >= 1, "eval_every must be >= 1")
        _require(self.eval_episodes >= 1, "eval_episodes must be >= 1")
        _require(self.random_episodes >= 2, "random_episodes must be >= 2")
        _require(self.expert_eval_episodes >= 1, "expert_eval_episodes must be >= 1")
        _require(self.workers >= 1, "workers must be >= 1")
        if self.demo_count is not None:
            _require(self.demo_count >= 1, "demo_count must be >= 1")

    def to_dict(self):
        return dataclasses.asdict(self)

    def dump(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_sources(cls, config_path=None, **overrides):
        """Build from an optional JSON file plus keyword overrides (CLI flags
        win over the file; unset overrides are ignored)."""
        data = {}
        if config_path is not None:
            with open(config_path) as f:
                loaded = json.load(f)
            if not isinstance(loaded, dict):
                raise ConfigError(f"{config_path}: expected a JSON object")
            data.update(loaded)
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for required in ("env", "algorithm"):
            if required not in data:
                raise ConfigError(f"config needs '{required}'")
        return cls(**data)
