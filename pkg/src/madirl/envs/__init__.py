"""Partially observable Markov games: particle tasks plus the solvable toy."""

from ..errors import ConfigError
from .core import (EPISODE_LENGTH, GameSpec, JointTransition, MultiAgentEnv,
                   episode_score)
from .particle import CoopCommEnv, CoopNavEnv, KeepAwayEnv, RoverTowerEnv
from .toy import ToyCoopEnv, toy_optimal_score

ENV_IDS = ("keep_away", "coop_comm", "coop_nav", "rover_tower:8",
           "rover_tower:12", "rover_tower:16", "toy_coop")


def make_env(env_id):
    """Instantiate an environment from its string id."""
    if env_id == "keep_away":
        return KeepAwayEnv()
    if env_id == "coop_comm":
        return CoopCommEnv()
    if env_id == "coop_nav":
        return CoopNavEnv()
    if env_id == "toy_coop":
        return ToyCoopEnv()
    if env_id.startswith("rover_tower:"):
        try:
            n = int(env_id.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad rover_tower agent count in {env_id!r}")
        return RoverTowerEnv(n)
    raise ConfigError(f"unknown environment id {env_id!r}; known: {ENV_IDS}")


__all__ = ["EPISODE_LENGTH", "GameSpec", "JointTransition", "MultiAgentEnv",
           "episode_score", "make_env", "toy_optimal_score", "ENV_IDS",
           "KeepAwayEnv", "CoopCommEnv", "CoopNavEnv", "RoverTowerEnv", "ToyCoopEnv"]
