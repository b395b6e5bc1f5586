from .base import (Agent, FixedAllocationPolicy, FixedRriPolicy, RandomPolicy,
                   ZeroPowerPolicy)
from .genetic import GaPopulation, evolve, ga_step, random_population
from .mpdqn import MpdqnAgent, OuNoise, ReplayBuffer, train
from .nets import Adam, Mlp

__all__ = [
    "Agent", "RandomPolicy", "FixedRriPolicy", "FixedAllocationPolicy",
    "ZeroPowerPolicy", "GaPopulation", "random_population", "ga_step", "evolve",
    "MpdqnAgent", "OuNoise", "ReplayBuffer", "train", "Mlp", "Adam",
]
