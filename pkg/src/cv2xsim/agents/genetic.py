"""Genetic baseline: evolves one static (RRI, power) allocation per vehicle.

Fitness of an individual is the mean epoch reward of a seeded evaluation
episode run with that allocation held fixed; evolution uses size-2 tournament
selection, single-point crossover over the vehicle axis, per-gene mutation,
and single-individual elitism. The best individual then serves as a policy.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..config import SimulationConfig
from ..engine import run_episode
from .base import FixedAllocationPolicy

GA_POPULATION = 30
GA_GENERATIONS = 20
GA_TOURNAMENT = 2
GA_CROSSOVER = 0.8
GA_MUTATION = 0.1
GA_EVAL_SLOTS = 2000
POWER_MUTATION_FRACTION = 0.1  # sigma as a fraction of P_max


@dataclass
class GaPopulation:
    rri_idx: np.ndarray  # (pop, n_vehicles) indices into rri_choices
    power: np.ndarray    # (pop, n_vehicles) mW

    @property
    def size(self) -> int:
        return self.rri_idx.shape[0]

    def individual(self, i: int, cfg: SimulationConfig) -> FixedAllocationPolicy:
        choices = np.asarray(cfg.rri_choices)
        return FixedAllocationPolicy(choices[self.rri_idx[i]], self.power[i])


def random_population(cfg: SimulationConfig, rng: np.random.Generator,
                      size: int = GA_POPULATION) -> GaPopulation:
    n = cfg.n_vehicles
    return GaPopulation(
        rri_idx=rng.integers(0, len(cfg.rri_choices), size=(size, n)),
        power=rng.uniform(0.0, cfg.p_max_mw, size=(size, n)),
    )


def _tournament(fitness: np.ndarray, rng: np.random.Generator, k: int = GA_TOURNAMENT) -> int:
    contenders = rng.integers(0, fitness.size, size=k)
    return int(contenders[np.argmax(fitness[contenders])])


def ga_step(pop: GaPopulation, fitness: np.ndarray, rng: np.random.Generator,
            cfg: SimulationConfig, crossover_p: float = GA_CROSSOVER,
            mutation_p: float = GA_MUTATION) -> GaPopulation:
    """One generation: tournament selection, crossover, mutation, elitism."""
    size, n = pop.rri_idx.shape
    child_rri = np.empty_like(pop.rri_idx)
    child_pow = np.empty_like(pop.power)
    filled = 0
    while filled < size:
        a = _tournament(fitness, rng)
        b = _tournament(fitness, rng)
        rri_a, pow_a = pop.rri_idx[a].copy(), pop.power[a].copy()
        rri_b, pow_b = pop.rri_idx[b].copy(), pop.power[b].copy()
        if n > 1 and rng.random() < crossover_p:
            cut = int(rng.integers(1, n))
            rri_a[cut:], rri_b[cut:] = rri_b[cut:].copy(), rri_a[cut:].copy()
            pow_a[cut:], pow_b[cut:] = pow_b[cut:].copy(), pow_a[cut:].copy()
        for rri_child, pow_child in ((rri_a, pow_a), (rri_b, pow_b)):
            if filled >= size:
                break
            reset = rng.random(n) < mutation_p
            rri_child[reset] = rng.integers(0, len(cfg.rri_choices), size=int(reset.sum()))
            jitter = rng.random(n) < mutation_p
            pow_child[jitter] += rng.normal(
                0.0, POWER_MUTATION_FRACTION * cfg.p_max_mw, size=int(jitter.sum()))
            np.clip(pow_child, 0.0, cfg.p_max_mw, out=pow_child)
            child_rri[filled] = rri_child
            child_pow[filled] = pow_child
            filled += 1
    # elitism: the incumbent best survives unchanged
    best = int(np.argmax(fitness))
    child_rri[0] = pop.rri_idx[best]
    child_pow[0] = pop.power[best]
    return GaPopulation(child_rri, child_pow)


def evaluate_population(pop: GaPopulation, cfg: SimulationConfig, eval_seed,
                        eval_slots: int = GA_EVAL_SLOTS) -> np.ndarray:
    """Mean epoch reward per individual on one shared seeded episode."""
    eval_cfg = dataclasses.replace(cfg, slots_per_episode=eval_slots)
    fitness = np.empty(pop.size)
    for i in range(pop.size):
        metrics = run_episode(eval_cfg, pop.individual(i, cfg), eval_seed,
                              record_epochs=False)
        fitness[i] = metrics.mean_reward
    return fitness


def evolve(cfg: SimulationConfig, seed, generations: int = GA_GENERATIONS,
           population: int = GA_POPULATION, eval_slots: int = GA_EVAL_SLOTS):
    """Full evolution; returns (best policy, per-generation history rows).

    History rows are (generation, best fitness, mean fitness). `seed` may be
    an integer or a numpy SeedSequence.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    ga_seed, eval_seed = root.spawn(2)
    rng = np.random.default_rng(ga_seed)
    pop = random_population(cfg, rng, population)
    fitness = evaluate_population(pop, cfg, eval_seed, eval_slots)
    history = [(0, float(fitness.max()), float(fitness.mean()))]
    for gen in range(1, generations + 1):
        pop = ga_step(pop, fitness, rng, cfg)
        fitness = evaluate_population(pop, cfg, eval_seed, eval_slots)
        history.append((gen, float(fitness.max()), float(fitness.mean())))
    best = int(np.argmax(fitness))
    return pop.individual(best, cfg), history
