# The three evolution loops:
#   base     - reward-driven truncation GA with a validated elite
#   novelty  - parents and elite candidates ranked by novelty, elite still by
#              validation score
#   resample - base GA that, once elite validation scores stagnate, takes its
#              parents from the archive members most novel w.r.t. the population
#
# All randomness comes from streams derived from the run's master seed, and
# parallel evaluation gathers results in population order, so a run is a pure
# function of (config, environment) whatever the worker count.

from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from os.path import join as path_join
from time import perf_counter
from typing import Callable, List, Optional, Sequence

import numpy as np

from behaviour import Archive, BehaviourError, SegmentationParams, maybe_archive, \
                      novelty_score, novelty_scores, dump_archive
from config import RunConfig
from environments import EvalResult, run_episode
from genome import DeterministicRng, Genome, decode, mutate, save_genome
from network import arch_for_environment
from util import append_line, ensure_dir, stable_seed, training_seeds, validation_seeds, \
                 write_text


CSV_HEADER = 'gen,mean_score,high_score,elite_validation,mean_novelty,stagnant,wall_ms'
CSV_NAME = 'log.csv'
ARCHIVE_NAME = 'archive.txt'


class EvaluationError(RuntimeError):
    """An episode failed during a run."""


@dataclass(frozen=True)
class GenerationLog:
    generation: int
    mean_score: float
    high_score: float
    elite_validation: float
    mean_novelty: Optional[float]
    stagnant: bool
    wall_ms: int

    def csv_row(self) -> str:
        novelty = '' if self.mean_novelty is None else f'{self.mean_novelty:.6f}'
        return (f'{self.generation},{self.mean_score:.6f},{self.high_score:.6f},'
                f'{self.elite_validation:.6f},{novelty},{int(self.stagnant)},{self.wall_ms}')


def elite_filename(generation: int) -> str:
    return f'elite_g{generation}.txt'


# evaluation

def episode_seeds(config: RunConfig, generation: Optional[int] = None) -> List[int]:
    """Training seeds for `generation`, or the run's fixed validation seeds."""
    if generation is None:
        return validation_seeds(config.master_seed, config.validation_episodes)
    return training_seeds(config.master_seed, generation, config.training_episodes)


def evaluate_genome(genome, arch, env_factory, seeds, max_frames) -> EvalResult:
    """Decode once, play every seed, aggregate by mean score."""
    weights = decode(genome, arch)
    episodes = [run_episode(weights, arch, env_factory, s, max_frames) for s in seeds]
    scores = tuple(e.game_score for e in episodes)
    return EvalResult(
        genome=genome,
        game_score=float(np.mean(scores)),
        bc=episodes[0].bc,
        lifespan=episodes[0].lifespan,
        episode_scores=scores
    )


def _evaluate_job(job):
    # top level so it can be pickled for worker processes
    return evaluate_genome(*job)


@contextmanager
def worker_pool(threads: int):
    """Process pool for threads > 1, otherwise None (evaluate inline)."""
    if threads <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=threads) as pool:
        yield pool


def evaluate_population(genomes, arch, env_factory, seeds, max_frames,
                        pool=None, generation=None) -> List[EvalResult]:
    """Evaluate genomes, results in the same order as `genomes`."""
    jobs = [(g, arch, env_factory, tuple(seeds), max_frames) for g in genomes]
    try:
        if pool is None:
            return [_evaluate_job(j) for j in jobs]
        return list(pool.map(_evaluate_job, jobs))
    except Exception as e:
        where = 'evaluation' if generation is None else f'generation {generation}'
        raise EvaluationError(f'{where}: {type(e).__name__}: {e}') from e


# selection

def rank_by(values: Sequence[float]) -> List[int]:
    """Indices by descending value; ties keep the lower index first."""
    return sorted(range(len(values)), key=lambda i: -values[i])


def truncation_select(results: Sequence, truncation_size: int) -> list:
    """First T of an already-sorted result list."""
    if truncation_size < 1:
        raise ValueError(f'Truncation size must be >= 1, got {truncation_size}')
    if truncation_size > len(results):
        raise ValueError(
            f'Truncation size {truncation_size} exceeds population of {len(results)}')
    return list(results[:truncation_size])


def stagnation_check(v_scores: Sequence[float], improvement_generations: int) -> bool:
    """True when the last IG validation scores never beat the first of them.

    Fewer than IG scores (since the last reset) is never stagnant.
    """
    if improvement_generations < 1:
        raise ValueError(f'improvement_generations must be >= 1, got {improvement_generations}')
    if len(v_scores) < improvement_generations:
        return False
    window = list(v_scores)[-improvement_generations:]
    return all(score - window[0] <= 0 for score in window[1:])


class StagnationMonitor:
    """Elite validation score history since the last resampling."""

    def __init__(self, improvement_generations: int):
        self.improvement_generations = improvement_generations
        self.v_scores = []

    def push(self, score: float) -> bool:
        self.v_scores.append(score)
        return stagnation_check(self.v_scores, self.improvement_generations)

    def reset(self):
        self.v_scores = []


def resample_parents(archive: Archive, current_bcs, count, novelty_k, params,
                     metric='levenshtein') -> List[Genome]:
    """Genomes of the `count` archive entries most novel w.r.t. `current_bcs`.

    Only the current population is the neighbour pool here; archive entries
    are the candidates. Ties keep the earlier archive entry.
    """
    if len(archive) == 0:
        raise BehaviourError('Cannot resample parents from an empty archive.')
    if count < 1:
        raise ValueError(f'Resample count must be >= 1, got {count}')
    entries = archive.entries
    scores = [novelty_score(e.bc, None, current_bcs, novelty_k, params, metric) for e in entries]
    return [entries[i].genome for i in rank_by(scores)[:count]]


def random_resample_parents(archive: Archive, count, rng: DeterministicRng) -> List[Genome]:
    """Uniformly sampled archive genomes, without replacement (baseline)."""
    if len(archive) == 0:
        raise BehaviourError('Cannot resample parents from an empty archive.')
    entries = archive.entries
    return [entries[i].genome for i in rng.sample_indices(len(entries), min(count, len(entries)))]


# the loops

def _evolve(config: RunConfig, env_factory, out_dir=None, threads=1, verbose=False,
            on_generation: Callable | None = None):
    arch = arch_for_environment(
        env_factory.observation_length, env_factory.action_space_size, config.hidden_layers)
    params = SegmentationParams(config.segment_length, config.max_frames)
    method = config.method
    resample_count = config.resample_count or 2 * config.truncation_size

    population_rng = DeterministicRng(stable_seed(config.master_seed, 'population'))
    archive_rng = DeterministicRng(stable_seed(config.master_seed, 'archive'))
    archive = Archive(config.archive_probability)
    monitor = StagnationMonitor(config.improvement_generations)
    valid_seeds = episode_seeds(config)

    population = [Genome((population_rng.seed64(),), config.mutation_power)
                  for _ in range(config.population_size)]

    if verbose:
        print(f'{method}: N={config.population_size} G={config.generations} '
              f'T={config.truncation_size} arch={arch} env={env_factory.name}')
        if method == 'resample':
            print(f'  resample_count={resample_count} strategy={config.resample_strategy}')

    csv_path = None
    if out_dir is not None:
        csv_path = path_join(ensure_dir(out_dir), CSV_NAME)
        write_text(csv_path, CSV_HEADER + '\n')

    logs = []
    elite = None
    with worker_pool(threads) as pool:
        for gen in range(config.generations):
            started = perf_counter()

            results = evaluate_population(
                population, arch, env_factory,
                episode_seeds(config, gen),
                config.max_frames, pool, gen)
            bcs = [r.bc for r in results]
            scores = [r.game_score for r in results]

            own_entries = []
            if method in ('novelty', 'resample'):
                for r in results:
                    size = len(archive)
                    maybe_archive(archive, r.genome, r.bc, archive_rng)
                    own_entries.append(size if len(archive) > size else None)

            mean_novelty = None
            if method == 'novelty':
                novelty = novelty_scores(bcs, archive, config.novelty_k, params,
                                         config.behaviour_metric, own_entries)
                mean_novelty = float(np.mean(novelty))
                order = rank_by(novelty)
            else:
                order = rank_by(scores)

            ranked = [results[i] for i in order]
            candidates = ranked[:config.elite_candidate_count]
            validated = evaluate_population(
                [c.genome for c in candidates], arch, env_factory, valid_seeds,
                config.max_frames, pool, gen)
            best = rank_by([v.game_score for v in validated])[0]
            elite = candidates[best].genome
            elite_validation = validated[best].game_score
            if out_dir is not None:
                save_genome(path_join(out_dir, elite_filename(gen)), elite, arch)

            parents = [r.genome for r in truncation_select(ranked, config.truncation_size)]

            stagnant = False
            if method == 'resample' and monitor.push(elite_validation):
                stagnant = True
                monitor.reset()
                if len(archive) == 0:
                    print(f'Warning: stagnation detected at generation {gen} but archive is '
                          f'empty; keeping score-based parents')
                elif config.resample_strategy == 'random':
                    parents = random_resample_parents(archive, resample_count, population_rng)
                else:
                    parents = resample_parents(archive, bcs, resample_count, config.novelty_k,
                                               params, config.behaviour_metric)

            wall_ms = int((perf_counter() - started) * 1000) if config.log_wall_time else 0
            log = GenerationLog(gen, float(np.mean(scores)), float(np.max(scores)),
                                elite_validation, mean_novelty, stagnant, wall_ms)
            logs.append(log)
            if csv_path is not None:
                append_line(csv_path, log.csv_row())
            if verbose:
                novelty_text = '' if mean_novelty is None else f' novelty={mean_novelty:.3f}'
                print(f'gen {gen}: mean={log.mean_score:.3f} high={log.high_score:.3f} '
                      f'elite_validation={elite_validation:.3f}{novelty_text}'
                      f'{" stagnant" if stagnant else ""}')
            if on_generation:
                on_generation(gen, population, results, parents, elite)

            if gen < config.generations - 1:
                population = [elite] + [
                    mutate(parents[population_rng.below(len(parents))], population_rng.seed64())
                    for _ in range(config.population_size - 1)
                ]

    if out_dir is not None and config.dump_archive:
        dump_archive(archive, path_join(out_dir, ARCHIVE_NAME))

    return elite, logs


def _check_method(config: RunConfig, expected: str):
    if config.method != expected:
        raise ValueError(f'Config method is "{config.method}", expected "{expected}"')


def run_base_ga(config: RunConfig, env_factory, **kwargs):
    """Reward-driven GA. Returns (elite genome, generation logs)."""
    _check_method(config, 'base')
    return _evolve(config, env_factory, **kwargs)

def run_novelty_ga(config: RunConfig, env_factory, **kwargs):
    """Novelty-driven selection with a validation-score elite."""
    _check_method(config, 'novelty')
    return _evolve(config, env_factory, **kwargs)

def run_resample_ga(config: RunConfig, env_factory, **kwargs):
    """Base GA with stagnation-triggered archive resampling."""
    _check_method(config, 'resample')
    return _evolve(config, env_factory, **kwargs)


RUNNERS = {
    'base': run_base_ga,
    'novelty': run_novelty_ga,
    'resample': run_resample_ga,
}


def run(config: RunConfig, env_factory, **kwargs):
    return RUNNERS[config.method](config, env_factory, **kwargs)
