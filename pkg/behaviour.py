# Behaviour characteristics: padded action strings, edit-metric distances,
# novelty scores and the probabilistic archive.

from collections import Counter
from dataclasses import dataclass
import math
from typing import Iterable, List, Sequence

import Levenshtein
import numpy as np
from scipy.stats import entropy

from genome import Genome
from util import read_text, write_text


# one symbol per action index; 'x' is reserved for death / non-consumed frames
ACTION_SYMBOLS = '0123456789abcdefghijklmnopqrstuvwyzABCDEFGHIJKLMNOPQRSTUVWXYZ'
PAD_SYMBOL = 'x'
MAX_ACTIONS = len(ACTION_SYMBOLS)

ARCHIVE_HEADER = 'seedevo-archive v1'

METRICS = ('levenshtein', 'hamming', 'kl', 'lifespan')


class BehaviourError(ValueError):
    """Invalid behaviour characteristics or novelty queries."""


def action_symbol(action: int) -> str:
    if not 0 <= action < MAX_ACTIONS:
        raise BehaviourError(f'Action index {action} has no symbol (max {MAX_ACTIONS - 1})')
    return ACTION_SYMBOLS[action]

def symbol_action(symbol: str) -> int:
    """Inverse of action_symbol; -1 for the padding symbol."""
    if symbol == PAD_SYMBOL:
        return -1
    index = ACTION_SYMBOLS.find(symbol)
    if index < 0 or len(symbol) != 1:
        raise BehaviourError(f'Unknown action symbol "{symbol}"')
    return index

def lifespan_of(bc: str) -> int:
    """Frames actually played: count of non-padding symbols."""
    return len(bc) - bc.count(PAD_SYMBOL)


@dataclass(frozen=True)
class SegmentationParams:
    segment_length: int
    frames: int

    def __post_init__(self):
        if self.segment_length < 1:
            raise BehaviourError(f'segment_length must be >= 1, got {self.segment_length}')
        if self.frames < 0:
            raise BehaviourError(f'frames must be >= 0, got {self.frames}')

    @property
    def segment_count(self) -> int:
        return math.ceil(self.frames / self.segment_length)


def levenshtein(a: str, b: str) -> int:
    return Levenshtein.distance(a, b)


def hamming(a: str, b: str) -> int:
    if len(a) != len(b):
        raise BehaviourError(f'Hamming distance needs equal lengths ({len(a)} != {len(b)})')
    return Levenshtein.hamming(a, b)


def kl_divergence(a: str, b: str, alphabet: Iterable[str] | None = None) -> float:
    """KL(a || b) between add-one-smoothed symbol distributions.

    The alphabet defaults to the symbols occurring in either string.
    """
    if not a or not b:
        raise BehaviourError('KL divergence needs non-empty strings.')
    symbols = sorted(set(alphabet) if alphabet is not None else set(a) | set(b))
    unknown = (set(a) | set(b)) - set(symbols)
    if unknown:
        raise BehaviourError(f'Symbols outside the alphabet: {sorted(unknown)}')

    counts_a, counts_b = Counter(a), Counter(b)
    p = np.array([counts_a[s] + 1 for s in symbols], dtype=np.float64)
    q = np.array([counts_b[s] + 1 for s in symbols], dtype=np.float64)
    return float(entropy(p / p.sum(), q / q.sum()))


def segmented_distance(a: str, b: str, params: SegmentationParams) -> int:
    """Sum of Levenshtein distances over aligned segments of length n.

    The final segment is shorter when n doesn't divide F.
    """
    if len(a) != len(b):
        raise BehaviourError(f'Action sequences differ in length ({len(a)} != {len(b)})')
    if len(a) != params.frames:
        raise BehaviourError(f'Action sequences have length {len(a)}, expected {params.frames}')
    n = params.segment_length
    return sum(Levenshtein.distance(a[i:i + n], b[i:i + n]) for i in range(0, len(a), n))


def behaviour_distance(a: str, b: str, metric: str, params: SegmentationParams) -> float:
    """Distance between two BCs under one of METRICS."""
    if metric == 'levenshtein':
        return segmented_distance(a, b, params)
    elif metric == 'hamming':
        return hamming(a, b)
    elif metric == 'kl':
        return kl_divergence(a, b)
    elif metric == 'lifespan':
        return abs(lifespan_of(a) - lifespan_of(b))
    else:
        raise BehaviourError(f'Unknown behaviour metric "{metric}"')


@dataclass(frozen=True)
class ArchiveEntry:
    genome: Genome
    bc: str


class Archive:
    """Append-only store of (genome, BC) entries."""

    def __init__(self, insertion_probability: float):
        if not 0 <= insertion_probability <= 1:
            raise BehaviourError(
                f'Archive probability must be in [0, 1], got {insertion_probability}')
        self.insertion_probability = insertion_probability
        self._entries = []

    @property
    def entries(self):
        return tuple(self._entries)

    def append(self, genome: Genome, bc: str):
        self._entries.append(ArchiveEntry(genome, bc))

    def bcs(self) -> List[str]:
        return [e.bc for e in self._entries]

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)


def maybe_archive(archive: Archive, genome: Genome, bc: str, rng) -> Archive:
    """Append with probability p; exactly one uniform draw per call."""
    if rng.uniform() < archive.insertion_probability:
        archive.append(genome, bc)
    return archive


def _reference_bcs(archive) -> List[str]:
    if archive is None:
        return []
    if isinstance(archive, Archive):
        return archive.bcs()
    return list(archive)


def _knn_mean(distances: List[float], k: int) -> float:
    nearest = sorted(distances)[:k]
    return float(sum(nearest)) / len(nearest)


def novelty_score(
        bc: str,
        archive,
        current_bcs: Sequence[str],
        k: int,
        params: SegmentationParams,
        metric: str = 'levenshtein',
        self_index: int | None = None
    ) -> float:
    """Mean distance from `bc` to its k nearest neighbours.

    Neighbours are the archive's BCs plus `current_bcs`, leaving out position
    `self_index` of `current_bcs` (the individual being scored). `archive` may
    be an Archive, a plain sequence of BCs or None. With fewer than k
    neighbours, all of them are averaged.
    """
    if k < 1:
        raise BehaviourError(f'k must be >= 1, got {k}')
    neighbours = _reference_bcs(archive) + \
        [c for i, c in enumerate(current_bcs) if i != self_index]
    if not neighbours:
        raise BehaviourError('Novelty needs at least one neighbour.')
    return _knn_mean([behaviour_distance(bc, n, metric, params) for n in neighbours], k)


def novelty_scores(
        bcs: Sequence[str],
        archive,
        k: int,
        params: SegmentationParams,
        metric: str = 'levenshtein',
        own_entries: Sequence[int | None] | None = None
    ) -> List[float]:
    """novelty_score for every member of a population, each excluding itself.

    `own_entries[i]` is the archive index of member i's own entry when it was
    archived this generation; that entry is skipped too. Pairwise distances
    inside the population are computed once.
    """
    if k < 1:
        raise BehaviourError(f'k must be >= 1, got {k}')
    references = _reference_bcs(archive)
    size = len(bcs)
    if size == 0:
        return []
    if own_entries is None:
        own_entries = [None] * size

    pairwise = np.zeros((size, size))
    for i in range(size):
        for j in range(i + 1, size):
            pairwise[i, j] = pairwise[j, i] = behaviour_distance(bcs[i], bcs[j], metric, params)

    scores = []
    for i in range(size):
        distances = [behaviour_distance(bcs[i], r, metric, params)
                     for a, r in enumerate(references) if a != own_entries[i]]
        distances += [float(pairwise[i, j]) for j in range(size) if j != i]
        if not distances:
            raise BehaviourError('Novelty needs at least one neighbour.')
        scores.append(_knn_mean(distances, k))
    return scores


def format_archive(archive: Archive) -> str:
    """Archive dump: header, p, then `<seed>,<seed>,...@<sigma>|<bc>` per entry."""
    lines = [ARCHIVE_HEADER, f'insertion_probability={archive.insertion_probability!r}']
    for e in archive:
        seeds = ','.join(str(s) for s in e.genome.seeds)
        lines.append(f'{seeds}@{float(e.genome.sigma)!r}|{e.bc}')
    return '\n'.join(lines) + '\n'


def parse_archive(text: str) -> Archive:
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    if not lines or lines[0] != ARCHIVE_HEADER:
        raise BehaviourError(f'line 1: expected "{ARCHIVE_HEADER}"')
    if len(lines) < 2 or not lines[1].startswith('insertion_probability='):
        raise BehaviourError('line 2: expected "insertion_probability=<p>"')
    try:
        archive = Archive(float(lines[1].split('=', 1)[1]))
    except ValueError as e:
        raise BehaviourError(f'line 2: {e}') from None

    for i, line in enumerate(lines[2:], start=3):
        try:
            genome_part, bc = line.split('|', 1)
            seeds, sigma = genome_part.split('@', 1)
            archive.append(Genome(tuple(int(s) for s in seeds.split(',')), float(sigma)), bc)
        except ValueError as e:
            raise BehaviourError(f'line {i}: {e}') from None
    return archive


def dump_archive(archive: Archive, path):
    write_text(path, format_archive(archive))

def load_archive(path) -> Archive:
    return parse_archive(read_text(path))
