# Post-hoc testing of evolved genomes and significance tests between runs.
#
# Test episodes draw their seeds from a namespace disjoint from training and
# validation, so a checkpoint is never scored on episodes it was selected on.

from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
import math
from typing import Sequence, Tuple

import numpy as np
from scipy import stats

from environments import run_episode
from genome import decode, load_genome
from network import ShapeError
from util import TEST_NAMESPACE, namespaced_seeds, write_text


DEFAULT_TEST_EPISODES = 30
DEFAULT_ALPHA = 0.05
SAMPLE_COMMENT = '#'


class Verdict(StrEnum):
    A_BETTER = 'A'
    B_BETTER = 'B'
    NO_DIFFERENCE = 'none'


def sample_std(values) -> float:
    """Sample (n-1) standard deviation; 0 for fewer than two values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1))


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    scores: Tuple[float, ...]
    lifespans: Tuple[int, ...]

    @property
    def episodes(self) -> int:
        return len(self.scores)

    @property
    def mean_score(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std_score(self) -> float:
        return sample_std(self.scores)

    @property
    def mean_lifespan(self) -> float:
        return float(np.mean(self.lifespans))

    @property
    def std_lifespan(self) -> float:
        return sample_std(self.lifespans)


def evaluate_checkpoint(
        genome_file,
        arch,
        env,
        episodes: int = DEFAULT_TEST_EPISODES,
        seed_namespace: str = TEST_NAMESPACE,
        max_frames: int = 20000,
        master_seed: int = 0
    ) -> TestReport:
    """Play `episodes` namespaced test episodes with a saved genome.

    `arch` may be None to use the checkpoint's own architecture; otherwise it
    must match it.
    """
    if episodes < 1:
        raise ValueError(f'Need at least one test episode, got {episodes}')
    genome, saved_arch = load_genome(genome_file)
    if arch is not None and arch != saved_arch:
        raise ShapeError(f'checkpoint architecture {saved_arch} differs from expected {arch}')
    weights = decode(genome, saved_arch)

    scores, lifespans = [], []
    for seed in namespaced_seeds(master_seed, seed_namespace, episodes):
        result = run_episode(weights, saved_arch, env, seed, max_frames)
        scores.append(result.game_score)
        lifespans.append(result.lifespan)
    return TestReport(tuple(scores), tuple(lifespans))


def welch_t_test(a: Sequence[float], b: Sequence[float], equal_var: bool = False):
    """Two-tailed t-test, Welch's unequal-variance form unless `equal_var`.

    Returns (t, p). If both samples have zero variance, equal means give
    (0, 1) and different means give (+-inf, 0).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError(f't-test needs at least 2 values per sample, got {a.size} and {b.size}')
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError('t-test samples must be finite.')

    if np.var(a) == 0 and np.var(b) == 0:
        diff = float(a[0] - b[0])
        if diff == 0:
            return 0.0, 1.0
        return math.copysign(math.inf, diff), 0.0

    t, p = stats.ttest_ind(a, b, equal_var=equal_var)
    return float(t), float(p)


def compare_samples(a, b, alpha=DEFAULT_ALPHA, equal_var=False):
    """Returns (verdict, t, p): the higher mean wins iff p < alpha."""
    t, p = welch_t_test(a, b, equal_var)
    if p < alpha:
        verdict = Verdict.A_BETTER if np.mean(a) > np.mean(b) else Verdict.B_BETTER
    else:
        verdict = Verdict.NO_DIFFERENCE
    return verdict, t, p


def compare_runs(report_a: TestReport, report_b: TestReport, alpha=DEFAULT_ALPHA) -> Verdict:
    """Verdict on test scores of two reports."""
    return compare_samples(report_a.scores, report_b.scores, alpha)[0]


def format_verdict(verdict: Verdict, t, p, alpha=DEFAULT_ALPHA) -> str:
    return f'verdict={verdict} t={t:.6g} p={p:.6g} alpha={alpha:g}'


def format_report(report: TestReport) -> str:
    """Fixed columnar summary of a TestReport."""
    return '\n'.join([
        f'{"":<10}{"mean":>14}{"std":>14}',
        f'{"score":<10}{report.mean_score:>14.4f}{report.std_score:>14.4f}',
        f'{"lifespan":<10}{report.mean_lifespan:>14.4f}{report.std_lifespan:>14.4f}',
        f'episodes={report.episodes}',
    ])


def read_samples(path) -> np.ndarray:
    """One value per line, `#` comments allowed."""
    values = np.loadtxt(path, comments=SAMPLE_COMMENT, ndmin=1, dtype=np.float64)
    return values.reshape(-1)


def write_samples(path, values, header: str = ''):
    """One value per line; integers (frame counts) stay integers."""
    lines = [f'{SAMPLE_COMMENT} {header}'] if header else []
    lines += [str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in values]
    write_text(path, '\n'.join(lines) + '\n')
