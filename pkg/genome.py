# Seed-list genome encoding.
#
# A genome is the list of PRNG seeds that regenerates its network weights:
#   weights = init_weights(seeds[0]) + sigma * (noise(seeds[1]) + ... )
# applied seed by seed, in list order, in float32. Mutation appends one seed.

from dataclasses import dataclass
import re
from typing import Tuple

import numpy as np

from network import WEIGHT_DTYPE, ArchitectureDescriptor, ArchitectureError, format_arch, \
                    layer_shapes, parse_arch
from util import read_text, write_text


SEED_LIMIT = 2**64
CHECKPOINT_HEADER = 'seedevo-genome v1'
_SEED_RE = re.compile(r'[0-9]+')


class CheckpointError(ValueError):
    """Malformed genome checkpoint file."""


class DeterministicRng:
    """Seeded PCG64 stream with a frozen normal-variate order.

    Uniforms are numpy's `Generator.random` doubles in [0, 1).
    Normals use trigonometric Box-Muller over consecutive uniform pairs: the
    i-th pair (u1, u2) gives normal 2i = r*cos(t) and normal 2i+1 = r*sin(t),
    with r = sqrt(-2 ln(1 - u1)) and t = 2*pi*u2. An odd-sized request drops
    the unused sine.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < SEED_LIMIT:
            raise ValueError(f'Seed must be an unsigned 64-bit integer, got {seed}')
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, size: int) -> np.ndarray:
        pairs = (size + 1) // 2
        u = self._gen.random(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        t = 2.0 * np.pi * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(t)
        out[1::2] = r * np.sin(t)
        return out[:size]

    def seed64(self) -> int:
        """Draw a fresh 64-bit seed."""
        return int(self._gen.integers(0, SEED_LIMIT, dtype=np.uint64))

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return int(self._gen.integers(0, n))

    def sample_indices(self, n: int, count: int):
        """`count` distinct indices from range(n), in draw order."""
        return [int(i) for i in self._gen.choice(n, size=count, replace=False)]


@dataclass(frozen=True)
class Genome:
    seeds: Tuple[int, ...]
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, 'seeds', tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValueError('Genome needs at least the initialisation seed.')
        for s in self.seeds:
            if not 0 <= s < SEED_LIMIT:
                raise ValueError(f'Seed out of 64-bit range: {s}')
        if not self.sigma >= 0:
            raise ValueError(f'Mutation power must be non-negative, got {self.sigma}')

    def __len__(self) -> int:
        return len(self.seeds)


def _frozen(weights):
    weights.flags.writeable = False
    return weights


def init_weights(seed: int, arch: ArchitectureDescriptor) -> np.ndarray:
    """Glorot-normal weights (std sqrt(2 / (fan_in + fan_out))) and zero biases.

    Layers draw from one stream in layer order.
    """
    rng = DeterministicRng(seed)
    parts = []
    for shape in layer_shapes(arch):
        std = np.sqrt(2.0 / (shape.fan_in + shape.fan_out))
        parts.append((rng.normal(shape.weight_size) * std).astype(WEIGHT_DTYPE))
        parts.append(np.zeros(shape.bias_size, dtype=WEIGHT_DTYPE))
    return _frozen(np.concatenate(parts))


def noise_vector(seed: int, length: int) -> np.ndarray:
    """Standard-normal mutation noise for one seed."""
    return DeterministicRng(seed).normal(length).astype(WEIGHT_DTYPE)


def decode(genome: Genome, arch: ArchitectureDescriptor) -> np.ndarray:
    """Rebuild a genome's weight vector."""
    if not genome.seeds:
        raise ValueError('Cannot decode a genome with no seeds.')
    weights = init_weights(genome.seeds[0], arch)
    sigma = WEIGHT_DTYPE(genome.sigma)
    for seed in genome.seeds[1:]:
        weights = weights + sigma * noise_vector(seed, weights.size)
    return _frozen(weights)


def mutate(genome: Genome, new_seed: int) -> Genome:
    return Genome(genome.seeds + (int(new_seed),), genome.sigma)


def format_genome(genome: Genome, arch: ArchitectureDescriptor) -> str:
    lines = [
        CHECKPOINT_HEADER,
        f'sigma={float(genome.sigma)!r}',
        f'arch={format_arch(arch)}',
    ] + [str(s) for s in genome.seeds]
    return '\n'.join(lines) + '\n'


def parse_genome(text: str) -> Tuple[Genome, ArchitectureDescriptor]:
    """Parse a checkpoint; errors name the offending line."""
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()

    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise CheckpointError(f'line 1: expected "{CHECKPOINT_HEADER}"')

    if len(lines) < 2 or not lines[1].startswith('sigma='):
        raise CheckpointError('line 2: expected "sigma=<decimal>"')
    try:
        sigma = float(lines[1][len('sigma='):])
    except ValueError:
        raise CheckpointError(f'line 2: invalid sigma "{lines[1][len("sigma="):]}"') from None
    if not np.isfinite(sigma) or sigma < 0:
        raise CheckpointError(f'line 2: sigma must be finite and non-negative, got {sigma}')

    if len(lines) < 3 or not lines[2].startswith('arch='):
        raise CheckpointError('line 3: expected "arch=<architecture>"')
    try:
        arch = parse_arch(lines[2][len('arch='):])
    except ArchitectureError as e:
        raise CheckpointError(f'line 3: {e}') from None

    seeds = []
    for i, line in enumerate(lines[3:], start=4):
        if not _SEED_RE.fullmatch(line):
            raise CheckpointError(f'line {i}: expected a decimal seed, got "{line}"')
        seed = int(line)
        if seed >= SEED_LIMIT:
            raise CheckpointError(f'line {i}: seed exceeds 64 bits')
        seeds.append(seed)
    if not seeds:
        raise CheckpointError(f'line {len(lines) + 1}: checkpoint has no seeds')

    return Genome(tuple(seeds), sigma), arch


def save_genome(path, genome: Genome, arch: ArchitectureDescriptor):
    write_text(path, format_genome(genome, arch))

def load_genome(path) -> Tuple[Genome, ArchitectureDescriptor]:
    return parse_genome(read_text(path))
