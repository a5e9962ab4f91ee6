# Run configuration: the RunConfig dataclass and its flat text format.
#
#   # comment
#   population_size = 33
#   method = resample
#
# One key per RunConfig field. Unknown or repeated keys are errors.

from dataclasses import asdict, dataclass, fields, replace
from typing import Dict

from behaviour import METRICS
from network import DEFAULT_HIDDEN_LAYERS, ArchitectureError, parse_layers


METHODS = ('base', 'novelty', 'resample')
RESAMPLE_STRATEGIES = ('novelty', 'random')
CONFIG_COMMENT = '#'


class ConfigError(ValueError):
    """Malformed config text or a RunConfig violating its invariants."""


@dataclass(frozen=True)
class RunConfig:
    population_size: int = 101  # N, elite slot included
    generations: int = 500
    truncation_size: int = 20
    mutation_power: float = 0.002
    archive_probability: float = 0.1
    max_frames: int = 20000
    training_episodes: int = 1
    validation_episodes: int = 5
    improvement_generations: int = 10
    novelty_k: int = 25
    segment_length: int = 500
    elite_candidate_count: int = 10
    master_seed: int = 0
    method: str = 'base'
    resample_count: int = 0  # 0 means 2 * truncation_size
    resample_strategy: str = 'novelty'
    behaviour_metric: str = 'levenshtein'
    hidden_layers: str = DEFAULT_HIDDEN_LAYERS
    dump_archive: bool = False
    log_wall_time: bool = False

    def __post_init__(self):
        validate_config(self)

    def with_overrides(self, **changes) -> 'RunConfig':
        return replace(self, **changes)


def validate_config(config: RunConfig):
    """Raise ConfigError naming the first field that breaks an invariant."""
    def check(ok, message):
        if not ok:
            raise ConfigError(message)

    check(config.population_size >= 1, f'population_size must be >= 1, got {config.population_size}')
    check(config.generations >= 1, f'generations must be >= 1, got {config.generations}')
    check(1 <= config.truncation_size <= config.population_size,
          f'truncation_size must be in [1, population_size={config.population_size}], '
          f'got {config.truncation_size}')
    check(config.mutation_power >= 0, f'mutation_power must be >= 0, got {config.mutation_power}')
    check(0 <= config.archive_probability <= 1,
          f'archive_probability must be in [0, 1], got {config.archive_probability}')
    check(config.max_frames >= 1, f'max_frames must be >= 1, got {config.max_frames}')
    check(config.training_episodes >= 1,
          f'training_episodes must be >= 1, got {config.training_episodes}')
    check(config.validation_episodes >= 1,
          f'validation_episodes must be >= 1, got {config.validation_episodes}')
    check(config.improvement_generations >= 1,
          f'improvement_generations must be >= 1, got {config.improvement_generations}')
    check(config.novelty_k >= 1, f'novelty_k must be >= 1, got {config.novelty_k}')
    check(config.segment_length >= 1, f'segment_length must be >= 1, got {config.segment_length}')
    check(1 <= config.elite_candidate_count <= config.population_size,
          f'elite_candidate_count must be in [1, population_size={config.population_size}], '
          f'got {config.elite_candidate_count}')
    check(0 <= config.master_seed < 2**64,
          f'master_seed must be an unsigned 64-bit integer, got {config.master_seed}')
    check(config.method in METHODS,
          f'method must be one of {", ".join(METHODS)}, got "{config.method}"')
    check(config.resample_count >= 0, f'resample_count must be >= 0, got {config.resample_count}')
    check(config.resample_strategy in RESAMPLE_STRATEGIES,
          f'resample_strategy must be one of {", ".join(RESAMPLE_STRATEGIES)}, '
          f'got "{config.resample_strategy}"')
    check(config.behaviour_metric in METRICS,
          f'behaviour_metric must be one of {", ".join(METRICS)}, got "{config.behaviour_metric}"')
    try:
        parse_layers(config.hidden_layers)
    except ArchitectureError as e:
        raise ConfigError(f'hidden_layers: {e}') from None


def _field_types() -> Dict[str, type]:
    return {f.name: type(f.default) for f in fields(RunConfig)}


def _parse_value(key, text, kind):
    if kind is bool:
        if text not in ('true', 'false'):
            raise ValueError(f'expected true or false, got "{text}"')
        return text == 'true'
    return kind(text)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> RunConfig:
    """Parse config text. Missing keys take RunConfig defaults."""
    types = _field_types()
    values = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(CONFIG_COMMENT, 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f'line {i}: expected "key = value", got "{raw.strip()}"')
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in types:
            raise ConfigError(f'line {i}: unknown key "{key}"')
        if key in values:
            raise ConfigError(f'line {i}: duplicate key "{key}"')
        try:
            values[key] = _parse_value(key, value, types[key])
        except ValueError as e:
            raise ConfigError(f'line {i}: {key}: {e}') from None
    return RunConfig(**values)


def format_config(config: RunConfig) -> str:
    return ''.join(f'{key} = {_format_value(value)}\n' for key, value in asdict(config).items())


def decode_config(data: bytes) -> RunConfig:
    """Parse the raw bytes of a config file, which must be UTF-8."""
    try:
        text = data.decode('utf-8')
    except UnicodeDecodeError as e:
        raise ConfigError(f'byte {e.start}: config is not valid UTF-8') from None
    return parse_config(text)


def load_config(path) -> RunConfig:
    with open(path, 'rb') as f:
        return decode_config(f.read())
