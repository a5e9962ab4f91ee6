# Environments: the factory contract, loop-test stubs, the deceptive diamond
# gridworld, and the episode runner that records behaviour characteristics.

from dataclasses import dataclass
from functools import cached_property
from os.path import dirname, join as path_join
from typing import Callable, FrozenSet, Optional, Protocol, Tuple

import numpy as np

from behaviour import PAD_SYMBOL, action_symbol
from genome import DeterministicRng, Genome
from network import ArchitectureDescriptor, ShapeError, forward, parameter_count, select_action
from util import read_text


LAYOUTS_PATH = path_join(dirname(__file__), 'layouts')
DECEPTIVE_LAYOUT_PATH = path_join(LAYOUTS_PATH, 'deceptive_v1.txt')

WALL = '#'
FLOOR = '.'
DIAMOND = 'D'
EXIT = 'E'
START = 'P'
LAYOUT_ALPHABET = WALL + FLOOR + DIAMOND + EXIT + START
LAYOUT_COMMENT = '!'

ACTIONS = ('up', 'down', 'left', 'right', 'noop')
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))

STUB_KINDS = ('const', 'count0')


class EnvError(ValueError):
    """Bad environment definition or environment/network mismatch."""

class LayoutError(EnvError):
    """Malformed gridworld layout."""


@dataclass(frozen=True)
class EvalResult:
    """Outcome of evaluating one policy.

    game_score is the mean over `episode_scores`; bc and lifespan come from the
    first episode.
    """
    genome: Optional[Genome]
    game_score: float
    bc: str
    lifespan: int
    episode_scores: Tuple[float, ...] = ()


class Environment(Protocol):
    def reset(self) -> np.ndarray: ...
    def step(self, action: int) -> Tuple[np.ndarray, float, bool]: ...
    def render_ascii(self) -> str: ...


class EnvironmentFactory(Protocol):
    name: str
    action_space_size: int
    observation_length: int
    max_frames: Optional[int]

    def make(self, episode_seed: int) -> Environment: ...


# stub environments (loop-level tests)

class StubEnv:
    """Endless episode with a smoothly varying observation.

    const: score is always 1 (reward on the first frame only).
    count0: reward 1 for every frame where action 0 is taken.
    """

    def __init__(self, kind, phase):
        self.kind = kind
        self.phase = phase
        self.frame = 0

    def _obs(self):
        a = 2 * np.pi * (self.phase + self.frame / 16)
        return np.array([np.sin(a), np.cos(a), np.sin(2 * a), self.phase], dtype=np.float32)

    def reset(self):
        self.frame = 0
        return self._obs()

    def step(self, action):
        if self.kind == 'const':
            reward = 1.0 if self.frame == 0 else 0.0
        else:
            reward = 1.0 if action == 0 else 0.0
        self.frame += 1
        return self._obs(), reward, False

    def render_ascii(self):
        return f'frame {self.frame}'


@dataclass(frozen=True)
class StubFactory:
    kind: str
    action_space_size: int = 3
    observation_length: int = 4
    max_frames: Optional[int] = None

    def __post_init__(self):
        if self.kind not in STUB_KINDS:
            raise EnvError(f'Unknown stub environment "stub:{self.kind}" (have {STUB_KINDS})')

    @property
    def name(self):
        return f'stub:{self.kind}'

    def make(self, episode_seed):
        return StubEnv(self.kind, float(DeterministicRng(episode_seed).uniform()))


# gridworld

@dataclass(frozen=True)
class GridWorld:
    """Parsed layout. `tiles` has start markers replaced by floor."""
    width: int
    height: int
    tiles: Tuple[str, ...]
    starts: Tuple[Tuple[int, int], ...]
    diamond_reward: float = 1.0
    exit_bonus: float = 1.0

    @cached_property
    def diamonds(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset((r, c) for r, row in enumerate(self.tiles)
                         for c, t in enumerate(row) if t == DIAMOND)

    @property
    def observation_length(self) -> int:
        return self.width * self.height + 2


@dataclass(frozen=True)
class GridState:
    row: int
    col: int
    diamonds: FrozenSet[Tuple[int, int]]
    frame: int = 0
    score: float = 0.0
    done: bool = False


def load_layout(text: str, multiple_starts: bool = False) -> GridWorld:
    """Parse a layout grid over `#.DEP`; lines starting with `!` are comments.

    Borders are walls, except that exits may sit in the outer wall as doors.

    Errors carry 1-based line/column of the source text.
    `multiple_starts` allows several `P` cells; an episode's seed then picks one.
    """
    rows = []  # (line number, text)
    for i, line in enumerate(text.split('\n'), start=1):
        line = line.rstrip('\r')
        if line.startswith(LAYOUT_COMMENT):
            continue
        if line == '':
            continue
        rows.append((i, line))

    if not rows:
        raise LayoutError('Layout is empty.')
    width = len(rows[0][1])
    if len(rows) < 3 or width < 3:
        raise LayoutError(f'line {rows[0][0]}: layout must be at least 3x3')

    starts = []
    tiles = []
    for r, (lineno, line) in enumerate(rows):
        if len(line) != width:
            raise LayoutError(
                f'line {lineno}, column {min(len(line), width) + 1}: layout is not rectangular '
                f'(expected width {width}, got {len(line)})')
        for c, t in enumerate(line):
            if t not in LAYOUT_ALPHABET:
                raise LayoutError(f'line {lineno}, column {c + 1}: unknown tile "{t}"')
            on_border = r in (0, len(rows) - 1) or c in (0, width - 1)
            if on_border and t not in (WALL, EXIT):
                raise LayoutError(f'line {lineno}, column {c + 1}: border cells must be walls or exits')
            if t == START:
                if starts and not multiple_starts:
                    raise LayoutError(
                        f'line {lineno}, column {c + 1}: second start cell "P" '
                        f'(first at line {rows[starts[0][0]][0]}, column {starts[0][1] + 1})')
                starts.append((r, c))
        tiles.append(line.replace(START, FLOOR))

    if not starts:
        raise LayoutError('Layout has no start cell "P".')
    if not any(EXIT in row for row in tiles):
        raise LayoutError('Layout has no exit cell "E".')

    return GridWorld(width, len(tiles), tuple(tiles), tuple(starts))


def gridworld_step(world: GridWorld, state: GridState, action: int):
    """Advance one frame. Returns (state, reward, done)."""
    if not 0 <= action < len(ACTIONS):
        raise EnvError(f'Invalid gridworld action {action}')
    if state.done:
        return state, 0.0, True

    dr, dc = MOVES[action]
    row, col = state.row + dr, state.col + dc
    if world.tiles[row][col] == WALL:
        row, col = state.row, state.col

    reward = 0.0
    diamonds = state.diamonds
    if (row, col) in diamonds:
        diamonds = diamonds - {(row, col)}
        reward += world.diamond_reward
    done = world.tiles[row][col] == EXIT
    if done:
        reward += world.exit_bonus

    new_state = GridState(row, col, diamonds, state.frame + 1, state.score + reward, done)
    return new_state, reward, done


def gridworld_observation(world: GridWorld, state: GridState) -> np.ndarray:
    """Row-major one-hot of the agent's cell, then its row and column scaled to [0, 1].

    Tiles are left out: on a fixed layout they would only add the same offset to
    every frame's input.
    """
    obs = np.zeros(world.observation_length, dtype=np.float32)
    obs[state.row * world.width + state.col] = 1.0
    obs[-2] = state.row / (world.height - 1)
    obs[-1] = state.col / (world.width - 1)
    return obs


def render_grid(world: GridWorld, state: GridState) -> str:
    """ASCII frame: `@` agent, `D` uncollected diamonds, collected ones shown as floor."""
    lines = []
    for r, line in enumerate(world.tiles):
        chars = []
        for c, t in enumerate(line):
            if (r, c) == (state.row, state.col):
                t = '@'
            elif t == DIAMOND and (r, c) not in state.diamonds:
                t = FLOOR
            chars.append(t)
        lines.append(''.join(chars))
    return '\n'.join(lines)


class GridWorldEnv:
    def __init__(self, world: GridWorld, start: Tuple[int, int]):
        self.world = world
        self.start = start
        self.state = None

    def reset(self):
        self.state = GridState(self.start[0], self.start[1], self.world.diamonds)
        return gridworld_observation(self.world, self.state)

    def step(self, action):
        self.state, reward, done = gridworld_step(self.world, self.state, action)
        return gridworld_observation(self.world, self.state), reward, done

    def render_ascii(self):
        return render_grid(self.world, self.state)


@dataclass(frozen=True)
class GridWorldFactory:
    world: GridWorld
    name: str = 'gridworld'
    max_frames: Optional[int] = None

    @property
    def action_space_size(self):
        return len(ACTIONS)

    @property
    def observation_length(self):
        return self.world.observation_length

    def make(self, episode_seed):
        starts = self.world.starts
        start = starts[0] if len(starts) == 1 else \
            starts[DeterministicRng(episode_seed).below(len(starts))]
        return GridWorldEnv(self.world, start)


def make_factory(spec: str):
    """Build a factory from `stub:<kind>`, `deceptive`, `<layout path>` or
    `multistart:<layout path>`."""
    if spec.startswith('stub:'):
        return StubFactory(spec[len('stub:'):])

    multiple_starts = spec.startswith('multistart:')
    path = spec[len('multistart:'):] if multiple_starts else spec
    if path == 'deceptive':
        path = DECEPTIVE_LAYOUT_PATH
    try:
        text = read_text(path)
    except OSError as e:
        raise EnvError(f'Unable to read layout "{path}": {e.strerror}') from None
    try:
        world = load_layout(text, multiple_starts)
    except LayoutError as e:
        raise LayoutError(f'{path}: {e}') from None
    return GridWorldFactory(world, name=path)


def check_compatible(weights, arch: ArchitectureDescriptor, factory):
    """Raise ShapeError unless network and environment fit together."""
    if arch.output_units != factory.action_space_size:
        raise ShapeError(
            f'output layer: {arch.output_units} action scores, environment '
            f'"{factory.name}" has {factory.action_space_size} actions')
    if arch.input_size != factory.observation_length:
        raise ShapeError(
            f'input layer: expects {arch.input_size} values, environment '
            f'"{factory.name}" observes {factory.observation_length}')
    if len(weights) != parameter_count(arch):
        raise ShapeError(
            f'weights: {len(weights)} values for an architecture with '
            f'{parameter_count(arch)} parameters')


def run_episode(
        weights,
        arch: ArchitectureDescriptor,
        env_factory,
        episode_seed: int,
        max_frames: int,
        on_frame: Callable | None = None
    ) -> EvalResult:
    """Play one episode and record its padded action string.

    `on_frame(frame, env, action, reward)` is called after every step (replay).
    """
    check_compatible(weights, arch, env_factory)
    frames = max_frames
    if env_factory.max_frames is not None:
        frames = min(frames, env_factory.max_frames)

    env = env_factory.make(episode_seed)
    obs = env.reset()
    symbols = []
    score = 0.0
    for frame in range(frames):
        action = select_action(forward(weights, arch, obs))
        obs, reward, done = env.step(action)
        symbols.append(action_symbol(action))
        score += reward
        if on_frame:
            on_frame(frame, env, action, reward)
        if done:
            break

    lifespan = len(symbols)
    bc = ''.join(symbols) + PAD_SYMBOL * (max_frames - lifespan)
    return EvalResult(None, score, bc, lifespan, (score,))


# replay rendering

GIF_CELL_SIZE = 24
GIF_FRAME_MS = 150
GIF_COLOURS = {
    WALL: (60, 60, 70),
    FLOOR: (230, 230, 220),
    DIAMOND: (80, 200, 255),
    EXIT: (90, 200, 90),
    '@': (230, 80, 60),
}


def render_gif(world: GridWorld, states, path, cell_size=GIF_CELL_SIZE):
    """Write an animated GIF with one frame per gridworld state."""
    from PIL import Image, ImageDraw

    size = (world.width * cell_size, world.height * cell_size)
    frames = []
    for state in states:
        image = Image.new('RGB', size, GIF_COLOURS[WALL])
        d = ImageDraw.Draw(image)
        for r, line in enumerate(render_grid(world, state).split('\n')):
            for c, t in enumerate(line):
                box = (c * cell_size, r * cell_size,
                       (c + 1) * cell_size - 1, (r + 1) * cell_size - 1)
                if t == '@':
                    d.rectangle(box, fill=GIF_COLOURS[FLOOR])
                    d.ellipse(box, fill=GIF_COLOURS['@'])
                elif t == DIAMOND:
                    d.rectangle(box, fill=GIF_COLOURS[FLOOR])
                    cx, cy = (box[0] + box[2]) / 2, (box[1] + box[3]) / 2
                    half = cell_size / 3
                    d.polygon([(cx, cy - half), (cx + half, cy), (cx, cy + half), (cx - half, cy)],
                              fill=GIF_COLOURS[DIAMOND])
                else:
                    d.rectangle(box, fill=GIF_COLOURS[t])
        frames.append(image)

    frames[0].save(path, save_all=True, append_images=frames[1:],
                   duration=GIF_FRAME_MS, loop=0)
