# Command line entry point: train / evaluate / compare / replay.
#
# Exit codes: 0 ok, 2 usage, 3 config, 4 environment, 5 io.

import argparse
from datetime import datetime, timezone
from os.path import dirname, isfile, join as path_join
import sys

from analytics import DEFAULT_ALPHA, DEFAULT_TEST_EPISODES, compare_samples, evaluate_checkpoint, \
                      format_report, format_verdict, read_samples, write_samples
from behaviour import BehaviourError, lifespan_of
from config import METHODS, ConfigError, RunConfig, decode_config, load_config
from environments import ACTIONS, EnvError, GridWorldFactory, make_factory, render_gif, \
                         run_episode
from evolution import EvaluationError, run
from genome import CheckpointError, decode, load_genome
from network import ArchitectureError, ShapeError
from util import ensure_dir, namespaced_seeds, write_text


__version__ = '1.0.0'

MANIFEST_HEADER = 'seedevo-run v1'
MANIFEST_NAME = 'manifest.txt'
CONFIG_SNAPSHOT_NAME = 'config.cfg'
REPLAY_NAMESPACE = 'replay'

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_ENV = 4
EXIT_IO = 5

# checked in order; subclasses before their bases
EXIT_CODES = (
    (CheckpointError, EXIT_IO),
    (ConfigError, EXIT_CONFIG),
    (ArchitectureError, EXIT_CONFIG),
    (ShapeError, EXIT_ENV),
    (BehaviourError, EXIT_ENV),
    (EnvError, EXIT_ENV),
    (EvaluationError, EXIT_ENV),
    (OSError, EXIT_IO),
    (ValueError, EXIT_ENV),
)


def exit_code_for(e: Exception) -> int:
    for kind, code in EXIT_CODES:
        if isinstance(e, kind):
            return code
    raise e


def format_manifest(method, seed, start_time) -> str:
    return '\n'.join([
        MANIFEST_HEADER,
        f'version={__version__}',
        f'method={method}',
        f'seed={seed}',
        f'start_time={start_time}',
    ]) + '\n'


def run_max_frames(checkpoint, max_frames=None) -> int:
    """Episode cap: `max_frames` if given, else F from the checkpoint's run directory."""
    if max_frames is not None:
        return max_frames
    snapshot = path_join(dirname(checkpoint), CONFIG_SNAPSHOT_NAME)
    if isfile(snapshot):
        return load_config(snapshot).max_frames
    return RunConfig.max_frames


def cmd_train(args) -> int:
    with open(args.config, 'rb') as f:
        config_bytes = f.read()
    config = decode_config(config_bytes)
    overrides = {'method': args.method}
    if args.seed is not None:
        overrides['master_seed'] = args.seed
    config = config.with_overrides(**overrides)
    env = make_factory(args.env)

    out_dir = ensure_dir(args.out)
    with open(path_join(out_dir, CONFIG_SNAPSHOT_NAME), 'wb') as f:
        f.write(config_bytes)
    start_time = datetime.now(timezone.utc).isoformat(timespec='seconds')
    write_text(path_join(out_dir, MANIFEST_NAME),
               format_manifest(config.method, config.master_seed, start_time))

    elite, logs = run(config, env, out_dir=out_dir, threads=args.threads, verbose=True)
    print(f'Done! {len(logs)} generations, final elite validation '
          f'{logs[-1].elite_validation:.4f} ({len(elite)} seeds)')
    return EXIT_OK


def cmd_evaluate(args) -> int:
    env = make_factory(args.env)
    report = evaluate_checkpoint(args.checkpoint, None, env, args.episodes,
                                 max_frames=run_max_frames(args.checkpoint, args.max_frames),
                                 master_seed=args.seed)
    print(format_report(report))
    write_samples(args.scores, report.scores, f'scores {args.checkpoint} on {args.env}')
    write_samples(args.lifespans, report.lifespans, f'lifespans {args.checkpoint} on {args.env}')
    return EXIT_OK


def cmd_compare(args) -> int:
    verdict, t, p = compare_samples(read_samples(args.a), read_samples(args.b), args.alpha,
                                    equal_var=args.equal_var)
    print(format_verdict(verdict, t, p, args.alpha))
    return EXIT_OK


def cmd_replay(args) -> int:
    env = make_factory(args.env)
    if args.render == 'gif':
        if not isinstance(env, GridWorldFactory):
            raise EnvError(f'--render gif needs a gridworld layout, got "{args.env}"')
        if not args.gif:
            raise EnvError('--render gif needs --gif <path>')

    genome, arch = load_genome(args.checkpoint)
    weights = decode(genome, arch)
    seed = namespaced_seeds(args.seed, REPLAY_NAMESPACE, 1)[0]

    states = []
    if args.render == 'gif':
        first = env.make(seed)
        first.reset()
        states.append(first.state)

    def on_frame(frame, frame_env, action, reward):
        if args.render == 'ascii':
            print(f'frame {frame}: action={ACTIONS[action] if action < len(ACTIONS) else action} '
                  f'reward={reward:g}')
            print(frame_env.render_ascii())
        elif args.render == 'gif':
            states.append(frame_env.state)

    result = run_episode(weights, arch, env, seed,
                         run_max_frames(args.checkpoint, args.max_frames), on_frame)
    if args.render == 'gif':
        render_gif(env.world, states, args.gif)
        print(f'Wrote {len(states)} frames to {args.gif}')

    print(f'actions={result.bc[:lifespan_of(result.bc)]}')
    print(f'score={result.game_score:g} lifespan={result.lifespan} bc={result.bc}')
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='seedevo.py', description='Seed-list neuroevolution with novelty-driven resampling.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', help='run one evolution loop into a run directory')
    p.add_argument('--method', required=True, choices=METHODS)
    p.add_argument('--config', required=True, help='key = value config file')
    p.add_argument('--env', required=True,
                   help='layout path, "deceptive", "multistart:<path>" or "stub:<kind>"')
    p.add_argument('--out', required=True, help='run directory')
    p.add_argument('--threads', type=int, default=1)
    p.add_argument('--seed', type=int, default=None, help='overrides master_seed')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('evaluate', help='score a checkpoint on held-out test episodes')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--env', required=True)
    p.add_argument('--episodes', type=int, default=DEFAULT_TEST_EPISODES)
    p.add_argument('--max-frames', type=int, default=None,
                   help='episode cap; defaults to max_frames of the run that wrote the checkpoint')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--scores', default='scores.csv', help='per-episode score output')
    p.add_argument('--lifespans', default='lifespans.csv', help='per-episode lifespan output')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('compare', help='two-tailed t-test between two sample files')
    p.add_argument('--a', required=True)
    p.add_argument('--b', required=True)
    p.add_argument('--alpha', type=float, default=DEFAULT_ALPHA)
    p.add_argument('--equal-var', action='store_true', help='pooled Student test instead of Welch')
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser('replay', help='re-run one episode of a checkpoint')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--env', required=True)
    p.add_argument('--render', choices=('ascii', 'gif', 'none'), default='ascii')
    p.add_argument('--gif', help='output path for --render gif')
    p.add_argument('--max-frames', type=int, default=None,
                   help='episode cap; defaults to max_frames of the run that wrote the checkpoint')
    p.add_argument('--seed', type=int, default=0)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    if getattr(args, 'threads', 1) < 1:
        print('Error: --threads must be >= 1', file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.func(args)
    except Exception as e:
        code = exit_code_for(e)
        print(f'Error: {e}', file=sys.stderr)
        return code


if __name__ == '__main__':
    sys.exit(main())
