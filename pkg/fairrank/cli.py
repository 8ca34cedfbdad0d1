"""Command-line surface: `fairrank <command> [options]`."""

import argparse
from dataclasses import replace
from pathlib import Path
import sys
from typing import Dict, List, Optional

from .config import ExperimentConfig
from .config import load_config
from .config import with_overrides
from .harness import read_results
from .harness import run_experiment
from .harness import run_training
from .harness import write_report
from .harness import write_synthetic
from .noise import Direction
from .utils import FairRankError
from .utils import configure_logging
from .utils import error
from .version import __version__

# Name -> command, filled by `add_command`.
_COMMANDS: Dict[str, '_Command'] = {}


def add_command(name: str, command: '_Command') -> None:
    _COMMANDS[name] = command


class _Command:
    """Base of the subcommands."""

    def get_resources(self) -> dict:
        return {'help': ''}

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        pass

    def activated(self, args: argparse.Namespace) -> int:
        raise NotImplementedError


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path,
                        help='experiment file; defaults apply without one')
    parser.add_argument('--output', type=Path,
                        help='output directory, overrides [experiment]')
    parser.add_argument('--seed', type=int,
                        help='overrides the split, noise and synthetic seeds')


def _config(args: argparse.Namespace) -> ExperimentConfig:
    config = (load_config(args.config) if args.config is not None
              else ExperimentConfig())
    directions = getattr(args, 'direction', None)
    return with_overrides(
        config, seed=args.seed, output_dir=args.output,
        directions=[Direction(d) for d in directions] if directions else None)


class _TrainCommand(_Command):
    """Train the three models and write them as JSON."""

    def get_resources(self):
        return {'help': 'train the attribute-free, with-attribute and fair'
                        ' models'}

    def add_arguments(self, parser):
        _add_config_arguments(parser)

    def activated(self, args):
        config = _config(args)
        trained = run_training(config)
        print(f'gamma {trained.models.fair.gamma:.6g},'
              f' models in {Path(config.output_dir) / "models"}')
        return 0


class _SweepCommand(_Command):
    """Evaluate every strategy over the noise scenarios."""

    def get_resources(self):
        return {'help': 'run the controlled noise sweep (and fixtures when'
                        ' configured)'}

    def add_arguments(self, parser):
        _add_config_arguments(parser)
        parser.add_argument('--direction', action='append',
                            choices=[d.value for d in Direction],
                            help='restrict the sweep to a direction;'
                                 ' repeatable')

    def activated(self, args):
        output = run_experiment(_config(args))
        print(f'{output.rows} rows in {output.output_dir}')
        return 0


class _FixturesCommand(_Command):
    """Evaluate every strategy with the labels of inference services."""

    def get_resources(self):
        return {'help': 'evaluate the inference-service fixtures only'}

    def add_arguments(self, parser):
        _add_config_arguments(parser)
        parser.add_argument('--fixtures', type=Path,
                            help='fixture CSV, overrides [fixtures] path')

    def activated(self, args):
        config = _config(args)
        if args.fixtures is not None:
            config = replace(config, fixtures_path=args.fixtures)
        output = run_experiment(config, sweep=False, fixtures=True)
        print(f'{output.rows} rows in {output.output_dir}')
        return 0


class _SynthCommand(_Command):
    """Write a synthetic dataset and its schema."""

    def get_resources(self):
        return {'help': 'write a synthetic dataset CSV and schema file'}

    def add_arguments(self, parser):
        _add_config_arguments(parser)

    def activated(self, args):
        config = _config(args)
        csv_path, schema_path = write_synthetic(config.synthetic,
                                                config.output_dir)
        print(f'{csv_path}\n{schema_path}')
        return 0


class _ReportCommand(_Command):
    """Re-render aggregates and charts from existing results."""

    def get_resources(self):
        return {'help': 'rewrite aggregates, trade-off data and charts of a'
                        ' results directory'}

    def add_arguments(self, parser):
        parser.add_argument('results_dir', type=Path,
                            help='directory holding results.csv')

    def activated(self, args):
        paths = write_report(read_results(args.results_dir), args.results_dir)
        print(f'{len(paths)} files in {args.results_dir}')
        return 0


add_command('train', _TrainCommand())
add_command('sweep', _SweepCommand())
add_command('fixtures', _FixturesCommand())
add_command('synth', _SynthCommand())
add_command('report', _ReportCommand())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='fairrank',
        description='Fair learning to rank under inferred protected'
                    ' attributes.')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='more log output')
    parser.add_argument('-q', '--quiet', action='store_true',
                        help='warnings and errors only')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, command in _COMMANDS.items():
        subparser = subparsers.add_parser(name, **command.get_resources())
        command.add_arguments(subparser)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(-1 if args.quiet else args.verbose)
    try:
        return _COMMANDS[args.command].activated(args)
    except FairRankError as e:
        error(str(e))
        return 1


if __name__ == '__main__':
    sys.exit(main())
