"""Key-value configuration files: dataset schemas and experiments.

Files are INI documents (`key = value`, `#` comments, comma-separated
lists). See docs/commands.md for the grammar.

"""

from configparser import ConfigParser
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import replace
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

from .fairltr import FairTrainingConfig
from .ingest import DatasetSchema
from .listwise import TrainingConfig
from .metrics import MetricSettings
from .noise import Direction
from .noise import REPLICATES
from .utils import SchemaError

_SCHEMA_KEYS = ('id_column', 'judgment_column', 'group_column',
                'feature_columns', 'disadvantaged_value', 'name_column')


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic dataset generator."""

    n: int = 2000
    adv_fraction: float = 0.78
    bias_strength: float = 3.0
    feature_shift: float = 1.2
    n_features: int = 3
    noise: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class SplitConfig:
    fraction: float = 0.8
    seed: int = 0


@dataclass(frozen=True)
class NoiseConfig:
    directions: Tuple[Direction, ...] = tuple(Direction)
    seed: int = 0
    replicates: int = REPLICATES


@dataclass(frozen=True)
class DatasetSource:
    csv_path: Path
    schema: DatasetSchema


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    `dataset` None selects the synthetic generator.

    """

    name: str = 'experiment'
    output_dir: Path = Path('results')
    workers: int = 1
    dataset: Optional[DatasetSource] = None
    synthetic: SyntheticSpec = SyntheticSpec()
    split: SplitConfig = SplitConfig()
    training: TrainingConfig = TrainingConfig()
    fairness: FairTrainingConfig = FairTrainingConfig()
    noise: NoiseConfig = NoiseConfig()
    metrics: MetricSettings = MetricSettings()
    fixtures_path: Optional[Path] = None

    def __post_init__(self):
        if self.workers < 1:
            raise SchemaError(f'workers must be at least 1, got {self.workers}')
        # Fair training always shares the ListNet descent settings.
        object.__setattr__(self, 'fairness',
                           replace(self.fairness, base=self.training))

    def to_dict(self) -> dict:
        fairness = asdict(self.fairness)
        del fairness['base']
        data = {
            'name': self.name,
            'output_dir': str(self.output_dir),
            'workers': self.workers,
            'dataset': None,
            'synthetic': asdict(self.synthetic),
            'split': asdict(self.split),
            'training': asdict(self.training),
            'fairness': fairness,
            'noise': {'directions': [d.value for d in self.noise.directions],
                      'seed': self.noise.seed,
                      'replicates': self.noise.replicates},
            'metrics': {k: (list(v) if isinstance(v, tuple) else v)
                        for k, v in asdict(self.metrics).items()},
            'fixtures_path': (None if self.fixtures_path is None
                              else str(self.fixtures_path)),
        }
        if self.dataset is not None:
            schema = asdict(self.dataset.schema)
            schema['feature_columns'] = list(schema['feature_columns'])
            data['dataset'] = {'csv_path': str(self.dataset.csv_path),
                               'schema': schema}
        return data


def _split_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(',') if item.strip()]


def _parse(section: str, key: str, text: str, convert: Callable):
    try:
        return convert(text)
    except ValueError:
        raise SchemaError(
            f'[{section}] {key}: cannot parse "{text}"') from None


def _read(path: Union[Path, str]) -> ConfigParser:
    parser = ConfigParser(inline_comment_prefixes=('#',))
    if not parser.read(path):
        raise SchemaError(f'Cannot read configuration file {path}')
    return parser


def _check_keys(parser: ConfigParser, section: str, allowed) -> None:
    unknown = set(parser[section]) - set(allowed)
    if unknown:
        raise SchemaError(
            f'[{section}] unknown key(s): {", ".join(sorted(unknown))}')


def _schema_from_section(parser: ConfigParser, section: str) -> DatasetSchema:
    values = parser[section]
    required = ('id_column', 'judgment_column', 'group_column',
                'feature_columns')
    missing = [k for k in required if k not in values]
    if missing:
        raise SchemaError(f'[{section}] missing key(s): {", ".join(missing)}')
    return DatasetSchema(
        id_column=values['id_column'],
        judgment_column=values['judgment_column'],
        group_column=values['group_column'],
        feature_columns=tuple(_split_list(values['feature_columns'])),
        disadvantaged_value=values.get('disadvantaged_value') or None,
        name_column=values.get('name_column') or None,
    )


def load_schema(path: Union[Path, str]) -> DatasetSchema:
    """Read a file with a [schema] section."""
    parser = _read(path)
    if not parser.has_section('schema'):
        raise SchemaError(f'{path}: no [schema] section')
    _check_keys(parser, 'schema', _SCHEMA_KEYS)
    return _schema_from_section(parser, 'schema')


def _schema_items(schema: DatasetSchema) -> dict:
    items = {
        'id_column': schema.id_column,
        'judgment_column': schema.judgment_column,
        'group_column': schema.group_column,
        'feature_columns': ', '.join(schema.feature_columns),
    }
    if schema.disadvantaged_value:
        items['disadvantaged_value'] = schema.disadvantaged_value
    if schema.name_column:
        items['name_column'] = schema.name_column
    return items


def save_schema(schema: DatasetSchema, path: Union[Path, str]) -> None:
    parser = ConfigParser()
    parser['schema'] = _schema_items(schema)
    _write(parser, path)


def _write(parser: ConfigParser, path: Union[Path, str]) -> None:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, 'w') as f:
        parser.write(f)


def _gamma(text: str) -> Optional[float]:
    return None if text.strip().lower() == 'auto' else float(text)


def _cutoff(text: str) -> Optional[int]:
    return None if text.strip().lower() in ('', 'n', 'all') else int(text)


def _directions(text: str) -> Tuple[Direction, ...]:
    return tuple(Direction(item) for item in _split_list(text))


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(item) for item in _split_list(text))


# Section -> key -> converter; the keys of each dataclass section.
_CONVERTERS = {
    'synthetic': {'n': int, 'adv_fraction': float, 'bias_strength': float,
                  'feature_shift': float, 'n_features': int, 'noise': float,
                  'seed': int},
    'split': {'fraction': float, 'seed': int},
    'training': {'learning_rate': float, 'epochs': int,
                 'max_halvings': int},
    'fairness': {'gamma': _gamma, 'gamma_threshold': float,
                 'max_doublings': int},
    'noise': {'directions': _directions, 'seed': int, 'replicates': int},
    'metrics': {'ndcg_cutoffs': _ints, 'skew_cutoffs': _ints,
                'ndkl_cutoff': _cutoff, 'ndkl_prefix_mode': str,
                'ndcg_normalization': str},
}

_SECTION_TYPES = {
    'synthetic': SyntheticSpec,
    'split': SplitConfig,
    'training': TrainingConfig,
    'fairness': FairTrainingConfig,
    'noise': NoiseConfig,
    'metrics': MetricSettings,
}


def _section(parser: ConfigParser, section: str):
    cls = _SECTION_TYPES[section]
    if not parser.has_section(section):
        return cls()
    converters = _CONVERTERS[section]
    _check_keys(parser, section, converters)
    kwargs = {key: _parse(section, key, text, converters[key])
              for key, text in parser[section].items()}
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise SchemaError(f'[{section}] {e}') from e


def load_config(path: Union[Path, str]) -> ExperimentConfig:
    """Read an experiment file; relative paths are relative to the file."""
    parser = _read(path)
    base = Path(path).parent
    known = set(_SECTION_TYPES) | {'experiment', 'dataset', 'fixtures'}
    unknown = set(parser.sections()) - known
    if unknown:
        raise SchemaError(f'{path}: unknown section(s)'
                          f' {", ".join(sorted(unknown))}')
    experiment = parser['experiment'] if parser.has_section('experiment') else {}
    if parser.has_section('experiment'):
        _check_keys(parser, 'experiment', ('name', 'output_dir', 'workers'))
    dataset = None
    if parser.has_section('dataset'):
        _check_keys(parser, 'dataset',
                    ('csv_path', 'schema_path') + _SCHEMA_KEYS)
        values = parser['dataset']
        if 'csv_path' not in values:
            raise SchemaError('[dataset] needs csv_path')
        if 'schema_path' in values:
            schema = load_schema(base / values['schema_path'])
        else:
            schema = _schema_from_section(parser, 'dataset')
        dataset = DatasetSource(base / values['csv_path'], schema)
    fixtures_path = None
    if parser.has_section('fixtures'):
        _check_keys(parser, 'fixtures', ('path',))
        fixtures_path = base / parser['fixtures']['path']
    return ExperimentConfig(
        name=experiment.get('name', 'experiment'),
        output_dir=base / experiment.get('output_dir', 'results'),
        workers=_parse('experiment', 'workers',
                       experiment.get('workers', '1'), int),
        dataset=dataset,
        synthetic=_section(parser, 'synthetic'),
        split=_section(parser, 'split'),
        training=_section(parser, 'training'),
        fairness=_section(parser, 'fairness'),
        noise=_section(parser, 'noise'),
        metrics=_section(parser, 'metrics'),
        fixtures_path=fixtures_path,
    )


def _format(value) -> str:
    if value is None:
        return 'auto'
    if isinstance(value, (list, tuple)):
        return ', '.join(_format(v) for v in value)
    if isinstance(value, Direction):
        return value.value
    return repr(value) if isinstance(value, float) else str(value)


def save_config(config: ExperimentConfig, path: Union[Path, str]) -> None:
    """Write an experiment file that `load_config` reads back equal.

    Paths are written absolute.

    """
    parser = ConfigParser()
    parser['experiment'] = {'name': config.name,
                            'output_dir': str(Path(config.output_dir).resolve()),
                            'workers': str(config.workers)}
    if config.dataset is not None:
        items = {'csv_path': str(Path(config.dataset.csv_path).resolve())}
        items.update(_schema_items(config.dataset.schema))
        parser['dataset'] = items
    sections = {'synthetic': config.synthetic, 'split': config.split,
                'training': config.training, 'fairness': config.fairness,
                'noise': config.noise, 'metrics': config.metrics}
    for section, value in sections.items():
        items = {}
        for key in _CONVERTERS[section]:
            item = getattr(value, key)
            if section == 'metrics' and key == 'ndkl_cutoff' and item is None:
                items[key] = 'all'
            else:
                items[key] = _format(item)
        parser[section] = items
    if config.fixtures_path is not None:
        parser['fixtures'] = {'path': str(Path(config.fixtures_path).resolve())}
    _write(parser, path)


def with_overrides(
        config: ExperimentConfig,
        seed: Optional[int] = None,
        output_dir: Optional[Union[Path, str]] = None,
        directions: Optional[List[Direction]] = None,
        ) -> ExperimentConfig:
    """Apply command-line overrides.

    A seed replaces the split, noise and synthetic seeds.

    """
    if seed is not None:
        config = replace(config,
                         split=replace(config.split, seed=seed),
                         noise=replace(config.noise, seed=seed),
                         synthetic=replace(config.synthetic, seed=seed))
    if output_dir is not None:
        config = replace(config, output_dir=Path(output_dir))
    if directions:
        config = replace(config,
                         noise=replace(config.noise,
                                       directions=tuple(directions)))
    return config
