"""Experiment runner: data preparation, training, scenario sweeps, reports.

A run writes into the output directory:

- results.csv: one row per strategy and scenario.
- aggregates.csv: mean and standard deviation over replicates.
- tradeoff.csv: NDKL against NDCG per strategy and scenario.
- skew_curves.csv: Skew@k of both groups along the judgment ranking.
- metadata.json: configuration, seeds, gammas, coefficients and fixtures.
- charts/*.svg: one trend chart per direction and metric.

"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import ExperimentConfig
from .config import SyntheticSpec
from .config import save_schema
from .detconstsort import target_from_observed
from .domain import Candidate
from .domain import Dataset
from .domain import GROUPS
from .domain import GroupLabel
from .domain import rank_by_score
from .export_svg import category_chart
from .export_svg import line_chart
from .export_svg import save_chart
from .fairltr import GammaSelection
from .fairltr import fit_fair
from .ingest import DatasetSchema
from .ingest import NormalizationStats
from .ingest import align_groups
from .ingest import apply_normalization
from .ingest import fit_normalization
from .ingest import load_dataset
from .ingest import mean_top_skews
from .ingest import save_dataset
from .ingest import split_train_test
from .listwise import LinearRanker
from .listwise import save_model
from .listwise import train
from .metrics import MetricSettings
from .metrics import evaluate
from .metrics import metric_columns
from .metrics import skew_curve
from .noise import Direction
from .noise import FixtureReport
from .noise import NoiseScenario
from .noise import apply_fixture
from .noise import load_fixtures
from .noise import perturb
from .noise import scenario_grid
from .pipeline import STRATEGY_TABLE
from .pipeline import StrategyModels
from .pipeline import all_strategies
from .pipeline import run_strategy
from .utils import DataError
from .utils import ExperimentError
from .utils import fisher_yates
from .utils import make_generator
from .utils import round_half_up
from .utils import valid_filename
from .version import __version__

logger = logging.getLogger(__name__)

KEY_COLUMNS = ('dataset', 'strategy', 'direction', 'epsilon', 'seed',
               'replicate')

AGGREGATE_KEYS = ('dataset', 'strategy', 'direction', 'epsilon')

FIXTURE_DIRECTION = 'fixture'
GROUND_TRUTH_SERVICE = 'G-TRUTH'

SYNTHETIC_DATASET = 'synthetic'

# Written floats carry 12 significant digits.
FLOAT_FORMAT = '%.12g'

FAILED_MARKER = 'FAILED'

# Ideal value of each charted metric family.
IDEAL_VALUES = {'exposure_ratio': 1.0, 'ndkl': 0.0, 'ndcg': 1.0}

_STRATEGY_INDEX = {name: i for i, name in enumerate(STRATEGY_TABLE)}


def synthetic_schema(n_features: int = 3) -> DatasetSchema:
    """Column layout of the CSV written for a synthetic dataset."""
    return DatasetSchema(
        id_column='id',
        judgment_column='judgment',
        group_column='group',
        feature_columns=tuple(f'x{j}' for j in range(n_features)),
        disadvantaged_value=GroupLabel.DISADVANTAGED.value,
        name_column='name',
    )


def generate_synthetic(
        n: int,
        adv_fraction: float,
        bias_strength: float,
        seed: int,
        feature_shift: float = 0.0,
        n_features: int = 3,
        noise: float = 0.5,
        ) -> Dataset:
    """Return a biased dataset with known groups.

    Features are standard normal, feature 0 shifted by `feature_shift` for
    disadvantaged members. Judgments are x . beta with beta_j = 2^-j, minus
    `bias_strength` for disadvantaged members, plus `noise` times a standard
    normal draw. The disadvantaged members are the first n - round(n *
    adv_fraction) indices of a Fisher-Yates permutation.

    Parameters
    ----------
    - n: number of candidates, at least 10.
    - adv_fraction: share of the advantaged group, in (0, 1).
    - bias_strength: judgment penalty of the disadvantaged group.
    - seed: seed word of the generator.
    - feature_shift: shift of feature 0 for the disadvantaged group.
    - n_features: number of features.
    - noise: standard deviation of the judgment noise.

    """
    if n < 10:
        raise ValueError(f'A synthetic dataset needs n >= 10, got {n}')
    if not 0.0 < adv_fraction < 1.0:
        raise ValueError(f'adv_fraction must be in (0, 1), got {adv_fraction}')
    if n_features < 1:
        raise ValueError(f'n_features must be positive, got {n_features}')
    if not noise >= 0.0:
        raise ValueError(f'noise must be nonnegative, got {noise}')
    if not (np.isfinite(bias_strength) and np.isfinite(feature_shift)):
        raise ValueError('bias_strength and feature_shift must be finite')
    n_adv = round_half_up(adv_fraction * n)
    n_dis = n - n_adv
    if n_adv == 0 or n_dis == 0:
        raise DataError(f'adv_fraction {adv_fraction} leaves a group empty'
                        f' for n = {n}')
    generator = make_generator(seed)
    is_dis = np.zeros(n, dtype=bool)
    is_dis[fisher_yates(n, generator)[:n_dis]] = True
    features = generator.standard_normal((n, n_features))
    features[is_dis, 0] += feature_shift
    beta = 2.0 ** -np.arange(n_features)
    judgments = (features @ beta - bias_strength * is_dis
                 + noise * generator.standard_normal(n))
    candidates = []
    for i in range(n):
        group = GroupLabel.DISADVANTAGED if is_dis[i] else GroupLabel.ADVANTAGED
        candidates.append(Candidate(
            id=i + 1,
            features=tuple(float(v) for v in features[i]),
            judgment=float(judgments[i]),
            true_group=group,
            observed_group=group,
            name=f'candidate-{i + 1}',
        ))
    logger.debug(f'Generated {n} synthetic candidates, {n_dis} disadvantaged')
    return Dataset(candidates=tuple(candidates),
                   feature_names=tuple(f'x{j}' for j in range(n_features)))


def synthetic_from_spec(spec: SyntheticSpec) -> Dataset:
    return generate_synthetic(spec.n, spec.adv_fraction, spec.bias_strength,
                              spec.seed, feature_shift=spec.feature_shift,
                              n_features=spec.n_features, noise=spec.noise)


def write_synthetic(
        spec: SyntheticSpec,
        out_dir: Union[Path, str],
        ) -> Tuple[Path, Path]:
    """Write a synthetic dataset CSV and its schema file."""
    out_path = Path(out_dir)
    schema = synthetic_schema(spec.n_features)
    csv_path = out_path / 'synthetic.csv'
    schema_path = out_path / 'synthetic_schema.ini'
    save_dataset(synthetic_from_spec(spec), schema, csv_path)
    save_schema(schema, schema_path)
    logger.info(f'Wrote {csv_path} and {schema_path}')
    return csv_path, schema_path


@dataclass(frozen=True)
class PreparedData:
    """Normalized splits with the disadvantaged group settled."""

    name: str
    train: Dataset
    test: Dataset
    normalization: NormalizationStats
    detected_group: str
    top_skews: Dict[GroupLabel, float]


def dataset_name(config: ExperimentConfig) -> str:
    if config.dataset is None:
        return SYNTHETIC_DATASET
    return Path(config.dataset.csv_path).stem


def prepare(config: ExperimentConfig) -> PreparedData:
    """Load or generate the data, split it, detect the groups, normalize."""
    if config.dataset is None:
        dataset = synthetic_from_spec(config.synthetic)
        pinned = True
    else:
        dataset = load_dataset(config.dataset.csv_path, config.dataset.schema)
        pinned = config.dataset.schema.disadvantaged_value is not None
    train_set, test_set = split_train_test(dataset, config.split.fraction,
                                           config.split.seed)
    names = dict(test_set.group_names)
    train_set, test_set, detected = align_groups(train_set, test_set, pinned)
    top_skews = mean_top_skews(test_set)
    logger.info(f'Disadvantaged group: "{test_set.group_names[GroupLabel.DISADVANTAGED]}"'
                f' (mean top-half skew'
                f' {top_skews[GroupLabel.DISADVANTAGED]:.3f} against'
                f' {top_skews[GroupLabel.ADVANTAGED]:.3f})')
    stats = fit_normalization(train_set)
    return PreparedData(
        name=dataset_name(config),
        train=apply_normalization(train_set, stats),
        test=apply_normalization(test_set, stats),
        normalization=stats,
        detected_group=names[detected],
        top_skews=top_skews,
    )


@dataclass(frozen=True)
class TrainedModels:
    models: StrategyModels
    gamma_selection: GammaSelection

    def by_kind(self) -> Dict[str, LinearRanker]:
        return {'oblivious': self.models.oblivious,
                'with_attr': self.models.with_attr,
                'fair': self.models.fair}


def train_models(
        prepared: PreparedData,
        config: ExperimentConfig,
        ) -> TrainedModels:
    """Train the attribute-free, the with-attribute and the fair models."""
    stats = prepared.normalization
    logger.info('Training the attribute-free model')
    oblivious = train(prepared.train, config.training, use_attribute=False,
                      normalization=stats)
    logger.info('Training the with-attribute model')
    with_attr = train(prepared.train, config.training, use_attribute=True,
                      normalization=stats)
    logger.info('Training the fair model')
    fair, selection = fit_fair(prepared.train, config.fairness,
                               baseline=with_attr, normalization=stats)
    logger.info(f'Fair model gamma {fair.gamma:.6g}'
                f' after {selection.doublings} doubling(s)')
    return TrainedModels(StrategyModels(oblivious, with_attr, fair), selection)


def save_models(trained: TrainedModels, out_dir: Union[Path, str]) -> List[Path]:
    """Write the three model files and the normalization statistics."""
    model_dir = Path(out_dir) / 'models'
    paths = []
    for kind, model in trained.by_kind().items():
        path = model_dir / f'{kind}.json'
        save_model(model, path)
        paths.append(path)
    path = model_dir / 'normalization.json'
    stats = trained.models.with_attr.normalization
    path.write_text(json.dumps(None if stats is None else stats.to_dict(),
                               indent=2, sort_keys=True) + '\n')
    paths.append(path)
    return paths


def run_training(config: ExperimentConfig) -> TrainedModels:
    """Prepare the data, train the models and write them to disk."""
    trained = train_models(prepare(config), config)
    for path in save_models(trained, config.output_dir):
        logger.info(f'Wrote {path}')
    return trained


@dataclass(frozen=True)
class ResultRow:
    """Metrics of one strategy under one scenario.

    `order` sorts rows independently of the evaluation order; it is not
    written.

    """

    dataset: str
    strategy: str
    direction: str
    epsilon: float
    seed: Union[int, str]
    replicate: int
    metrics: Dict[str, float]
    order: Tuple = field(default=(), compare=False)

    def as_dict(self) -> dict:
        row = {'dataset': self.dataset,
               'strategy': self.strategy,
               'direction': self.direction,
               'epsilon': self.epsilon,
               'seed': self.seed,
               'replicate': self.replicate}
        row.update(self.metrics)
        return row


@dataclass(frozen=True)
class ScenarioTask:
    """One scenario to evaluate with every strategy.

    A controlled task perturbs the test set with `scenario`; a fixture task
    carries the test set with the service's labels in `observed_test`.

    """

    label: str
    order: Tuple
    scenario: Optional[NoiseScenario] = None
    service: str = ''
    epsilon: float = 0.0
    observed_test: Optional[Dataset] = None

    def __str__(self) -> str:
        if self.scenario is not None:
            return str(self.scenario)
        return f'fixture {self.service}'


@dataclass(frozen=True)
class _Context:
    dataset_name: str
    test: Dataset
    models: StrategyModels
    settings: MetricSettings


# Shared by the tasks of a worker process.
_worker_context: Optional[_Context] = None


def _init_worker(context: _Context) -> None:
    global _worker_context
    _worker_context = context


def _evaluate_task(context: _Context, task: ScenarioTask) -> List[ResultRow]:
    if task.scenario is not None:
        test = perturb(context.test, task.scenario)
        direction = task.scenario.direction.value
        epsilon = task.scenario.epsilon
        seed = task.scenario.seed
        replicate = task.scenario.replicate
    else:
        test = task.observed_test
        direction = FIXTURE_DIRECTION
        epsilon = task.epsilon
        seed = task.service
        replicate = 0
    rows = []
    for spec in all_strategies():
        ranking = run_strategy(spec, context.models, test)
        report = evaluate(ranking, test, context.settings)
        rows.append(ResultRow(
            dataset=context.dataset_name,
            strategy=spec.name,
            direction=direction,
            epsilon=epsilon,
            seed=seed,
            replicate=replicate,
            metrics=report.as_row(),
            order=task.order + (_STRATEGY_INDEX[spec.name],),
        ))
    return rows


def _evaluate_in_worker(task: ScenarioTask) -> List[ResultRow]:
    return _evaluate_task(_worker_context, task)


def controlled_tasks(config: ExperimentConfig) -> List[ScenarioTask]:
    """Every scenario of the configured directions."""
    tasks = []
    for direction in config.noise.directions:
        for scenario in scenario_grid(direction, config.noise.seed,
                                      config.noise.replicates):
            tasks.append(ScenarioTask(
                label=direction.value,
                order=(direction.index, scenario.epsilon,
                       scenario.replicate),
                scenario=scenario))
    return tasks


def fixture_tasks(
        test: Dataset,
        fixtures_path: Union[Path, str],
        ) -> Tuple[List[ScenarioTask], List[FixtureReport]]:
    """G-TRUTH first, then the services by increasing effective error."""
    applied = []
    for fixture in load_fixtures(fixtures_path).values():
        observed, report = apply_fixture(test, fixture)
        applied.append((report, observed))
    applied.sort(key=lambda item: (item[0].effective_error_rate,
                                   item[0].service))
    block = len(Direction)
    truth = test.with_candidates(
        replace(c, observed_group=c.true_group) for c in test.candidates)
    tasks = [ScenarioTask(label=FIXTURE_DIRECTION, order=(block, 0, 0),
                          service=GROUND_TRUTH_SERVICE, epsilon=0.0,
                          observed_test=truth)]
    for i, (report, observed) in enumerate(applied, start=1):
        tasks.append(ScenarioTask(label=FIXTURE_DIRECTION, order=(block, i, 0),
                                  service=report.service,
                                  epsilon=report.effective_error_rate,
                                  observed_test=observed))
    return tasks, [report for report, _ in applied]


def results_frame(
        rows: Sequence[ResultRow],
        settings: MetricSettings,
        ) -> pd.DataFrame:
    """Rows sorted by their key, in the frozen column order."""
    columns = list(KEY_COLUMNS) + list(metric_columns(settings))
    ordered = sorted(rows, key=lambda row: row.order)
    return pd.DataFrame([row.as_dict() for row in ordered], columns=columns)


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def _metric_names(results: pd.DataFrame) -> List[str]:
    return [c for c in results.columns if c not in KEY_COLUMNS]


def _controlled(results: pd.DataFrame) -> pd.DataFrame:
    return results[results['direction'] != FIXTURE_DIRECTION]


def aggregate(results: pd.DataFrame) -> pd.DataFrame:
    """Mean and population standard deviation over replicates.

    Only controlled rows are aggregated. Groups keep the order of their
    first row.

    """
    metrics = _metric_names(results)
    columns = list(AGGREGATE_KEYS) + ['replicates']
    columns += [f'{m}_{stat}' for m in metrics for stat in ('mean', 'std')]
    controlled = _controlled(results)
    if controlled.empty:
        return pd.DataFrame(columns=columns)
    records = []
    for key, group in controlled.groupby(list(AGGREGATE_KEYS), sort=False):
        record = dict(zip(AGGREGATE_KEYS, key))
        record['replicates'] = len(group)
        for m in metrics:
            values = group[m].to_numpy(dtype=np.float64)
            record[f'{m}_mean'] = float(np.mean(values))
            record[f'{m}_std'] = float(np.std(values))
        records.append(record)
    return pd.DataFrame(records, columns=columns)


def tradeoff(aggregates: pd.DataFrame) -> pd.DataFrame:
    """NDKL against every NDCG cutoff, from the aggregate means."""
    ndcg = [c for c in aggregates.columns
            if c.startswith('ndcg@') and c.endswith('_mean')]
    columns = list(AGGREGATE_KEYS) + ['ndkl_mean'] + ndcg
    return aggregates[columns].reset_index(drop=True)


def skew_curves(test: Dataset) -> pd.DataFrame:
    """Skew@k of both groups along the judgment ranking of the test set."""
    ranking = rank_by_score((c.id, c.judgment) for c in test.candidates)
    groups = test.true_groups()
    frame = pd.DataFrame({'k': np.arange(1, len(ranking) + 1)})
    for g in GROUPS:
        frame[f'skew_{g.value}'] = skew_curve(ranking, groups, g)
    return frame


def ideal_value(metric: str) -> Optional[float]:
    """Ideal value of a metric column, None for skews."""
    return IDEAL_VALUES.get(metric.split('@')[0])


def _charted(metrics: Sequence[str]) -> List[str]:
    return [m for m in metrics if ideal_value(m) is not None]


def _strategies_in(frame: pd.DataFrame) -> List[str]:
    present = set(frame['strategy'])
    return [name for name in STRATEGY_TABLE if name in present]


def write_charts(
        results: pd.DataFrame,
        aggregates: pd.DataFrame,
        out_dir: Union[Path, str],
        ) -> List[Path]:
    """One chart per direction and metric, plus one per metric for fixtures."""
    chart_dir = Path(out_dir) / 'charts'
    metrics = _charted(_metric_names(results))
    paths = []
    for direction in Direction:
        block = aggregates[aggregates['direction'] == direction.value]
        if block.empty:
            continue
        for metric in metrics:
            series = {}
            x_values = []
            for name in _strategies_in(block):
                rows = block[block['strategy'] == name]
                x_values = [float(x) for x in rows['epsilon']]
                series[name] = [float(y) for y in rows[f'{metric}_mean']]
            chart = line_chart(
                f'{direction.value}: {metric}', x_values, series, metric,
                ideal=ideal_value(metric))
            path = chart_dir / valid_filename(f'{direction.value}_{metric}.svg')
            save_chart(chart, path)
            paths.append(path)
    fixtures = results[results['direction'] == FIXTURE_DIRECTION]
    if not fixtures.empty:
        for metric in metrics:
            series = {}
            services = []
            for name in _strategies_in(fixtures):
                rows = fixtures[fixtures['strategy'] == name]
                services = [str(s) for s in rows['seed']]
                series[name] = [float(y) for y in rows[metric]]
            chart = category_chart(f'inference services: {metric}', services,
                                   series, metric, ideal=ideal_value(metric))
            path = chart_dir / valid_filename(f'fixtures_{metric}.svg')
            save_chart(chart, path)
            paths.append(path)
    return paths


def write_report(
        results: pd.DataFrame,
        out_dir: Union[Path, str],
        ) -> List[Path]:
    """Write aggregates, trade-off data and charts for a results frame."""
    out_path = Path(out_dir)
    aggregates = aggregate(results)
    paths = [out_path / 'aggregates.csv', out_path / 'tradeoff.csv']
    _write_csv(aggregates, paths[0])
    _write_csv(tradeoff(aggregates), paths[1])
    paths += write_charts(results, aggregates, out_path)
    return paths


def read_results(out_dir: Union[Path, str]) -> pd.DataFrame:
    """Read the results CSV of a finished run."""
    path = Path(out_dir) / 'results.csv'
    if not path.exists():
        raise ExperimentError(f'No results in {out_dir}')
    return pd.read_csv(path, dtype={'seed': str})


def metadata(
        config: ExperimentConfig,
        prepared: PreparedData,
        trained: TrainedModels,
        reports: Sequence[FixtureReport],
        row_count: int,
        ) -> dict:
    models = {}
    for kind, model in trained.by_kind().items():
        models[kind] = {
            'coefficients': model.coefficients(),
            'attribute_weight': model.attribute_weight,
            'initial_loss': model.loss_trace[0],
            'final_loss': model.loss_trace[-1],
            'epochs': len(model.loss_trace) - 1,
            'gamma': model.gamma,
        }
    test = prepared.test
    return {
        'version': __version__,
        'config': config.to_dict(),
        'dataset': {
            'name': prepared.name,
            'n_train': len(prepared.train),
            'n_test': len(test),
            'group_names': {g.value: test.group_names[g] for g in GROUPS},
            'detected_group': prepared.detected_group,
            'mean_top_skews': {g.value: prepared.top_skews[g]
                               for g in GROUPS},
            'test_proportions': {g.value: test.group_proportions[g]
                                 for g in GROUPS},
            'rerank_target': {g.value: v for g, v in
                              target_from_observed(test).items()},
        },
        'normalization': prepared.normalization.to_dict(),
        'models': models,
        'gamma_selection': trained.gamma_selection.to_dict(),
        'seeds': {'split': config.split.seed,
                  'noise': config.noise.seed,
                  'synthetic': config.synthetic.seed},
        'fixtures': [r.to_dict() for r in reports],
        'rows': row_count,
    }


@dataclass(frozen=True)
class ExperimentOutput:
    output_dir: Path
    rows: int
    files: Tuple[Path, ...]


def _evaluate_all(
        context: _Context,
        tasks: Sequence[ScenarioTask],
        workers: int,
        ) -> Tuple[List[ResultRow], Optional[Tuple[ScenarioTask, Exception]]]:
    """Rows of the tasks evaluated before the first failure, if any."""
    rows: List[ResultRow] = []
    if workers == 1:
        for task in tasks:
            try:
                rows += _evaluate_task(context, task)
            except Exception as e:
                return rows, (task, e)
            logger.debug(f'Evaluated {task}')
        return rows, None
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(context,)) as executor:
        futures = [executor.submit(_evaluate_in_worker, task)
                   for task in tasks]
        for task, future in zip(tasks, futures):
            try:
                rows += future.result()
            except Exception as e:
                for pending in futures:
                    pending.cancel()
                return rows, (task, e)
    return rows, None


def run_experiment(
        config: ExperimentConfig,
        sweep: bool = True,
        fixtures: bool = True,
        ) -> ExperimentOutput:
    """Detect the groups, train the models, evaluate every scenario.

    Parameters
    ----------
    - config: the experiment.
    - sweep: evaluate the controlled scenarios of the configured directions.
    - fixtures: evaluate the inference services of config.fixtures_path,
        when set.

    """
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / FAILED_MARKER
    if marker.exists():
        marker.unlink()
    prepared = prepare(config)
    trained = train_models(prepared, config)
    tasks = controlled_tasks(config) if sweep else []
    reports: List[FixtureReport] = []
    if fixtures and config.fixtures_path is not None:
        extra, reports = fixture_tasks(prepared.test, config.fixtures_path)
        tasks += extra
    elif not sweep:
        raise ExperimentError('Fixture mode needs a [fixtures] path')
    logger.info(f'Evaluating {len(tasks)} scenario(s) with'
                f' {config.workers} worker(s)')
    context = _Context(prepared.name, prepared.test, trained.models,
                       config.metrics)
    rows, failure = _evaluate_all(context, tasks, config.workers)
    results = results_frame(rows, config.metrics)
    results_path = out_dir / 'results.csv'
    _write_csv(results, results_path)
    if failure is not None:
        task, e = failure
        marker.write_text(f'{task}: {type(e).__name__}: {e}\n')
        raise ExperimentError(
            f'Scenario "{task}" failed: {e}; {len(results)} row(s) written'
            f' to {results_path}') from e
    files = [results_path]
    files += write_report(results, out_dir)
    curves_path = out_dir / 'skew_curves.csv'
    _write_csv(skew_curves(prepared.test), curves_path)
    files.append(curves_path)
    meta_path = out_dir / 'metadata.json'
    meta_path.write_text(json.dumps(
        metadata(config, prepared, trained, reports, len(results)),
        indent=2, sort_keys=True) + '\n')
    files.append(meta_path)
    files += save_models(trained, out_dir)
    logger.info(f'Wrote {len(results)} rows and {len(files)} files to'
                f' {out_dir}')
    return ExperimentOutput(out_dir, len(results), tuple(files))
