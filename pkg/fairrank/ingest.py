"""Dataset loading, splitting, normalization and group detection."""

from dataclasses import dataclass
from dataclasses import replace
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .domain import Candidate
from .domain import Dataset
from .domain import GROUPS
from .domain import GroupLabel
from .domain import rank_by_score
from .metrics import skew_curve
from .utils import DataError
from .utils import SchemaError
from .utils import fisher_yates
from .utils import make_generator
from .utils import round_half_up
from .utils import warn

logger = logging.getLogger(__name__)

# Standard deviations below this count as zero variance.
_MIN_STD = 1e-12


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of a dataset CSV.

    Without `disadvantaged_value` the group mapping is provisional until
    `detect_disadvantaged_group` decides.

    """

    id_column: str
    judgment_column: str
    group_column: str
    feature_columns: Tuple[str, ...]
    disadvantaged_value: Optional[str] = None
    name_column: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'feature_columns', tuple(self.feature_columns))
        if not self.feature_columns:
            raise SchemaError('feature_columns must not be empty')
        columns = self.columns
        duplicates = sorted({c for c in columns if columns.count(c) > 1})
        if duplicates:
            raise SchemaError(f'Columns listed twice: {", ".join(duplicates)}')

    @property
    def columns(self) -> List[str]:
        columns = [self.id_column, self.judgment_column, self.group_column]
        columns += list(self.feature_columns)
        if self.name_column:
            columns.append(self.name_column)
        return columns


@dataclass(frozen=True)
class NormalizationStats:
    """Training-split statistics.

    `feature_names` are the retained features; `dropped` maps each
    zero-variance feature to its constant value.

    """

    input_features: Tuple[str, ...]
    feature_names: Tuple[str, ...]
    means: Tuple[float, ...]
    stds: Tuple[float, ...]
    dropped: Dict[str, float]
    judgment_min: float
    judgment_max: float

    def to_dict(self) -> dict:
        return {
            'input_features': list(self.input_features),
            'feature_names': list(self.feature_names),
            'means': list(self.means),
            'stds': list(self.stds),
            'dropped': dict(self.dropped),
            'judgment_min': self.judgment_min,
            'judgment_max': self.judgment_max,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'NormalizationStats':
        return cls(
            input_features=tuple(data['input_features']),
            feature_names=tuple(data['feature_names']),
            means=tuple(float(v) for v in data['means']),
            stds=tuple(float(v) for v in data['stds']),
            dropped={k: float(v) for k, v in data['dropped'].items()},
            judgment_min=float(data['judgment_min']),
            judgment_max=float(data['judgment_max']),
        )


def _parse_float(value: str, column: str, line: int) -> float:
    try:
        number = float(value)
    except ValueError:
        raise DataError(
            f'Line {line}: cannot parse "{value}" in column "{column}"'
            ' as a number') from None
    if not math.isfinite(number):
        raise DataError(
            f'Line {line}: non-finite value "{value}" in column "{column}"')
    return number


def _parse_int(value: str, column: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise DataError(
            f'Line {line}: cannot parse "{value}" in column "{column}"'
            ' as an integer') from None


def _group_mapping(
        values: List[str],
        schema: DatasetSchema,
        ) -> Dict[str, GroupLabel]:
    distinct = sorted(set(values))
    if len(distinct) != 2:
        raise DataError(
            f'Column "{schema.group_column}" must hold exactly two values,'
            f' found {len(distinct)}: {", ".join(distinct[:5])}')
    if schema.disadvantaged_value is None:
        dis_value = distinct[0]
        logger.info(f'Provisional disadvantaged group "{dis_value}",'
                    ' to be confirmed by skew detection')
    else:
        dis_value = schema.disadvantaged_value
        if dis_value not in distinct:
            raise SchemaError(
                f'disadvantaged_value "{dis_value}" does not occur in column'
                f' "{schema.group_column}"')
    return {v: (GroupLabel.DISADVANTAGED if v == dis_value
                else GroupLabel.ADVANTAGED) for v in distinct}


def load_dataset(csv_path: Union[Path, str], schema: DatasetSchema) -> Dataset:
    """Load a CSV with a header row into a Dataset."""
    frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
    missing = [c for c in schema.columns if c not in frame.columns]
    if missing:
        raise SchemaError(
            f'{csv_path}: missing column(s) {", ".join(missing)}')
    mapping = _group_mapping(list(frame[schema.group_column]), schema)
    candidates = []
    for index, row in enumerate(frame.to_dict(orient='records')):
        # Header is line 1.
        line = index + 2
        label = mapping[row[schema.group_column]]
        candidates.append(Candidate(
            id=_parse_int(row[schema.id_column], schema.id_column, line),
            features=tuple(_parse_float(row[col], col, line)
                           for col in schema.feature_columns),
            judgment=_parse_float(row[schema.judgment_column],
                                  schema.judgment_column, line),
            true_group=label,
            observed_group=label,
            name=row[schema.name_column] if schema.name_column else '',
        ))
    group_names = {label: value for value, label in mapping.items()}
    for g in GROUPS:
        count = sum(1 for c in candidates if c.true_group is g)
        if count < 2:
            warn(f'Group "{group_names[g]}" has {count} row(s);'
                 ' it cannot be split into train and test')
    return Dataset(candidates=tuple(candidates),
                   feature_names=schema.feature_columns,
                   group_names=group_names)


def dataset_frame(dataset: Dataset, schema: DatasetSchema) -> pd.DataFrame:
    """Return the dataset as a frame laid out per the schema."""
    columns = {
        schema.id_column: [c.id for c in dataset.candidates],
        schema.judgment_column: [c.judgment for c in dataset.candidates],
        schema.group_column: [dataset.group_names[c.true_group]
                              for c in dataset.candidates],
    }
    matrix = dataset.feature_matrix()
    for j, name in enumerate(schema.feature_columns):
        columns[name] = matrix[:, j]
    if schema.name_column:
        columns[schema.name_column] = [c.name for c in dataset.candidates]
    return pd.DataFrame(columns, columns=schema.columns)


def save_dataset(
        dataset: Dataset,
        schema: DatasetSchema,
        csv_path: Union[Path, str],
        ) -> None:
    """Write a CSV that `load_dataset` reads back under the same schema."""
    path = Path(csv_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset_frame(dataset, schema).to_csv(path, index=False,
                                          float_format='%.17g')


def split_train_test(
        dataset: Dataset,
        fraction: float,
        seed: int,
        ) -> Tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first round(fraction * n) go to training.

    Both splits keep the dataset's candidate order.

    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f'Split fraction must be in (0, 1), got {fraction}')
    n = len(dataset)
    n_train = round_half_up(fraction * n)
    permutation = fisher_yates(n, make_generator(seed))
    train_index = np.sort(permutation[:n_train])
    test_index = np.sort(permutation[n_train:])
    parts = []
    for name, index in (('train', train_index), ('test', test_index)):
        candidates = [dataset.candidates[i] for i in index]
        for g in GROUPS:
            if not any(c.true_group is g for c in candidates):
                raise DataError(
                    f'The {name} split with seed {seed} has no member of'
                    f' group "{dataset.group_names[g]}"; try a different seed')
        parts.append(dataset.with_candidates(candidates))
    train, test = parts
    logger.debug(f'Split {n} candidates into {len(train)} / {len(test)}')
    return train, test


def fit_normalization(train: Dataset) -> NormalizationStats:
    """Feature z-scores and judgment min-max from the training split."""
    if len(train) == 0:
        raise DataError('Cannot normalize an empty training split')
    matrix = train.feature_matrix()
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0)
    keep = stds > _MIN_STD
    dropped = {name: float(means[j])
               for j, name in enumerate(train.feature_names) if not keep[j]}
    if dropped:
        logger.info(f'Dropped zero-variance features: {", ".join(dropped)}')
    judgments = train.judgments()
    low, high = float(judgments.min()), float(judgments.max())
    if high == low:
        raise DataError(f'All training judgments equal {low}; nothing to learn')
    return NormalizationStats(
        input_features=train.feature_names,
        feature_names=tuple(n for n, k in zip(train.feature_names, keep) if k),
        means=tuple(float(v) for v in means[keep]),
        stds=tuple(float(v) for v in stds[keep]),
        dropped=dropped,
        judgment_min=low,
        judgment_max=high,
    )


def apply_normalization(d: Dataset, stats: NormalizationStats) -> Dataset:
    """Transform a split with training statistics.

    Raw judgments stay on the candidates; the scaled value becomes the
    training target.

    """
    if d.feature_names != stats.input_features:
        raise ValueError('Dataset features do not match the statistics')
    index = [d.feature_names.index(name) for name in stats.feature_names]
    matrix = d.feature_matrix()[:, index]
    matrix = (matrix - np.array(stats.means)) / np.array(stats.stds)
    span = stats.judgment_max - stats.judgment_min
    candidates = [
        replace(c, features=tuple(row),
                target=(c.judgment - stats.judgment_min) / span)
        for c, row in zip(d.candidates, matrix)]
    return replace(d, candidates=tuple(candidates),
                   feature_names=stats.feature_names)


def invert_normalization(d: Dataset, stats: NormalizationStats) -> Dataset:
    """Undo `apply_normalization`, restoring dropped constant features."""
    if d.feature_names != stats.feature_names:
        raise ValueError('Dataset features do not match the statistics')
    scaled = d.feature_matrix() * np.array(stats.stds) + np.array(stats.means)
    columns = []
    for name in stats.input_features:
        if name in stats.dropped:
            columns.append(np.full(len(d), stats.dropped[name]))
        else:
            columns.append(scaled[:, stats.feature_names.index(name)])
    matrix = np.column_stack(columns) if columns else np.zeros((len(d), 0))
    candidates = [replace(c, features=tuple(row), target=None)
                  for c, row in zip(d.candidates, matrix)]
    return replace(d, candidates=tuple(candidates),
                   feature_names=stats.input_features)


def mean_top_skews(dataset: Dataset) -> Dict[GroupLabel, float]:
    """Mean Skew@k over the top half of the judgment ranking, per group."""
    if len(dataset) == 0:
        raise DataError('Cannot detect groups in an empty dataset')
    ranking = rank_by_score((c.id, c.judgment) for c in dataset.candidates)
    groups = dataset.true_groups()
    half = math.ceil(len(dataset) / 2)
    return {g: float(skew_curve(ranking, groups, g)[:half].mean())
            for g in GROUPS}


def detect_disadvantaged_group(dataset: Dataset) -> GroupLabel:
    """Return the group with the lower mean skew at the top of the ranking."""
    skews = mean_top_skews(dataset)
    dis = skews[GroupLabel.DISADVANTAGED]
    adv = skews[GroupLabel.ADVANTAGED]
    if dis == adv:
        raise DataError(
            f'Both groups have mean top-half skew {dis}; set'
            ' disadvantaged_value in the schema to pin the group')
    return GroupLabel.DISADVANTAGED if dis < adv else GroupLabel.ADVANTAGED


def relabel_groups(dataset: Dataset) -> Dataset:
    """Swap the two labels on every candidate and in the group names."""
    candidates = [
        replace(c, true_group=c.true_group.mirror,
                observed_group=(None if c.observed_group is None
                                else c.observed_group.mirror))
        for c in dataset.candidates]
    names = {g.mirror: name for g, name in dataset.group_names.items()}
    return replace(dataset, candidates=tuple(candidates), group_names=names)


def align_groups(
        train: Dataset,
        test: Dataset,
        pinned: bool = False,
        ) -> Tuple[Dataset, Dataset, GroupLabel]:
    """Make the detected group the disadvantaged one on both splits.

    Detection runs on the test split. With a pinned mapping a disagreement
    is only reported. Returns the splits and the detected label before any
    relabelling.

    """
    detected = detect_disadvantaged_group(test)
    if detected is GroupLabel.DISADVANTAGED:
        return train, test, detected
    if pinned:
        warn(f'Skew detection points at "{test.group_names[detected]}" as'
             ' disadvantaged; keeping the pinned'
             f' "{test.group_names[GroupLabel.DISADVANTAGED]}"')
        return train, test, detected
    logger.info(f'Detected "{test.group_names[detected]}" as disadvantaged;'
                ' relabelling')
    return relabel_groups(train), relabel_groups(test), detected
