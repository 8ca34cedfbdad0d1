"""Controlled inference-error scenarios and inference-service fixtures."""

from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
import enum
import logging
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

import pandas as pd

from .domain import Dataset
from .domain import GROUPS
from .domain import GroupLabel
from .utils import DataError
from .utils import SchemaError
from .utils import UnresolvedGroupError
from .utils import make_generator
from .utils import round_half_up
from .utils import shuffled

logger = logging.getLogger(__name__)

FIXTURE_COLUMNS = ('id', 'name', 'service', 'inferred_label')

REPLICATES = 5

# Interior error levels of the standard grid, 0.1 .. 0.9.
GRID_LEVELS = tuple(round(i / 10, 1) for i in range(1, 10))


class Direction(enum.Enum):
    BIDIRECTIONAL = 'bidirectional'
    DIS_TO_ADV = 'dis_to_adv'
    ADV_TO_DIS = 'adv_to_dis'

    @property
    def index(self) -> int:
        """Seed word of the direction."""
        return list(Direction).index(self)

    @property
    def source_groups(self) -> Tuple[GroupLabel, ...]:
        """True groups whose members can be flipped."""
        if self is Direction.DIS_TO_ADV:
            return (GroupLabel.DISADVANTAGED,)
        if self is Direction.ADV_TO_DIS:
            return (GroupLabel.ADVANTAGED,)
        return GROUPS


@dataclass(frozen=True)
class NoiseScenario:
    direction: Direction
    epsilon: float
    seed: int = 0
    replicate: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f'epsilon must be in [0, 1], got {self.epsilon}')
        if self.replicate < 0:
            raise ValueError('replicate must be nonnegative')

    def __str__(self) -> str:
        return (f'{self.direction.value} epsilon={self.epsilon}'
                f' seed={self.seed} replicate={self.replicate}')


def flip_set(test: Dataset, scenario: NoiseScenario) -> FrozenSet[int]:
    """Ids whose observed label the scenario flips.

    The members of each group, by ascending id, are shuffled in turn
    (disadvantaged first) with the generator seeded by (seed, direction,
    replicate). In each source group of the direction the first
    round(epsilon * |g|) shuffled members are flipped. The shuffles do not
    depend on epsilon, so flip sets grow with it.

    """
    generator = make_generator(scenario.seed, scenario.direction.index,
                               scenario.replicate)
    flipped = set()
    for g in GROUPS:
        members = sorted(c.id for c in test.members(g))
        order = shuffled(members, generator)
        if g in scenario.direction.source_groups:
            count = round_half_up(scenario.epsilon * len(members))
            flipped.update(order[:count])
    return frozenset(flipped)


def perturb(test: Dataset, scenario: NoiseScenario) -> Dataset:
    """Return a copy with the observed labels of the flip set mirrored."""
    if test.has_unknowns():
        raise UnresolvedGroupError('Resolve unknowns before perturbing labels')
    flipped = flip_set(test, scenario)
    candidates = [replace(c, observed_group=c.observed_group.mirror)
                  if c.id in flipped else c for c in test.candidates]
    return test.with_candidates(candidates)


def scenario_grid(
        direction: Direction,
        seed: int = 0,
        replicates: int = REPLICATES,
        ) -> List[NoiseScenario]:
    """Epsilon 0 and 1 once, every interior level once per replicate."""
    grid = [NoiseScenario(direction, 0.0, seed, 0)]
    for epsilon in GRID_LEVELS:
        for replicate in range(replicates):
            grid.append(NoiseScenario(direction, epsilon, seed, replicate))
    grid.append(NoiseScenario(direction, 1.0, seed, 0))
    return grid


@dataclass(frozen=True)
class FixtureRecord:
    id: Optional[int]
    name: str
    inferred_label: Optional[GroupLabel]


@dataclass(frozen=True)
class InferenceFixture:
    """Labels inferred by one service; None stands for unknown."""

    service: str
    records: Tuple[FixtureRecord, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class FixtureReport:
    service: str
    n: int
    correct: int
    incorrect: int
    unknown: int
    unknown_by_group: Dict[GroupLabel, int]
    incorrect_by_group: Dict[GroupLabel, int]
    dis_assignments: int
    misassigned_unknown: int
    effective_error_rate: float

    def to_dict(self) -> dict:
        return {
            'service': self.service,
            'n': self.n,
            'correct': self.correct,
            'incorrect': self.incorrect,
            'unknown': self.unknown,
            'unknown_by_group': {g.value: v
                                 for g, v in self.unknown_by_group.items()},
            'incorrect_by_group': {g.value: v
                                   for g, v in self.incorrect_by_group.items()},
            'dis_assignments': self.dis_assignments,
            'misassigned_unknown': self.misassigned_unknown,
            'effective_error_rate': self.effective_error_rate,
        }


_LABELS = {
    'dis': GroupLabel.DISADVANTAGED,
    'adv': GroupLabel.ADVANTAGED,
    'unknown': None,
}


def load_fixtures(path: Union[Path, str]) -> Dict[str, InferenceFixture]:
    """Read a fixture CSV, possibly holding several services."""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in FIXTURE_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f'{path}: missing column(s) {", ".join(missing)}')
    records: Dict[str, List[FixtureRecord]] = {}
    for index, row in enumerate(frame.to_dict(orient='records')):
        line = index + 2
        label = row['inferred_label'].strip().lower()
        if label not in _LABELS:
            raise DataError(
                f'{path} line {line}: inferred_label must be dis, adv or'
                f' unknown, got "{row["inferred_label"]}"')
        raw_id = row['id'].strip()
        try:
            cid = int(raw_id) if raw_id else None
        except ValueError:
            raise DataError(
                f'{path} line {line}: cannot parse id "{raw_id}"') from None
        if cid is None and not row['name']:
            raise DataError(f'{path} line {line}: needs an id or a name')
        records.setdefault(row['service'], []).append(
            FixtureRecord(cid, row['name'], _LABELS[label]))
    return {service: InferenceFixture(service, tuple(rows))
            for service, rows in records.items()}


def save_fixtures(
        fixtures: List[InferenceFixture],
        path: Union[Path, str],
        ) -> None:
    names = {label: text for text, label in _LABELS.items()}
    rows = [{'id': '' if r.id is None else r.id,
             'name': r.name,
             'service': f.service,
             'inferred_label': names[r.inferred_label]}
            for f in fixtures for r in f.records]
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=list(FIXTURE_COLUMNS)).to_csv(file_path,
                                                             index=False)


def _join(test: Dataset, fixture: InferenceFixture) -> Dict[int, Optional[GroupLabel]]:
    by_name = {}
    for c in test.candidates:
        if c.name:
            by_name.setdefault(c.name, []).append(c.id)
    test_ids = set(test.ids)
    inferred: Dict[int, Optional[GroupLabel]] = {}
    duplicates = set()
    extras = 0
    for record in fixture.records:
        if record.id is not None:
            cid = record.id if record.id in test_ids else None
        else:
            matches = by_name.get(record.name, [])
            if len(matches) > 1:
                raise DataError(
                    f'{fixture.service}: name "{record.name}" matches'
                    f' candidates {matches}; use ids')
            cid = matches[0] if matches else None
        if cid is None:
            extras += 1
            continue
        if cid in inferred:
            duplicates.add(cid)
        inferred[cid] = record.inferred_label
    if duplicates:
        raise DataError(f'{fixture.service}: candidates listed twice:'
                        f' {sorted(duplicates)[:20]}')
    missing = sorted(test_ids - set(inferred))
    if missing:
        raise DataError(f'{fixture.service}: no inferred label for'
                        f' {len(missing)} candidate(s): {missing[:20]}')
    if extras:
        logger.info(f'{fixture.service}: ignored {extras} record(s) outside'
                    ' the test set')
    return inferred


def apply_fixture(
        test: Dataset,
        fixture: InferenceFixture,
        dis_label: GroupLabel = GroupLabel.DISADVANTAGED,
        ) -> Tuple[Dataset, FixtureReport]:
    """Set observed labels from a service, unknowns going to `dis_label`."""
    inferred = _join(test, fixture)
    unknown_by_group = {g: 0 for g in GROUPS}
    incorrect_by_group = {g: 0 for g in GROUPS}
    candidates = []
    for c in test.candidates:
        label = inferred[c.id]
        if label is None:
            unknown_by_group[c.true_group] += 1
            label = dis_label
        elif label is not c.true_group:
            incorrect_by_group[c.true_group] += 1
        candidates.append(replace(c, observed_group=label))
    n = len(test)
    unknown = sum(unknown_by_group.values())
    incorrect = sum(incorrect_by_group.values())
    misassigned = sum(v for g, v in unknown_by_group.items()
                      if g is not dis_label)
    report = FixtureReport(
        service=fixture.service,
        n=n,
        correct=n - unknown - incorrect,
        incorrect=incorrect,
        unknown=unknown,
        unknown_by_group=unknown_by_group,
        incorrect_by_group=incorrect_by_group,
        dis_assignments=unknown,
        misassigned_unknown=misassigned,
        effective_error_rate=(incorrect + misassigned) / n,
    )
    logger.info(f'{fixture.service}: {unknown} unknown, effective error'
                f' {report.effective_error_rate:.3f}')
    return test.with_candidates(candidates), report
