"""Core data types and deterministic ranking primitives."""

from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
import enum
import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .utils import DataError
from .utils import UnresolvedGroupError


class GroupLabel(enum.Enum):
    DISADVANTAGED = 'dis'
    ADVANTAGED = 'adv'

    @property
    def mirror(self) -> 'GroupLabel':
        """Return the other group."""
        if self is GroupLabel.DISADVANTAGED:
            return GroupLabel.ADVANTAGED
        return GroupLabel.DISADVANTAGED

    @property
    def encoding(self) -> float:
        """Value of the protected-attribute feature column."""
        return 1.0 if self is GroupLabel.DISADVANTAGED else 0.0


# Hint for an observed group, None stands for Unknown.
ObservedGroup = Optional[GroupLabel]

GROUPS = (GroupLabel.DISADVANTAGED, GroupLabel.ADVANTAGED)


@dataclass(frozen=True)
class Candidate:
    """One rankable item.

    `judgment` is the raw ground-truth score; `target` is the normalized
    training target, None until normalization.

    """

    id: int
    features: Tuple[float, ...]
    judgment: float
    true_group: GroupLabel
    observed_group: ObservedGroup
    name: str = ''
    target: Optional[float] = None

    def __post_init__(self):
        if not math.isfinite(self.judgment):
            raise DataError(
                f'Candidate {self.id}: judgment must be finite,'
                f' got {self.judgment}')
        object.__setattr__(self, 'features',
                           tuple(float(v) for v in self.features))


@dataclass(frozen=True)
class Ranking:
    """Candidate ids from top (position 1) to bottom, with their scores."""

    order: Tuple[int, ...]
    scores: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'order', tuple(int(i) for i in self.order))
        object.__setattr__(self, 'scores',
                           tuple(float(s) for s in self.scores))
        if len(self.order) != len(self.scores):
            raise ValueError('A ranking needs one score per candidate')
        if len(set(self.order)) != len(self.order):
            raise ValueError('A ranking cannot list a candidate twice')

    def __len__(self) -> int:
        return len(self.order)

    def positions(self) -> Dict[int, int]:
        """Return the 1-based position of every id."""
        return {cid: j for j, cid in enumerate(self.order, start=1)}

    def score_of(self) -> Dict[int, float]:
        return dict(zip(self.order, self.scores))


@dataclass(frozen=True)
class Dataset:
    """A single ranking task: candidates sharing one feature space.

    `group_names` maps each label to the raw value of the group column.

    """

    candidates: Tuple[Candidate, ...]
    feature_names: Tuple[str, ...]
    group_names: Mapping[GroupLabel, str] = field(
        default_factory=lambda: {g: g.value for g in GROUPS})
    group_proportions: Mapping[GroupLabel, float] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'candidates', tuple(self.candidates))
        object.__setattr__(self, 'feature_names', tuple(self.feature_names))
        object.__setattr__(self, 'group_names', dict(self.group_names))
        seen = set()
        for c in self.candidates:
            if c.id in seen:
                raise DataError(f'Duplicate candidate id {c.id}')
            seen.add(c.id)
            if len(c.features) != len(self.feature_names):
                raise DataError(
                    f'Candidate {c.id} has {len(c.features)} features,'
                    f' expected {len(self.feature_names)}')
        proportions = group_proportions(self.candidates, use_observed=False)
        for g in GROUPS:
            if proportions[g] == 0.0:
                raise DataError(f'Group "{self.group_names[g]}" has no member')
        object.__setattr__(self, 'group_proportions', proportions)

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def ids(self) -> List[int]:
        return [c.id for c in self.candidates]

    def by_id(self) -> Dict[int, Candidate]:
        return {c.id: c for c in self.candidates}

    def feature_matrix(self) -> np.ndarray:
        return np.array([c.features for c in self.candidates],
                        dtype=np.float64).reshape(
            len(self), len(self.feature_names))

    def judgments(self) -> np.ndarray:
        return np.array([c.judgment for c in self.candidates], dtype=np.float64)

    def targets(self) -> np.ndarray:
        """Training targets, falling back to raw judgments."""
        return np.array([c.judgment if c.target is None else c.target
                         for c in self.candidates], dtype=np.float64)

    def true_groups(self) -> Dict[int, GroupLabel]:
        return {c.id: c.true_group for c in self.candidates}

    def observed_groups(self) -> Dict[int, ObservedGroup]:
        return {c.id: c.observed_group for c in self.candidates}

    def members(self, group: GroupLabel) -> List[Candidate]:
        """Candidates whose true group is `group`."""
        return [c for c in self.candidates if c.true_group is group]

    def with_candidates(self, candidates: Iterable[Candidate]) -> 'Dataset':
        return replace(self, candidates=tuple(candidates))

    def has_unknowns(self) -> bool:
        return any(c.observed_group is None for c in self.candidates)


def rank_by_score(candidates: Iterable[Tuple[int, float]]) -> Ranking:
    """Return the ranking by descending score, ties by ascending id."""
    pairs = list(candidates)
    ids = np.array([int(i) for i, _ in pairs], dtype=np.int64)
    scores = np.array([float(s) for _, s in pairs], dtype=np.float64)
    bad = ~np.isfinite(scores)
    if bad.any():
        cid = ids[np.argmax(bad)]
        raise DataError(f'Candidate {cid} has a non-finite score')
    # lexsort sorts by the last key first.
    order = np.lexsort((ids, -scores))
    return Ranking(order=tuple(ids[order]), scores=tuple(scores[order]))


def group_proportions(
        candidates: Sequence[Candidate],
        use_observed: bool = False,
        ) -> Dict[GroupLabel, float]:
    """Return the fraction of candidates in each group."""
    if not candidates:
        raise DataError('Cannot compute group proportions of no candidate')
    counts = {g: 0 for g in GROUPS}
    for c in candidates:
        label = c.observed_group if use_observed else c.true_group
        if label is None:
            raise UnresolvedGroupError(
                f'Candidate {c.id} has an Unknown observed group;'
                ' resolve unknowns first (see fairrank.noise.apply_fixture)')
        counts[label] += 1
    n = len(candidates)
    return {g: counts[g] / n for g in GROUPS}
