"""Rank fairness and utility metrics.

All metrics read positions, true groups and raw ground-truth judgments only,
so they are invariant under any strictly monotone transform of the scores
that produced the ranking.

"""

from dataclasses import dataclass
from dataclasses import field
import logging
import math
from typing import Dict, Hashable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import rel_entr

from .domain import Dataset
from .domain import GROUPS
from .domain import GroupLabel
from .domain import Ranking
from .utils import DataError

logger = logging.getLogger(__name__)

LOG_BASE = 2

PREFIX_MODES = ('prefix', 'literal')
NDCG_NORMALIZATIONS = ('ideal', 'literal')


def position_discounts(n: int) -> np.ndarray:
    """Return 1 / log2(j + 1) for positions j = 1..n."""
    return 1.0 / np.log2(np.arange(2, n + 2, dtype=np.float64))


def _labels_along(ranking: Ranking, groups: Mapping[int, Hashable]) -> list:
    try:
        return [groups[cid] for cid in ranking.order]
    except KeyError as e:
        raise ValueError(f'No group given for candidate {e.args[0]}') from e


def _check_cutoff(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise ValueError(f'Cutoff k={k} outside 1..{n}')


def skew_curve(
        ranking: Ranking,
        groups: Mapping[int, Hashable],
        g: Hashable,
        ) -> np.ndarray:
    """Return Skew_g@k for every k = 1..n (index k - 1)."""
    mask = np.array([label == g for label in _labels_along(ranking, groups)],
                    dtype=np.float64)
    n = len(mask)
    if n == 0:
        raise ValueError('Cannot compute the skew of an empty ranking')
    p_all = mask.mean()
    if p_all == 0.0:
        raise ValueError(f'Group {g} is absent from the candidate set')
    prefix_share = np.cumsum(mask) / np.arange(1, n + 1)
    return prefix_share / p_all


def skew(
        ranking: Ranking,
        groups: Mapping[int, Hashable],
        g: Hashable,
        k: int,
        ) -> float:
    """Share of `g` in the top k divided by its share of the candidate set."""
    _check_cutoff(k, len(ranking))
    return float(skew_curve(ranking, groups, g)[k - 1])


def ndkl(
        ranking: Ranking,
        groups: Mapping[int, Hashable],
        k: Optional[int] = None,
        prefix_mode: str = 'prefix',
        reference: Optional[Mapping[Hashable, float]] = None,
        ) -> float:
    """Normalized discounted KL divergence, in bits.

    Parameters
    ----------
    - ranking: the ranking.
    - groups: group of every candidate id.
    - k: cutoff, defaults to the ranking length.
    - prefix_mode: 'prefix' compares the top-i distribution at each i,
        'literal' compares the top-k distribution at every i.
    - reference: group distribution of the candidate set, computed from
        `groups` over the ranking when not given.

    """
    if prefix_mode not in PREFIX_MODES:
        raise ValueError(f'prefix_mode must be one of {PREFIX_MODES}')
    labels = _labels_along(ranking, groups)
    n = len(labels)
    k = n if k is None else k
    _check_cutoff(k, n)
    if reference is None:
        categories = list(dict.fromkeys(labels))
        reference = {c: labels.count(c) / n for c in categories}
    categories = list(reference)
    q = np.array([reference[c] for c in categories], dtype=np.float64)
    masks = np.array([[label == c for label in labels[:k]]
                      for c in categories], dtype=np.float64)
    prefix_lengths = np.arange(1, k + 1, dtype=np.float64)
    prefix = np.cumsum(masks, axis=1) / prefix_lengths
    if prefix_mode == 'literal':
        prefix = np.repeat(prefix[:, -1:], k, axis=1)
    kl = rel_entr(prefix, q[:, np.newaxis]).sum(axis=0) / math.log(LOG_BASE)
    discounts = position_discounts(k)
    return float(np.dot(discounts, kl) / discounts.sum())


def group_exposure(
        ranking: Ranking,
        groups: Mapping[int, GroupLabel],
        ) -> Dict[GroupLabel, float]:
    """Mean positional exposure 1 / log2(position + 1) of each group."""
    labels = _labels_along(ranking, groups)
    exposure = position_discounts(len(labels))
    means = {}
    for g in GROUPS:
        mask = np.array([label is g for label in labels])
        if not mask.any():
            raise DataError(f'Group {g.value} is absent from the ranking')
        means[g] = float(exposure[mask].mean())
    return means


def exposure_ratio(
        ranking: Ranking,
        groups: Mapping[int, GroupLabel],
        ) -> float:
    """DAdv/Adv exposure ratio, 1 is ideal."""
    means = group_exposure(ranking, groups)
    return means[GroupLabel.DISADVANTAGED] / means[GroupLabel.ADVANTAGED]


def judgment_shift(judgments: Sequence[float]) -> float:
    """Amount added to judgments so that none is negative."""
    lowest = float(np.min(judgments))
    return -lowest if lowest < 0.0 else 0.0


def ndcg(
        ranking: Ranking,
        judgments: Mapping[int, float],
        k: int,
        normalization: str = 'ideal',
        ) -> float:
    """NDCG@k of the ground-truth judgments.

    Negative judgments are shifted up by their minimum first. The 'ideal'
    normalization divides by the DCG of the judgment-descending order;
    'literal' divides by the sum of the position discounts.

    """
    if normalization not in NDCG_NORMALIZATIONS:
        raise ValueError(f'normalization must be one of {NDCG_NORMALIZATIONS}')
    n = len(ranking)
    _check_cutoff(k, n)
    gains = np.array([judgments[cid] for cid in ranking.order],
                     dtype=np.float64)
    gains = gains + judgment_shift(gains)
    discounts = position_discounts(k)
    dcg = float(np.dot(gains[:k], discounts))
    if normalization == 'literal':
        return dcg / float(discounts.sum())
    ideal = float(np.dot(np.sort(gains)[::-1][:k], discounts))
    if ideal == 0.0:
        raise DataError(f'All judgments in the ideal top-{k} are zero')
    return dcg / ideal


@dataclass(frozen=True)
class MetricSettings:
    ndcg_cutoffs: Tuple[int, ...] = (10, 50, 100)
    skew_cutoffs: Tuple[int, ...] = (10, 50, 100)
    # None evaluates NDKL over the whole ranking.
    ndkl_cutoff: Optional[int] = None
    ndkl_prefix_mode: str = 'prefix'
    ndcg_normalization: str = 'ideal'

    def __post_init__(self):
        object.__setattr__(self, 'ndcg_cutoffs', tuple(self.ndcg_cutoffs))
        object.__setattr__(self, 'skew_cutoffs', tuple(self.skew_cutoffs))
        for k in self.ndcg_cutoffs + self.skew_cutoffs:
            if k < 1:
                raise ValueError(f'Cutoffs must be positive, got {k}')
        if self.ndkl_prefix_mode not in PREFIX_MODES:
            raise ValueError(f'ndkl_prefix_mode must be one of {PREFIX_MODES}')
        if self.ndcg_normalization not in NDCG_NORMALIZATIONS:
            raise ValueError(
                f'ndcg_normalization must be one of {NDCG_NORMALIZATIONS}')


@dataclass(frozen=True)
class MetricReport:
    exposure_ratio: float
    ndkl: float
    ndcg: Dict[int, float]
    skew: Dict[GroupLabel, Dict[int, float]]
    group_exposure: Dict[GroupLabel, float] = field(default_factory=dict)
    judgment_shift: float = 0.0

    def as_row(self) -> Dict[str, float]:
        """Flat metric columns, in a fixed order."""
        row = {'exposure_ratio': self.exposure_ratio, 'ndkl': self.ndkl}
        for k, value in self.ndcg.items():
            row[f'ndcg@{k}'] = value
        for g in GROUPS:
            for k, value in self.skew[g].items():
                row[f'skew_{g.value}@{k}'] = value
        return row


def metric_columns(settings: MetricSettings) -> Tuple[str, ...]:
    """Column names produced by `MetricReport.as_row` for these settings."""
    columns = ['exposure_ratio', 'ndkl']
    columns += [f'ndcg@{k}' for k in settings.ndcg_cutoffs]
    for g in GROUPS:
        columns += [f'skew_{g.value}@{k}' for k in settings.skew_cutoffs]
    return tuple(columns)


def clip_cutoff(k: int, n: int) -> int:
    if k > n:
        logger.debug(f'Cutoff {k} clipped to the ranking length {n}')
        return n
    return k


def evaluate(
        ranking: Ranking,
        dataset: Dataset,
        settings: MetricSettings = MetricSettings(),
        ) -> MetricReport:
    """Compute every metric against true groups and raw judgments.

    Cutoffs beyond the dataset size are clipped to it; the report keeps the
    requested cutoff as key.

    """
    groups = dataset.true_groups()
    judgments = {c.id: c.judgment for c in dataset.candidates}
    n = len(ranking)
    ndkl_k = n if settings.ndkl_cutoff is None else clip_cutoff(
        settings.ndkl_cutoff, n)
    reference = dict(dataset.group_proportions)
    skews = {}
    for g in GROUPS:
        curve = skew_curve(ranking, groups, g)
        skews[g] = {k: float(curve[clip_cutoff(k, n) - 1])
                    for k in settings.skew_cutoffs}
    return MetricReport(
        exposure_ratio=exposure_ratio(ranking, groups),
        ndkl=ndkl(ranking, groups, ndkl_k, settings.ndkl_prefix_mode,
                  reference=reference),
        ndcg={k: ndcg(ranking, judgments, clip_cutoff(k, n),
                      settings.ndcg_normalization)
              for k in settings.ndcg_cutoffs},
        skew=skews,
        group_exposure=group_exposure(ranking, groups),
        judgment_shift=judgment_shift(list(judgments.values())),
    )
