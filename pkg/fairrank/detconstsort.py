"""Deterministic constrained re-ranking (DetConstSort).

At every prefix length k <= k_max each group g holds at least
floor(p_g * k) members. Candidates are taken per group in
(descending score, ascending id) order; when a group's floor rises it
receives its next candidate, which then moves up while that improves
the score order and keeps every prefix floor.

"""

import logging
import math
from typing import Dict, Hashable, List, Mapping, Optional

from .domain import Dataset
from .domain import GroupLabel
from .domain import Ranking
from .domain import group_proportions
from .utils import DataError
from .utils import UnresolvedGroupError

logger = logging.getLogger(__name__)

# Hint for target proportions per group, summing to 1.
TargetProportions = Dict[Hashable, float]

# Tolerance of the floors, so that p = n_g / n gives floor(p * n) = n_g.
_FLOOR_EPS = 1e-9

_SUM_TOLERANCE = 1e-12


def floor_count(p: float, k: int) -> int:
    """Minimum number of group members required in the top k."""
    return int(math.floor(p * k + _FLOOR_EPS))


def _check_target(p: Mapping[Hashable, float], present: set) -> None:
    missing = present - set(p)
    if missing:
        raise ValueError(f'No target proportion for group(s) {missing}')
    for g, value in p.items():
        if not 0.0 <= value <= 1.0:
            raise ValueError(f'Target proportion of {g} outside [0, 1]')
    empty = sorted(str(g) for g in present if p[g] == 0.0)
    if empty:
        raise DataError(
            f'Zero target proportion for present group(s) {", ".join(empty)}')
    total = math.fsum(p.values())
    if abs(total - 1.0) > _SUM_TOLERANCE:
        raise ValueError(f'Target proportions sum to {total}, not 1')


def det_const_sort(
        ranking: Ranking,
        groups: Mapping[int, Optional[Hashable]],
        p: Mapping[Hashable, float],
        k_max: Optional[int] = None,
        ) -> Ranking:
    """Re-rank so that every prefix up to k_max meets the group floors.

    Parameters
    ----------
    - ranking: input ranking; only its scores matter.
    - groups: group of every candidate, typically observed labels.
    - p: target proportion of each group.
    - k_max: last constrained prefix, the ranking length by default.

    """
    n = len(ranking)
    k_max = n if k_max is None else k_max
    if not 0 <= k_max <= n:
        raise ValueError(f'k_max={k_max} outside 0..{n}')
    unknown = [cid for cid in ranking.order if groups.get(cid) is None]
    if unknown:
        raise UnresolvedGroupError(
            f'{len(unknown)} candidate(s) without a group, e.g. {unknown[:5]};'
            ' resolve unknowns before re-ranking')
    score_of = ranking.score_of()

    def key(cid: int):
        return (-score_of[cid], cid)

    label_of = {cid: groups[cid] for cid in ranking.order}
    _check_target(p, set(label_of.values()))

    # Groups are integer slots in first-appearance order; no decision below
    # depends on that order, so relabelling groups cannot change the output.
    slots = list(dict.fromkeys(p))
    slot_of = {g: i for i, g in enumerate(slots)}
    queues: List[List[int]] = [[] for _ in slots]
    for cid in sorted(ranking.order, key=key):
        queues[slot_of[label_of[cid]]].append(cid)
    heads = [0] * len(slots)
    targets = [p[g] for g in slots]

    result: List[int] = []
    result_slot: List[int] = []
    # prefix[s][L]: members of slot s among the first L entries of result.
    prefix = [[0] for _ in slots]

    def append(cid: int, slot: int) -> None:
        result.append(cid)
        result_slot.append(slot)
        for s, counts in enumerate(prefix):
            counts.append(counts[-1] + (s == slot))

    def swap_up(position: int) -> None:
        # position is 0-based; the boundary between position - 1 and
        # position is the prefix of length `position`.
        while position > 0:
            above, below = result[position - 1], result[position]
            if key(below) >= key(above):
                return
            up_slot = result_slot[position]
            down_slot = result_slot[position - 1]
            if up_slot != down_slot and position <= k_max:
                remaining = prefix[down_slot][position] - 1
                if remaining < floor_count(targets[down_slot], position):
                    return
            if up_slot != down_slot:
                prefix[down_slot][position] -= 1
                prefix[up_slot][position] += 1
            result[position - 1], result[position] = below, above
            result_slot[position - 1], result_slot[position] = (up_slot,
                                                                down_slot)
            position -= 1

    for k in range(1, k_max + 1):
        owed = []
        for s in range(len(slots)):
            if floor_count(targets[s], k) > heads[s]:
                if heads[s] >= len(queues[s]):
                    raise DataError(
                        f'Target {targets[s]} for group {slots[s]} needs'
                        f' {floor_count(targets[s], k)} members in the top'
                        f' {k}, only {len(queues[s])} available')
                owed.append(s)
        owed.sort(key=lambda s: key(queues[s][heads[s]]))
        for s in owed:
            cid = queues[s][heads[s]]
            heads[s] += 1
            append(cid, s)
            swap_up(len(result) - 1)

    leftovers = [queues[s][i] for s in range(len(slots))
                 for i in range(heads[s], len(queues[s]))]
    result.extend(sorted(leftovers, key=key))
    logger.debug(f'Re-ranked {n} candidates, {len(leftovers)} appended'
                 ' after the constrained prefix')
    return Ranking(order=tuple(result),
                   scores=tuple(score_of[cid] for cid in result))


def target_from_observed(test: Dataset) -> Dict[GroupLabel, float]:
    """Observed-group proportions of a test set."""
    return group_proportions(test.candidates, use_observed=True)


def mirror_target(p: Mapping[GroupLabel, float]) -> Dict[GroupLabel, float]:
    """Proportions with the two binary labels exchanged."""
    return {g.mirror: value for g, value in p.items()}


def violations(
        ranking: Ranking,
        groups: Mapping[int, Hashable],
        p: Mapping[Hashable, float],
        k_max: Optional[int] = None,
        ) -> List[tuple]:
    """Return (k, group, count, floor) for every unmet prefix floor."""
    k_max = len(ranking) if k_max is None else k_max
    counts = {g: 0 for g in p}
    found = []
    for k, cid in enumerate(ranking.order[:k_max], start=1):
        counts[groups[cid]] = counts.get(groups[cid], 0) + 1
        for g, value in p.items():
            required = floor_count(value, k)
            if counts[g] < required:
                found.append((k, g, counts[g], required))
    return found
