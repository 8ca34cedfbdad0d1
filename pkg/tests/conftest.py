from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pytest

from fairrank.domain import Candidate
from fairrank.domain import Dataset
from fairrank.domain import GroupLabel

DIS = GroupLabel.DISADVANTAGED
ADV = GroupLabel.ADVANTAGED


def build_dataset(
        judgments: Sequence[float],
        groups: Sequence[GroupLabel],
        features: Optional[np.ndarray] = None,
        observed: Optional[Sequence[Optional[GroupLabel]]] = None,
        ) -> Dataset:
    """Dataset with ids 1..n, names candidate-i and observed = true."""
    n = len(judgments)
    if features is None:
        features = np.column_stack([np.asarray(judgments, dtype=float),
                                    np.arange(n, dtype=float) % 3])
    observed = list(groups) if observed is None else list(observed)
    candidates = [Candidate(id=i + 1,
                            features=tuple(features[i]),
                            judgment=float(judgments[i]),
                            true_group=groups[i],
                            observed_group=observed[i],
                            name=f'candidate-{i + 1}')
                  for i in range(n)]
    names = tuple(f'f{j}' for j in range(features.shape[1]))
    return Dataset(candidates=tuple(candidates), feature_names=names)


@pytest.fixture
def make_dataset():
    return build_dataset


@pytest.fixture
def small_dataset() -> Dataset:
    """Ten candidates, the four disadvantaged ones at the bottom."""
    judgments = [10.0, 9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]
    groups = [ADV] * 6 + [DIS] * 4
    return build_dataset(judgments, groups)


@pytest.fixture
def wnba_test() -> Dataset:
    """A 992-candidate test set, 774 advantaged and 218 disadvantaged."""
    rng = np.random.default_rng(7)
    groups = [DIS] * 218 + [ADV] * 774
    order = rng.permutation(992)
    groups = [groups[i] for i in order]
    judgments = rng.normal(size=992) - 1.0 * np.array(
        [g is DIS for g in groups])
    return build_dataset(judgments, groups)


@pytest.fixture
def write_text(tmp_path: Path):
    """Write a text file under tmp_path and return its path."""
    def write(name: str, lines: List[str]) -> Path:
        path = tmp_path / name
        path.write_text('\n'.join(lines) + '\n')
        return path
    return write
