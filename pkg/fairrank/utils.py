import logging
import math
from pathlib import Path
import string
from typing import Sequence, Union
import xml.etree.ElementTree as et
from xml.dom import minidom

import numpy as np

logger = logging.getLogger('fairrank')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# Absorbs float noise in products such as 0.35 * 20 before rounding.
_ROUND_EPS = 1e-9

_UINT64_RANGE = 1 << 64


class FairRankError(Exception):
    """Root of all errors raised by fairrank."""


class SchemaError(FairRankError, ValueError):
    """A configuration or CSV schema problem."""


class DataError(FairRankError, ValueError):
    """Invalid data values."""


class UnresolvedGroupError(DataError):
    """Unknown observed labels reached a computation needing resolved ones."""


class TrainingError(FairRankError, RuntimeError):
    """Gradient descent diverged."""


class ExperimentError(FairRankError, RuntimeError):
    """A scenario failed during a sweep."""


def valid_filename(text: str) -> str:
    """Return a string that is a valid file name."""
    valids = string.ascii_letters + string.digits + '_-.'
    return ''.join(c if c in valids else '_' for c in text)


def xml_comment(comment: str) -> str:
    """Returns the string without '--'."""
    return f'{comment.replace("--", "⸗⸗")}'


def warn(text: str) -> None:
    """Warn the user."""
    logger.warning(text)


def error(text: str) -> None:
    """Log an error to the user."""
    logger.error(text)


def configure_logging(verbosity: int = 0) -> None:
    """Install a single stream handler on the package logger.

    Parameters
    ----------
    - verbosity: 0 for INFO, 1 or more for DEBUG, negative for WARNING.

    """
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG
    for handler in list(logger.handlers):
        if not isinstance(handler, logging.NullHandler):
            logger.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.setLevel(level)


def round_half_up(value: float) -> int:
    """Round to the nearest integer, halves away from zero for value >= 0."""
    if value < 0.0:
        raise ValueError(f'Cannot round a negative count: {value}')
    return int(math.floor(value + 0.5 + _ROUND_EPS))


def make_generator(*words: int) -> np.random.Generator:
    """Return a PCG64 generator seeded by the given integer entropy words."""
    for word in words:
        if int(word) < 0:
            raise ValueError(f'Seed words must be nonnegative, got {word}')
    sequence = np.random.SeedSequence([int(w) for w in words])
    return np.random.Generator(np.random.PCG64(sequence))


def _bounded(generator: np.random.Generator, bound: int) -> int:
    """Return an unbiased integer in [0, bound) from raw 64-bit outputs."""
    limit = _UINT64_RANGE - (_UINT64_RANGE % bound)
    while True:
        raw = int(generator.bit_generator.random_raw())
        if raw < limit:
            return raw % bound


def fisher_yates(n: int, generator: np.random.Generator) -> np.ndarray:
    """Return a permutation of range(n).

    The permutation is Fisher-Yates from the last index down, drawing each
    swap partner j in [0, i] from one raw 64-bit output by rejection
    sampling. It does not depend on numpy's own shuffle routines.

    """
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = _bounded(generator, i + 1)
        order[i], order[j] = order[j], order[i]
    return np.array(order, dtype=np.int64)


def shuffled(items: Sequence, generator: np.random.Generator) -> list:
    """Return a new list with the items in Fisher-Yates order."""
    return [items[i] for i in fisher_yates(len(items), generator)]


def save_xml(xml: et.Element, filename: Union[Path, str]) -> None:
    """Save the xml element into a file."""
    file_path = Path(filename)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    txt = minidom.parseString(et.tostring(xml)).toprettyxml(indent='  ')
    file_path.write_text(txt, encoding='utf-8')
