"""Fair learning-to-rank toolkit and noise-robustness benchmark."""
import logging

from .version import __version__

logging.getLogger(__name__).addHandler(logging.NullHandler())
