"""Lightweight siamese single-object tracker.

Python surface over the C++ core: geometry helpers, the network operations,
the synthetic-sequence generator, the pair sampler, training, tracking and
the evaluation metrics.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]
