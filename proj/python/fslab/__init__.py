"""Python interface to the fslab C++ core."""

from ._fslab import *  # noqa: F401,F403
from ._fslab import FslabError, run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
