"""Weighted estimates for differentially subordinate martingales on dyadic filtrations."""

from ._core import *  # noqa: F401,F403
from ._core import DEFAULT_C_TARGET, __doc__  # noqa: F401
