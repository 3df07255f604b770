"""Motion time-series extraction from frame sequences and a forecasting
benchmark harness (Python bindings)."""

from ._flowseries import *  # noqa: F401,F403
from ._flowseries import FlowseriesError, __version__

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
