"""Two-layer semantic network with hidden-layer atrophy and relearning.

Thin wrapper over the C++ core; see the package README for the model and
the file formats emitted by the experiment runner.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
