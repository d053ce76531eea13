"""Python bindings for the quietnet C++ core."""

from ._quietnet import *  # noqa: F401,F403
from ._quietnet import QuietnetError, __version__  # noqa: F401
