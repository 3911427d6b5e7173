"""Prior-token construction, prefix-injected decoding, and base-vs-SFT analysis."""

from yarnlab._yarnlab import *  # noqa: F401,F403
from yarnlab._yarnlab import __version__  # noqa: F401
