"""Event-camera bat-ball impact timing pipeline."""

from ._evimpact import *  # noqa: F401,F403
from ._evimpact import __doc__  # noqa: F401
