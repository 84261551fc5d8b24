from .meta import *  # noqa
from .geometry import *  # noqa
from .discretize import *  # noqa
from .eigensolve import *  # noqa
from .evolve import *  # noqa
from .config import *  # noqa
from .core import *  # noqa
from .report import *  # noqa
from .info import *  # noqa
from .version import __version__  # noqa
