# bosecool -- python surface over the compiled core
try:
    from ._bosecool import *  # noqa: F401,F403 (installed wheel layout)
except ImportError:
    from _bosecool import *  # noqa: F401,F403 (in-tree build directory)

__version__ = "0.1.0"
