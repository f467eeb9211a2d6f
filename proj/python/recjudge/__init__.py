"""Cranfield-style recommender evaluation toolkit."""

try:
    from ._recjudge import *  # noqa: F401,F403  (installed wheel layout)
    from ._recjudge import __version__  # noqa: F401
except ImportError:  # in-tree build: extension module on sys.path
    from _recjudge import *  # noqa: F401,F403
    from _recjudge import __version__  # noqa: F401
