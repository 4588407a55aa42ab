"""Two-paddle pixel pong with independent deep Q-learners."""

try:
    from ._pongdqn import *  # noqa: F401,F403  installed wheel layout
except ImportError:
    from _pongdqn import *  # noqa: F401,F403  build-tree layout
