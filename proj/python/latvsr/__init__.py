"""Python surface over the C++ core.

The compiled extension provides diffusion schedule math, window planning,
fusion weights, metrics, synthetic clip generation, and degradation
replay. Heavy lifting (training, inference) lives in the `latvsr` CLI.
"""

try:
    from ._latvsr import *  # noqa: F401,F403  (installed package layout)
except ImportError:  # build-tree layout: extension on PYTHONPATH
    from _latvsr import *  # noqa: F401,F403
