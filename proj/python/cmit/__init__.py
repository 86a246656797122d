"""Load-forecasting toolkit: cloud-membership transformer normalization,
swarm-weighted model fusion, and the evaluation statistics around them.

The heavy lifting lives in the compiled extension `_cmit`; this package
re-exports its operations.
"""

try:
    from ._cmit import *  # noqa: F401,F403
    from ._cmit import __version__  # noqa: F401
except ImportError:  # in-tree test layout: extension on sys.path, not in package
    from _cmit import *  # noqa: F401,F403
    from _cmit import __version__  # noqa: F401
