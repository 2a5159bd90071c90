"""Password-protected secret sharing over a threshold OPRF.

The heavy lifting lives in the compiled ``_kintsugi`` extension; this package
re-exports its surface.
"""

from ._kintsugi import Cluster, KintsugiError, run_scenario

__all__ = ["Cluster", "KintsugiError", "run_scenario"]
