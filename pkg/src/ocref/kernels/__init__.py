"""Kernel backend selection.

The recurrent hot loops ship in two equivalent implementations: a
numba-compiled one and a pure-numpy reference. The environment variable
``OCREF_NUMBA`` picks the path at import time:

    OCREF_NUMBA=0    force the pure-numpy path
    OCREF_NUMBA=1    require numba (ImportError if unavailable)
    unset / auto     use numba when importable, else fall back

``benchmarks/bench_gru.py`` compares the two paths.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("OCREF_NUMBA", "auto").strip().lower()

if _FLAG in ("0", "false", "off", "no"):
    USE_NUMBA = False
elif _FLAG in ("1", "true", "on", "yes"):
    import numba  # noqa: F401  -- fail loudly if forced but missing

    USE_NUMBA = True
else:
    try:
        import numba  # noqa: F401

        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False

if USE_NUMBA:
    from .gru_numba import gru_backward, gru_forward
else:
    from .gru_numpy import gru_backward, gru_forward


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


__all__ = ["gru_forward", "gru_backward", "backend_name", "USE_NUMBA"]
