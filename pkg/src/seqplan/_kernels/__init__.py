"""DP kernel backend selection.

The compiled extension is preferred when importable; the numpy reference
implementation is the fallback. Set ``SEQPLAN_NO_EXT=1`` to force the
fallback (used by the benchmark and the backend-equivalence tests).
"""

import os

from . import _reference

if os.environ.get("SEQPLAN_NO_EXT"):
    _impl = _reference
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _reference

BACKEND = _impl.BACKEND_NAME
INF = _reference.INF

bucket_suffix_error_table = _impl.bucket_suffix_error_table
minimax_suffix_table = _impl.minimax_suffix_table


def available_backends() -> dict:
    """Name -> module for every importable backend (for benchmarks/tests)."""
    backends = {"python": _reference}
    try:
        from . import _speedups  # type: ignore[attr-defined]

        backends["compiled"] = _speedups
    except ImportError:
        pass
    return backends
