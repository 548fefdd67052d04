"""Kernel backend chosen at import: the compiled extension if it loads, else pure Python.

Set ``QUBO_FORGE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pycore

if os.environ.get("QUBO_FORGE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pycore
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pycore

BACKEND = "cython" if _impl is not _pycore else "python"

anneal_sweeps = _impl.anneal_sweeps
exhaustive_minimum = _impl.exhaustive_minimum


def available_backends():
    """Mapping of backend name to kernel module for every backend that imports."""
    out = {"python": _pycore}
    try:
        from . import _core
    except ImportError:
        pass
    else:
        out["cython"] = _core
    return out
