"""Kernel backend selection.

The compiled ``_core`` extension is used when importable; otherwise the numpy
fallback. Set ``HYBRIDCAST_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pycore

try:
    if os.environ.get("HYBRIDCAST_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("compiled core disabled by environment")
    from . import _core as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pycore
    BACKEND = "python"

build_histograms = _impl.build_histograms
unpack_histograms = _impl.unpack_histograms
split_gains = _impl.split_gains
predict_tree = _impl.predict_tree
