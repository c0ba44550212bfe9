"""Backend selection for the hot loops.

The compiled extension is preferred; set ``BULLBEAR_NO_EXT=1`` to force the
pure-Python fallback. ``BACKEND`` names whichever one was loaded.
"""
import os

from . import _pykernels

if os.environ.get("BULLBEAR_NO_EXT"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

filter_forward = _impl.filter_forward
backward_sample = _impl.backward_sample
transition_counts = _impl.transition_counts
garch_recursion = _impl.garch_recursion


def available_backends():
    """Return ``{name: module}`` for every importable kernel backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
