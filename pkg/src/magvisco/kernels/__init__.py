"""Stencil kernel backends.

The compiled extension is preferred when present; the numpy twin is the
fallback. ``MAGVISCO_KERNELS`` forces a choice: ``c``/``cython`` requires
the extension, ``python``/``numpy`` skips it, ``auto`` (default) picks
whatever imports.
"""

import os

from . import _stencils_np

D_ONESIDED = _stencils_np.D_ONESIDED
D_REFLECT = _stencils_np.D_REFLECT
D_PERIODIC = _stencils_np.D_PERIODIC
L_PIN = _stencils_np.L_PIN
L_REFLECT = _stencils_np.L_REFLECT
L_PERIODIC = _stencils_np.L_PERIODIC

_choice = os.environ.get("MAGVISCO_KERNELS", "auto").lower()
if _choice in ("auto", "c", "cython"):
    try:
        from . import _stencils_cy as _impl
        BACKEND = "cython"
    except ImportError:
        if _choice != "auto":
            raise
        _impl = _stencils_np
        BACKEND = "numpy"
elif _choice in ("python", "numpy"):
    _impl = _stencils_np
    BACKEND = "numpy"
else:
    raise RuntimeError(f"MAGVISCO_KERNELS={_choice!r} is not a recognized backend")

lap = _impl.lap
dcent = _impl.dcent


def backend_name():
    """Name of the active stencil backend ('cython' or 'numpy')."""
    return BACKEND
