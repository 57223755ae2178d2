"""Kernel backend selection.

The compiled extension is used when it was built and importable; setting
``ANGLETL_PURE_PYTHON=1`` forces the NumPy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("ANGLETL_PURE_PYTHON") != "1":
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"


def available_backends():
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
