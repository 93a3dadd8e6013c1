"""Selects the compiled kernel extension when available.

Set APPTSCHED_PURE=1 in the environment to force the pure-Python kernels
(useful for benchmarking the two implementations against each other).
"""

import os

if os.environ.get("APPTSCHED_PURE") == "1":
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]

        BACKEND = "python"


def backend_name() -> str:
    """Name of the kernel backend in use: "compiled" or "python"."""
    return BACKEND
