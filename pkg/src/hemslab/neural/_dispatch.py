"""Kernel backend selection.

The compiled extension is optional. Selection happens once at import:

    HEMSLAB_BACKEND=auto    (default) compiled kernels if built, else numpy
    HEMSLAB_BACKEND=cython  require the compiled kernels
    HEMSLAB_BACKEND=python  force the numpy fallback

Results are deterministic per backend; the two backends agree to float
round-off but not bit for bit (different summation order).
"""

from __future__ import annotations

import os

from . import _numpy_backend

_requested = os.environ.get("HEMSLAB_BACKEND", "auto").strip().lower()

if _requested not in ("auto", "cython", "python"):
    raise ImportError(
        f"HEMSLAB_BACKEND={_requested!r} not recognized (use auto, cython, or python)"
    )

if _requested == "python":
    kernels = _numpy_backend
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "HEMSLAB_BACKEND=cython but the compiled extension is not built; "
                "reinstall the package with a C compiler available"
            ) from None
        kernels = _numpy_backend


def backend_name() -> str:
    return kernels.NAME


def numpy_kernels():
    """The fallback backend, importable regardless of selection (benchmarks)."""
    return _numpy_backend


def compiled_kernels():
    """The compiled backend or None if not built."""
    try:
        from . import _kernels
        return _kernels
    except ImportError:
        return None
