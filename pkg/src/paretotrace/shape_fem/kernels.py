"""Backend selection for the FEM kernels.

The compiled module is used when it was built; otherwise, or when the
environment variable ``PARETOTRACE_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy fallback is used. ``BACKEND`` names the choice.
"""
from __future__ import annotations

import os
from types import ModuleType
from typing import Optional

from . import _kernels_py

try:
    from . import _kernels_c  # type: ignore[attr-defined]
except ImportError:
    _kernels_c = None

_KERNELS = ("triangle_areas", "assemble_banded", "element_stress", "weibull_sum")


def _default() -> ModuleType:
    if os.environ.get("PARETOTRACE_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py
    return _kernels_c if _kernels_c is not None else _kernels_py


def use_backend(module: Optional[ModuleType]) -> str:
    """Route the kernel functions to ``module`` (``None`` restores the
    import-time choice); returns the backend name."""
    global BACKEND
    impl = _default() if module is None else module
    for name in _KERNELS:
        globals()[name] = getattr(impl, name)
    BACKEND = "python" if impl is _kernels_py else "cython"
    return BACKEND


BACKEND = use_backend(None)

__all__ = ["BACKEND", "use_backend", "triangle_areas", "assemble_banded",
           "element_stress", "weibull_sum"]
