"""Kernel backend selection: compiled extension if available, numpy otherwise.

The two implementations share signatures and tie-break rules.  Import-time
selection prefers the compiled module; use_backend() switches explicitly
(used by the equivalence tests and the benchmark).
"""
from __future__ import annotations

from . import groupdet_py

try:
    from . import groupdet_cy
    _HAVE_COMPILED = True
except ImportError:
    groupdet_cy = None
    _HAVE_COMPILED = False

active = groupdet_cy if _HAVE_COMPILED else groupdet_py


def backend_name() -> str:
    return "compiled" if active is groupdet_cy else "python"


def available_backends() -> tuple[str, ...]:
    return ("python", "compiled") if _HAVE_COMPILED else ("python",)


def use_backend(name: str) -> None:
    """Force 'python' or 'compiled' kernels for this process."""
    global active
    if name == "python":
        active = groupdet_py
    elif name == "compiled":
        if not _HAVE_COMPILED:
            raise RuntimeError("compiled kernels are not available")
        active = groupdet_cy
    else:
        raise ValueError(f"unknown backend {name!r}")
