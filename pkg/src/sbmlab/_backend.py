"""Simulation backend selection.

SBMLAB_BACKEND picks the kernel implementation: "numba" (jitted), "numpy"
(vectorized fallback), or "auto" (numba when importable, else numpy).  Tests
and benchmarks can pin a backend programmatically with set_backend, which
wins over the environment.
"""

from __future__ import annotations

import os

_CHOICES = ("auto", "numba", "numpy")
_forced: str | None = None


def set_backend(name: str | None) -> None:
    """Pin the backend for this process; None restores env-driven choice."""
    global _forced
    if name is not None and name not in _CHOICES:
        raise ValueError(f"backend must be one of {_CHOICES}, got {name!r}")
    _forced = name


def backend_name() -> str:
    """Resolved backend name ("numba" or "numpy")."""
    choice = _forced or os.environ.get("SBMLAB_BACKEND", "auto").lower()
    if choice not in _CHOICES:
        raise ValueError(f"SBMLAB_BACKEND must be one of {_CHOICES}, got {choice!r}")
    if choice == "auto":
        try:
            import numba  # noqa: F401
        except ImportError:
            return "numpy"
        return "numba"
    return choice


def backend_module(name: str | None = None):
    """The kernel module for `name` (default: the resolved backend)."""
    name = name or backend_name()
    if name == "numba":
        from . import _simnumba
        return _simnumba
    if name == "numpy":
        from . import _simnumpy
        return _simnumpy
    raise ValueError(f"unknown backend {name!r}")
