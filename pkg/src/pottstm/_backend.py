"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``POTTSTM_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _fk_py

BACKEND = "python"
fk_counts = _fk_py.fk_counts

if os.environ.get("POTTSTM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _fk_ext  # type: ignore[attr-defined]

        fk_counts = _fk_ext.fk_counts
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        pass

__all__ = ["BACKEND", "fk_counts"]
