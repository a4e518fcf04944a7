"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``VSTC_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

kernels = _kernels_py
BACKEND = "python"

if not os.environ.get("VSTC_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "compiled"

eta_ftran = kernels.eta_ftran
eta_btran = kernels.eta_btran
rollout = kernels.rollout
al_objective = kernels.al_objective

__all__ = ["BACKEND", "al_objective", "eta_btran", "eta_ftran", "kernels", "rollout"]
