"""Kernel selection: compiled extension if available, pure Python otherwise.

Set IDMC_PURE_PYTHON=1 to force the fallback (useful for benchmarking and
for debugging kernel parity).  Both kernels are draw-for-draw identical,
so results do not depend on which one is active.
"""
from __future__ import annotations

import os

if os.environ.get("IDMC_PURE_PYTHON"):
    from idmc import _kernels_py as kernels
else:
    try:
        from idmc import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from idmc import _kernels_py as kernels


def kernel_name() -> str:
    return "compiled" if kernels.COMPILED else "pure-python"
