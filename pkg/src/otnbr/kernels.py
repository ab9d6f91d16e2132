"""Backend selection for the annealing kernels.

The compiled extension is used when it imports; set ``OTNBR_PURE_PYTHON=1``
to force the pure-Python fallback.
"""
import os

from . import _kernels_py

_FORCE_PY = os.environ.get("OTNBR_PURE_PYTHON", "").strip() not in ("", "0")

try:
    if _FORCE_PY:
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

table_sweep = _impl.table_sweep
perm_sweep = _impl.perm_sweep
move_delta = _impl.move_delta


def get_backend(name: str | None = None):
    """Kernel module by name (``"cython"`` or ``"python"``); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
