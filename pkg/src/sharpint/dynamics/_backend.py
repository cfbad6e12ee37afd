"""Select the KMC event loops: compiled when available, pure Python otherwise.

``SHARPINT_BACKEND`` may be ``auto`` (default), ``cython`` or ``python``.
"""
import os

from . import _kmc_py


def _load(choice: str):
    if choice == "python":
        return _kmc_py, "python"
    try:
        from . import _kmc
    except ImportError:
        if choice == "cython":
            raise ImportError("SHARPINT_BACKEND=cython but the compiled extension is not built")
        return _kmc_py, "python"
    return _kmc, "cython"


def get_backend(name: str | None = None):
    """Return ``(module, label)`` for ``name`` or the environment default."""
    choice = (name or os.environ.get("SHARPINT_BACKEND", "auto")).lower()
    if choice not in ("auto", "cython", "python"):
        raise ValueError(f"unknown KMC backend {choice!r}")
    return _load(choice)


kmc, BACKEND = get_backend()
