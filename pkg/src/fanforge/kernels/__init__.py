"""Hot-kernel backends.

The bilateral speckle filter is the one kernel expensive enough to
justify compiled code; it exists twice, as a Cython extension
(``_speckle``) and as pure numpy (``pure``). One backend is selected at
import time: the compiled one when installed, else numpy. The env var
``FANFORGE_BACKEND=python|native`` forces the choice (read once at
import). Both backends implement the same contract and agree to ~1e-12;
the backend is a property of the installation, so determinism contracts
hold per installation.
"""

from __future__ import annotations

import os

from . import pure

try:
    from . import _speckle as _native
except ImportError:
    _native = None


def available_backends() -> tuple:
    """Backends importable in this installation, reference backend first."""
    return ("python",) if _native is None else ("python", "native")


def get_bilateral(backend: str | None = None):
    """Return the bilateral_filter implementation for ``backend``.

    ``None`` means the active (import-time selected) backend.
    """
    if backend is None:
        backend = ACTIVE_BACKEND
    if backend == "python":
        return pure.bilateral_filter
    if backend == "native":
        if _native is None:
            raise ImportError("compiled speckle kernel is not installed")
        return _native.bilateral_filter
    raise ValueError(f"unknown backend {backend!r} (expected 'python' or 'native')")


def _select_active() -> str:
    forced = os.environ.get("FANFORGE_BACKEND")
    if forced in (None, ""):
        return "native" if _native is not None else "python"
    if forced not in ("python", "native"):
        raise ValueError(
            f"FANFORGE_BACKEND={forced!r} invalid (expected 'python' or 'native')"
        )
    if forced == "native" and _native is None:
        raise ImportError("FANFORGE_BACKEND=native but the compiled kernel is not installed")
    return forced


ACTIVE_BACKEND = _select_active()
bilateral_filter = get_bilateral(ACTIVE_BACKEND)
