"""Select compiled kernels when available; numpy fallback otherwise.

Set ``ARONSSON_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

try:
    if os.environ.get("ARONSSON_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced by ARONSSON_BACKEND")
    from . import _kernels
except ImportError:
    _kernels = None

BACKEND = "compiled" if _kernels is not None else "python"

_threads = 1


def set_threads(n: int) -> None:
    """Thread count for the compiled parallel loops (results do not depend on it)."""
    global _threads
    _threads = max(1, int(n))


def get_threads() -> int:
    return _threads


def use_compiled(H, force_python=False) -> bool:
    return _kernels is not None and not force_python and H.family is not None and H.dim <= 8
