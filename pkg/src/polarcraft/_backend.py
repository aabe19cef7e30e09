"""Selects the compiled decoder core when available, else the numpy fallback.

Set ``POLARCRAFT_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

if os.environ.get("POLARCRAFT_BACKEND", "").lower() == "python":
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _fallback

BACKEND = "cython" if _impl is not _fallback else "python"

sc_decode_batch = _impl.sc_decode_batch
scl_decode_batch = _impl.scl_decode_batch


def get(name: str):
    """Kernel module by name ("cython" or "python"); used by benchmarks and tests."""
    if name == "python":
        return _fallback
    from . import _kernels
    return _kernels
