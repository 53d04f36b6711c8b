"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; otherwise, or
when ``KTREEBN_BACKEND=python`` is set, the numpy/pure-Python ``_fallback``
module is used.  Call sites go through ``_backend.impl`` so the backend can be
swapped at runtime with :func:`set_backend` (benchmarks and equivalence tests).
"""

import os

from . import _fallback

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None

_BACKENDS = {"python": _fallback}
if _kernels is not None:
    _BACKENDS["cython"] = _kernels


def available():
    return sorted(_BACKENDS)


def set_backend(name):
    global impl, BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable (have {available()})")
    impl = _BACKENDS[name]
    BACKEND = name


_requested = os.environ.get("KTREEBN_BACKEND", "")
if _requested:
    set_backend(_requested)
else:
    set_backend("cython" if _kernels is not None else "python")
