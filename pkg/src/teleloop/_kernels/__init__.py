"""Kernel backend selection.

The hot kernels (FK, Jacobian, DLS IK, gravity torque, arm step) exist twice:
a Cython extension (``_ckin``) and a pure-numpy fallback (``_pykin``). The
compiled one is preferred when the extension built; set
``TELELOOP_BACKEND=pure`` or ``=compiled`` to force a choice.

Both backends consume a ``ChainPack``: the flat-array form of a kinematic
chain. ``cache`` is a per-pack dict the compiled backend uses to memoize its
memoryview wrapper.
"""

import os
from collections import namedtuple

ChainPack = namedtuple(
    "ChainPack",
    ["n", "kinds", "axes", "trans", "rots", "lo", "hi", "ee",
     "base_pos", "base_rot", "com_dirs", "cache"],
)

from . import _pykin

try:
    from . import _ckin

    HAVE_COMPILED = True
except ImportError:
    _ckin = None
    HAVE_COMPILED = False

_forced = os.environ.get("TELELOOP_BACKEND", "").strip().lower()
if _forced == "pure":
    impl = _pykin
elif _forced == "compiled":
    if not HAVE_COMPILED:
        raise ImportError("TELELOOP_BACKEND=compiled but the extension is not built")
    impl = _ckin
elif _forced:
    raise ImportError(f"unknown TELELOOP_BACKEND {_forced!r} (use 'pure' or 'compiled')")
else:
    impl = _ckin if HAVE_COMPILED else _pykin

BACKEND = "compiled" if impl is _ckin else "pure"


def get_backend(name):
    """Return a backend module by name, for benchmarks and cross-checks."""
    if name == "pure":
        return _pykin
    if name == "compiled":
        if not HAVE_COMPILED:
            raise ValueError("compiled backend not available")
        return _ckin
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ("pure", "compiled") if HAVE_COMPILED else ("pure",)
