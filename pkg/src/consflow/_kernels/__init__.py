"""Flow kernel backends: compiled extension when built, numpy fallback.

The compiled core is selected automatically at import; set CONSFLOW_PURE=1
to force the fallback (used by the benchmark and by tests comparing both).
"""

import os

from . import _pure

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

HAVE_COMPILED = _core is not None


def active():
    """Backend module the flows use by default."""
    if os.environ.get("CONSFLOW_PURE"):
        return _pure
    return _core if HAVE_COMPILED else _pure


def get(name: str | None = None):
    """Backend by explicit name ("pure" | "compiled"), default active()."""
    if name is None:
        return active()
    if name == "pure":
        return _pure
    if name == "compiled":
        if _core is None:
            raise RuntimeError("compiled kernel extension is not built")
        return _core
    raise ValueError(f"unknown backend {name!r}")
