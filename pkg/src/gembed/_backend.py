"""Select the compiled core or the numpy fallback at import time.

Set ``GEMBED_PURE_PYTHON=1`` to force the fallback even when the extension is built.
"""

import logging
import os

from . import _fallback

log = logging.getLogger(__name__)

_compiled = None
if os.environ.get("GEMBED_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        log.debug("gembed._core unavailable, using numpy fallback")
        _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

NAME = "cython" if _compiled is not None else "python"
impl = BACKENDS[NAME]


def get(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}") from None
