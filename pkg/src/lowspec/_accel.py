"""Numba switchboard.

Hot kernels are written twice: a loop version compiled with ``numba.njit`` and
a vectorised numpy version. ``LOWSPEC_DISABLE_NUMBA=1`` (or a missing numba
install) selects the numpy path everywhere.
"""

from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    raw = os.environ.get("LOWSPEC_DISABLE_NUMBA", "").strip().lower()
    return raw in {"1", "true", "yes", "on"}


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(fn=None, **kwargs):
    """``numba.njit(cache=True)`` when numba is usable, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return numba.njit(**kwargs)(f)

    if fn is None:
        return wrap
    return wrap(fn)


def pick(fast, fallback):
    """Return the numba kernel if enabled, else the numpy fallback."""
    return fast if USE_NUMBA else fallback
