"""Numba / pure-NumPy backend switch for the hot kernels.

The environment variable ``LEAKYDIMER_BACKEND`` selects the execution path:

* ``auto``  (default) - compile the kernels with numba when it is importable,
  otherwise fall back to running the identical source uncompiled.
* ``numba`` - require numba; raise ImportError if it is missing.
* ``numpy`` - force the pure-NumPy path even when numba is installed.

All kernels are written as plain NumPy code, so the fallback is not a
separate implementation: the ``njit`` shim below simply becomes an identity
decorator. ``benchmarks/bench_backends.py`` times the two paths against
each other.
"""

from __future__ import annotations

import os

ENV_VAR = "LEAKYDIMER_BACKEND"

_choice = os.environ.get(ENV_VAR, "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"{ENV_VAR} must be one of 'auto', 'numba', 'numpy'; got {_choice!r}"
    )

if _choice == "numpy":
    NUMBA_ENABLED = False
elif _choice == "numba":
    from numba import njit as _numba_njit  # noqa: F401  (hard requirement)

    NUMBA_ENABLED = True
else:
    try:
        from numba import njit as _numba_njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False

BACKEND = "numba" if NUMBA_ENABLED else "numpy"

if NUMBA_ENABLED:

    def njit(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        if func is None:
            return lambda f: _numba_njit(**kwargs)(f)
        return _numba_njit(**kwargs)(func)

else:

    def njit(func=None, **kwargs):  # noqa: ARG001 - mirror the numba signature
        if func is None:
            return lambda f: f
        return func
