"""Numba acceleration toggle.

Hot kernels (bitplane entropy coding, wavelet lifting) are compiled with
numba when it is importable and the ``MSFA_NUMBA`` environment variable is
not set to ``0``/``false``/``off``. Both code paths share one source via a
decorator factory, so results are bit-identical either way; the fallback is
just slower. ``benchmarks/bench_kernels.py`` measures the gap.

``MSFA_THREADS`` caps the numba threading layer when set (the kernels here
are sequential, so this only matters for embedders that add parallel ones).
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    numba = None
    HAVE_NUMBA = False


def _env_enabled() -> bool:
    flag = os.environ.get("MSFA_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


_enabled = HAVE_NUMBA and _env_enabled()

if HAVE_NUMBA and os.environ.get("MSFA_THREADS"):
    try:
        numba.set_num_threads(max(1, int(os.environ["MSFA_THREADS"])))
    except (ValueError, RuntimeError):
        pass


def numba_enabled() -> bool:
    """True when dispatch selects the compiled kernels."""
    return _enabled


def set_numba(on: bool) -> None:
    """Runtime override of the env flag (used by tests and benchmarks)."""
    global _enabled
    _enabled = bool(on) and HAVE_NUMBA


def jit_compiler():
    """Return the decorator used to build the compiled kernel set.

    Falls back to identity when numba is unavailable, in which case the
    "compiled" set aliases the pure-Python one.
    """
    if HAVE_NUMBA:
        return numba.njit(cache=True)
    return lambda f: f
