"""Hot inner-loop kernels for grid-CRF inference.

Two interchangeable backends provide the same functions with identical
arithmetic (same operations in the same order, IEEE-754 doubles):

* ``_native`` — Cython extension, compiled at install time;
* ``_pure``   — pure-Python fallback, used when the extension is missing or
  when the ``HCRF_PURE`` environment variable is set (any non-empty value).

``BACKEND`` names the one selected at import.  tests/test_kernels.py checks
the two produce bit-identical results.
"""

import os

if os.environ.get("HCRF_PURE"):
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        from . import _pure as _impl

        BACKEND = "pure"

icm_sweep = _impl.icm_sweep
grid_energy = _impl.grid_energy

__all__ = ["BACKEND", "icm_sweep", "grid_energy"]
