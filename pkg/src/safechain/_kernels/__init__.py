"""Hot per-step kernels with a compiled core and a pure-Python fallback.

The compiled extension (Cython) is preferred when it has been built; otherwise
the numpy reference implementation is used.  Both compute identical results
bit for bit, so which one is active never changes a trace.  ``BACKEND`` tells
you which one you got.
"""

try:
    from ._fast import BACKEND, jet_mul, observer_step_core  # noqa: F401
except ImportError:  # extension not built; fall back to numpy
    from ._ref import BACKEND, jet_mul, observer_step_core  # noqa: F401
