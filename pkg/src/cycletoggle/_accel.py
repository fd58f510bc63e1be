"""JIT shim: numba when available, plain Python otherwise.

Every hot kernel in this package is a plain function over numpy arrays and
scalars, so running without numba is functionally identical, just slow.
"""

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on numba-less installs
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap
