"""Optional numba acceleration; the kernels run unchanged as plain Python."""

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover
    _njit = None


def njit(func):
    if _njit is None:
        return func
    return _njit(cache=True, nogil=True)(func)


HAVE_NUMBA = _njit is not None
