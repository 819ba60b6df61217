"""Select the compiled kernels when built, else the numpy fallback.

Set ``VARSENSE_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("VARSENSE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from ._ext import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"
_EMPTY = np.empty(0)


def homodyne_sample_stats(m0, m1, disp_amp, phi_alpha, c00, c01, c11, phi_hd, z,
                          basis_offsets=None, disp_offsets=None, impl=None):
    impl = impl or _impl
    return impl.homodyne_sample_stats(
        float(m0), float(m1), float(disp_amp), float(phi_alpha),
        float(c00), float(c01), float(c11), float(phi_hd),
        _EMPTY if basis_offsets is None else np.ascontiguousarray(basis_offsets, dtype=float),
        _EMPTY if disp_offsets is None else np.ascontiguousarray(disp_offsets, dtype=float),
        np.ascontiguousarray(z, dtype=float),
    )


def rbf_cross(a, b, lengthscale, scale=1.0, impl=None):
    impl = impl or _impl
    a = np.ascontiguousarray(np.atleast_2d(a), dtype=float)
    b = np.ascontiguousarray(np.atleast_2d(b), dtype=float)
    return impl.rbf_cross(a, b, float(lengthscale), float(scale))
