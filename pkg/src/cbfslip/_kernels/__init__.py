"""Element kernels: compiled extension when built, numpy fallback otherwise.

Set ``CBFSLIP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels as py

if os.environ.get("CBFSLIP_PURE_PYTHON", "") not in ("", "0"):
    _impl = py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = py

BACKEND = _impl.BACKEND
newton_local = _impl.newton_local


def csr_spmv(indptr, indices, data, x):
    if _impl is py:
        return py.csr_spmv(indptr, indices, data, x)
    import numpy as np

    return _impl.csr_spmv(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        np.ascontiguousarray(data, dtype=np.float64),
        np.ascontiguousarray(x, dtype=np.float64),
    )


def available_backends():
    """Backend modules importable in this environment, keyed by name."""
    out = {"python": py}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
