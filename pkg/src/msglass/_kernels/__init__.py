"""Backend selection for the hot objective kernels.

The compiled Cython extension is preferred; the pure-numpy fallback is used
when the extension failed to build or when the environment variable
``MSSG_PURE_PYTHON`` is set to a non-empty value.
"""

import os

from . import pure

if os.environ.get("MSSG_PURE_PYTHON"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

b_value = _impl.b_value
b_value_grad = _impl.b_value_grad

__all__ = ["BACKEND", "b_value", "b_value_grad", "pure"]
