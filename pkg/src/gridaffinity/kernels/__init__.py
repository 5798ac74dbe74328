"""Hot loops behind a single interface.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy implementations in ``_numpy`` are used. Set
``GRIDAFFINITY_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _numpy

BACKEND = "numpy"
_impl = _numpy
if os.environ.get("GRIDAFFINITY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass


def available_backends():
    names = {"numpy": _numpy}
    try:
        from . import _ckernels
        names["cython"] = _ckernels
    except ImportError:
        pass
    return names


def unfold3d(xpad, k):
    return _impl.unfold3d(xpad, k)


def fold3d(cols, out):
    _impl.fold3d(cols, out)
    return out


def maxpool3d_forward(x):
    return _impl.maxpool3d_forward(x)


def maxpool3d_backward(dout, arg, in_shape):
    return _impl.maxpool3d_backward(dout, arg, in_shape)


def scatter_add(grid, idx, feats):
    _impl.scatter_add(grid, idx, feats)
    return grid
