import numpy as np
import pytest

from gridaffinity import kernels
from gridaffinity.kernels import _numpy

from oracles import naive_maxpool

BACKENDS = kernels.available_backends()


def test_compiled_backend_active():
    # the shipped build compiles the extension; fallback is exercised explicitly below
    assert kernels.BACKEND in BACKENDS


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("shape", [(1, 1, 1, 1, 1), (2, 4, 3, 5, 2), (1, 7, 7, 7, 3)])
def test_unfold_fold_adjoint(name, dtype, shape):
    """<unfold(x), c> == <x, fold(c)>, and unfold agrees with the numpy reference."""
    impl = BACKENDS[name]
    rng = np.random.default_rng(0)
    b, d, h, w, c = shape
    xpad = rng.normal(size=(b, d + 4, h + 4, w + 4, c)).astype(dtype)
    cols = impl.unfold3d(xpad, 5)
    np.testing.assert_array_equal(cols, _numpy.unfold3d(xpad, 5))
    probe = rng.normal(size=cols.shape).astype(dtype)
    out = np.zeros_like(xpad)
    impl.fold3d(probe, out)
    lhs = float(np.sum(cols.astype(np.float64) * probe))
    rhs = float(np.sum(xpad.astype(np.float64) * out))
    assert lhs == pytest.approx(rhs, rel=1e-4 if dtype == np.float32 else 1e-10)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("shape", [(1, 1, 1, 1, 1), (2, 5, 4, 3, 2), (1, 21, 21, 21, 3)])
def test_maxpool_matches_naive(name, dtype, shape):
    impl = BACKENDS[name]
    rng = np.random.default_rng(1)
    x = rng.normal(size=shape).astype(dtype)
    out, arg = impl.maxpool3d_forward(x)
    for b in range(shape[0]):
        np.testing.assert_array_equal(out[b], naive_maxpool(x[b]))
    assert arg.min() >= 0 and arg.max() <= 7
    dout = rng.normal(size=out.shape).astype(dtype)
    dx = impl.maxpool3d_backward(dout, arg, x.shape)
    assert dx.shape == x.shape
    assert np.count_nonzero(dx) == np.count_nonzero(dout)
    np.testing.assert_allclose(dx.sum(), dout.sum(), rtol=1e-5)
    # every routed gradient lands on a cell holding its window's maximum
    for b, i, j, l, c in np.argwhere(dx != 0):
        assert x[b, i, j, l, c] == out[b, i // 2, j // 2, l // 2, c]


def test_backends_agree_on_ties():
    x = np.zeros((1, 3, 3, 3, 2))
    for impl in BACKENDS.values():
        out, arg = impl.maxpool3d_forward(x)
        assert np.all(arg == 0)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_scatter_add(name):
    impl = BACKENDS[name]
    grid = np.zeros((3, 3, 3, 2))
    idx = np.array([[0, 1, 2], [0, 1, 2], [2, 2, 2]], dtype=np.int64)
    feats = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    impl.scatter_add(grid, idx, feats)
    np.testing.assert_array_equal(grid[0, 1, 2], [4, 6])
    np.testing.assert_array_equal(grid[2, 2, 2], [5, 6])
    assert grid.sum() == 21
