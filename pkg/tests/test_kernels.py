"""Both kernel backends must agree; the compiled one is optional at runtime."""

import numpy as np
import pytest

from corax import _kernels_py
from corax.kernels import BACKEND

try:
    from corax import _kernels
except ImportError:
    _kernels = None


def test_a_backend_was_selected():
    assert BACKEND in ("cython", "python")


@pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")
def test_backends_agree_on_random_splats(rng):
    for _ in range(40):
        h, w = int(rng.integers(16, 120)), int(rng.integers(16, 120))
        a = np.zeros((h, w))
        b = np.zeros((h, w))
        cx = rng.uniform(-5, w + 5)
        cy = rng.uniform(-5, h + 5)
        sigma = rng.uniform(0.4, 12.0)
        amp = rng.uniform(1, 2000)
        _kernels.accumulate_gaussian(a, cx, cy, sigma, amp)
        _kernels_py.accumulate_gaussian(b, cx, cy, sigma, amp)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")
def test_backends_agree_far_offscreen():
    a = np.zeros((32, 32))
    b = np.zeros((32, 32))
    _kernels.accumulate_gaussian(a, -500.0, -500.0, 3.0, 100.0)
    _kernels_py.accumulate_gaussian(b, -500.0, -500.0, 3.0, 100.0)
    assert a.sum() == 0.0
    np.testing.assert_array_equal(a, b)


def test_python_kernel_truncates_at_three_sigma():
    out = np.zeros((64, 64))
    _kernels_py.accumulate_gaussian(out, 32.0, 32.0, 4.0, 100.0)
    ys, xs = np.nonzero(out)
    d = np.sqrt((xs - 32.0) ** 2 + (ys - 32.0) ** 2)
    assert d.max() <= 12.0 + 1e-9
