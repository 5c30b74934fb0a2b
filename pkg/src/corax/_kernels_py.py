"""Pure-numpy fallback for the compiled rasterization kernels.

Used when the Cython extension is not built (source checkouts, platforms
without a compiler). Must match corax._kernels semantics exactly: same
truncation rule, same pixel-coordinate convention.
"""

import math

import numpy as np


def accumulate_gaussian(out: np.ndarray, cx: float, cy: float,
                        sigma: float, amplitude: float) -> None:
    """Add a truncated isotropic Gaussian to ``out`` in place.

    The blob is centered at pixel coordinates (cx, cy), has peak value
    ``amplitude`` and standard deviation ``sigma`` pixels, and is cut
    off at Euclidean radius 3*sigma.
    """
    h, w = out.shape
    r = 3.0 * sigma
    x0 = max(int(math.ceil(cx - r)), 0)
    x1 = min(int(math.floor(cx + r)), w - 1)
    y0 = max(int(math.ceil(cy - r)), 0)
    y1 = min(int(math.floor(cy + r)), h - 1)
    if x0 > x1 or y0 > y1:
        return

    xs = np.arange(x0, x1 + 1, dtype=np.float64) - cx
    ys = np.arange(y0, y1 + 1, dtype=np.float64) - cy
    d2 = ys[:, None] ** 2 + xs[None, :] ** 2
    patch = amplitude * np.exp(-d2 / (2.0 * sigma * sigma))
    patch[d2 > r * r] = 0.0
    out[y0:y1 + 1, x0:x1 + 1] += patch
