# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled rasterization kernels.

The truncated-Gaussian splat is the inner loop of every heatmap build
(one call per fixation per frame, plus one per fixation for pooled
heatmaps), so it is kept in C. Semantics must stay in lockstep with
corax._kernels_py, which is the import-time fallback.
"""

from libc.math cimport ceil, exp, floor


def accumulate_gaussian(double[:, ::1] out, double cx, double cy,
                        double sigma, double amplitude):
    """Add a truncated isotropic Gaussian to ``out`` in place.

    The blob is centered at pixel coordinates (cx, cy), has peak value
    ``amplitude`` and standard deviation ``sigma`` pixels, and is cut
    off at Euclidean radius 3*sigma.
    """
    cdef Py_ssize_t h = out.shape[0]
    cdef Py_ssize_t w = out.shape[1]
    cdef double r = 3.0 * sigma
    cdef double r2 = r * r
    cdef double inv2s2 = 1.0 / (2.0 * sigma * sigma)

    cdef Py_ssize_t x0 = <Py_ssize_t>ceil(cx - r)
    cdef Py_ssize_t x1 = <Py_ssize_t>floor(cx + r)
    cdef Py_ssize_t y0 = <Py_ssize_t>ceil(cy - r)
    cdef Py_ssize_t y1 = <Py_ssize_t>floor(cy + r)
    if x0 < 0:
        x0 = 0
    if y0 < 0:
        y0 = 0
    if x1 > w - 1:
        x1 = w - 1
    if y1 > h - 1:
        y1 = h - 1

    cdef Py_ssize_t x, y
    cdef double dx, dy, d2
    for y in range(y0, y1 + 1):
        dy = y - cy
        for x in range(x0, x1 + 1):
            dx = x - cx
            d2 = dx * dx + dy * dy
            if d2 <= r2:
                out[y, x] += amplitude * exp(-d2 * inv2s2)
