"""Desk-scale collaborative chest X-ray miss detection.

Compares report-derived labels against a corrected, gaze-grounded label
set, refers candidate misses (with a region-of-interest heatmap) for
human accept/reject review, and scores the whole interaction.
"""

from corax.kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
