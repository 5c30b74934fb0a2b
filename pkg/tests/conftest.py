import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corax.gaze import Fixation, Scanpath


def make_scanpath(points, case_id="case-test", tail_ms=500.0):
    """Scanpath from (x, y, start_ms, end_ms) tuples."""
    fixations = tuple(
        Fixation(x_norm=x, y_norm=y, start_ms=s, end_ms=e) for x, y, s, e in points
    )
    total = (fixations[-1].end_ms + tail_ms) if fixations else tail_ms
    return Scanpath(case_id=case_id, fixations=fixations, total_duration_ms=total)


def random_scanpath(rng: np.random.Generator, n: int, max_ms=20000.0):
    pts = []
    cursor = 0.0
    for _ in range(n):
        dur = rng.uniform(100, 500)
        if cursor + dur > max_ms:
            break
        pts.append((rng.uniform(0, 1), rng.uniform(0, 1), cursor, cursor + dur))
        cursor += dur + rng.uniform(0, 100)
    return make_scanpath(pts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
