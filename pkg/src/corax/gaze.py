"""Fixations, scanpaths, and heatmap rendering.

Coordinates are normalized to [0, 1] and mapped to pixel space as
(x_norm * width, y_norm * height). One heatmap frame is rendered per
fixation; a frame is the fixation's truncated Gaussian blob with peak
amplitude proportional to dwell duration, rescaled so the maximum is 1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from corax.errors import (
    EmptyInputError,
    EmptyMaskError,
    EmptySelectionError,
    ParameterError,
)
from corax.kernels import accumulate_gaussian

MIN_FRAME_SIDE = 8
DEFAULT_BINARIZE_FRAC = 0.25


@dataclass(frozen=True)
class Fixation:
    """One gaze rest: normalized location plus a [start_ms, end_ms) dwell."""

    x_norm: float
    y_norm: float
    start_ms: float
    end_ms: float

    def __post_init__(self):
        if not (0.0 <= self.x_norm <= 1.0 and 0.0 <= self.y_norm <= 1.0):
            raise ParameterError(
                f"fixation location ({self.x_norm}, {self.y_norm}) outside [0,1]"
            )
        if self.start_ms < 0:
            raise ParameterError(f"start_ms {self.start_ms} is negative")
        if self.end_ms <= self.start_ms:
            raise ParameterError(
                f"fixation duration must be positive ({self.start_ms} .. {self.end_ms})"
            )

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    def intersects(self, t_start_ms: float, t_end_ms: float) -> bool:
        # Closed-interval overlap: boundary-touching counts, so grounder
        # timestamps landing exactly on a fixation edge still select it.
        return self.start_ms <= t_end_ms and self.end_ms >= t_start_ms


@dataclass(frozen=True)
class Scanpath:
    """The ordered, non-overlapping fixation sequence of one reading."""

    case_id: str
    fixations: tuple[Fixation, ...]
    total_duration_ms: float

    def __post_init__(self):
        object.__setattr__(self, "fixations", tuple(self.fixations))
        prev_end = -1.0
        for i, fix in enumerate(self.fixations):
            if fix.start_ms < prev_end:
                raise ParameterError(
                    f"fixations[{i}] starts at {fix.start_ms} before previous end {prev_end}"
                )
            prev_end = fix.end_ms
        if self.fixations and self.total_duration_ms < self.fixations[-1].end_ms:
            raise ParameterError(
                "total_duration_ms is shorter than the last fixation end"
            )


@dataclass(frozen=True)
class HeatmapFrame:
    """A dense [0, 1] intensity grid matched to the image dimensions."""

    width: int
    height: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise ParameterError(
                f"value grid {self.values.shape} does not match "
                f"({self.height}, {self.width})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("frame contains non-finite values")
        if self.values.min() < 0.0 or self.values.max() > 1.0:
            raise ParameterError("frame values escape [0, 1]")


@dataclass(frozen=True)
class GazeVideo:
    """One heatmap frame per fixation, with the source dwell intervals."""

    frames: tuple[HeatmapFrame, ...]
    frame_times: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(
            self, "frame_times", tuple((float(a), float(b)) for a, b in self.frame_times)
        )
        if len(self.frames) != len(self.frame_times):
            raise ParameterError("frames and frame_times lengths differ")


@dataclass(frozen=True)
class BinaryMask:
    width: int
    height: int
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.mask.shape != (self.height, self.width):
            raise ParameterError(
                f"mask grid {self.mask.shape} does not match ({self.height}, {self.width})"
            )
        if self.mask.dtype != np.bool_:
            object.__setattr__(self, "mask", self.mask.astype(bool))

    @property
    def pixel_count(self) -> int:
        return int(self.mask.sum())


def _check_frame_params(width: int, height: int, sigma_px: float) -> None:
    if width < MIN_FRAME_SIDE or height < MIN_FRAME_SIDE:
        raise ParameterError(f"frame dimensions {width}x{height} below minimum {MIN_FRAME_SIDE}")
    if sigma_px <= 0:
        raise ParameterError(f"sigma_px must be positive, got {sigma_px}")


def default_sigma(width: int) -> float:
    """Foveal-scale blob width: 1/32 of the image width."""
    return width / 32.0


def fixation_intensity(fix: Fixation, width: int, height: int, sigma_px: float) -> np.ndarray:
    """Raw (pre-normalization) Gaussian grid for one fixation.

    Peak amplitude equals the dwell duration in ms, so grid sums are
    additive across fixations and linear in duration.
    """
    _check_frame_params(width, height, sigma_px)
    grid = np.zeros((height, width), dtype=np.float64)
    accumulate_gaussian(
        grid, fix.x_norm * width, fix.y_norm * height, sigma_px, fix.duration_ms
    )
    return grid


def _normalize(grid: np.ndarray, width: int, height: int) -> HeatmapFrame:
    peak = grid.max()
    if peak > 0:
        grid = grid / peak
    return HeatmapFrame(width=width, height=height, values=grid)


def render_fixation_frame(fix: Fixation, width: int, height: int, sigma_px: float) -> HeatmapFrame:
    """Render one fixation as a normalized heatmap frame."""
    return _normalize(fixation_intensity(fix, width, height, sigma_px), width, height)


def build_gaze_video(scan: Scanpath, width: int, height: int, sigma_px: float) -> GazeVideo:
    """Render the whole scanpath, one frame per fixation, order preserved."""
    if not scan.fixations:
        raise EmptyInputError(f"scanpath {scan.case_id!r} has no fixations")
    frames = [render_fixation_frame(f, width, height, sigma_px) for f in scan.fixations]
    times = [(f.start_ms, f.end_ms) for f in scan.fixations]
    return GazeVideo(frames=tuple(frames), frame_times=tuple(times))


def roi_mean_image(video: GazeVideo, t_start_ms: float, t_end_ms: float) -> HeatmapFrame:
    """Pixelwise mean of the frames whose dwell interval intersects [t_start, t_end]."""
    if t_start_ms >= t_end_ms:
        raise ParameterError(f"empty interval [{t_start_ms}, {t_end_ms}]")
    selected = [
        frame
        for frame, (fs, fe) in zip(video.frames, video.frame_times)
        if fs <= t_end_ms and fe >= t_start_ms
    ]
    if not selected:
        raise EmptySelectionError(
            f"no frame intersects [{t_start_ms}, {t_end_ms}] ms"
        )
    if len(selected) == 1:
        return selected[0]
    stack = np.stack([f.values for f in selected])
    first = selected[0]
    return HeatmapFrame(width=first.width, height=first.height, values=stack.mean(axis=0))


def roi_static_heatmap(
    scan: Scanpath,
    t_start_ms: float,
    t_end_ms: float,
    width: int,
    height: int,
    sigma_px: float,
) -> HeatmapFrame:
    """Pool every fixation intersecting the interval into one duration-weighted heatmap.

    Accumulation happens in raw intensity space (additive in the fixation
    set) and is normalized to [0, 1] once at the end.
    """
    if t_start_ms >= t_end_ms:
        raise ParameterError(f"empty interval [{t_start_ms}, {t_end_ms}]")
    _check_frame_params(width, height, sigma_px)
    selected = [f for f in scan.fixations if f.intersects(t_start_ms, t_end_ms)]
    if not selected:
        raise EmptySelectionError(
            f"no fixation intersects [{t_start_ms}, {t_end_ms}] ms"
        )
    grid = static_heatmap_accumulation(selected, width, height, sigma_px)
    return _normalize(grid, width, height)


def static_heatmap_accumulation(
    fixations: list[Fixation] | tuple[Fixation, ...],
    width: int,
    height: int,
    sigma_px: float,
) -> np.ndarray:
    """Pre-normalization pooled grid: the sum of each fixation's raw blob."""
    _check_frame_params(width, height, sigma_px)
    grid = np.zeros((height, width), dtype=np.float64)
    for fix in fixations:
        accumulate_gaussian(
            grid, fix.x_norm * width, fix.y_norm * height, sigma_px, fix.duration_ms
        )
    return grid


def binarize(frame: HeatmapFrame, threshold_frac: float = DEFAULT_BINARIZE_FRAC) -> BinaryMask:
    """Level-set mask: pixels at or above threshold_frac of the frame maximum."""
    if not (0.0 < threshold_frac < 1.0):
        raise ParameterError(f"threshold_frac must lie in (0, 1), got {threshold_frac}")
    peak = frame.values.max()
    if peak <= 0.0:
        raise EmptyMaskError("cannot binarize an all-zero frame")
    return BinaryMask(
        width=frame.width,
        height=frame.height,
        mask=frame.values >= threshold_frac * peak,
    )


FIXATION_CSV_HEADER = "start_ms,end_ms,x_norm,y_norm"


def write_fixation_csv(fixations: list[Fixation] | tuple[Fixation, ...]) -> str:
    lines = [FIXATION_CSV_HEADER]
    for f in fixations:
        lines.append(f"{f.start_ms!r},{f.end_ms!r},{f.x_norm!r},{f.y_norm!r}")
    return "\n".join(lines) + "\n"


def read_fixation_csv(text: str) -> list[Fixation]:
    buf = io.StringIO(text)
    header = buf.readline().strip()
    if header != FIXATION_CSV_HEADER:
        raise ParameterError(f"unexpected fixation CSV header {header!r}")
    fixations = []
    for line in buf:
        line = line.strip()
        if not line:
            continue
        start, end, x, y = line.split(",")
        fixations.append(
            Fixation(x_norm=float(x), y_norm=float(y), start_ms=float(start), end_ms=float(end))
        )
    return fixations
