"""Referral assembly: set difference, timestamp lookup, ROI construction.

For one case: Set A is what the submitted report asserts, Set B is the
corrected label set, and B minus A are the candidate misses. Each missed
label with a grounded time interval becomes a pending referral carrying a
region-of-interest heatmap; misses the grounder abstained on become
deferrals (and later count as false deferrals).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from corax.bundles import CaseBundle
from corax.errors import ConfigurationError, CoraxError, StateError
from corax.gaze import (
    HeatmapFrame,
    build_gaze_video,
    default_sigma,
    roi_mean_image,
    roi_static_heatmap,
)
from corax.grounding import (
    DEFAULT_STRIDE_MS,
    DEFAULT_WINDOW_MS,
    TRANSCRIPT_PAD_MS,
    GroundedFinding,
    ground_by_dwell,
    ground_by_transcript,
)
from corax.labeling import Abnormality, extract_labels
from corax.oracle import OracleBackend
from corax.priors import PriorAtlas, default_atlas

log = logging.getLogger(__name__)


class ReferralStatus(str, Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class Decision(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class RoiMode(str, Enum):
    MEAN_IMAGE = "mean"
    STATIC_HEATMAP = "static"


@dataclass
class Referral:
    """One missed abnormality offered for human accept/reject review."""

    referral_id: str
    case_id: str
    abnormality: Abnormality
    interval: tuple[float, float]
    roi: HeatmapFrame
    roi_mode: RoiMode
    status: ReferralStatus = ReferralStatus.PENDING
    actor: str | None = None
    iou: float | None = None

    def to_doc(self, with_roi_url: bool = False) -> dict:
        doc = {
            "referral_id": self.referral_id,
            "case_id": self.case_id,
            "abnormality": self.abnormality.value,
            "interval": {"t_start_ms": self.interval[0], "t_end_ms": self.interval[1]},
            "roi_mode": self.roi_mode.value,
            "status": self.status.value,
            "actor": self.actor,
            "iou": self.iou,
        }
        if with_roi_url:
            doc["roi_url"] = f"/referrals/{self.referral_id}/roi.png"
        return doc


@dataclass
class CaseAnalysis:
    case_id: str
    set_a: set[Abnormality]
    set_b: set[Abnormality]
    grounded: list[GroundedFinding]
    referrals: list[Referral] = field(default_factory=list)

    def to_doc(self, with_roi_url: bool = False) -> dict:
        return {
            "case_id": self.case_id,
            "set_a": sorted(a.value for a in self.set_a),
            "set_b": sorted(a.value for a in self.set_b),
            "grounded": [
                {
                    "abnormality": g.abnormality.value,
                    "t_start_ms": g.t_start_ms,
                    "t_end_ms": g.t_end_ms,
                    "score": g.score,
                }
                for g in self.grounded
            ],
            "referrals": [r.to_doc(with_roi_url) for r in self.referrals],
        }


def missed_abnormalities(set_a: set[Abnormality], set_b: set[Abnormality]) -> set[Abnormality]:
    """Candidate misses: labels the corrected set has and the report lacks."""
    return set_b - set_a


@dataclass(frozen=True)
class GrounderConfig:
    kind: str = "dwell"  # "dwell" or "transcript"
    window_ms: float = DEFAULT_WINDOW_MS
    stride_ms: float = DEFAULT_STRIDE_MS
    pad_ms: float = TRANSCRIPT_PAD_MS
    atlas: PriorAtlas | None = None

    def provenance(self) -> dict:
        doc = {"grounder": self.kind}
        if self.kind == "dwell":
            doc |= {"window_ms": self.window_ms, "stride_ms": self.stride_ms}
        else:
            doc |= {"pad_ms": self.pad_ms}
        return doc


def ground_labels(
    labels: set[Abnormality], case: CaseBundle, config: GrounderConfig
) -> list[GroundedFinding]:
    if config.kind == "transcript":
        if case.transcript is None:
            raise ConfigurationError(
                f"case {case.case_id} has no transcript for transcript grounding"
            )
        return ground_by_transcript(
            labels, list(case.transcript), case.scanpath.total_duration_ms, pad_ms=config.pad_ms
        )
    if config.kind == "dwell":
        atlas = config.atlas if config.atlas is not None else default_atlas()
        return ground_by_dwell(
            labels, case.scanpath, atlas, window_ms=config.window_ms, stride_ms=config.stride_ms
        )
    raise ConfigurationError(f"unknown grounder kind {config.kind!r}")


def build_roi(
    case: CaseBundle,
    interval: tuple[float, float],
    roi_mode: RoiMode,
    sigma_px: float | None = None,
    video=None,
) -> HeatmapFrame:
    height, width = case.image.shape
    sigma = sigma_px if sigma_px is not None else default_sigma(width)
    if roi_mode is RoiMode.STATIC_HEATMAP:
        return roi_static_heatmap(case.scanpath, interval[0], interval[1], width, height, sigma)
    if video is None:
        video = build_gaze_video(case.scanpath, width, height, sigma)
    return roi_mean_image(video, interval[0], interval[1])


def analyze_case(
    case: CaseBundle,
    backend: OracleBackend,
    grounder: GrounderConfig,
    roi_mode: RoiMode = RoiMode.MEAN_IMAGE,
    sigma_px: float | None = None,
) -> CaseAnalysis:
    """Run the full per-case pipeline and emit pending referrals.

    One label's failure to ground or render never suppresses the others;
    it is logged and that label falls back to a deferral.
    """
    report_text = case.report.text
    set_a = extract_labels(report_text) if report_text.strip() else set()
    set_b = backend.corrected_labels(case)
    grounded = ground_labels(set_b, case, grounder)
    by_label = {g.abnormality: g for g in grounded}

    referrals = []
    video = None  # built once, shared by every mean-image ROI of this case
    for abn in sorted(missed_abnormalities(set_a, set_b), key=lambda a: a.value):
        finding = by_label.get(abn)
        if finding is None:
            continue  # grounder abstained; this miss becomes a deferral
        try:
            if roi_mode is RoiMode.MEAN_IMAGE and video is None:
                height, width = case.image.shape
                sigma = sigma_px if sigma_px is not None else default_sigma(width)
                video = build_gaze_video(case.scanpath, width, height, sigma)
            roi = build_roi(case, finding.interval, roi_mode, sigma_px, video=video)
        except CoraxError as exc:
            log.warning(
                "case %s: ROI build failed for %s (%s); deferring",
                case.case_id, abn.value, exc,
            )
            continue
        assert abn not in set_a, "over-referral guard: label already reported"
        referrals.append(
            Referral(
                referral_id=f"{case.case_id}--{abn.value}",
                case_id=case.case_id,
                abnormality=abn,
                interval=finding.interval,
                roi=roi,
                roi_mode=roi_mode,
            )
        )
    return CaseAnalysis(
        case_id=case.case_id, set_a=set_a, set_b=set_b, grounded=grounded, referrals=referrals
    )


def decide(referral: Referral, decision: Decision, actor: str) -> Referral:
    """Apply a review decision. Pending is the only state that may change."""
    if referral.status is not ReferralStatus.PENDING:
        raise StateError(
            f"referral {referral.referral_id} already {referral.status.value}"
        )
    referral.status = (
        ReferralStatus.ACCEPTED if decision is Decision.ACCEPT else ReferralStatus.REJECTED
    )
    referral.actor = actor
    return referral


def simulated_decision(
    referral: Referral,
    ground_truth_labels: frozenset[Abnormality] | set[Abnormality],
    set_a: set[Abnormality],
) -> Decision:
    """The scripted reviewer: accept iff the label really was missed.

    Acceptance is label-level only; region quality never factors in, so a
    true referral with a poor region still gets accepted (and simply earns
    a low usefulness score).
    """
    truly_missed = set(ground_truth_labels) - set_a
    return Decision.ACCEPT if referral.abnormality in truly_missed else Decision.REJECT
