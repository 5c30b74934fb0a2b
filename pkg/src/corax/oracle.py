"""Corrected-label backends.

The corrected label set (the "what did the reader actually face" answer)
comes from a pluggable backend so a trained multilabel classifier can be
slotted in later. Two backends ship: a ground-truth identity backend, and
a deliberately weak prior-dwell heuristic that exists to exercise the
false-deferral and false-referral paths.
"""

from __future__ import annotations

from corax.bundles import CaseBundle
from corax.errors import ConfigurationError
from corax.labeling import ACTIVE_LABELS, Abnormality
from corax.priors import PriorAtlas, default_atlas

DEFAULT_DWELL_THRESHOLD = 0.15


class GroundTruthBackend:
    """Returns the case's ground-truth labels exactly."""

    kind = "ground_truth"

    def __init__(self, labels: tuple[Abnormality, ...] = ACTIVE_LABELS):
        self.labels = labels

    def corrected_labels(self, case: CaseBundle) -> set[Abnormality]:
        if case.ground_truth is None:
            raise ConfigurationError(f"case {case.case_id} has no ground truth")
        return {a for a in case.ground_truth.labels if a in self.labels}

    def provenance(self) -> dict:
        return {"backend": self.kind}


class PriorDwellBackend:
    """Labels whose anatomical-prior dwell fraction clears a threshold.

    Dwell fraction for a label is the duration-weighted share of fixations
    landing inside that label's prior mask. Coarse by design.
    """

    kind = "prior_dwell"

    def __init__(
        self,
        atlas: PriorAtlas | None = None,
        threshold: float = DEFAULT_DWELL_THRESHOLD,
        thresholds: dict[Abnormality, float] | None = None,
        labels: tuple[Abnormality, ...] = ACTIVE_LABELS,
    ):
        self.atlas = atlas if atlas is not None else default_atlas()
        self.threshold = threshold
        self.thresholds = thresholds or {}
        self.labels = labels

    def dwell_fraction(self, case: CaseBundle, abn: Abnormality) -> float:
        if abn not in self.atlas:
            raise ConfigurationError(f"no anatomical prior for {abn.value}")
        prior = self.atlas[abn]
        total = sum(f.duration_ms for f in case.scanpath.fixations)
        if total <= 0:
            return 0.0
        inside = sum(
            f.duration_ms * prior.value_at(f.x_norm, f.y_norm)
            for f in case.scanpath.fixations
        )
        return inside / total

    def corrected_labels(self, case: CaseBundle) -> set[Abnormality]:
        out = set()
        for abn in self.labels:
            cut = self.thresholds.get(abn, self.threshold)
            if self.dwell_fraction(case, abn) >= cut:
                out.add(abn)
        return out

    def provenance(self) -> dict:
        return {
            "backend": self.kind,
            "threshold": self.threshold,
            "thresholds": {a.value: t for a, t in sorted(self.thresholds.items())},
        }


OracleBackend = GroundTruthBackend | PriorDwellBackend


def make_backend(config: dict) -> OracleBackend:
    """Backend from a pipeline config mapping (the JSON config file shape)."""
    kind = config.get("backend", "gt")
    if kind in ("gt", "ground_truth"):
        return GroundTruthBackend()
    if kind in ("prior", "prior_dwell"):
        thresholds = {
            Abnormality(k): float(v) for k, v in config.get("thresholds", {}).items()
        }
        return PriorDwellBackend(
            threshold=float(config.get("threshold", DEFAULT_DWELL_THRESHOLD)),
            thresholds=thresholds,
        )
    raise ConfigurationError(f"unknown oracle backend {kind!r}")
