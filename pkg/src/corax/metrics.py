"""Metric suite: confusion counts, correction/over-diagnosis rates,
usefulness scores, confidence intervals, and empirical CDFs.

Counting rule, per abnormality per case:

* injected miss with an accepted referral        -> true referral (TR)
* injected miss with no/only-rejected referral   -> false deferral (FD)
* referral for a label that was not missed       -> false referral (FR)
* no miss and no referral                        -> true deferral (TD)

Ratios are kept unrounded; the raw integer counts are the record of
truth. Mean confidence intervals use the normal multiplier above n = 30
and Student t below.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from scipy import stats

from corax.bundles import CaseBundle, rasterize_regions
from corax.errors import (
    EmptyInputError,
    EmptyMaskError,
    ParameterError,
    SpecificationError,
    StateError,
    UndefinedMetricError,
)
from corax.errorsim import ErrorRecord
from corax.gaze import DEFAULT_BINARIZE_FRAC, BinaryMask, binarize
from corax.labeling import ACTIVE_LABELS, Abnormality
from corax.referral import CaseAnalysis, Referral, ReferralStatus

Z_95_OVER_30 = 1.959964


@dataclass
class ConfusionCounts:
    tr: int = 0
    fr: int = 0
    fd: int = 0
    td: int = 0

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tr=self.tr + other.tr,
            fr=self.fr + other.fr,
            fd=self.fd + other.fd,
            td=self.td + other.td,
        )

    def to_doc(self) -> dict:
        return {"tr": self.tr, "fr": self.fr, "fd": self.fd, "td": self.td}


def pecr(counts: ConfusionCounts) -> float:
    """Correction rate: percent of misses that ended in an accepted referral."""
    denom = counts.tr + counts.fd
    if denom == 0:
        raise UndefinedMetricError("no misses: correction rate undefined")
    return 100.0 * counts.tr / denom


def oder(counts: ConfusionCounts) -> float:
    """Over-diagnosis rate: percent of non-miss opportunities that drew a referral."""
    denom = counts.fr + counts.td
    if denom == 0:
        raise UndefinedMetricError("no non-miss opportunities: over-diagnosis rate undefined")
    return 100.0 * counts.fr / denom


def spatial_iou(pred: BinaryMask, truth: BinaryMask) -> float:
    if (pred.width, pred.height) != (truth.width, truth.height):
        raise ParameterError(
            f"mask dimensions differ: {pred.width}x{pred.height} vs {truth.width}x{truth.height}"
        )
    inter = int((pred.mask & truth.mask).sum())
    union = int((pred.mask | truth.mask).sum())
    if union == 0:
        raise UndefinedMetricError("both masks empty: IoU undefined")
    return inter / union


@dataclass(frozen=True)
class UsefulnessSample:
    subject_id: str  # referral id or case id
    kind: str  # "referral" or "deferral"
    value: float

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ParameterError(f"usefulness value {self.value} outside [0,1]")


def referral_usefulness(
    referral: Referral,
    truth_region: BinaryMask,
    threshold_frac: float = DEFAULT_BINARIZE_FRAC,
) -> UsefulnessSample:
    """Acceptance indicator times region IoU; rejected referrals score exactly 0."""
    if referral.status is ReferralStatus.PENDING:
        raise StateError(f"referral {referral.referral_id} is undecided")
    if referral.status is ReferralStatus.REJECTED:
        return UsefulnessSample(referral.referral_id, "referral", 0.0)
    try:
        pred = binarize(referral.roi, threshold_frac)
    except EmptyMaskError:
        return UsefulnessSample(referral.referral_id, "referral", 0.0)
    value = spatial_iou(pred, truth_region) if truth_region.pixel_count else 0.0
    return UsefulnessSample(referral.referral_id, "referral", value)


def total_usefulness(
    analysis: CaseAnalysis,
    truth_missed: set[Abnormality],
    ru_values: dict[str, float],
) -> UsefulnessSample:
    """Per-interaction accuracy: referral cases average their referral scores,
    deferral cases score 1 when nothing was overlooked and 0 otherwise."""
    for r in analysis.referrals:
        if r.status is ReferralStatus.PENDING:
            raise StateError(f"case {analysis.case_id} has undecided referrals")
    if analysis.referrals:
        vals = [ru_values[r.referral_id] for r in analysis.referrals]
        return UsefulnessSample(analysis.case_id, "referral", sum(vals) / len(vals))
    return UsefulnessSample(
        analysis.case_id, "deferral", 1.0 if not truth_missed else 0.0
    )


def ci_multiplier(n: int, level: float = 0.95) -> float:
    if n < 2:
        raise UndefinedMetricError("confidence interval needs n >= 2")
    if n > 30:
        return Z_95_OVER_30 if level == 0.95 else float(stats.norm.ppf((1 + level) / 2))
    return float(stats.t.ppf((1 + level) / 2, df=n - 1))


def confidence_interval(samples: list[float], level: float = 0.95) -> tuple[float, float, float]:
    """(mean, lower, upper) with sample sd (n-1 denominator)."""
    n = len(samples)
    if n < 2:
        raise UndefinedMetricError("confidence interval needs n >= 2")
    mean = sum(samples) / n
    var = sum((x - mean) ** 2 for x in samples) / (n - 1)
    half = ci_multiplier(n, level) * math.sqrt(var) / math.sqrt(n)
    return mean, mean - half, mean + half


def empirical_cdf(samples: list[float]) -> list[tuple[float, float]]:
    """Right-continuous step points (x, F(x)) at each distinct sample value."""
    if not samples:
        raise EmptyInputError("empirical CDF of an empty sample")
    n = len(samples)
    ordered = sorted(samples)
    points = []
    seen = 0
    for i, x in enumerate(ordered):
        seen = i + 1
        if i + 1 == n or ordered[i + 1] != x:
            points.append((x, seen / n))
    return points


def exceedance_from_cdf(points: list[tuple[float, float]], n: int, threshold: float) -> int:
    """Count of samples strictly above threshold, read off the CDF steps."""
    f_at = 0.0
    for x, f in points:
        if x <= threshold:
            f_at = f
        else:
            break
    return round(n * (1.0 - f_at))


@dataclass
class AbnormalityMetrics:
    counts: ConfusionCounts
    pecr: float | None
    oder: float | None
    ru_mean: float | None
    ru_ci: tuple[float, float] | None
    ru_n: int

    def to_doc(self) -> dict:
        return {
            "counts": self.counts.to_doc(),
            "pecr": self.pecr,
            "oder": self.oder,
            "ru_mean": self.ru_mean,
            "ru_ci": list(self.ru_ci) if self.ru_ci else None,
            "ru_n": self.ru_n,
        }


@dataclass
class MetricsReport:
    per_abnormality: dict[Abnormality, AbnormalityMetrics]
    ru_samples: list[UsefulnessSample]
    tu_samples: list[UsefulnessSample]
    ru_true_mean: float | None
    ru_true_ci: tuple[float, float] | None
    ru_true_n: int
    cdf_ru: list[tuple[float, float]]
    cdf_tu: list[tuple[float, float]]
    interactions: dict
    provenance: dict
    undefined: list[str] = field(default_factory=list)
    ru_meta: dict[str, tuple[str, str, str]] = field(default_factory=dict)  # id -> (case, abn, status)

    def to_doc(self) -> dict:
        return {
            "per_abnormality": {
                a.value: m.to_doc() for a, m in sorted(self.per_abnormality.items())
            },
            "ru_true_mean": self.ru_true_mean,
            "ru_true_ci": list(self.ru_true_ci) if self.ru_true_ci else None,
            "ru_true_n": self.ru_true_n,
            "ru_samples": [
                {
                    "referral_id": s.subject_id,
                    "case_id": self.ru_meta[s.subject_id][0],
                    "abnormality": self.ru_meta[s.subject_id][1],
                    "status": self.ru_meta[s.subject_id][2],
                    "value": s.value,
                }
                for s in self.ru_samples
            ],
            "tu_samples": [
                {"case_id": s.subject_id, "kind": s.kind, "value": s.value}
                for s in self.tu_samples
            ],
            "cdf_ru": [list(p) for p in self.cdf_ru],
            "cdf_tu": [list(p) for p in self.cdf_tu],
            "interactions": self.interactions,
            "provenance": self.provenance,
            "undefined": self.undefined,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_doc(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )

    def write_csvs(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)

        lines = ["abnormality,tr,fd,pecr,fr,td,oder"]
        for abn, m in sorted(self.per_abnormality.items()):
            p = "" if m.pecr is None else repr(m.pecr)
            o = "" if m.oder is None else repr(m.oder)
            c = m.counts
            lines.append(f"{abn.value},{c.tr},{c.fd},{p},{c.fr},{c.td},{o}")
        (directory / "confusion.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        lines = ["referral_id,case_id,abnormality,status,value"]
        for s in self.ru_samples:
            case_id, abn, status = self.ru_meta[s.subject_id]
            lines.append(f"{s.subject_id},{case_id},{abn},{status},{s.value!r}")
        (directory / "ru_samples.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        lines = ["case_id,kind,value"]
        for s in self.tu_samples:
            lines.append(f"{s.subject_id},{s.kind},{s.value!r}")
        (directory / "tu_samples.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        for name, points in (("cdf_ru.csv", self.cdf_ru), ("cdf_tu.csv", self.cdf_tu)):
            lines = ["x,f"]
            for x, f in points:
                lines.append(f"{x!r},{f!r}")
            (directory / name).write_text("\n".join(lines) + "\n", encoding="utf-8")


def truth_missed_labels(case: CaseBundle, set_a: set[Abnormality]) -> set[Abnormality]:
    """Labels the image truly shows but the submitted report does not assert."""
    return set(case.ground_truth.labels) - set_a


def build_report(
    cases: dict[str, CaseBundle],
    analyses: list[CaseAnalysis],
    labels: tuple[Abnormality, ...] = ACTIVE_LABELS,
    threshold_frac: float = DEFAULT_BINARIZE_FRAC,
    provenance: dict | None = None,
    error_records: list[ErrorRecord] | None = None,
) -> MetricsReport:
    """Fold every decided analysis into one report.

    When error records are supplied, the per-abnormality miss counts are
    audited against them (tr + fd must equal the injected misses).
    """
    counts = {a: ConfusionCounts() for a in labels}
    ru_samples: list[UsefulnessSample] = []
    ru_meta: dict[str, tuple[str, str, str]] = {}
    ru_by_label: dict[Abnormality, list[float]] = {a: [] for a in labels}
    ru_true: list[float] = []
    tu_samples: list[UsefulnessSample] = []

    deferral_correct = deferral_missed = 0
    referral_all_accepted = referral_any_rejected = 0
    accepted_total = rejected_total = 0

    for analysis in sorted(analyses, key=lambda a: a.case_id):
        case = cases[analysis.case_id]
        missed = truth_missed_labels(case, analysis.set_a)
        refs_by_label: dict[Abnormality, list[Referral]] = {}
        for r in analysis.referrals:
            refs_by_label.setdefault(r.abnormality, []).append(r)

        ru_values: dict[str, float] = {}
        for r in analysis.referrals:
            truth_region = rasterize_regions(
                case.ground_truth.regions_for(r.abnormality), r.roi.width, r.roi.height
            )
            sample = referral_usefulness(r, truth_region, threshold_frac)
            if r.status is ReferralStatus.ACCEPTED:
                r.iou = sample.value
            ru_values[r.referral_id] = sample.value
            ru_samples.append(sample)
            ru_meta[r.referral_id] = (r.case_id, r.abnormality.value, r.status.value)
            if r.status is ReferralStatus.ACCEPTED:
                ru_true.append(sample.value)
                if r.abnormality in ru_by_label:
                    ru_by_label[r.abnormality].append(sample.value)
                accepted_total += 1
            else:
                rejected_total += 1

        for abn in labels:
            refs = refs_by_label.get(abn, [])
            if abn in missed:
                if any(r.status is ReferralStatus.ACCEPTED for r in refs):
                    counts[abn].tr += 1
                else:
                    counts[abn].fd += 1
            else:
                if refs:
                    counts[abn].fr += 1
                else:
                    counts[abn].td += 1

        tu = total_usefulness(analysis, missed & set(labels), ru_values)
        tu_samples.append(tu)
        if tu.kind == "deferral":
            if tu.value == 1.0:
                deferral_correct += 1
            else:
                deferral_missed += 1
        else:
            if all(r.status is ReferralStatus.ACCEPTED for r in analysis.referrals):
                referral_all_accepted += 1
            else:
                referral_any_rejected += 1

    if error_records is not None:
        injected: dict[Abnormality, int] = {a: 0 for a in labels}
        for rec in error_records:
            if rec.abnormality in injected:
                injected[rec.abnormality] += 1
        for abn in labels:
            got = counts[abn].tr + counts[abn].fd
            if got != injected[abn]:
                raise SpecificationError(
                    f"{abn.value}: tr+fd = {got} but {injected[abn]} misses were injected"
                )

    undefined: list[str] = []
    per_abn: dict[Abnormality, AbnormalityMetrics] = {}
    for abn in labels:
        c = counts[abn]
        try:
            p = pecr(c)
        except UndefinedMetricError:
            p = None
            undefined.append(f"pecr.{abn.value}")
        try:
            o = oder(c)
        except UndefinedMetricError:
            o = None
            undefined.append(f"oder.{abn.value}")
        vals = ru_by_label[abn]
        mean = sum(vals) / len(vals) if vals else None
        ci = None
        if len(vals) >= 2:
            _, lo, hi = confidence_interval(vals)
            ci = (lo, hi)
        per_abn[abn] = AbnormalityMetrics(
            counts=c, pecr=p, oder=o, ru_mean=mean, ru_ci=ci, ru_n=len(vals)
        )

    ru_true_mean = sum(ru_true) / len(ru_true) if ru_true else None
    if ru_true_mean is None:
        undefined.append("ru_true_mean")
    ru_true_ci = None
    if len(ru_true) >= 2:
        _, lo, hi = confidence_interval(ru_true)
        ru_true_ci = (lo, hi)

    n_cases = len(analyses)
    deferral_cases = deferral_correct + deferral_missed
    referral_cases = n_cases - deferral_cases
    interactions = {
        "cases": n_cases,
        "deferral_cases": deferral_cases,
        "deferral_correct": deferral_correct,
        "deferral_missed": deferral_missed,
        "referral_cases": referral_cases,
        "referral_cases_all_accepted": referral_all_accepted,
        "referral_cases_any_rejected": referral_any_rejected,
        "referrals_total": accepted_total + rejected_total,
        "referrals_accepted": accepted_total,
        "referrals_rejected": rejected_total,
    }

    prov = dict(provenance or {})
    prov.setdefault("binarize_threshold_frac", threshold_frac)
    prov["labels"] = [a.value for a in labels]

    return MetricsReport(
        per_abnormality=per_abn,
        ru_samples=ru_samples,
        tu_samples=tu_samples,
        ru_true_mean=ru_true_mean,
        ru_true_ci=ru_true_ci,
        ru_true_n=len(ru_true),
        cdf_ru=empirical_cdf([s.value for s in ru_samples]) if ru_samples else [],
        cdf_tu=empirical_cdf([s.value for s in tu_samples]) if tu_samples else [],
        interactions=interactions,
        provenance=prov,
        undefined=undefined,
        ru_meta=ru_meta,
    )
