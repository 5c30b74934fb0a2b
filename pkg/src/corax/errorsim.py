"""Simulated perceptual-error injection.

Takes label-complete cases and removes or negates abnormality mentions at
configured per-abnormality rates, with bookkeeping that lets every miss be
audited afterwards. Selection is per-abnormality independent sampling, so
one case can lose several findings.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum

from corax.bundles import CaseBundle
from corax.errors import SpecificationError
from corax.labeling import (
    ACTIVE_LABELS,
    Abnormality,
    Lexicon,
    default_lexicon,
    extract_labels,
    find_mentions,
    negated_sentence,
    sentence_spans,
)


class AlterationMode(str, Enum):
    MASK = "mask"
    NEGATE = "negate"


@dataclass(frozen=True)
class ErrorSpec:
    """Per-abnormality alteration rates plus sampling controls."""

    rates: dict[Abnormality, float]
    seed: int
    mode_mix: float = 0.5  # fraction of alterations rewritten as negations

    def __post_init__(self):
        for abn, rate in self.rates.items():
            if not (0.0 <= rate <= 1.0):
                raise SpecificationError(f"rate for {abn.value} outside [0,1]: {rate}")
        if not (0.0 <= self.mode_mix <= 1.0):
            raise SpecificationError(f"mode_mix outside [0,1]: {self.mode_mix}")

    @classmethod
    def from_doc(cls, doc: dict) -> "ErrorSpec":
        return cls(
            rates={Abnormality(k): float(v) for k, v in doc["rates"].items()},
            seed=int(doc["seed"]),
            mode_mix=float(doc.get("mode_mix", 0.5)),
        )

    def to_doc(self) -> dict:
        return {
            "rates": {a.value: r for a, r in sorted(self.rates.items())},
            "seed": self.seed,
            "mode_mix": self.mode_mix,
        }


@dataclass(frozen=True)
class ErrorRecord:
    case_id: str
    abnormality: Abnormality
    mode: AlterationMode
    original_sentence_span: tuple[int, int]
    altered_text: str

    def to_doc(self) -> dict:
        return {
            "case_id": self.case_id,
            "abnormality": self.abnormality.value,
            "mode": self.mode.value,
            "original_sentence_span": list(self.original_sentence_span),
            "altered_text": self.altered_text,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ErrorRecord":
        return cls(
            case_id=doc["case_id"],
            abnormality=Abnormality(doc["abnormality"]),
            mode=AlterationMode(doc["mode"]),
            original_sentence_span=tuple(doc["original_sentence_span"]),
            altered_text=doc["altered_text"],
        )


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _mention_sentences(text: str, abn: Abnormality, lexicon: Lexicon) -> list[tuple[int, int]]:
    spans = []
    for a, b in sentence_spans(text):
        if find_mentions(text[a:b], abn, lexicon):
            spans.append((a, b))
    return spans


def _alter_text(
    text: str, abn: Abnormality, mode: AlterationMode, lexicon: Lexicon
) -> tuple[str, str]:
    """Apply one alteration; returns (new_text, replacement_sentence)."""
    mention_spans = _mention_sentences(text, abn, lexicon)
    if not mention_spans:
        # A prior alteration on a shared sentence already took the mention out.
        return text, ""
    keep: list[str] = []
    replacement = ""
    for a, b in sentence_spans(text):
        if (a, b) == mention_spans[0] and mode is AlterationMode.NEGATE:
            replacement = negated_sentence(abn, lexicon)
            keep.append(replacement)
        elif (a, b) in mention_spans:
            continue
        else:
            keep.append(text[a:b])
    return " ".join(keep), replacement


def inject_errors(
    cases: list[CaseBundle],
    spec: ErrorSpec,
    lexicon: Lexicon | None = None,
) -> tuple[list[CaseBundle], list[ErrorRecord]]:
    """Alter sampled positive cases per abnormality; emit one record per alteration.

    Masking removes every sentence mentioning the abnormality; negation
    rewrites the first mention sentence with the canonical negated form
    (and drops any further mention sentences so the label provably
    disappears). Deterministic under (seed, spec, input order-insensitive).
    """
    lexicon = lexicon or default_lexicon()
    by_id = {c.case_id: c for c in cases}
    original_labels = {
        c.case_id: extract_labels(c.report, lexicon) if c.report.text.strip() else set()
        for c in cases
    }
    original_text = {c.case_id: c.report.text for c in cases}

    current_text = dict(original_text)
    records: list[ErrorRecord] = []

    for abn in ACTIVE_LABELS + (Abnormality.CONSOLIDATION,):
        rate = spec.rates.get(abn, 0.0)
        positives = sorted(cid for cid, labels in original_labels.items() if abn in labels)
        k = _half_up(rate * len(positives))
        if k > len(positives):
            raise SpecificationError(
                f"{abn.value}: rate {rate} requests {k} of {len(positives)} positive cases"
            )
        if k == 0:
            continue
        rng = random.Random(f"{spec.seed}:{abn.value}")
        selected = sorted(rng.sample(positives, k))
        for cid in selected:
            mode = (
                AlterationMode.NEGATE
                if rng.random() < spec.mode_mix
                else AlterationMode.MASK
            )
            orig_spans = _mention_sentences(original_text[cid], abn, lexicon)
            new_text, replacement = _alter_text(current_text[cid], abn, mode, lexicon)
            current_text[cid] = new_text
            records.append(
                ErrorRecord(
                    case_id=cid,
                    abnormality=abn,
                    mode=mode,
                    original_sentence_span=orig_spans[0] if orig_spans else (0, 0),
                    altered_text=replacement,
                )
            )

    altered = [
        c if current_text[c.case_id] == c.report.text else c.with_report_text(current_text[c.case_id])
        for c in cases
    ]
    for record in records:
        if not verify_injection(by_id[record.case_id].ground_truth.labels,
                                current_text[record.case_id], record, lexicon):
            raise SpecificationError(
                f"injection audit failed for {record.case_id}/{record.abnormality.value}"
            )
    return altered, records


def verify_injection(
    ground_truth_labels,
    altered_text: str,
    record: ErrorRecord,
    lexicon: Lexicon | None = None,
) -> bool:
    """Audit one record: the abnormality left the report but is present in ground truth."""
    lexicon = lexicon or default_lexicon()
    labels = extract_labels(altered_text, lexicon) if altered_text.strip() else set()
    return record.abnormality not in labels and record.abnormality in ground_truth_labels
