"""Rule-based report labeling with negation handling.

A report is summarized into the set of target abnormalities that have at
least one non-negated phrase mention. Phrase dictionaries and negation
cues live in a JSON file (corax/data/phrases.json by default) so the
vocabulary can grow without code changes. Consolidation and pneumonia
mentions collapse into lung opacity; the consolidation label itself ships
disabled.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

from corax.errors import AlreadyPresentError, EmptyInputError, ParameterError


class Abnormality(str, Enum):
    CARDIOMEGALY = "cardiomegaly"
    PLEURAL_EFFUSION = "pleural_effusion"
    ATELECTASIS = "atelectasis"
    LUNG_OPACITY = "lung_opacity"
    EDEMA = "edema"
    CONSOLIDATION = "consolidation"


# Consolidation stays out of the default label set; its mentions fold into
# lung opacity via the phrase table.
ACTIVE_LABELS: tuple[Abnormality, ...] = (
    Abnormality.CARDIOMEGALY,
    Abnormality.PLEURAL_EFFUSION,
    Abnormality.ATELECTASIS,
    Abnormality.LUNG_OPACITY,
    Abnormality.EDEMA,
)

NEGATION_WINDOW_TOKENS = 5


@dataclass(frozen=True)
class Lexicon:
    """Phrase dictionary: per-abnormality mention phrases, canonical phrase, cues."""

    phrases: dict[Abnormality, tuple[str, ...]]
    canonical: dict[Abnormality, str]
    negation_cues: tuple[str, ...]

    @classmethod
    def from_dict(cls, doc: dict) -> "Lexicon":
        phrases: dict[Abnormality, tuple[str, ...]] = {}
        canonical: dict[Abnormality, str] = {}
        for name, entry in doc["abnormalities"].items():
            abn = Abnormality(name)
            phrases[abn] = tuple(p.lower() for p in entry["phrases"])
            canonical[abn] = entry["canonical"].lower()
        return cls(
            phrases=phrases,
            canonical=canonical,
            negation_cues=tuple(c.lower() for c in doc["negation_cues"]),
        )

    @classmethod
    def from_file(cls, path) -> "Lexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon:
    text = resources.files("corax").joinpath("data/phrases.json").read_text("utf-8")
    return Lexicon.from_dict(json.loads(text))


def sentence_spans(text: str) -> tuple[tuple[int, int], ...]:
    """Character spans of '.'-delimited sentences, trimmed of whitespace.

    Spans are ordered, non-overlapping, and jointly cover every
    non-whitespace character. The terminating period stays inside its span.
    """
    raw: list[tuple[int, int]] = []
    start = 0
    for i, ch in enumerate(text):
        if ch == ".":
            raw.append((start, i + 1))
            start = i + 1
    if start < len(text):
        raw.append((start, len(text)))
    spans = []
    for a, b in raw:
        while a < b and text[a].isspace():
            a += 1
        while b > a and text[b - 1].isspace():
            b -= 1
        if a < b:
            spans.append((a, b))
    return tuple(spans)


@dataclass(frozen=True)
class Report:
    """Free-text report plus its sentence segmentation."""

    case_id: str
    text: str

    @property
    def sentences(self) -> tuple[tuple[int, int], ...]:
        return sentence_spans(self.text)


_token_re = re.compile(r"\S+")


def _tokens(sentence: str) -> list[tuple[str, int, int]]:
    out = []
    for m in _token_re.finditer(sentence):
        word = m.group().strip(".,;:!?()").lower()
        out.append((word, m.start(), m.end()))
    return out


def detect_negation(
    sentence: str,
    mention: tuple[int, int],
    cues: tuple[str, ...] | None = None,
) -> bool:
    """True iff a negation cue ends within 5 tokens before the mention.

    ``mention`` is a character span inside ``sentence``. Cues may span
    multiple tokens ("free of"); scope is strictly pre-mention.
    """
    if cues is None:
        cues = default_lexicon().negation_cues
    m_start, m_end = mention
    if not (0 <= m_start < m_end <= len(sentence)):
        raise ParameterError(f"mention span {mention} outside sentence")
    toks = _tokens(sentence)
    mention_tok = None
    for idx, (_, a, b) in enumerate(toks):
        if a <= m_start < b or (a >= m_start and b <= m_end):
            mention_tok = idx
            break
    if mention_tok is None:
        return False
    words = [t[0] for t in toks]
    for cue in cues:
        cue_words = cue.split()
        n = len(cue_words)
        for c0 in range(0, mention_tok):
            c_last = c0 + n - 1
            if c_last >= mention_tok:
                break
            if words[c0:c0 + n] == cue_words:
                if 1 <= mention_tok - c_last <= NEGATION_WINDOW_TOKENS:
                    return True
    return False


def _phrase_pattern(phrase: str) -> re.Pattern:
    parts = [re.escape(w) for w in phrase.split()]
    return re.compile(r"\b" + r"\s+".join(parts) + r"\b", re.IGNORECASE)


@lru_cache(maxsize=256)
def _compiled(phrase: str) -> re.Pattern:
    return _phrase_pattern(phrase)


def find_mentions(
    sentence: str, abn: Abnormality, lexicon: Lexicon
) -> list[tuple[int, int]]:
    spans = []
    for phrase in lexicon.phrases[abn]:
        for m in _compiled(phrase).finditer(sentence):
            spans.append((m.start(), m.end()))
    return spans


def extract_labels(
    report: Report | str,
    lexicon: Lexicon | None = None,
    labels: tuple[Abnormality, ...] = ACTIVE_LABELS,
) -> set[Abnormality]:
    """Abnormalities with at least one non-negated mention in the report."""
    text = report.text if isinstance(report, Report) else report
    if not text.strip():
        raise EmptyInputError("report text is empty")
    lexicon = lexicon or default_lexicon()
    found: set[Abnormality] = set()
    for a, b in sentence_spans(text):
        sentence = text[a:b]
        for abn in labels:
            if abn in found:
                continue
            for span in find_mentions(sentence, abn, lexicon):
                if not detect_negation(sentence, span, lexicon.negation_cues):
                    found.add(abn)
                    break
    return found


def append_finding(
    report: Report, abn: Abnormality, lexicon: Lexicon | None = None
) -> Report:
    """Return a new report with the canonical sentence for ``abn`` appended."""
    lexicon = lexicon or default_lexicon()
    existing = extract_labels(report, lexicon) if report.text.strip() else set()
    if abn in existing:
        raise AlreadyPresentError(f"report already asserts {abn.value}")
    sentence = f"{lexicon.canonical[abn]}."
    if report.text.strip():
        base = report.text.rstrip()
        new_text = f"{base} {sentence}" if base.endswith(".") else f"{base}. {sentence}"
    else:
        new_text = sentence
    return Report(case_id=report.case_id, text=new_text)


def negated_sentence(abn: Abnormality, lexicon: Lexicon | None = None) -> str:
    """Canonical negation rewrite, guaranteed to drop the label on re-extraction."""
    lexicon = lexicon or default_lexicon()
    return f"no {lexicon.canonical[abn]}."
