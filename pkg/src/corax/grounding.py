"""Temporal grounding: assign a gaze-time interval to each abnormality.

Two deterministic grounders stand behind one output contract:

* dwell grounding slides a fixed window over the scanpath and scores each
  window by anatomical-prior dwell, keeping the best window per label;
* transcript grounding reads word-aligned dictation and takes the first
  non-negated phrase mention, padded to absorb gaze/speech misalignment.

A label with no evidence is omitted (abstention); downstream that becomes
a deferral, which is the conservative failure mode.
"""

from __future__ import annotations

from dataclasses import dataclass

from corax.errors import ConfigurationError, EmptyInputError, ParameterError
from corax.gaze import Scanpath
from corax.labeling import NEGATION_WINDOW_TOKENS, Abnormality, Lexicon, default_lexicon
from corax.priors import PriorAtlas

DEFAULT_WINDOW_MS = 2000.0
DEFAULT_STRIDE_MS = 250.0
TRANSCRIPT_PAD_MS = 500.0


@dataclass(frozen=True)
class GroundedFinding:
    abnormality: Abnormality
    t_start_ms: float
    t_end_ms: float
    score: float

    def __post_init__(self):
        if self.t_start_ms >= self.t_end_ms:
            raise ParameterError(
                f"grounded interval [{self.t_start_ms}, {self.t_end_ms}] is empty"
            )
        if self.score < 0:
            raise ParameterError("dwell score cannot be negative")

    @property
    def interval(self) -> tuple[float, float]:
        return (self.t_start_ms, self.t_end_ms)


@dataclass(frozen=True)
class WordAlignment:
    word: str
    t_start_ms: float
    t_end_ms: float

    def __post_init__(self):
        if self.t_start_ms < 0 or self.t_end_ms < self.t_start_ms:
            raise ParameterError(
                f"word interval [{self.t_start_ms}, {self.t_end_ms}] invalid"
            )


def window_starts(total_ms: float, window_ms: float, stride_ms: float) -> list[float]:
    """Window start times: multiples of the stride whose window fits in the scan.

    When the scan is shorter than one window, the single window [0, total]
    is used instead.
    """
    starts = []
    k = 0
    while k * stride_ms + window_ms <= total_ms:
        starts.append(k * stride_ms)
        k += 1
    return starts


def dwell_window_score(
    scan: Scanpath,
    prior,
    win_start: float,
    win_end: float,
) -> float:
    """Sum of duration x prior-value over fixations intersecting the window."""
    score = 0.0
    for fix in scan.fixations:
        if fix.intersects(win_start, win_end):
            score += fix.duration_ms * prior.value_at(fix.x_norm, fix.y_norm)
    return score


def ground_by_dwell(
    labels: set[Abnormality],
    scan: Scanpath,
    priors: PriorAtlas,
    window_ms: float = DEFAULT_WINDOW_MS,
    stride_ms: float = DEFAULT_STRIDE_MS,
) -> list[GroundedFinding]:
    """Best dwell window per label; zero-dwell labels are omitted."""
    if window_ms <= 0 or stride_ms <= 0:
        raise ParameterError("window_ms and stride_ms must be positive")
    missing = [a.value for a in labels if a not in priors]
    if missing:
        raise ConfigurationError(f"no anatomical prior for: {', '.join(sorted(missing))}")

    starts = window_starts(scan.total_duration_ms, window_ms, stride_ms)
    windows = (
        [(s, s + window_ms) for s in starts]
        if starts
        else [(0.0, scan.total_duration_ms)]
    )

    findings = []
    for abn in sorted(labels, key=lambda a: a.value):
        prior = priors[abn]
        best_score = 0.0
        best_window = None
        for win in windows:
            score = dwell_window_score(scan, prior, win[0], win[1])
            if score > best_score:  # strict: ties keep the earliest window
                best_score = score
                best_window = win
        if best_window is not None:
            findings.append(
                GroundedFinding(
                    abnormality=abn,
                    t_start_ms=best_window[0],
                    t_end_ms=min(best_window[1], scan.total_duration_ms),
                    score=best_score,
                )
            )
    return findings


def _norm_word(word: str) -> str:
    return word.strip(".,;:!?()").lower()


def _negated_in_stream(
    raw_words: list[str],
    tokens: list[str],
    mention_start: int,
    cues: tuple[str, ...],
) -> bool:
    """Token-window negation over a word stream.

    A cue's scope ends at a sentence boundary: any word ending with '.'
    between the cue and the mention (inclusive of the cue's last word)
    breaks it, matching the per-sentence labeler.
    """
    for cue in cues:
        cue_words = cue.split()
        n = len(cue_words)
        for c0 in range(max(0, mention_start - NEGATION_WINDOW_TOKENS - n + 1), mention_start):
            c_last = c0 + n - 1
            if c_last >= mention_start:
                break
            if tokens[c0:c0 + n] != cue_words:
                continue
            if not 1 <= mention_start - c_last <= NEGATION_WINDOW_TOKENS:
                continue
            if any(raw_words[j].endswith(".") for j in range(c_last, mention_start)):
                continue
            return True
    return False


def ground_by_transcript(
    labels: set[Abnormality],
    words: list[WordAlignment],
    total_duration_ms: float,
    lexicon: Lexicon | None = None,
    pad_ms: float = TRANSCRIPT_PAD_MS,
) -> list[GroundedFinding]:
    """First non-negated phrase mention per label, padded and clamped.

    This is the ground-truth grounder used in evaluation; labels never
    mentioned in the dictation are omitted.
    """
    if not words:
        raise EmptyInputError("transcript has no words")
    lexicon = lexicon or default_lexicon()
    raw = [w.word for w in words]
    tokens = [_norm_word(w.word) for w in words]

    findings = []
    for abn in sorted(labels, key=lambda a: a.value):
        hit = None
        for phrase in lexicon.phrases[abn]:
            phrase_words = phrase.split()
            n = len(phrase_words)
            for i in range(0, len(tokens) - n + 1):
                if tokens[i:i + n] == phrase_words and not _negated_in_stream(
                    raw, tokens, i, lexicon.negation_cues
                ):
                    if hit is None or i < hit[0]:
                        hit = (i, i + n - 1)
                    break
        if hit is None:
            continue
        first, last = hit
        t0 = max(0.0, words[first].t_start_ms - pad_ms)
        t1 = min(total_duration_ms, words[last].t_end_ms + pad_ms)
        if t1 <= t0:
            continue
        findings.append(
            GroundedFinding(abnormality=abn, t_start_ms=t0, t_end_ms=t1, score=1.0)
        )
    return findings


def temporal_iou(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Intersection over union of two time intervals, in [0, 1]."""
    if a[0] >= a[1] or b[0] >= b[1]:
        raise ParameterError("temporal_iou requires non-empty intervals")
    inter = min(a[1], b[1]) - max(a[0], b[0])
    if inter <= 0:
        return 0.0
    union = max(a[1], b[1]) - min(a[0], b[0])
    return inter / union
