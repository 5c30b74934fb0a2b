"""Synthetic desk-scale case generator.

Each generated case is internally consistent: the report is assembled
from labeler vocabulary (so re-extracting labels returns exactly the
planted ground truth), the transcript word-aligns every report sentence,
and the scanpath dwells inside the planted region during that label's
sentence window. Region shapes sit inside their label's anatomical prior,
so dwell grounding can genuinely recover the dictation windows.

Sentence dwell windows are 2300-2900 ms with padded filler on both sides,
which keeps the best fixed-size dwell window nested inside the padded
transcript interval (temporal IoU >= 0.51 by construction).

Filler gaze visits off-prior rest points but wanders uniformly over the
image a quarter of the time, which is what makes the prior-dwell backend
realistically noisy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from corax.bundles import CaseBundle, EllipseShape, GroundTruth, Region, save_bundle_file
from corax.errors import ParameterError
from corax.gaze import Fixation, Scanpath
from corax.grounding import WordAlignment
from corax.images import write_png
from corax.labeling import ACTIVE_LABELS, Abnormality, Report, extract_labels

# Region anchor points and radii ranges, chosen to sit inside the label's
# own prior while staying clear of the other labels' region anchors.
_REGION_GEOMETRY: dict[Abnormality, dict] = {
    Abnormality.CARDIOMEGALY: {
        "anchors": [(0.55, 0.70)],
        "jitter": 0.02,
        "rx": (0.08, 0.10),
        "ry": (0.07, 0.09),
    },
    Abnormality.PLEURAL_EFFUSION: {
        "anchors": [(0.25, 0.83), (0.78, 0.84)],
        "jitter": 0.015,
        "rx": (0.06, 0.09),
        "ry": (0.04, 0.06),
    },
    Abnormality.ATELECTASIS: {
        "anchors": [(0.25, 0.66), (0.75, 0.66)],
        "jitter": 0.015,
        "rx": (0.07, 0.10),
        "ry": (0.035, 0.05),
    },
    Abnormality.LUNG_OPACITY: {
        "anchors": [(0.22, 0.30), (0.80, 0.30), (0.20, 0.44), (0.82, 0.44)],
        "jitter": 0.015,
        "rx": (0.06, 0.09),
        "ry": (0.06, 0.09),
    },
    Abnormality.EDEMA: {
        "anchors": [(0.50, 0.38), (0.50, 0.44)],
        "jitter": 0.008,
        "rx": (0.040, 0.050),
        "ry": (0.05, 0.07),
    },
}

_SENTENCES: dict[Abnormality, list[str]] = {
    Abnormality.CARDIOMEGALY: [
        "cardiomegaly.",
        "mildly enlarged heart.",
        "moderate cardiomegaly.",
        "prominent heart.",
    ],
    Abnormality.PLEURAL_EFFUSION: [
        "pleural effusion.",
        "small pleural effusion.",
        "moderate pleural effusion.",
    ],
    Abnormality.ATELECTASIS: [
        "atelectasis.",
        "band of atelectasis.",
        "bibasilar atelectasis.",
    ],
    Abnormality.LUNG_OPACITY: [
        "patchy opacity.",
        "focal opacity.",
        "lung opacity.",
    ],
    Abnormality.EDEMA: [
        "mild edema.",
        "edema.",
        "interstitial edema.",
    ],
}

_BENIGN_SENTENCES = [
    "sternotomy wires.",
    "low lung volumes.",
    "prominent pulmonary vessels.",
    "stable appearance of the chest.",
    "midline sternotomy changes.",
    "degenerative changes of the spine.",
    "unremarkable mediastinal contour.",
]

_REST_POINTS = [(0.50, 0.06), (0.50, 0.96), (0.06, 0.50), (0.94, 0.50)]

_LABEL_WINDOW_MS = (2300.0, 2900.0)
_LEAD_FILLER_MS = (1500.0, 3000.0)
_GAP_MS = (800.0, 2000.0)
_TAIL_FILLER_MS = (1000.0, 2500.0)
_FIX_MS = (150.0, 450.0)
_SACCADE_MS = (0.0, 60.0)
_WANDER_P = 0.25
_STRAY_P = 0.10


@dataclass
class PlantedWindow:
    abnormality: Abnormality
    t_start_ms: float
    t_end_ms: float


@dataclass
class SynthCase:
    bundle: CaseBundle
    windows: list[PlantedWindow]


def _sample_region(rng: np.random.Generator, abn: Abnormality) -> EllipseShape:
    g = _REGION_GEOMETRY[abn]
    ax, ay = g["anchors"][rng.integers(len(g["anchors"]))]
    j = g["jitter"]
    return EllipseShape(
        cx=ax + rng.uniform(-j, j),
        cy=ay + rng.uniform(-j, j),
        rx=rng.uniform(*g["rx"]),
        ry=rng.uniform(*g["ry"]),
    )


def _point_in_ellipse(rng: np.random.Generator, e: EllipseShape) -> tuple[float, float]:
    theta = rng.uniform(0.0, 2.0 * math.pi)
    r = math.sqrt(rng.uniform(0.0, 1.0))
    x = e.cx + e.rx * r * math.cos(theta)
    y = e.cy + e.ry * r * math.sin(theta)
    return min(max(x, 0.0), 1.0), min(max(y, 0.0), 1.0)


def _rest_point(rng: np.random.Generator) -> tuple[float, float]:
    if rng.uniform() < _WANDER_P:
        return float(rng.uniform(0.02, 0.98)), float(rng.uniform(0.02, 0.98))
    px, py = _REST_POINTS[rng.integers(len(_REST_POINTS))]
    x = px + rng.uniform(-0.02, 0.02)
    y = py + rng.uniform(-0.02, 0.02)
    return min(max(x, 0.0), 1.0), min(max(y, 0.0), 1.0)


def _fill_fixations(
    rng: np.random.Generator,
    fixations: list[Fixation],
    t0: float,
    t1: float,
    locate,
) -> None:
    cursor = t0
    while cursor < t1 - 80.0:
        dur = rng.uniform(*_FIX_MS)
        end = min(cursor + dur, t1)
        if end - cursor < 80.0:
            break
        x, y = locate()
        fixations.append(Fixation(x_norm=x, y_norm=y, start_ms=cursor, end_ms=end))
        cursor = end + rng.uniform(*_SACCADE_MS)


def _spread_words(sentence: str, t0: float, t1: float) -> list[WordAlignment]:
    words = sentence.split()
    n = len(words)
    step = (t1 - t0) / n
    return [
        WordAlignment(word=w, t_start_ms=t0 + i * step, t_end_ms=t0 + (i + 1) * step)
        for i, w in enumerate(words)
    ]


def _render_image(
    rng: np.random.Generator, size: int, regions: list[EllipseShape]
) -> np.ndarray:
    ys = (np.arange(size) + 0.5) / size
    xs = (np.arange(size) + 0.5) / size
    gx, gy = np.meshgrid(xs, ys)
    img = 25.0 + 20.0 * (1.0 - ((gx - 0.5) ** 2 + (gy - 0.5) ** 2))
    for cx in (0.28, 0.72):  # lung fields
        img += 45.0 * np.exp(-(((gx - cx) / 0.17) ** 2 + ((gy - 0.48) / 0.33) ** 2))
    img += 25.0 * np.exp(-(((gx - 0.55) / 0.15) ** 2 + ((gy - 0.70) / 0.13) ** 2))
    for e in regions:
        img += 55.0 * np.exp(-(((gx - e.cx) / e.rx) ** 2 + ((gy - e.cy) / e.ry) ** 2))
    img += rng.normal(0.0, 5.0, size=(size, size))
    return np.clip(img, 0, 255).astype(np.uint8)


def generate_case(
    seed: int, index: int, labels: list[Abnormality], image_size: int = 128
) -> SynthCase:
    """Build one internally consistent case for the given planted labels."""
    rng = np.random.default_rng([seed, index])
    case_id = f"case-{index:04d}"

    regions = {abn: _sample_region(rng, abn) for abn in labels}
    order = list(labels)
    rng.shuffle(order)

    sentences: list[str] = []
    fixations: list[Fixation] = []
    words: list[WordAlignment] = []
    windows: list[PlantedWindow] = []

    cursor = 0.0
    lead = rng.uniform(*_LEAD_FILLER_MS)
    benign = _BENIGN_SENTENCES[rng.integers(len(_BENIGN_SENTENCES))]
    sentences.append(benign)
    words.extend(_spread_words(benign, cursor, cursor + lead))
    _fill_fixations(rng, fixations, cursor, cursor + lead, lambda: _rest_point(rng))
    cursor += lead

    for i, abn in enumerate(order):
        if i > 0:
            gap = rng.uniform(*_GAP_MS)
            _fill_fixations(rng, fixations, cursor, cursor + gap, lambda: _rest_point(rng))
            cursor += gap
        sentence = _SENTENCES[abn][rng.integers(len(_SENTENCES[abn]))]
        window = rng.uniform(*_LABEL_WINDOW_MS)
        region = regions[abn]

        def locate(region=region):
            if rng.uniform() < _STRAY_P:
                return _rest_point(rng)
            return _point_in_ellipse(rng, region)

        sentences.append(sentence)
        words.extend(_spread_words(sentence, cursor, cursor + window))
        _fill_fixations(rng, fixations, cursor, cursor + window, locate)
        windows.append(PlantedWindow(abnormality=abn, t_start_ms=cursor, t_end_ms=cursor + window))
        cursor += window

    tail = rng.uniform(*_TAIL_FILLER_MS)
    if rng.uniform() < 0.5:
        benign2 = _BENIGN_SENTENCES[rng.integers(len(_BENIGN_SENTENCES))]
        sentences.append(benign2)
        words.extend(_spread_words(benign2, cursor, cursor + tail))
    _fill_fixations(rng, fixations, cursor, cursor + tail, lambda: _rest_point(rng))
    cursor += tail

    total = cursor + rng.uniform(200.0, 600.0)
    report_text = " ".join(sentences)
    report = Report(case_id=case_id, text=report_text)

    extracted = extract_labels(report)
    if extracted != set(labels):
        raise ParameterError(
            f"{case_id}: report labels {sorted(a.value for a in extracted)} "
            f"do not match planted {sorted(a.value for a in labels)}"
        )

    bundle = CaseBundle(
        case_id=case_id,
        image=_render_image(rng, image_size, list(regions.values())),
        scanpath=Scanpath(case_id=case_id, fixations=tuple(fixations), total_duration_ms=total),
        report=report,
        transcript=tuple(words),
        ground_truth=GroundTruth(
            labels=frozenset(labels),
            regions=tuple(Region(abnormality=a, shape=regions[a]) for a in labels),
        ),
    )
    return SynthCase(bundle=bundle, windows=windows)


def assign_labels(
    n_cases: int,
    seed: int,
    positives: dict[Abnormality, int] | None = None,
    min_labels: int = 0,
) -> list[list[Abnormality]]:
    """Per-case label assignment.

    With explicit per-label positive counts, each label independently
    samples that many distinct cases (overlap gives multi-miss cases).
    Otherwise each case draws 0-3 labels, at least ``min_labels``.
    """
    assignment: list[list[Abnormality]] = [[] for _ in range(n_cases)]
    if positives is not None:
        for abn in ACTIVE_LABELS:
            count = positives.get(abn, 0)
            if count > n_cases:
                raise ParameterError(
                    f"{abn.value}: {count} positives requested from {n_cases} cases"
                )
            rng = np.random.default_rng([seed, 1000 + list(Abnormality).index(abn)])
            for idx in rng.choice(n_cases, size=count, replace=False):
                assignment[int(idx)].append(abn)
        return assignment

    rng = np.random.default_rng([seed, 7])
    weights = np.array([0.18, 0.38, 0.30, 0.14])
    for i in range(n_cases):
        k = int(rng.choice(4, p=weights))
        k = max(k, min_labels)
        picked = rng.choice(len(ACTIVE_LABELS), size=k, replace=False)
        assignment[i] = [ACTIVE_LABELS[int(j)] for j in sorted(picked)]
    return assignment


def generate_cases(
    n_cases: int,
    seed: int,
    positives: dict[Abnormality, int] | None = None,
    image_size: int = 128,
    min_labels: int = 0,
) -> list[SynthCase]:
    assignment = assign_labels(n_cases, seed, positives, min_labels)
    return [
        generate_case(seed, i, labels, image_size)
        for i, labels in enumerate(assignment)
    ]


def generate_dataset(
    out_dir: str | Path,
    n_cases: int,
    seed: int,
    positives: dict[Abnormality, int] | None = None,
    image_size: int = 128,
    min_labels: int = 0,
) -> dict:
    """Write a dataset directory: cases/*.json, images/*.png, manifest.json."""
    out = Path(out_dir)
    (out / "cases").mkdir(parents=True, exist_ok=True)
    (out / "images").mkdir(parents=True, exist_ok=True)

    cases = generate_cases(n_cases, seed, positives, image_size, min_labels)
    label_counts = {a.value: 0 for a in ACTIVE_LABELS}
    for sc in cases:
        b = sc.bundle
        (out / "images" / f"{b.case_id}.png").write_bytes(write_png(b.image))
        doc_path = out / "cases" / f"{b.case_id}.json"
        save_bundle_file(b, doc_path)
        # rewrite to the path-referencing form so images are not duplicated
        doc = json.loads(doc_path.read_text(encoding="utf-8"))
        del doc["image_b64"]
        doc["image_path"] = f"../images/{b.case_id}.png"
        doc_path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        for abn in b.ground_truth.labels:
            label_counts[abn.value] += 1

    manifest = {
        "cases": n_cases,
        "seed": seed,
        "image_size": image_size,
        "positives": label_counts,
        "total_positive_slots": sum(label_counts.values()),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def load_dataset(directory: str | Path) -> list[CaseBundle]:
    from corax.bundles import load_bundle_file

    case_dir = Path(directory) / "cases"
    if not case_dir.is_dir():
        raise ParameterError(f"{directory} has no cases/ subdirectory")
    return [load_bundle_file(p) for p in sorted(case_dir.glob("*.json"))]
