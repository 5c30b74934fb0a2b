"""Case bundle schema, validation, and (de)serialization.

One JSON document per case. The image is carried either as a relative
PNG/PGM path (file-based bundles) or embedded base64, exactly one of the
two. Validation reports the offending field path, e.g.
``scanpath.fixations[3].x_norm``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from corax.errors import ValidationError
from corax.gaze import BinaryMask, Fixation, Scanpath
from corax.grounding import WordAlignment
from corax.images import decode_b64, encode_b64, read_image, write_png
from corax.labeling import Abnormality, Report


@dataclass(frozen=True)
class EllipseShape:
    cx: float
    cy: float
    rx: float
    ry: float

    def contains(self, x: float, y: float) -> bool:
        return ((x - self.cx) / self.rx) ** 2 + ((y - self.cy) / self.ry) ** 2 <= 1.0

    def to_doc(self) -> dict:
        return {"kind": "ellipse", "cx": self.cx, "cy": self.cy, "rx": self.rx, "ry": self.ry}


@dataclass(frozen=True)
class RectShape:
    x: float
    y: float
    w: float
    h: float

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h

    def to_doc(self) -> dict:
        return {"kind": "rect", "x": self.x, "y": self.y, "w": self.w, "h": self.h}


Shape = EllipseShape | RectShape


@dataclass(frozen=True)
class Region:
    abnormality: Abnormality
    shape: Shape


@dataclass(frozen=True)
class GroundTruth:
    labels: frozenset[Abnormality]
    regions: tuple[Region, ...]

    def regions_for(self, abn: Abnormality) -> tuple[Region, ...]:
        return tuple(r for r in self.regions if r.abnormality == abn)


@dataclass(frozen=True)
class CaseBundle:
    case_id: str
    image: np.ndarray
    scanpath: Scanpath
    report: Report
    transcript: tuple[WordAlignment, ...] | None
    ground_truth: GroundTruth

    def with_report_text(self, text: str) -> "CaseBundle":
        return CaseBundle(
            case_id=self.case_id,
            image=self.image,
            scanpath=self.scanpath,
            report=Report(case_id=self.case_id, text=text),
            transcript=self.transcript,
            ground_truth=self.ground_truth,
        )


def rasterize_regions(
    regions: tuple[Region, ...] | list[Region], width: int, height: int
) -> BinaryMask:
    """Union of region shapes sampled at pixel centers."""
    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / height
    gx, gy = np.meshgrid(xs, ys)
    mask = np.zeros((height, width), dtype=bool)
    for region in regions:
        s = region.shape
        if isinstance(s, EllipseShape):
            mask |= ((gx - s.cx) / s.rx) ** 2 + ((gy - s.cy) / s.ry) ** 2 <= 1.0
        else:
            mask |= (gx >= s.x) & (gx <= s.x + s.w) & (gy >= s.y) & (gy <= s.y + s.h)
    return BinaryMask(width=width, height=height, mask=mask)


def _req(doc: dict, key: str, path: str):
    if key not in doc:
        raise ValidationError(f"{path}.{key}" if path else key, "missing required field")
    return doc[key]


def _num(value, path: str, lo=None, hi=None) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(path, f"expected a number, got {type(value).__name__}")
    v = float(value)
    if lo is not None and v < lo:
        raise ValidationError(path, f"value {v} below minimum {lo}")
    if hi is not None and v > hi:
        raise ValidationError(path, f"value {v} above maximum {hi}")
    return v


def _abnormality(value, path: str) -> Abnormality:
    try:
        return Abnormality(value)
    except ValueError:
        raise ValidationError(path, f"unknown abnormality {value!r}") from None


def _parse_shape(doc: dict, path: str) -> Shape:
    kind = _req(doc, "kind", path)
    if kind == "ellipse":
        rx = _num(_req(doc, "rx", path), f"{path}.rx", lo=0.0, hi=1.0)
        ry = _num(_req(doc, "ry", path), f"{path}.ry", lo=0.0, hi=1.0)
        if rx == 0 or ry == 0:
            raise ValidationError(path, "ellipse radii must be positive")
        return EllipseShape(
            cx=_num(_req(doc, "cx", path), f"{path}.cx", lo=0.0, hi=1.0),
            cy=_num(_req(doc, "cy", path), f"{path}.cy", lo=0.0, hi=1.0),
            rx=rx,
            ry=ry,
        )
    if kind == "rect":
        x = _num(_req(doc, "x", path), f"{path}.x", lo=0.0, hi=1.0)
        y = _num(_req(doc, "y", path), f"{path}.y", lo=0.0, hi=1.0)
        w = _num(_req(doc, "w", path), f"{path}.w", lo=0.0, hi=1.0)
        h = _num(_req(doc, "h", path), f"{path}.h", lo=0.0, hi=1.0)
        if w == 0 or h == 0:
            raise ValidationError(path, "rect extent must be positive")
        if x + w > 1.0 + 1e-9 or y + h > 1.0 + 1e-9:
            raise ValidationError(path, "rect escapes the unit square")
        return RectShape(x=x, y=y, w=w, h=h)
    raise ValidationError(f"{path}.kind", f"unknown shape kind {kind!r}")


def parse_bundle(doc: dict, base_dir: Path | None = None) -> CaseBundle:
    """Validate a bundle document and construct the typed CaseBundle."""
    if not isinstance(doc, dict):
        raise ValidationError("", "bundle must be a JSON object")
    case_id = _req(doc, "case_id", "")
    if not isinstance(case_id, str) or not case_id:
        raise ValidationError("case_id", "must be a non-empty string")

    has_b64 = "image_b64" in doc
    has_path = "image_path" in doc
    if has_b64 == has_path:
        raise ValidationError(
            "image_b64", "exactly one of image_b64 / image_path must be present"
        )
    if has_b64:
        image = read_image(decode_b64(doc["image_b64"]))
    else:
        if base_dir is None:
            raise ValidationError(
                "image_path", "relative image paths need a bundle directory; embed image_b64"
            )
        image = read_image((base_dir / doc["image_path"]).read_bytes())

    scan_doc = _req(doc, "scanpath", "")
    fixations = []
    fix_docs = _req(scan_doc, "fixations", "scanpath")
    if not isinstance(fix_docs, list):
        raise ValidationError("scanpath.fixations", "must be a list")
    prev_end = -1.0
    for i, f in enumerate(fix_docs):
        p = f"scanpath.fixations[{i}]"
        x = _num(_req(f, "x_norm", p), f"{p}.x_norm", lo=0.0, hi=1.0)
        y = _num(_req(f, "y_norm", p), f"{p}.y_norm", lo=0.0, hi=1.0)
        start = _num(_req(f, "start_ms", p), f"{p}.start_ms", lo=0.0)
        end = _num(_req(f, "end_ms", p), f"{p}.end_ms")
        if end <= start:
            raise ValidationError(f"{p}.end_ms", "fixation duration must be positive")
        if start < prev_end:
            raise ValidationError(f"{p}.start_ms", "fixations overlap the previous one")
        prev_end = end
        fixations.append(Fixation(x_norm=x, y_norm=y, start_ms=start, end_ms=end))
    total = _num(_req(scan_doc, "total_duration_ms", "scanpath"), "scanpath.total_duration_ms", lo=0.0)
    if fixations and total < fixations[-1].end_ms:
        raise ValidationError(
            "scanpath.total_duration_ms", "shorter than the last fixation end"
        )
    scanpath = Scanpath(case_id=case_id, fixations=tuple(fixations), total_duration_ms=total)

    report_doc = _req(doc, "report", "")
    text = _req(report_doc, "text", "report")
    if not isinstance(text, str):
        raise ValidationError("report.text", "must be a string")
    report = Report(case_id=case_id, text=text)

    transcript = None
    if doc.get("transcript") is not None:
        words = []
        for i, w in enumerate(doc["transcript"]):
            p = f"transcript[{i}]"
            word = _req(w, "word", p)
            t0 = _num(_req(w, "t_start_ms", p), f"{p}.t_start_ms", lo=0.0)
            t1 = _num(_req(w, "t_end_ms", p), f"{p}.t_end_ms", lo=0.0)
            if t1 < t0:
                raise ValidationError(f"{p}.t_end_ms", "word interval reversed")
            words.append(WordAlignment(word=word, t_start_ms=t0, t_end_ms=t1))
        transcript = tuple(words)

    gt_doc = _req(doc, "ground_truth", "")
    labels = frozenset(
        _abnormality(v, f"ground_truth.labels[{i}]")
        for i, v in enumerate(_req(gt_doc, "labels", "ground_truth"))
    )
    regions = []
    for i, r in enumerate(gt_doc.get("regions", [])):
        p = f"ground_truth.regions[{i}]"
        abn = _abnormality(_req(r, "abnormality", p), f"{p}.abnormality")
        if abn not in labels:
            raise ValidationError(
                f"{p}.abnormality", f"{abn.value} not in ground_truth.labels"
            )
        regions.append(Region(abnormality=abn, shape=_parse_shape(_req(r, "shape", p), f"{p}.shape")))

    return CaseBundle(
        case_id=case_id,
        image=image,
        scanpath=scanpath,
        report=report,
        transcript=transcript,
        ground_truth=GroundTruth(labels=labels, regions=tuple(regions)),
    )


def bundle_to_doc(bundle: CaseBundle) -> dict:
    """Self-contained bundle document (image embedded as base64 PNG)."""
    doc: dict = {
        "case_id": bundle.case_id,
        "image_b64": encode_b64(write_png(bundle.image)),
        "scanpath": {
            "total_duration_ms": bundle.scanpath.total_duration_ms,
            "fixations": [
                {
                    "start_ms": f.start_ms,
                    "end_ms": f.end_ms,
                    "x_norm": f.x_norm,
                    "y_norm": f.y_norm,
                }
                for f in bundle.scanpath.fixations
            ],
        },
        "report": {"text": bundle.report.text},
        "ground_truth": {
            "labels": sorted(a.value for a in bundle.ground_truth.labels),
            "regions": [
                {"abnormality": r.abnormality.value, "shape": r.shape.to_doc()}
                for r in bundle.ground_truth.regions
            ],
        },
    }
    if bundle.transcript is not None:
        doc["transcript"] = [
            {"word": w.word, "t_start_ms": w.t_start_ms, "t_end_ms": w.t_end_ms}
            for w in bundle.transcript
        ]
    return doc


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def content_hash(doc: dict) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def load_bundle_file(path: str | Path) -> CaseBundle:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    return parse_bundle(doc, base_dir=path.parent)


def save_bundle_file(bundle: CaseBundle, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(bundle_to_doc(bundle), indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
