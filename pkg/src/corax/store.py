"""Append-only event log plus in-memory state.

All mutations are serialized through one writer lock and become events in
``events.jsonl``; startup replays the log to reconstruct state, so the
whole human loop is auditable for free. Analysis results are stored as
event payloads (never recomputed on replay); ROI rasters are a disk cache
derived deterministically from case + interval and are not state.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from corax.bundles import CaseBundle, bundle_to_doc, canonical_json, content_hash, parse_bundle
from corax.errors import ConflictError, CoraxError, StateError
from corax.gaze import HeatmapFrame
from corax.images import frame_to_u8, write_png
from corax.labeling import Abnormality
from corax.metrics import MetricsReport, build_report
from corax.oracle import OracleBackend
from corax.referral import (
    CaseAnalysis,
    Decision,
    GrounderConfig,
    Referral,
    ReferralStatus,
    RoiMode,
    analyze_case,
    build_roi,
)

EVENT_KINDS = ("CaseIngested", "CaseAnalyzed", "ReferralDecided", "DatasetGenerated")


@dataclass
class StoredReferral:
    referral_id: str
    case_id: str
    abnormality: Abnormality
    interval: tuple[float, float]
    roi_mode: RoiMode
    status: ReferralStatus = ReferralStatus.PENDING
    actor: str | None = None
    decided_at: str | None = None

    def to_doc(self) -> dict:
        return {
            "referral_id": self.referral_id,
            "case_id": self.case_id,
            "abnormality": self.abnormality.value,
            "interval": {"t_start_ms": self.interval[0], "t_end_ms": self.interval[1]},
            "roi_mode": self.roi_mode.value,
            "status": self.status.value,
            "actor": self.actor,
            "decided_at": self.decided_at,
            "roi_url": f"/referrals/{self.referral_id}/roi.png",
        }


class CaseStore:
    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.data_dir / "events.jsonl"
        self.roi_dir = self.data_dir / "rois"
        self._lock = threading.Lock()
        self._seq = 0

        self.bundles: dict[str, CaseBundle] = {}
        self.bundle_hashes: dict[str, str] = {}
        self.analyses: dict[str, dict] = {}  # case_id -> CaseAnalyzed payload
        self.referrals: dict[str, StoredReferral] = {}

        if self.log_path.exists():
            self._replay()

    # ----- event machinery -------------------------------------------------

    def _replay(self) -> None:
        with self.log_path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event["seq"] != self._seq + 1:
                    raise StateError(
                        f"event log gap: expected seq {self._seq + 1}, got {event['seq']}"
                    )
                self._seq = event["seq"]
                self._apply(event)

    def _append(self, kind: str, payload: dict) -> dict:
        event = {
            "seq": self._seq + 1,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "kind": kind,
            "payload": payload,
        }
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
        self._seq = event["seq"]
        self._apply(event)
        return event

    def _apply(self, event: dict) -> None:
        kind = event["kind"]
        payload = event["payload"]
        if kind == "CaseIngested":
            bundle = parse_bundle(payload["bundle"])
            self.bundles[bundle.case_id] = bundle
            self.bundle_hashes[bundle.case_id] = payload["content_hash"]
        elif kind == "CaseAnalyzed":
            self.analyses[payload["case_id"]] = payload
            for rd in payload["analysis"]["referrals"]:
                self.referrals[rd["referral_id"]] = StoredReferral(
                    referral_id=rd["referral_id"],
                    case_id=rd["case_id"],
                    abnormality=Abnormality(rd["abnormality"]),
                    interval=(rd["interval"]["t_start_ms"], rd["interval"]["t_end_ms"]),
                    roi_mode=RoiMode(rd["roi_mode"]),
                )
        elif kind == "ReferralDecided":
            ref = self.referrals[payload["referral_id"]]
            ref.status = ReferralStatus(payload["status"])
            ref.actor = payload["actor"]
            ref.decided_at = payload["decided_at"]
        elif kind == "DatasetGenerated":
            pass  # provenance only
        else:
            raise StateError(f"unknown event kind {kind!r}")

    # ----- mutations --------------------------------------------------------

    def ingest(self, doc: dict) -> tuple[str, bool]:
        """Validate and persist a bundle. Idempotent on identical content."""
        bundle = parse_bundle(doc)
        normalized = bundle_to_doc(bundle)
        digest = content_hash(normalized)
        with self._lock:
            existing = self.bundle_hashes.get(bundle.case_id)
            if existing is not None:
                if existing == digest:
                    return bundle.case_id, False
                raise ConflictError(
                    f"case {bundle.case_id} already ingested with different content"
                )
            self._append(
                "CaseIngested",
                {"case_id": bundle.case_id, "content_hash": digest, "bundle": normalized},
            )
        return bundle.case_id, True

    def analyze(
        self,
        case_id: str,
        backend: OracleBackend,
        grounder: GrounderConfig,
        roi_mode: RoiMode,
    ) -> dict:
        """Run the pipeline for one case. Re-analysis returns the stored result."""
        with self._lock:
            if case_id not in self.bundles:
                raise KeyError(case_id)
            if case_id in self.analyses:
                return self.analyses[case_id]["analysis"]
            analysis = analyze_case(self.bundles[case_id], backend, grounder, roi_mode)
            payload = {
                "case_id": case_id,
                "roi_mode": roi_mode.value,
                "backend": backend.provenance(),
                "grounder": grounder.provenance(),
                "analysis": analysis.to_doc(with_roi_url=True),
            }
            self._append("CaseAnalyzed", payload)
        return payload["analysis"]

    def decide(self, referral_id: str, decision: Decision, actor: str) -> StoredReferral:
        with self._lock:
            if referral_id not in self.referrals:
                raise KeyError(referral_id)
            ref = self.referrals[referral_id]
            if ref.status is not ReferralStatus.PENDING:
                raise StateError(f"referral {referral_id} already {ref.status.value}")
            status = (
                ReferralStatus.ACCEPTED
                if decision is Decision.ACCEPT
                else ReferralStatus.REJECTED
            )
            self._append(
                "ReferralDecided",
                {
                    "referral_id": referral_id,
                    "status": status.value,
                    "actor": actor,
                    "decided_at": datetime.now(timezone.utc).isoformat(),
                },
            )
        return self.referrals[referral_id]

    # ----- reads ------------------------------------------------------------

    def list_referrals(self, status: ReferralStatus | None = None) -> list[StoredReferral]:
        refs = sorted(self.referrals.values(), key=lambda r: r.referral_id)
        if status is None:
            return refs
        return [r for r in refs if r.status is status]

    def case_referrals(self, case_id: str) -> list[StoredReferral]:
        if case_id not in self.bundles:
            raise KeyError(case_id)
        return [r for r in self.list_referrals() if r.case_id == case_id]

    def roi_frame(self, referral_id: str, mode: RoiMode | None = None) -> HeatmapFrame:
        ref = self.referrals[referral_id]
        return build_roi(self.bundles[ref.case_id], ref.interval, mode or ref.roi_mode)

    def roi_png(self, referral_id: str, mode: RoiMode | None = None) -> bytes:
        """ROI raster, lazily built and cached per rendering mode."""
        if referral_id not in self.referrals:
            raise KeyError(referral_id)
        effective = mode or self.referrals[referral_id].roi_mode
        cached = self.roi_dir / f"{referral_id}.{effective.value}.png"
        if cached.exists():
            return cached.read_bytes()
        png = write_png(frame_to_u8(self.roi_frame(referral_id, effective)))
        self.roi_dir.mkdir(parents=True, exist_ok=True)
        cached.write_bytes(png)
        return png

    def _rebuild_analysis(self, case_id: str) -> CaseAnalysis:
        """Typed analysis with live Referral objects (ROIs rematerialized)."""
        payload = self.analyses[case_id]
        doc = payload["analysis"]
        case = self.bundles[case_id]
        referrals = []
        for rd in doc["referrals"]:
            stored = self.referrals[rd["referral_id"]]
            referrals.append(
                Referral(
                    referral_id=stored.referral_id,
                    case_id=case_id,
                    abnormality=stored.abnormality,
                    interval=stored.interval,
                    roi=build_roi(case, stored.interval, stored.roi_mode),
                    roi_mode=stored.roi_mode,
                    status=stored.status,
                    actor=stored.actor,
                )
            )
        return CaseAnalysis(
            case_id=case_id,
            set_a={Abnormality(v) for v in doc["set_a"]},
            set_b={Abnormality(v) for v in doc["set_b"]},
            grounded=[],
            referrals=referrals,
        )

    def metrics_report(self) -> tuple[MetricsReport | None, int]:
        """Report over every fully decided case; returns the pending count too."""
        pending = sum(
            1 for r in self.referrals.values() if r.status is ReferralStatus.PENDING
        )
        ready = []
        for case_id in sorted(self.analyses):
            refs = [r for r in self.referrals.values() if r.case_id == case_id]
            if all(r.status is not ReferralStatus.PENDING for r in refs):
                ready.append(self._rebuild_analysis(case_id))
        if not ready:
            return None, pending
        report = build_report(
            cases=self.bundles,
            analyses=ready,
            provenance={"source": "service", "decided_cases": len(ready)},
        )
        return report, pending

    def snapshot(self) -> str:
        """Canonical JSON of the reconstructible state, for replay comparison."""
        state = {
            "seq": self._seq,
            "cases": dict(sorted(self.bundle_hashes.items())),
            "analyses": {k: self.analyses[k] for k in sorted(self.analyses)},
            "referrals": {
                k: {
                    "status": r.status.value,
                    "actor": r.actor,
                    "decided_at": r.decided_at,
                }
                for k, r in sorted(self.referrals.items())
            },
        }
        return canonical_json(state)
