"""Acceptance suite.

Each test covers one numbered exit criterion, enforces its stated
tolerance and runtime budget, and prints one PASS/FAIL line.
"""

import json
import random
import socket
import threading
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import make_scanpath, random_scanpath
from corax.bundles import bundle_to_doc
from corax.errorsim import ErrorSpec, inject_errors
from corax.gaze import (
    HeatmapFrame,
    binarize,
    build_gaze_video,
    fixation_intensity,
    render_fixation_frame,
    roi_mean_image,
    static_heatmap_accumulation,
)
from corax.grounding import ground_by_dwell, temporal_iou
from corax.labeling import ACTIVE_LABELS, Abnormality
from corax.metrics import (
    BinaryMask,
    ConfusionCounts,
    build_report,
    ci_multiplier,
    empirical_cdf,
    exceedance_from_cdf,
    oder,
    pecr,
    referral_usefulness,
    spatial_iou,
    total_usefulness,
)
from corax.oracle import GroundTruthBackend
from corax.priors import default_atlas
from corax.referral import (
    CaseAnalysis,
    Decision,
    GrounderConfig,
    Referral,
    ReferralStatus,
    RoiMode,
    analyze_case,
    decide,
    simulated_decision,
)
from corax.synth import generate_cases
from oracles import (
    count_exceeding,
    exhaustive_dwell_windows,
    gaussian_grid_double_loop,
    mean_of_frames,
    t_quantile_bisection,
)

A = Abnormality

REFERENCE_POSITIVES = {
    A.CARDIOMEGALY: 65,
    A.PLEURAL_EFFUSION: 65,
    A.ATELECTASIS: 54,
    A.LUNG_OPACITY: 94,
    A.EDEMA: 54,
}
REFERENCE_RATES = {
    A.CARDIOMEGALY: 10 / 65,
    A.PLEURAL_EFFUSION: 15 / 65,
    A.ATELECTASIS: 23 / 54,
    A.LUNG_OPACITY: 26 / 94,
    A.EDEMA: 19 / 54,
}
EXPECTED_MISSES = {
    A.CARDIOMEGALY: 10,
    A.PLEURAL_EFFUSION: 15,
    A.ATELECTASIS: 23,
    A.LUNG_OPACITY: 26,
    A.EDEMA: 19,
}

DATASET_SEED = 20240611
INJECTION_SEED = 424242


@contextmanager
def criterion(number: int, label: str, budget_s: float):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} FAIL  {label}")
        raise
    elapsed = time.monotonic() - start
    assert elapsed < budget_s, f"criterion {number} took {elapsed:.2f}s (budget {budget_s}s)"
    print(f"ACCEPTANCE {number} PASS  {label} ({elapsed:.2f}s)")


@pytest.fixture(scope="module")
def table_dataset():
    return [
        sc.bundle
        for sc in generate_cases(271, seed=DATASET_SEED, positives=REFERENCE_POSITIVES)
    ]


def test_criterion_1_metric_arithmetic():
    rows = {
        A.CARDIOMEGALY: (ConfusionCounts(tr=10, fd=0, fr=2, td=259), 100.0, 100 * 2 / 261),
        A.EDEMA: (ConfusionCounts(tr=14, fd=5, fr=2, td=252), 100 * 14 / 19, 100 * 2 / 254),
        A.ATELECTASIS: (ConfusionCounts(tr=14, fd=9, fr=2, td=248), 100 * 14 / 23, 100 * 2 / 250),
        A.PLEURAL_EFFUSION: (ConfusionCounts(tr=10, fd=5, fr=2, td=256), 100 * 10 / 15, 100 * 2 / 258),
        A.LUNG_OPACITY: (ConfusionCounts(tr=23, fd=3, fr=1, td=259), 100 * 23 / 26, 100 * 1 / 260),
    }
    # unrounded percentages, frozen
    frozen_pecr = [100.0, 73.68421052631578, 60.869565217391305,
                   66.66666666666667, 88.46153846153847]
    frozen_oder = [0.7662835249042144, 0.7874015748031495, 0.8,
                   0.7751937984496123, 0.3846153846153846]
    with criterion(1, "metric arithmetic on reference confusion counts", 1.0):
        for (abn, (counts, exp_p, exp_o)), fp, fo in zip(rows.items(), frozen_pecr, frozen_oder):
            assert abs(pecr(counts) - exp_p) < 1e-9, abn
            assert abs(oder(counts) - exp_o) < 1e-9, abn
            assert abs(pecr(counts) - fp) < 1e-9, abn
            assert abs(oder(counts) - fo) < 1e-9, abn


def test_criterion_2_error_injection_fidelity(table_dataset):
    with criterion(2, "error-injection fidelity (93 misses over 271 cases)", 5.0):
        positives = {a: 0 for a in ACTIVE_LABELS}
        for case in table_dataset:
            for abn in case.ground_truth.labels:
                positives[abn] += 1
        assert positives == REFERENCE_POSITIVES
        assert sum(positives.values()) == 332

        spec = ErrorSpec(rates=REFERENCE_RATES, seed=INJECTION_SEED)
        altered, records = inject_errors(table_dataset, spec)
        per_label = {a: 0 for a in ACTIVE_LABELS}
        for rec in records:
            per_label[rec.abnormality] += 1
        assert per_label == EXPECTED_MISSES
        assert len(records) == 93

        altered2, records2 = inject_errors(table_dataset, spec)
        assert records2 == records
        assert [c.report.text for c in altered2] == [c.report.text for c in altered]


def test_criterion_3_end_to_end_soundness(table_dataset):
    with criterion(3, "end-to-end soundness (TR=93, FD=0, FR=0)", 60.0):
        spec = ErrorSpec(rates=REFERENCE_RATES, seed=INJECTION_SEED)
        altered, records = inject_errors(table_dataset, spec)
        backend = GroundTruthBackend()
        grounder = GrounderConfig(kind="transcript")
        analyses = []
        for case in altered:
            analysis = analyze_case(case, backend, grounder, RoiMode.MEAN_IMAGE)
            for referral in analysis.referrals:
                decide(
                    referral,
                    simulated_decision(referral, case.ground_truth.labels, analysis.set_a),
                    "simulated-oracle",
                )
            analyses.append(analysis)
        report = build_report(
            cases={c.case_id: c for c in altered},
            analyses=analyses,
            error_records=records,
        )
        totals = ConfusionCounts()
        for abn, m in report.per_abnormality.items():
            totals = totals.merge(m.counts)
            assert m.counts.tr == EXPECTED_MISSES[abn]
            assert m.counts.fd == 0
            assert m.counts.fr == 0
            assert m.pecr == 100.0
            assert m.oder == 0.0
        assert totals.tr == 93


def test_criterion_4_grounding_quality_floor():
    with criterion(4, "dwell grounding recovers planted windows (>=90/100)", 30.0):
        atlas = default_atlas()
        cases = generate_cases(100, seed=31337, min_labels=1)
        recovered = 0
        for sc in cases:
            bundle = sc.bundle
            labels = set(bundle.ground_truth.labels)
            found = {g.abnormality: g for g in ground_by_dwell(
                labels, bundle.scanpath, atlas)}
            # oracle agreement on every label of every case
            for abn in labels:
                best, score = exhaustive_dwell_windows(
                    bundle.scanpath, atlas[abn], 2000.0, 250.0
                )
                got = found.get(abn)
                if best is None:
                    assert got is None
                else:
                    assert got is not None
                    assert got.interval == best
                    assert abs(got.score - score) < 1e-9
            case_ok = all(
                (g := found.get(w.abnormality)) is not None
                and temporal_iou(g.interval, (w.t_start_ms, w.t_end_ms)) >= 0.5
                for w in sc.windows
            )
            recovered += case_ok
        assert recovered >= 90, f"only {recovered}/100 cases recovered"


def _random_mask(rng, size=24):
    m = np.zeros((size, size), dtype=bool)
    x0, y0 = rng.randrange(size - 6), rng.randrange(size - 6)
    m[y0:y0 + rng.randrange(2, 7), x0:x0 + rng.randrange(2, 7)] = True
    return BinaryMask(size, size, m)


def _random_roi(rng, size=24):
    vals = np.zeros((size, size))
    for _ in range(rng.randrange(1, 4)):
        cx, cy = rng.uniform(2, size - 2), rng.uniform(2, size - 2)
        sigma = rng.uniform(1.0, 3.0)
        ys, xs = np.mgrid[0:size, 0:size]
        vals += rng.uniform(0.3, 1.0) * np.exp(
            -((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma * sigma)
        )
    return HeatmapFrame(size, size, vals / vals.max())


def test_criterion_5_usefulness_laws():
    with criterion(5, "usefulness-score laws on 1200 randomized referrals", 30.0):
        rng = random.Random(600613)
        for i in range(1200):
            roi = _random_roi(rng)
            truth = _random_mask(rng)
            accepted = rng.random() < 0.5
            status = ReferralStatus.ACCEPTED if accepted else ReferralStatus.REJECTED
            ref = Referral(
                referral_id=f"case-{i}--edema", case_id=f"case-{i}",
                abnormality=A.EDEMA, interval=(0.0, 1000.0),
                roi=roi, roi_mode=RoiMode.MEAN_IMAGE, status=status,
            )
            sample = referral_usefulness(ref, truth, threshold_frac=0.25)
            if not accepted:
                assert sample.value == 0.0
            else:
                assert sample.value == spatial_iou(binarize(roi, 0.25), truth)

        for _ in range(200):
            a, b = _random_mask(rng), _random_mask(rng)
            assert spatial_iou(a, a) == 1.0
            assert spatial_iou(a, b) == spatial_iou(b, a)
        disjoint_a = BinaryMask(8, 8, np.eye(8, dtype=bool))
        disjoint_b = BinaryMask(8, 8, np.flipud(np.eye(8, dtype=bool)) & ~np.eye(8, dtype=bool))
        assert spatial_iou(disjoint_a, disjoint_b) == 0.0

        def analysis_with(referrals):
            return CaseAnalysis("c", set(), set(), [], referrals)

        assert total_usefulness(analysis_with([]), set(), {}).value == 1.0
        assert total_usefulness(analysis_with([]), {A.EDEMA}, {}).value == 0.0

        for _ in range(200):
            k = rng.randrange(1, 5)
            refs, values = [], {}
            for j in range(k):
                r = Referral(
                    referral_id=f"c--{j}", case_id="c", abnormality=A.EDEMA,
                    interval=(0.0, 1.0), roi=_random_roi(rng),
                    roi_mode=RoiMode.MEAN_IMAGE, status=ReferralStatus.ACCEPTED,
                )
                refs.append(r)
                values[r.referral_id] = rng.random()
            tu = total_usefulness(analysis_with(refs), {A.EDEMA}, values)
            assert abs(tu.value - sum(values.values()) / k) < 1e-12


def test_criterion_6_statistics():
    with criterion(6, "CI multipliers and empirical-CDF exceedance", 60.0):
        assert ci_multiplier(31) == 1.959964
        assert ci_multiplier(200) == 1.959964
        for n in range(3, 31):
            oracle = t_quantile_bisection(0.975, n - 1)
            assert abs(ci_multiplier(n) - oracle) < 1e-3, n

        rng = random.Random(8899)
        samples = [round(rng.random(), 2) for _ in range(400)]
        points = empirical_cdf(samples)
        for _ in range(50):
            thr = rng.uniform(-0.1, 1.1)
            assert exceedance_from_cdf(points, len(samples), thr) == count_exceeding(
                samples, thr
            )


def test_criterion_7_heatmap_numerics(rng):
    with criterion(7, "heatmap and ROI numerics vs brute-force oracles", 60.0):
        scan = random_scanpath(rng, 12)
        video = build_gaze_video(scan, 96, 96, 3.0)
        roi = roi_mean_image(video, scan.fixations[2].start_ms, scan.fixations[9].end_ms)
        picked = [
            f.values for f, (s, e) in zip(video.frames, video.frame_times)
            if s <= scan.fixations[9].end_ms and e >= scan.fixations[2].start_ms
        ]
        assert np.abs(roi.values - mean_of_frames(picked)).max() < 1e-12

        fixes = list(random_scanpath(rng, 6).fixations)
        acc = static_heatmap_accumulation(fixes, 80, 80, 4.0)
        total = np.zeros((80, 80))
        for f in fixes:
            total += fixation_intensity(f, 80, 80, 4.0)
        assert np.abs(acc - total).max() < 1e-9

        for _ in range(10):
            x, y = rng.uniform(0, 1), rng.uniform(0, 1)
            dur = rng.uniform(50, 800)
            sigma = rng.uniform(1.0, 8.0)
            grid = fixation_intensity(
                make_scanpath([(x, y, 0.0, dur)]).fixations[0], 128, 128, sigma
            )
            oracle = gaussian_grid_double_loop(128, 128, x * 128, y * 128, sigma, dur)
            assert abs(grid.sum() - oracle.sum()) < 1e-9


def test_criterion_8_service_integrity(tmp_path):
    import httpx
    import uvicorn

    from corax.service import create_app
    from corax.store import CaseStore

    with criterion(8, "event-log replay and concurrent decision race", 60.0):
        cases = [sc.bundle for sc in generate_cases(3, seed=9090, min_labels=1)]
        spec = ErrorSpec(rates={a: 1.0 for a in ACTIVE_LABELS}, seed=6)
        altered, _ = inject_errors(cases, spec)

        store = CaseStore(tmp_path / "data")
        for case in altered:
            store.ingest(bundle_to_doc(case))
        for case_id in sorted(store.bundles):
            store.analyze(case_id, GroundTruthBackend(),
                          GrounderConfig(kind="transcript"), RoiMode.MEAN_IMAGE)
        pending = store.list_referrals(ReferralStatus.PENDING)
        assert len(pending) >= 2
        store.decide(pending[0].referral_id, Decision.ACCEPT, "human")
        snapshot = store.snapshot()
        replayed = CaseStore(tmp_path / "data")
        assert replayed.snapshot() == snapshot

        app = create_app(store)
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                               log_level="error"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{port}"
        for _ in range(100):
            try:
                httpx.get(base + "/referrals", timeout=1.0)
                break
            except httpx.TransportError:
                time.sleep(0.05)

        rid = pending[1].referral_id
        statuses = []
        barrier = threading.Barrier(2)

        def race(decision):
            with httpx.Client(base_url=base, timeout=10.0) as client:
                barrier.wait()
                r = client.post(f"/referrals/{rid}/decision",
                                json={"decision": decision, "actor": "human"})
                statuses.append(r.status_code)

        threads = [threading.Thread(target=race, args=(d,)) for d in ("accept", "reject")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(statuses) == [200, 409]

        server.should_exit = True
        thread.join(timeout=5)
