import pytest

from conftest import make_scanpath
from corax.bundles import CaseBundle, GroundTruth
from corax.errors import ConfigurationError
from corax.labeling import Abnormality, Report
from corax.oracle import GroundTruthBackend, PriorDwellBackend, make_backend
from corax.synth import generate_case

HEART = (0.55, 0.70)
NOWHERE = (0.5, 0.04)


def bundle_with(labels, points):
    import numpy as np

    scan = make_scanpath(points, case_id="c1")
    return CaseBundle(
        case_id="c1",
        image=np.zeros((32, 32), dtype=np.uint8),
        scanpath=scan,
        report=Report(case_id="c1", text="stable chest."),
        transcript=None,
        ground_truth=GroundTruth(labels=frozenset(labels), regions=()),
    )


def test_ground_truth_backend_is_identity():
    case = bundle_with(
        {Abnormality.CARDIOMEGALY, Abnormality.EDEMA}, [(0.5, 0.5, 0, 300)]
    )
    got = GroundTruthBackend().corrected_labels(case)
    assert got == {Abnormality.CARDIOMEGALY, Abnormality.EDEMA}


def test_prior_dwell_flags_heavily_dwelled_prior():
    # 90% of gaze time inside the heart prior
    case = bundle_with(set(), [
        (*HEART, 0, 3000), (*HEART, 3100, 6000), (*NOWHERE, 6200, 6800),
    ])
    backend = PriorDwellBackend()
    assert Abnormality.CARDIOMEGALY in backend.corrected_labels(case)
    frac = backend.dwell_fraction(case, Abnormality.CARDIOMEGALY)
    # recompute by direct summation
    total = sum(f.duration_ms for f in case.scanpath.fixations)
    inside = sum(
        f.duration_ms for f in case.scanpath.fixations
        if backend.atlas[Abnormality.CARDIOMEGALY].value_at(f.x_norm, f.y_norm) > 0
    )
    assert frac == pytest.approx(inside / total)


def test_prior_dwell_empty_when_never_in_any_prior():
    case = bundle_with(set(), [(*NOWHERE, 0, 500), (0.06, 0.5, 600, 1200)])
    assert PriorDwellBackend().corrected_labels(case) == set()


def test_prior_dwell_deterministic():
    sc = generate_case(3, 1, [Abnormality.EDEMA, Abnormality.ATELECTASIS])
    backend = PriorDwellBackend(threshold=0.10)
    assert backend.corrected_labels(sc.bundle) == backend.corrected_labels(sc.bundle)


def test_prior_dwell_missing_prior_raises():
    case = bundle_with(set(), [(*HEART, 0, 500)])
    backend = PriorDwellBackend(atlas={})
    with pytest.raises(ConfigurationError):
        backend.corrected_labels(case)


def test_make_backend_from_config():
    assert make_backend({"backend": "gt"}).kind == "ground_truth"
    prior = make_backend({"backend": "prior", "threshold": 0.3,
                          "thresholds": {"edema": 0.5}})
    assert prior.kind == "prior_dwell"
    assert prior.threshold == 0.3
    assert prior.thresholds[Abnormality.EDEMA] == 0.5
    with pytest.raises(ConfigurationError):
        make_backend({"backend": "nope"})
