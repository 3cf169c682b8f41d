import numpy as np
import pytest

from lesionseg.metrics import evaluate_dataset, jaccard, thresholded_jaccard
from lesionseg.rasters import Mask


def _mask(bits) -> Mask:
    return Mask(np.asarray(bits, dtype=np.uint8))


def test_jaccard_identical_masks():
    m = _mask([[1, 0], [1, 1]])
    assert jaccard(m, m) == 1.0


def test_jaccard_disjoint_masks():
    assert jaccard(_mask([[1, 0]]), _mask([[0, 1]])) == 0.0


def test_jaccard_hand_counted_third():
    a = _mask([[1, 1, 0]])
    b = _mask([[0, 1, 1]])
    assert jaccard(a, b) == pytest.approx(1.0 / 3.0)


def test_jaccard_both_empty_is_one():
    assert jaccard(_mask([[0, 0]]), _mask([[0, 0]])) == 1.0


def test_jaccard_symmetric_and_bounded():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = _mask(rng.integers(0, 2, (5, 5)))
        b = _mask(rng.integers(0, 2, (5, 5)))
        j = jaccard(a, b)
        assert j == jaccard(b, a)
        assert 0.0 <= j <= 1.0
        if j == 1.0 and a.data.any():
            assert np.array_equal(a.data, b.data)


def test_jaccard_invariant_under_shared_pixel_permutation():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 2, (4, 6)).astype(np.uint8)
    b = rng.integers(0, 2, (4, 6)).astype(np.uint8)
    base = jaccard(_mask(a), _mask(b))
    assert jaccard(_mask(a[:, ::-1]), _mask(b[:, ::-1])) == base
    assert jaccard(_mask(a[::-1]), _mask(b[::-1])) == base
    assert jaccard(_mask(np.rot90(a)), _mask(np.rot90(b))) == base


def test_jaccard_dimension_mismatch():
    with pytest.raises(ValueError):
        jaccard(_mask([[1]]), _mask([[1, 0]]))


def test_thresholded_jaccard_rules():
    assert thresholded_jaccard(0.6) == 0.0
    assert thresholded_jaccard(0.65) == 0.65  # boundary survives: "below" is strict
    assert thresholded_jaccard(0.75) == 0.75
    assert thresholded_jaccard(0.9, cutoff=0.95) == 0.0
    with pytest.raises(ValueError):
        thresholded_jaccard(1.2)
    for j in np.linspace(0, 1, 21):
        assert thresholded_jaccard(float(j)) <= j


def test_evaluate_single_identical_pair():
    m = _mask([[1, 0], [0, 1]])
    report = evaluate_dataset([(m, m, "a")])
    assert report.mean_raw == 1.0
    assert report.mean_thresholded == 1.0


def test_evaluate_two_pairs_with_hand_means():
    # raw 0.6 = 3/5 and raw 0.8 = 4/5; 0.6 is zeroed by the cutoff
    a_pred = _mask([[1, 1, 1, 1, 0, 0, 0, 0]])
    a_true = _mask([[1, 1, 1, 0, 1, 0, 0, 0]])
    assert jaccard(a_pred, a_true) == pytest.approx(0.6)
    b_pred = _mask([[1, 1, 1, 1, 1, 0, 0, 0]])
    b_true = _mask([[1, 1, 1, 1, 0, 0, 0, 0]])
    assert jaccard(b_pred, b_true) == pytest.approx(0.8)
    report = evaluate_dataset([(a_pred, a_true, "a"), (b_pred, b_true, "b")])
    assert report.mean_raw == pytest.approx(0.7)
    assert report.mean_thresholded == pytest.approx(0.4)


def test_evaluate_report_internal_consistency_and_ordering():
    rng = np.random.default_rng(2)
    pairs = []
    for i in range(9):
        pairs.append((_mask(rng.integers(0, 2, (6, 6))), _mask(rng.integers(0, 2, (6, 6))), f"img_{8 - i:02d}"))
    report = evaluate_dataset(pairs)
    ids = [r.id for r in report.per_image]
    assert ids == sorted(ids)
    assert report.mean_raw == pytest.approx(np.mean([r.raw for r in report.per_image]), abs=1e-9)
    assert report.mean_thresholded == pytest.approx(
        np.mean([r.thresholded for r in report.per_image]), abs=1e-9
    )
    for r in report.per_image:
        assert r.thresholded <= r.raw
    csv = report.to_csv()
    assert csv.startswith("id,raw,thresholded\n")
    assert len(csv.strip().split("\n")) == 10


def test_evaluate_errors():
    with pytest.raises(ValueError):
        evaluate_dataset([])
    with pytest.raises(ValueError, match="oops"):
        evaluate_dataset([(_mask([[1]]), _mask([[1, 0]]), "oops")])
