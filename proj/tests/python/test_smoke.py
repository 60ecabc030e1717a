"""Smoke tests for the python bindings: every exported operation runs and
returns sane shapes/values. The heavyweight numerical checks live in the
C++ suites."""

import numpy as np
import pytest

import fabfix


def test_version():
    assert fabfix.__version__


def test_rasterize_counts():
    bm = fabfix.rasterize([(0, 0, 2, 2)], 4, 4)
    assert bm.shape == (4, 4)
    assert bm.sum() == 4
    union = fabfix.rasterize([(0, 0, 3, 3), (1, 1, 4, 4)], 4, 4)
    assert union.sum() == 14


def test_rasterize_bounds_error():
    with pytest.raises(fabfix.FabfixError):
        fabfix.rasterize([(0, 0, 9, 9)], 4, 4)


def test_fabricate_fixed_points_and_corner_rounding():
    ones = np.ones((32, 32), dtype=np.uint8)
    assert (fabfix.fabricate(ones) == 1).all()
    zeros = np.zeros((32, 32), dtype=np.uint8)
    assert (fabfix.fabricate(zeros) == 0).all()

    square = fabfix.rasterize([(0, 0, 40, 40)], 96, 96)
    fab = fabfix.fabricate(square, sigma=3.0)
    assert fab[39, 39] == 0  # convex corner is etched away
    assert fab[20, 20] == 1

    field = fabfix.fabricate_field(square, sigma=3.0)
    assert field.dtype == np.float32
    assert 0.0 <= field.min() <= field.max() <= 1.0


def test_generate_pattern_deterministic():
    a = fabfix.generate_pattern(192, 192, n_shapes=(8, 16), feature_size_range=(5, 40), seed=7)
    b = fabfix.generate_pattern(192, 192, n_shapes=(8, 16), feature_size_range=(5, 40), seed=7)
    assert (a == b).all()
    density = a.mean()
    assert 0.15 <= density <= 0.85


def test_metrics():
    a = np.zeros((8, 8), dtype=np.uint8)
    b = np.ones((8, 8), dtype=np.uint8)
    assert fabfix.error_pixels(a, a) == 0
    assert fabfix.error_pixels(a, b) == 64
    codes = fabfix.diff_map(b, a)
    assert (codes == 1).all()  # loss everywhere

    ratio, display = fabfix.reduction_factor(1401, 586)
    assert display == "2.4"
    assert ratio == pytest.approx(1401 / 586)


def test_pgm_round_trip(tmp_path):
    bm = fabfix.rasterize([(1, 1, 5, 3)], 8, 6)
    path = str(tmp_path / "probe.pgm")
    fabfix.write_pgm(bm, path)
    back = fabfix.read_pgm(path)
    assert (back == bm).all()


def test_training_and_correction_round_trip(tmp_path):
    # Reduced geometry end-to-end: build, train tiny ensembles, infer.
    rng = np.random.default_rng(3)
    layouts = []
    for _ in range(6):
        canvas = np.zeros((64, 64), dtype=np.uint8)
        for _ in range(5):
            x0, y0 = rng.integers(0, 48, size=2)
            w, h = rng.integers(4, 16, size=2)
            canvas[y0 : y0 + h, x0 : x0 + w] = 1
        layouts.append(canvas)

    ds = fabfix.Dataset.build(layouts, sigma=1.0, stride=16, patch_size=32, split_seed=1)
    assert len(ds) == 6 * 9
    assert ds.train_count + ds.test_count == len(ds)

    fwd = fabfix.train_forward_ensemble(ds, max_epochs=2, patience=2, ensemble_size=2, seed=1)
    assert fwd.role == "forward"
    assert len(fwd) == 2

    corr = fabfix.train_corrector_ensemble(ds, mode="tandem", forward=fwd, max_epochs=2, patience=2,
                                           ensemble_size=1, seed=5)
    assert corr.role == "corrector"

    bce = fabfix.evaluate_bce(fwd, ds, split="test", direction="forward")
    assert np.isfinite(bce) and bce >= 0.0

    nominal = fabfix.rasterize([(8, 24, 56, 40), (24, 8, 40, 56)], 64, 64)
    bitmap, field = fabfix.correct(nominal, corr, stride=16)
    assert bitmap.shape == (64, 64)
    assert field.shape == (64, 64)
    assert ((bitmap == 0) | (bitmap == 1)).all()
    assert ((field >= 0.0) & (field <= 1.0)).all()

    pred_bitmap, pred_field = fabfix.predict(nominal, fwd, stride=16)
    assert pred_bitmap.shape == (64, 64)

    mask = fabfix.uncertainty_mask(pred_field, 0.1, 0.9)
    assert mask.shape == (64, 64)

    # ensembles survive a save/load round trip
    fwd.save(str(tmp_path / "fwd"))
    loaded = fabfix.Ensemble.load(str(tmp_path / "fwd"))
    assert loaded.role == "forward" and len(loaded) == 2
    reb, ref = fabfix.predict(nominal, loaded, stride=16)
    assert (reb == pred_bitmap).all()


def test_correct_rejects_wrong_role():
    layouts = [np.ones((32, 32), dtype=np.uint8)]
    ds = fabfix.Dataset.build(layouts, sigma=1.0, stride=32, patch_size=32)
    fwd = fabfix.train_forward_ensemble(ds, max_epochs=1, patience=1, ensemble_size=1)
    nominal = np.zeros((32, 32), dtype=np.uint8)
    with pytest.raises(fabfix.FabfixError):
        fabfix.correct(nominal, fwd)
