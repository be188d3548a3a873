import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from jointseg.image_model import (PROB_EPS, DataError, ImageStack, ProbabilityStack, Segmentation,
                                  SegmentationParams, clamp_probabilities, load_labels, load_stack,
                                  slice_name, write_gray, write_labels)


def _write_png(d, z, arr):
    d.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(d / slice_name(z))


def test_load_single_slice_stacks(tmp_path):
    _write_png(tmp_path / "img", 0, np.full((4, 4), 128, np.uint8))
    _write_png(tmp_path / "prob", 0, np.full((4, 4), 200, np.uint8))
    images, probs = load_stack(tmp_path / "img", tmp_path / "prob")
    assert images.depth == probs.depth == 1
    assert images.intensity.shape == (1, 4, 4)
    assert np.allclose(probs.prob, 200 / 255)


def test_zero_probability_is_clamped(tmp_path):
    _write_png(tmp_path / "img", 0, np.zeros((4, 4), np.uint8))
    _write_png(tmp_path / "prob", 0, np.zeros((4, 4), np.uint8))
    _, probs = load_stack(tmp_path / "img", tmp_path / "prob")
    assert probs.prob.min() == PROB_EPS


def test_sixteen_bit_probabilities(tmp_path):
    _write_png(tmp_path / "img", 0, np.zeros((2, 3), np.uint8))
    _write_png(tmp_path / "prob", 0, np.full((2, 3), 65535, np.uint16))
    _, probs = load_stack(tmp_path / "img", tmp_path / "prob")
    assert probs.prob.max() == 1 - PROB_EPS


def test_thirty_slice_directory(tmp_path):
    stack = np.random.default_rng(0).uniform(size=(30, 5, 6))
    write_gray(stack, tmp_path / "img", bits=16)
    write_gray(stack, tmp_path / "prob", bits=8)
    images, probs = load_stack(tmp_path / "img", tmp_path / "prob")
    assert images.depth == 30 and probs.depth == 30
    assert np.abs(images.intensity - stack).max() <= 0.5 / 65535 + 1e-12


def test_slice_size_mismatch_rejected(tmp_path):
    _write_png(tmp_path / "img", 0, np.zeros((4, 4), np.uint8))
    _write_png(tmp_path / "img", 1, np.zeros((4, 5), np.uint8))
    _write_png(tmp_path / "prob", 0, np.zeros((4, 4), np.uint8))
    with pytest.raises(DataError):
        load_stack(tmp_path / "img", tmp_path / "prob")


def test_stack_pair_mismatch_rejected(tmp_path):
    _write_png(tmp_path / "img", 0, np.zeros((4, 4), np.uint8))
    _write_png(tmp_path / "prob", 0, np.zeros((3, 4), np.uint8))
    with pytest.raises(DataError):
        load_stack(tmp_path / "img", tmp_path / "prob")


def test_empty_or_missing_directory(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(DataError):
        load_stack(tmp_path / "empty", tmp_path / "empty")
    with pytest.raises(DataError):
        load_stack(tmp_path / "nope", tmp_path / "nope")


def test_unreadable_file(tmp_path):
    d = tmp_path / "img"
    d.mkdir()
    (d / slice_name(0)).write_bytes(b"not an image")
    with pytest.raises(DataError):
        load_stack(d, d)


def test_rgb_rejected(tmp_path):
    d = tmp_path / "img"
    d.mkdir()
    Image.fromarray(np.zeros((3, 3, 3), np.uint8)).save(d / slice_name(0))
    with pytest.raises(DataError):
        load_stack(d, d)


def test_intensity_range_validated():
    with pytest.raises(DataError):
        ImageStack(np.full((1, 2, 2), 1.5))
    with pytest.raises(DataError):
        ImageStack(np.zeros((2, 2, 2, 2)))


def test_stacks_are_read_only():
    s = ImageStack(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        s.intensity[0, 0, 0] = 1.0


def test_intensity_fallback_polarity():
    img = ImageStack(np.array([[[0.0, 1.0]]]))
    dark = ProbabilityStack.from_intensity(img, dark_is_foreground=True)
    bright = ProbabilityStack.from_intensity(img, dark_is_foreground=False)
    assert dark.prob[0, 0, 0] == 1 - PROB_EPS and dark.prob[0, 0, 1] == PROB_EPS
    assert np.array_equal(bright.prob, dark.prob[..., ::-1])


def test_segmentation_params_validation():
    SegmentationParams(1, 1, 0.1, (2.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        SegmentationParams(1, 1, 0.1, (1.0, 1.0))
    with pytest.raises(ValueError):
        SegmentationParams(1, 1, 0.0, (1.0,))
    with pytest.raises(ValueError):
        SegmentationParams(-1, 1, 0.1, (1.0,))


def test_segmentation_shape():
    seg = Segmentation(np.zeros((3, 5), bool), 0.5)
    assert (seg.height, seg.width) == (3, 5)


def test_write_empty_reconstruction(tmp_path):
    write_labels(np.zeros((2, 3, 3), np.uint16), tmp_path)
    assert not load_labels(tmp_path).any()


def test_write_single_component(tmp_path):
    lab = np.zeros((1, 4, 4), np.int64)
    lab[0, 1:3, 1:3] = 1
    write_labels(lab, tmp_path)
    img = Image.open(tmp_path / slice_name(0))
    assert np.array_equal(np.asarray(img), lab[0])


def test_label_overflow(tmp_path):
    with pytest.raises(DataError):
        write_labels(np.full((1, 2, 2), 65536), tmp_path)
    with pytest.raises(DataError):
        write_labels(np.full((1, 2, 2), -1), tmp_path)


@given(arrays(np.int64, st.tuples(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6)),
              elements=st.integers(0, 65535)))
def test_label_round_trip(tmp_path_factory, labels):
    d = tmp_path_factory.mktemp("labels")
    write_labels(labels, d)
    assert np.array_equal(load_labels(d), labels)


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(0, 1)))
def test_clamp_idempotent_and_monotone(p):
    once = clamp_probabilities(p)
    assert np.array_equal(clamp_probabilities(once), once)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(once[order]) >= 0)
    assert once.min() >= PROB_EPS and once.max() <= 1 - PROB_EPS
