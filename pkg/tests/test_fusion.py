import numpy as np
import pytest

from vosbench.fusion import (
    FusionConfig,
    SourcePrediction,
    confidence_foreground,
    flip_average,
    id_vote,
    label_sources,
    mirror,
    resolve_frame,
    selective_average,
    shallow_fuse,
)


def test_confidence_foreground_examples():
    probs = np.array([[0.2, 0.5], [0.51, 0.9]])
    one = [SourcePrediction("a", {1: probs})]
    assert (confidence_foreground(one, 1) == (probs > 0.5)).all()

    ones = np.ones((2, 2))
    three = [SourcePrediction(n, {1: ones}) for n in "abc"]
    assert confidence_foreground(three, 1, config=FusionConfig(threshold=1.5)).all()

    zeros = [SourcePrediction(n, {1: np.zeros((2, 2))}) for n in "abc"]
    assert not confidence_foreground(zeros, 1, config=FusionConfig(threshold=0.1)).any()


def test_default_threshold_is_half_the_weight():
    srcs = [SourcePrediction("a", {1: np.ones((1, 1))}, 2.0),
            SourcePrediction("b", {1: np.zeros((1, 1))}, 1.0)]
    assert FusionConfig().pixel_threshold(srcs) == 1.5
    assert confidence_foreground(srcs, 1)[0, 0]


def test_id_vote_examples():
    assert id_vote([("A", 2), ("B", 2), ("C", 5)]) == 2
    assert id_vote([("A", 2), ("B", 5)]) == 2
    assert id_vote([("A", 5), ("B", 2)]) == 2
    assert id_vote([("A", 9)]) == 9
    assert id_vote([("A", 2), ("B", 5)], {"B": 2.0}) == 5
    with pytest.raises(ValueError):
        id_vote([])


def _labels_8x8(region_id):
    f = np.zeros((8, 8), np.uint8)
    f[2:6, 2:6] = region_id
    return f


def test_resolve_frame_unanimous():
    f = np.zeros((6, 6), np.uint8)
    f[1:3, 1:3] = 1
    f[3:5, 3:6] = 2
    srcs = label_sources({n: f for n in "abc"})
    assert (resolve_frame(srcs) == f).all()


def test_resolve_frame_majority():
    srcs = label_sources({"a": _labels_8x8(1), "b": _labels_8x8(1), "c": _labels_8x8(2)})
    out = resolve_frame(srcs)
    assert (out == _labels_8x8(1)).all()


def test_resolve_frame_vote_breaks_contested_pixels():
    # object 1 and 2 both pass the threshold where the sources are split
    g1 = np.ones((1, 3))
    srcs = [
        SourcePrediction("a", {1: g1, 2: np.full((1, 3), 0.9)}),
        SourcePrediction("b", {1: np.full((1, 3), 0.9), 2: g1}),
        SourcePrediction("c", {1: np.full((1, 3), 0.9), 2: g1}),
    ]
    assert (resolve_frame(srcs) == 2).all()


def test_resolve_frame_tie_goes_to_lower_id():
    srcs = [SourcePrediction("a", {1: np.ones((2, 2)), 5: np.zeros((2, 2))}),
            SourcePrediction("b", {1: np.zeros((2, 2)), 5: np.ones((2, 2))})]
    out = resolve_frame(srcs, config=FusionConfig(threshold=0.5))
    assert (out == 1).all()


def test_resolve_frame_nothing_passes():
    srcs = [SourcePrediction(n, {1: np.full((3, 3), 0.1)}) for n in "ab"]
    assert not resolve_frame(srcs).any()


def test_resolve_frame_shape_mismatch():
    srcs = [SourcePrediction("a", {1: np.zeros((2, 2))}),
            SourcePrediction("b", {1: np.zeros((2, 3))})]
    with pytest.raises(ValueError, match="frame 0"):
        resolve_frame(srcs)


def test_selective_average_examples():
    m = np.array([[1, 0], [1, 1]], bool)
    assert (selective_average([(m, 0.3), (m, 2.0), (m, 1.0)]) == m).all()
    a = np.array([[1, 0]], bool)
    b = np.array([[0, 1]], bool)
    assert not selective_average([(a, 1.0), (b, 1.0)]).any()
    c = np.array([[1, 1]], bool)
    assert (selective_average([(a, 1), (c, 1), (b, 1)]) == [[1, 1]]).all()
    with pytest.raises(ValueError):
        selective_average([(a, 0.0)])


def test_shallow_fuse_examples():
    rng = np.random.default_rng(0)
    grids = {n: rng.normal(size=(4, 4)) for n in "abcd"}
    srcs = [SourcePrediction(n, {1: g}) for n, g in grids.items()]
    ids, out = shallow_fuse(srcs, {"a": 1.0, "b": 0.0, "c": 0.0, "d": 0.0})
    assert ids == [1] and out.shape == (2, 4, 4)
    assert (out[1] == grids["a"]).all()
    assert (out[0] == -grids["a"]).all()

    g = grids["a"]
    _, cancel = shallow_fuse([SourcePrediction("p", {1: g}), SourcePrediction("n", {1: -g})],
                             {"p": 0.5, "n": 0.5})
    assert not cancel.any()

    w = {"a": 0.1, "b": 0.2, "c": 0.3, "d": 0.4}
    _, out = shallow_fuse(srcs, w)
    for r in range(4):
        for c in range(4):
            ref = sum(w[n] * grids[n][r, c] for n in "abcd")
            assert out[1, r, c] == pytest.approx(ref, abs=1e-12)


def test_shallow_fuse_missing_source():
    with pytest.raises(ValueError, match="missing"):
        shallow_fuse([SourcePrediction("a", {1: np.zeros((2, 2))})], {"a": 1.0, "z": 1.0})


def test_flip_average_examples():
    rng = np.random.default_rng(1)
    p = rng.normal(size=(3, 6))
    assert np.allclose(flip_average(p, mirror(p)), p, atol=0)
    hot = np.zeros((2, 4))
    hot[:, :2] = 1.0
    flipped = np.zeros((2, 4))
    flipped[:, 2:] = 1.0
    assert (flip_average(hot, flipped) == 0.5 * hot + 0.5 * mirror(flipped)).all()
    assert (flip_average(hot, hot[:, ::-1]) == hot).all()
    # left-hot on both passes: un-mirroring moves the second to the right half
    assert (flip_average(hot, hot) == 0.5).all()
    assert not flip_average(np.zeros((2, 2)), np.zeros((2, 2))).any()


def test_weights_must_be_valid():
    with pytest.raises(ValueError):
        SourcePrediction("a", {1: np.zeros((1, 1))}, -1.0)
