import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vosbench.masks import (
    RleError,
    VideoSequence,
    as_labels,
    boundary_pixels,
    bounding_box,
    decode_rle,
    dilate,
    dumps_manifest,
    encode_rle,
    extract_object,
    loads_manifest,
    read_manifest,
    read_sequence,
    write_manifest,
    write_sequence,
)


def brute_boundary(mask):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if not (0 <= rr < h and 0 <= cc < w) or not mask[rr, cc]:
                    out[r, c] = True
    return out


def brute_dilate(mask, radius):
    h, w = mask.shape
    pts = np.argwhere(mask)
    out = np.zeros_like(mask)
    for r in range(h):
        for c in range(w):
            if pts.size and (((pts - (r, c)) ** 2).sum(axis=1) <= radius * radius).any():
                out[r, c] = True
    return out


def test_extract_object_examples():
    frame = np.full((4, 4), 3, dtype=np.uint8)
    assert extract_object(frame, 3).all()
    assert not extract_object(frame, 7).any()
    f = np.zeros((4, 4), dtype=np.uint8)
    f[:2, :2] = 2
    m = extract_object(f, 2)
    assert m.sum() == 4 and m[:2, :2].all()
    with pytest.raises(ValueError):
        extract_object(f, 0)


def test_labels_reject_bad_input():
    with pytest.raises(ValueError):
        as_labels(np.array([[-1, 0]]))
    with pytest.raises(ValueError):
        as_labels(np.zeros((2, 2, 2)))


def test_boundary_examples():
    assert not boundary_pixels(np.zeros((5, 5), bool)).any()
    one = np.zeros((5, 5), bool)
    one[2, 2] = True
    assert (boundary_pixels(one) == one).all()
    full = np.ones((5, 5), bool)
    b = boundary_pixels(full)
    assert b.sum() == 16 and not b[1:4, 1:4].any()


@settings(max_examples=200, deadline=None)
@given(arrays(np.bool_, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_boundary_matches_brute_force(mask):
    assert (boundary_pixels(mask) == brute_boundary(mask)).all()


def test_dilate_examples():
    m = np.zeros((7, 7), bool)
    m[3, 3] = True
    assert (dilate(m, 0) == m).all()
    plus = dilate(m, 1)
    assert plus.sum() == 5
    assert plus[2, 3] and plus[4, 3] and plus[3, 2] and plus[3, 4]
    assert dilate(np.ones((4, 6), bool), 3).all()


@settings(max_examples=100, deadline=None)
@given(arrays(np.bool_, st.tuples(st.integers(1, 8), st.integers(1, 8))),
       st.sampled_from([0, 1, 1.5, 2, 2.2, 3, 5]))
def test_dilate_matches_brute_force(mask, radius):
    assert (dilate(mask, radius) == brute_dilate(mask, radius)).all()


def test_bounding_box():
    m = np.zeros((6, 6), bool)
    assert bounding_box(m) is None
    m[1, 2] = m[4, 3] = True
    assert bounding_box(m) == (1, 5, 2, 4)


def test_rle_examples():
    assert encode_rle(np.zeros((3, 3), np.uint8), ids=[1]) == {1: [9]}
    assert encode_rle(np.ones((3, 3), np.uint8)) == {1: [0, 9]}


def test_rle_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        h, w = rng.integers(1, 12, size=2)
        frame = rng.integers(0, 4, size=(h, w)).astype(np.uint8)
        assert (decode_rle(encode_rle(frame), w, h) == frame).all()


def test_rle_errors_name_frame_and_object():
    with pytest.raises(RleError, match="frame 3.*object 2"):
        decode_rle({2: [4, 10]}, 3, 3, frame_index=3)
    with pytest.raises(RleError, match="overlap"):
        decode_rle({1: [0, 2, 2], 2: [1, 2, 1]}, 2, 2)


def test_manifest_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    frames = rng.integers(0, 3, size=(4, 5, 7)).astype(np.uint8)
    seq = VideoSequence(frames, "s")
    text = dumps_manifest(seq)
    assert text.splitlines()[0].split()[:3] == ["7", "5", "4"]
    assert (loads_manifest(text).frames == frames).all()
    write_manifest(tmp_path / "s.rle", seq)
    back = read_manifest(tmp_path / "s.rle")
    assert back.name == "s" and (back.frames == frames).all()


def test_manifest_rejects_short_runs():
    with pytest.raises(RleError):
        loads_manifest("2 2 1 1\n0 1 1 1\n")


def test_png_sequence_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    frames = rng.integers(0, 5, size=(3, 6, 8)).astype(np.uint8)
    write_sequence(tmp_path / "seq", VideoSequence(frames, "seq"))
    assert sorted(p.name for p in (tmp_path / "seq").iterdir()) == \
        ["00000.png", "00001.png", "00002.png"]
    back = read_sequence(tmp_path / "seq")
    assert back.name == "seq" and (back.frames == frames).all()


def test_video_sequence_is_read_only():
    seq = VideoSequence(np.zeros((2, 3, 3), np.uint8))
    with pytest.raises(ValueError):
        seq.frames[0, 0, 0] = 1
    with pytest.raises(ValueError):
        VideoSequence(np.zeros((2, 3, 3), np.uint8)[0])


def test_object_ids():
    f = np.zeros((3, 4, 4), np.uint8)
    f[2, 0, 0] = 5
    f[0, 1, 1] = 2
    assert VideoSequence(f).object_ids() == [2, 5]
    g = np.zeros((2, 2, 2), np.uint16)
    g[1, 1, 1] = 300
    assert VideoSequence(g).object_ids() == [300]
