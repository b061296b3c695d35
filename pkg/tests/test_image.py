import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from oracles import nearest_color
from trafficimg.image import (GRAY, GREEN, RED, ImageFormatError, image_to_matrix,
                              matrix_to_image, matrix_to_rgb, rgb_to_trits)
from trafficimg.nprint import NprintMatrix, encode_flow


def blank():
    return NprintMatrix(np.full((1024, 1088), -1, dtype=np.int8), 0)


def test_all_padding_is_gray(tmp_path):
    matrix_to_image(blank(), tmp_path / "g.png")
    px = np.asarray(Image.open(tmp_path / "g.png"))
    assert px.shape == (1024, 1088, 3)
    assert (px == GRAY).all()


def test_pixel_histogram_matches_trits(tmp_path, amazon):
    m = encode_flow(amazon)
    matrix_to_image(m, tmp_path / "a.png")
    px = np.asarray(Image.open(tmp_path / "a.png")).reshape(-1, 3)
    counts = {c: int((px == c).all(axis=1).sum()) for c in (GREEN, RED, GRAY)}
    assert counts[GREEN] == int((m.trits == 1).sum())
    assert counts[RED] == int((m.trits == 0).sum())
    assert counts[GRAY] == int((m.trits == -1).sum())


def test_tcp_flow_leaves_udp_icmp_gray(amazon):
    rgb = matrix_to_rgb(encode_flow(amazon))
    assert (rgb[:, 960:] == GRAY).all()


def test_roundtrip_and_label(tmp_path, amazon):
    m = encode_flow(amazon)
    matrix_to_image(m, tmp_path / "a.png")
    back = image_to_matrix(tmp_path / "a.png")
    assert np.array_equal(back.trits, m.trits)
    assert back.n_real == m.n_real and back.label == "amazon"


def test_wrong_size(tmp_path):
    Image.new("RGB", (512, 512)).save(tmp_path / "s.png")
    with pytest.raises(ImageFormatError, match="512x512"):
        image_to_matrix(tmp_path / "s.png")


def test_unreadable(tmp_path):
    (tmp_path / "x.png").write_bytes(b"not an image")
    with pytest.raises(ImageFormatError):
        image_to_matrix(tmp_path / "x.png")


def test_lossy_rejected_when_strict(tmp_path):
    Image.new("RGB", (1088, 1024), GRAY).save(tmp_path / "j.jpg", quality=95)
    with pytest.raises(ImageFormatError, match="lossless"):
        image_to_matrix(tmp_path / "j.jpg")
    assert image_to_matrix(tmp_path / "j.jpg", strict=False).n_real == 0


def test_noisy_green():
    assert rgb_to_trits(np.array([[[10, 250, 10]]], dtype=np.uint8))[0, 0] == 1


def test_nearest_color_grid():
    grid = np.array(list(itertools.product(range(0, 256, 15), repeat=3)), dtype=np.uint8)
    got = rgb_to_trits(grid[None])[0]
    assert [int(t) for t in got] == [nearest_color(tuple(c)) for c in grid]


def test_tie_decodes_vacant():
    # equidistant from red and green
    assert rgb_to_trits(np.array([[[128, 128, 0]]], dtype=np.uint8))[0, 0] == -1
    assert nearest_color((128, 128, 0)) == -1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 255)] * 3), min_size=1, max_size=64))
def test_decoding_is_idempotent(colors):
    rgb = np.array([colors], dtype=np.uint8)
    once = rgb_to_trits(rgb)
    again = rgb_to_trits(np.array([[(GRAY, RED, GREEN)[t + 1] for t in once[0]]], dtype=np.uint8))
    assert np.array_equal(once, again)
