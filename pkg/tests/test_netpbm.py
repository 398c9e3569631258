import numpy as np
import pytest

from errors import DataError
from imaging.netpbm import read_pgm, read_pgm_raw, read_ppm, write_pgm, write_pgm_gray, write_ppm


def test_white_pixel_ppm_bytes(tmp_path):
    path = tmp_path / "white.ppm"
    write_ppm(np.ones((1, 1, 3)), path)
    assert path.read_bytes() == b"P6\n1 1\n255\n\xff\xff\xff"


def test_ppm_values_quantize_to_255_levels(tmp_path):
    img = np.random.default_rng(0).random((5, 7, 3))
    path = tmp_path / "img.ppm"
    write_ppm(img, path)
    back = read_ppm(path)
    assert back.shape == (5, 7, 3)
    np.testing.assert_allclose(back, np.round(img * 255) / 255)


def test_ppm_rejects_out_of_range_values(tmp_path):
    with pytest.raises(DataError):
        write_ppm(np.full((2, 2, 3), 1.5), tmp_path / "bad.ppm")


def test_pgm_threshold_on_read(tmp_path):
    path = tmp_path / "mask.pgm"
    path.write_bytes(b"P5\n2 1\n255\n" + bytes([200, 100]))
    np.testing.assert_array_equal(read_pgm(path), [[1, 0]])
    with pytest.raises(DataError):
        read_pgm(path, strict=True)


def test_pgm_mask_written_as_0_and_255(tmp_path):
    mask = np.array([[0, 1], [1, 0]], dtype=np.uint8)
    path = tmp_path / "mask.pgm"
    write_pgm(mask, path)
    np.testing.assert_array_equal(read_pgm_raw(path), [[0, 255], [255, 0]])
    np.testing.assert_array_equal(read_pgm(path, strict=True), mask)


def test_gray_map_is_min_max_scaled(tmp_path):
    path = tmp_path / "gray.pgm"
    write_pgm_gray(np.array([[2.0, 3.0], [4.0, 6.0]]), path)
    np.testing.assert_array_equal(read_pgm_raw(path), [[0, 64], [128, 255]])


def test_constant_gray_map_is_black(tmp_path):
    path = tmp_path / "flat.pgm"
    write_pgm_gray(np.full((3, 3), 0.7), path)
    assert not read_pgm_raw(path).any()


def test_header_comments_are_skipped(tmp_path):
    path = tmp_path / "commented.ppm"
    path.write_bytes(b"P6\n# made by hand\n1 1\n255\n" + bytes([0, 255, 0]))
    np.testing.assert_array_equal(read_ppm(path), [[[0.0, 1.0, 0.0]]])


@pytest.mark.parametrize(
    "payload",
    [
        b"P5\n1 1\n255\n\x00",  # wrong magic for a ppm
        b"P6\n1 1\n65535\n\x00\x00\x00",
        b"P6\n2 2\n255\n\x00\x00\x00",  # truncated raster
        b"P6\n2",
    ],
)
def test_malformed_ppm_raises_data_error(tmp_path, payload):
    path = tmp_path / "bad.ppm"
    path.write_bytes(payload)
    with pytest.raises(DataError):
        read_ppm(path)


def test_missing_file_raises_data_error(tmp_path):
    with pytest.raises(DataError):
        read_ppm(tmp_path / "absent.ppm")
