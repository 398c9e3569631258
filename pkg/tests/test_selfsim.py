import numpy as np
import pytest

from errors import ShapeError
from imaging.netpbm import read_pgm_raw
from training.selfsim import self_similarity_map, write_similarity_pgm


def test_map_is_a_distribution():
    features = np.random.default_rng(0).normal(size=(4, 6, 5))
    sm = self_similarity_map(features, (2, 3))
    assert sm.shape == (6, 5)
    assert sm.sum() == pytest.approx(1.0)
    assert (sm >= 0).all()


def test_query_position_wins_on_orthogonal_features():
    features = np.zeros((9, 3, 3))
    for i in range(9):
        features[i, i // 3, i % 3] = 3.0
    sm = self_similarity_map(features, (1, 2))
    assert np.unravel_index(sm.argmax(), sm.shape) == (1, 2)
    others = np.delete(sm.ravel(), 5)
    np.testing.assert_allclose(others, others[0])


def test_point_outside_map():
    with pytest.raises(ShapeError):
        self_similarity_map(np.zeros((2, 4, 4)), (4, 0))


def test_written_map_spans_full_gray_range(tmp_path):
    sm = self_similarity_map(np.random.default_rng(1).normal(size=(3, 4, 4)), (0, 0))
    path = tmp_path / "sm.pgm"
    write_similarity_pgm(sm, path)
    raw = read_pgm_raw(path)
    assert raw.shape == (4, 4)
    assert raw.min() == 0 and raw.max() == 255


def test_map_is_softmax_of_dot_products():
    features = np.random.default_rng(2).normal(size=(3, 5, 4))
    logits = np.einsum("c,chw->hw", features[:, 1, 2], features)
    expected = np.exp(logits - logits.max())
    np.testing.assert_allclose(self_similarity_map(features, (1, 2)), expected / expected.sum(), atol=1e-12)
    # dot products, not cosines: scaling the features sharpens the map
    assert self_similarity_map(3 * features, (1, 2)).max() > self_similarity_map(features, (1, 2)).max()


def test_constant_channel_shifts_every_logit_equally():
    features = np.random.default_rng(3).normal(size=(4, 6, 6))
    padded = np.concatenate([features, np.full((1, 6, 6), 2.5)])
    np.testing.assert_allclose(self_similarity_map(padded, (3, 1)), self_similarity_map(features, (3, 1)), atol=1e-12)
