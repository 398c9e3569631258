from pathlib import Path

import numpy as np

from autograd.tensor import constant, softmax
from errors import ShapeError
from imaging.netpbm import write_pgm_gray


def self_similarity_map(features: np.ndarray, point: tuple[int, int]) -> np.ndarray:
    """Softmax over every position of ⟨X[:, i, j], X[:, r, c]⟩ for a C×H'×W' feature map."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ShapeError(f"expected a C×H×W feature map, got {features.shape}")
    channels, height, width = features.shape
    r, c = point
    if not (0 <= r < height and 0 <= c < width):
        raise ShapeError(f"point ({r}, {c}) lies outside the {height}x{width} feature map")
    logits = np.tensordot(features[:, r, c], features.reshape(channels, -1), axes=(0, 0))
    return softmax(constant(logits)).data.reshape(height, width)


def write_similarity_pgm(sm: np.ndarray, path: str | Path) -> None:
    write_pgm_gray(sm, path)
