"""Dense encoder (tiny conv backbone + FPN), projector/predictor MLPs and the change head.

Parameters live in flat `{name: ndarray}` dicts; forward functions take the
matching `{name: Tensor}` dicts watched on a tape.
"""
import math

import numpy as np

from autograd.tensor import (
    Tensor,
    absolute,
    add,
    batch_norm,
    batch_norm2d,
    conv2d,
    matmul,
    relu,
    upsample_nearest,
    upsample_nearest2x,
)
from config import ModelPreset
from errors import ShapeError

Params = dict[str, np.ndarray]
TensorParams = dict[str, Tensor]

ENCODER_PREFIX = "encoder."
HEAD_PREFIX = "head."
INPUT_STATS = ("input.mean", "input.std")


def stack_images(images: list[np.ndarray], stats: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """H×W×3 images in [0,1] → B×3×H×W, standardized per channel when `stats` is given."""
    batch = np.stack([np.asarray(img, dtype=np.float64) for img in images])
    if batch.ndim != 4 or batch.shape[-1] != 3:
        raise ShapeError(f"expected a list of H×W×3 images, got stacked shape {batch.shape}")
    if stats is not None:
        mu, sigma = stats
        batch = (batch - np.asarray(mu).reshape(1, 1, 1, 3)) / np.asarray(sigma).reshape(1, 1, 1, 3)
    return np.ascontiguousarray(batch.transpose(0, 3, 1, 2))


def channel_stats(images: list[np.ndarray], floor: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    pixels = np.concatenate([np.asarray(img, dtype=np.float64).reshape(-1, 3) for img in images])
    return pixels.mean(axis=0), np.maximum(pixels.std(axis=0), floor)


def _conv(params: Params, rng: np.random.Generator, name: str, cout: int, cin: int, k: int) -> None:
    params[f"{name}.kernel"] = rng.normal(0.0, math.sqrt(2.0 / (cin * k * k)), size=(cout, cin, k, k))


def _bn(params: Params, name: str, width: int) -> None:
    params[f"{name}.gamma"] = np.ones(width)
    params[f"{name}.beta"] = np.zeros(width)


def init_encoder(rng: np.random.Generator, preset: ModelPreset) -> Params:
    params: Params = {}
    _conv(params, rng, "encoder.stem", preset.stem, 3, 3)
    _bn(params, "encoder.stem", preset.stem)
    cin = preset.stem
    for i, cout in enumerate(preset.stages, start=1):
        _conv(params, rng, f"encoder.stage{i}", cout, cin, 3)
        _bn(params, f"encoder.stage{i}", cout)
        cin = cout
    for i, width in enumerate(preset.stages, start=1):
        _conv(params, rng, f"encoder.lateral{i}", preset.channels, width, 1)
    return params


def _conv_bn_relu(x: Tensor, p: TensorParams, name: str) -> Tensor:
    x = conv2d(x, p[f"{name}.kernel"], stride=2, pad=1)
    return relu(batch_norm2d(x, p[f"{name}.gamma"], p[f"{name}.beta"]))


def encoder_forward(imgs: Tensor, p: TensorParams) -> Tensor:
    """B×3×H×W images → B×C×H/4×W/4 dense features (H, W multiples of 16)."""
    if imgs.data.ndim != 4 or imgs.shape[1] != 3:
        raise ShapeError(f"encoder expects B×3×H×W input, got {imgs.shape}")
    if imgs.shape[2] % 16 or imgs.shape[3] % 16:
        raise ShapeError(f"encoder input size {imgs.shape[2]}x{imgs.shape[3]} is not divisible by 16")
    x = _conv_bn_relu(imgs, p, "encoder.stem")
    levels = []
    for i in (1, 2, 3):
        x = _conv_bn_relu(x, p, f"encoder.stage{i}")
        levels.append(x)
    top = conv2d(levels[2], p["encoder.lateral3.kernel"])
    mid = add(conv2d(levels[1], p["encoder.lateral2.kernel"]), upsample_nearest2x(top))
    return add(conv2d(levels[0], p["encoder.lateral1.kernel"]), upsample_nearest2x(mid))


def init_mlp(rng: np.random.Generator, prefix: str, din: int, hidden: int, dout: int) -> Params:
    return {
        f"{prefix}.fc1.weight": rng.normal(0.0, math.sqrt(2.0 / din), size=(din, hidden)),
        f"{prefix}.fc1.bias": np.zeros(hidden),
        f"{prefix}.bn.gamma": np.ones(hidden),
        f"{prefix}.bn.beta": np.zeros(hidden),
        f"{prefix}.fc2.weight": rng.normal(0.0, math.sqrt(1.0 / hidden), size=(hidden, dout)),
        f"{prefix}.fc2.bias": np.zeros(dout),
    }


def mlp_forward(x: Tensor, p: TensorParams, prefix: str, use_bn: bool = True) -> Tensor:
    h = add(matmul(x, p[f"{prefix}.fc1.weight"]), p[f"{prefix}.fc1.bias"])
    if use_bn:
        h = batch_norm(h, p[f"{prefix}.bn.gamma"], p[f"{prefix}.bn.beta"])
    return add(matmul(relu(h), p[f"{prefix}.fc2.weight"]), p[f"{prefix}.fc2.bias"])


def init_heads(rng: np.random.Generator, preset: ModelPreset) -> Params:
    params = init_mlp(rng, "projector", preset.channels, preset.proj_hidden, preset.proj_out)
    params.update(init_mlp(rng, "predictor", preset.proj_out, preset.pred_hidden, preset.proj_out))
    return params


def init_pretrain_params(rng: np.random.Generator, preset: ModelPreset) -> Params:
    params = init_encoder(rng, preset)
    params.update(init_heads(rng, preset))
    return params


def project_predict(x: Tensor, p: TensorParams, use_bn: bool = True) -> tuple[Tensor, Tensor]:
    """Projector g then predictor h on an M×C stack of point embeddings (M ≥ 2 with batch norm)."""
    if x.data.ndim != 2 or (use_bn and x.shape[0] < 2):
        raise ShapeError(f"projector needs a 2-D stack, at least 2 rows with batch norm, got {x.shape}")
    z = mlp_forward(x, p, "projector", use_bn)
    return z, mlp_forward(z, p, "predictor", use_bn)


# ---------- change detection ----------

def init_cd_head(rng: np.random.Generator, preset: ModelPreset, std: float = 0.02) -> Params:
    half = max(1, preset.channels // 2)
    return {
        "head.conv1.kernel": rng.normal(0.0, std, size=(half, preset.channels, 3, 3)),
        "head.conv2.kernel": rng.normal(0.0, std, size=(2, half, 3, 3)),
        "head.conv2.bias": np.zeros((2, 1, 1)),
    }


def feature_difference(x1: Tensor, x2: Tensor) -> Tensor:
    return absolute(x1 - x2)


def cd_forward(img1: Tensor, img2: Tensor, p: TensorParams, ds: int = 4) -> Tensor:
    """Siamese encoder → |X1 − X2| → two 3×3 convs → logits upsampled back to input size."""
    fdi = feature_difference(encoder_forward(img1, p), encoder_forward(img2, p))
    hidden = relu(conv2d(fdi, p["head.conv1.kernel"], stride=1, pad=1))
    logits = add(conv2d(hidden, p["head.conv2.kernel"], stride=1, pad=1), p["head.conv2.bias"])
    return upsample_nearest(logits, ds)


def encoder_params(params: Params) -> Params:
    return {k: v for k, v in params.items() if k.startswith(ENCODER_PREFIX)}
