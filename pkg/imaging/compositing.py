"""Compositing primitives used to synthesize the background-swapped view."""
import cv2
import numpy as np

from errors import ShapeError

TRANSFER_EPS = 1e-6


def gaussian_blur(img: np.ndarray, sigma: float, radius: int) -> np.ndarray:
    """Gaussian blur over a (2r+1)² window with replicated borders; H×W or H×W×C."""
    if sigma <= 0 or radius < 1:
        raise ValueError(f"gaussian_blur needs sigma > 0 and radius >= 1, got {sigma}, {radius}")
    size = 2 * radius + 1
    src = np.ascontiguousarray(img, dtype=np.float64)
    return cv2.GaussianBlur(src, (size, size), sigmaX=sigma, sigmaY=sigma, borderType=cv2.BORDER_REPLICATE)


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion with a (2r+1)² square; borders replicate the edge pixels."""
    if radius < 0:
        raise ValueError("erode radius must be >= 0")
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    if radius == 0:
        return mask.copy()
    kernel = np.ones((2 * radius + 1, 2 * radius + 1), dtype=np.uint8)
    return cv2.erode(mask, kernel, borderType=cv2.BORDER_REPLICATE)


def channel_moments(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel population mean and standard deviation over all pixels."""
    mean, std = cv2.meanStdDev(np.ascontiguousarray(img, dtype=np.float64))
    return mean.ravel(), std.ravel()


def color_transfer(src: np.ndarray, tgt: np.ndarray, eps: float = TRANSFER_EPS, clip: bool = True) -> np.ndarray:
    """Match each channel of `src` to the mean and standard deviation of `tgt`.

    `eps` keeps flat channels finite (they map to the target mean).
    """
    if src.shape != tgt.shape:
        raise ShapeError(f"color_transfer: shapes {src.shape} and {tgt.shape} differ")
    mu_s, sd_s = channel_moments(src)
    mu_t, sd_t = channel_moments(tgt)
    out = sd_t * (src - mu_s) / (sd_s + eps) + mu_t
    return np.clip(out, 0.0, 1.0) if clip else out


def alpha_blend(fg: np.ndarray, bg: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    if fg.shape != bg.shape or fg.shape[:2] != alpha.shape:
        raise ShapeError(f"alpha_blend: shapes {fg.shape}, {bg.shape}, {alpha.shape} do not match")
    a = alpha[..., None] if fg.ndim == 3 else alpha
    return (1.0 - a) * fg + a * bg
