"""Recorded color and geometric augmentations.

Every random draw is captured in a parameter record (`ColorAugParams`,
`GeomAugRecord`) so the same transform can be replayed on a mask or inverted
to locate sampled points.
"""
import math

import cv2
import numpy as np
from pydantic import BaseModel, ConfigDict

from config import AugConfig
from errors import GeometryError
from imaging.compositing import gaussian_blur

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])
MAX_BLUR_RADIUS = 4


class ColorAugParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    apply_jitter: bool = False
    brightness: float = 1.0
    contrast: float = 1.0
    saturation: float = 1.0
    hue: float = 0.0
    apply_blur: bool = False
    blur_sigma: float = 1.0


class GeomAugRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    u: int  # top-left column
    v: int  # top-left row
    w: int
    h: int
    out_h: int
    out_w: int
    hflip: bool = False
    vflip: bool = False

    @classmethod
    def identity(cls, height: int, width: int) -> "GeomAugRecord":
        return cls(u=0, v=0, w=width, h=height, out_h=height, out_w=width)

    def check_bounds(self, height: int, width: int) -> None:
        if self.w < 1 or self.h < 1 or self.u < 0 or self.v < 0 or self.u + self.w > width or self.v + self.h > height:
            raise GeometryError(
                f"crop ({self.u},{self.v},{self.w},{self.h}) exceeds a {height}x{width} image"
            )


def grayscale(img: np.ndarray) -> np.ndarray:
    return img @ GRAY_WEIGHTS


def blur_radius(sigma: float) -> int:
    return max(1, min(math.ceil(3 * sigma), MAX_BLUR_RADIUS))


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    maxc = img.max(axis=-1)
    minc = img.min(axis=-1)
    delta = maxc - minc
    safe = np.where(delta > 0, delta, 1.0)
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    rc, gc, bc = (maxc - r) / safe, (maxc - g) / safe, (maxc - b) / safe
    h = np.where(r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, maxc], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


# ---------- color ----------

def sample_color_aug(rng: np.random.Generator, cfg: AugConfig) -> ColorAugParams:
    # fixed draw order keeps streams aligned whatever gets applied
    apply_jitter = bool(rng.random() < cfg.jitter_prob)
    brightness = rng.uniform(1 - cfg.brightness, 1 + cfg.brightness)
    contrast = rng.uniform(1 - cfg.contrast, 1 + cfg.contrast)
    saturation = rng.uniform(1 - cfg.saturation, 1 + cfg.saturation)
    hue = rng.uniform(-cfg.hue, cfg.hue)
    apply_blur = bool(rng.random() < cfg.blur_prob)
    sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max)
    return ColorAugParams(
        apply_jitter=apply_jitter,
        brightness=float(brightness),
        contrast=float(contrast),
        saturation=float(saturation),
        hue=float(hue) + 0.0,
        apply_blur=apply_blur,
        blur_sigma=float(sigma),
    )


def apply_color_aug(img: np.ndarray, p: ColorAugParams) -> np.ndarray:
    """brightness → contrast → saturation → hue, then optional blur; clamped after each step."""
    out = np.array(img, dtype=np.float64)
    if p.apply_jitter:
        if p.brightness != 1.0:
            out = np.clip(out * p.brightness, 0.0, 1.0)
        if p.contrast != 1.0:
            m = grayscale(out).mean()
            out = np.clip(m + p.contrast * (out - m), 0.0, 1.0)
        if p.saturation != 1.0:
            gray = grayscale(out)[..., None]
            out = np.clip(gray + p.saturation * (out - gray), 0.0, 1.0)
        if p.hue != 0.0:
            hsv = rgb_to_hsv(out)
            hsv[..., 0] = (hsv[..., 0] + p.hue) % 1.0
            out = np.clip(hsv_to_rgb(hsv), 0.0, 1.0)
    if p.apply_blur:
        out = np.clip(gaussian_blur(out, p.blur_sigma, blur_radius(p.blur_sigma)), 0.0, 1.0)
    return out


# ---------- geometry ----------

def sample_geom_aug(rng: np.random.Generator, cfg: AugConfig, height: int, width: int) -> GeomAugRecord:
    area = height * width
    frac = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max)
    ratio = math.exp(rng.uniform(math.log(cfg.crop_ratio_min), math.log(cfg.crop_ratio_max)))
    # ceil keeps w·h at or above the drawn area fraction
    w = min(width, math.ceil(math.sqrt(frac * area * ratio)))
    h = min(height, math.ceil(math.sqrt(frac * area / ratio)))
    u = int(rng.integers(0, width - w + 1))
    v = int(rng.integers(0, height - h + 1))
    hflip = bool(rng.random() < cfg.flip_prob)
    vflip = bool(rng.random() < cfg.flip_prob)
    return GeomAugRecord(u=u, v=v, w=w, h=h, out_h=height, out_w=width, hflip=hflip, vflip=vflip)


def nearest_index(in_size: int, out_size: int) -> np.ndarray:
    """Source pixel for each output pixel: the p with floor(p*out/in) <= o < floor((p+1)*out/in).

    This is the inverse of the floor point map, so a point carried by `map_points`
    lands on an output pixel filled from that very point when upscaling.
    """
    o = np.arange(out_size)
    idx = -((-(o + 1) * in_size) // out_size) - 1
    return np.clip(idx, 0, in_size - 1)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-centred bilinear resize, edges clamped."""
    src = np.ascontiguousarray(img, dtype=np.float64)
    if src.shape[:2] == (out_h, out_w):
        return src.copy()
    return cv2.resize(src, (out_w, out_h), interpolation=cv2.INTER_LINEAR)


def _flip(arr: np.ndarray, rec: GeomAugRecord) -> np.ndarray:
    if rec.vflip:
        arr = arr[::-1]
    if rec.hflip:
        arr = arr[:, ::-1]
    return np.ascontiguousarray(arr)


def apply_geom_image(img: np.ndarray, rec: GeomAugRecord) -> np.ndarray:
    rec.check_bounds(img.shape[0], img.shape[1])
    crop = np.asarray(img, dtype=np.float64)[rec.v : rec.v + rec.h, rec.u : rec.u + rec.w]
    out = resize_bilinear(crop, rec.out_h, rec.out_w)
    return np.clip(_flip(out, rec), 0.0, 1.0)


def apply_geom_mask(mask: np.ndarray, rec: GeomAugRecord) -> np.ndarray:
    rec.check_bounds(mask.shape[0], mask.shape[1])
    crop = np.asarray(mask, dtype=np.uint8)[rec.v : rec.v + rec.h, rec.u : rec.u + rec.w]
    out = crop[nearest_index(rec.h, rec.out_h)][:, nearest_index(rec.w, rec.out_w)]
    return _flip(out, rec)
