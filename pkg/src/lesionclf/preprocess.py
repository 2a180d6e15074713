"""Image decoding, resizing and augmentation.

All pixel math happens on float32 arrays of shape (height, width, 3) with
values in [0, 1]; 8-bit inputs are mapped by v/255. The bilinear resize is
edge-aligned so resizing to the source dimensions reproduces the input
bit for bit, and every transform keeps the output inside [0, 1].
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .dataset import Dataset, GroundTruthRecord
from .errors import EmptyDataset, FractionOutOfRange, ImageDecodeError, ZeroDimension

IMAGE_SIDE = 299  # the frozen network consumes 299x299x3 tensors
IMAGE_DTYPE = np.float32

# Pinned augmentation defaults: mild, label-preserving magnitudes.
# Reproducibility needs fixed constants; the config file can override them.
CROP_FRACTION = 0.875
SCALE_MIN = 1.05
SCALE_MAX = 1.25
BRIGHTNESS_FACTOR = 1.2

_MASK64 = (1 << 64) - 1


class TransformKind(enum.Enum):
    MIRROR = "mirror"
    CROP = "crop"
    SCALE = "scale"
    BRIGHTEN = "brighten"


@dataclass(frozen=True)
class PoolExample:
    """One training-pool entry: a 299x299x3 tensor with inherited labels."""

    image_id: str
    tensor: np.ndarray
    record: GroundTruthRecord
    provenance: str  # "original" or "augmented:<kind>:<source_id>"


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check the (H, W, 3), [0, 1] tensor invariants; returns float32."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected an (H, W, 3) image tensor, got shape {arr.shape}")
    arr = arr.astype(IMAGE_DTYPE, copy=False)
    if not np.isfinite(arr).all():
        raise ValueError("image tensor contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image tensor values must lie in [0, 1]")
    return arr


def load_image(path: str | Path) -> np.ndarray:
    """Decode a JPEG/PNG file to a float32 (H, W, 3) tensor in [0, 1].

    Grayscale inputs are replicated across the three channels.
    """
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode {path}: {exc}") from exc
    return np.asarray(rgb, dtype=IMAGE_DTYPE) / np.float32(255.0)


def _sample_grid(in_size: int, out_size: int):
    """Edge-aligned source positions for each output index (float64)."""
    if out_size == 1:
        positions = np.array([0.5 * (in_size - 1)], dtype=np.float64)
    else:
        positions = np.arange(out_size, dtype=np.float64) * ((in_size - 1) / (out_size - 1))
    lo = np.minimum(np.floor(positions).astype(np.intp), in_size - 1)
    hi = np.minimum(lo + 1, in_size - 1)
    frac = positions - lo
    return lo, hi, frac


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize with edge-aligned sampling.

    Interpolation uses the ``v0 + f*(v1 - v0)`` form, so resizing to the
    source dimensions is the exact identity and a constant image stays
    exactly constant.
    """
    img = validate_image(img)
    if out_w < 1 or out_h < 1:
        raise ZeroDimension(f"requested size {out_w}x{out_h} has a zero dimension")
    in_h, in_w = img.shape[:2]

    y_lo, y_hi, fy = _sample_grid(in_h, out_h)
    x_lo, x_hi, fx = _sample_grid(in_w, out_w)

    rows_lo = img[y_lo].astype(np.float64)
    rows_hi = img[y_hi].astype(np.float64)
    rows = rows_lo + fy[:, None, None] * (rows_hi - rows_lo)

    cols_lo = rows[:, x_lo]
    cols_hi = rows[:, x_hi]
    out = cols_lo + fx[None, :, None] * (cols_hi - cols_lo)
    return np.clip(out, 0.0, 1.0).astype(IMAGE_DTYPE)


def _central_crop(img: np.ndarray, crop_h: int, crop_w: int) -> np.ndarray:
    h, w = img.shape[:2]
    off_y = (h - crop_h) // 2
    off_x = (w - crop_w) // 2
    return img[off_y : off_y + crop_h, off_x : off_x + crop_w]


def apply_transform(
    img: np.ndarray,
    kind: TransformKind,
    rng_seed: int,
    *,
    crop_fraction: float = CROP_FRACTION,
    scale_min: float = SCALE_MIN,
    scale_max: float = SCALE_MAX,
    brightness_factor: float = BRIGHTNESS_FACTOR,
) -> np.ndarray:
    """Apply one augmentation; output dimensions always equal the input's.

    Mirror flips horizontally; Crop takes a central crop and resizes back;
    Scale upscales by a seeded random factor and central-crops back;
    Brighten multiplies pixels and clamps to [0, 1]. Only Scale consumes
    the seed.
    """
    img = validate_image(img)
    h, w = img.shape[:2]

    if kind is TransformKind.MIRROR:
        return img[:, ::-1, :].copy()

    if kind is TransformKind.CROP:
        crop_h = max(1, round(h * crop_fraction))
        crop_w = max(1, round(w * crop_fraction))
        return resize_bilinear(_central_crop(img, crop_h, crop_w), w, h)

    if kind is TransformKind.SCALE:
        rng = np.random.default_rng(int(rng_seed) & _MASK64)
        factor = rng.uniform(scale_min, scale_max)
        up = resize_bilinear(img, max(w, round(w * factor)), max(h, round(h * factor)))
        return _central_crop(up, h, w).copy()

    if kind is TransformKind.BRIGHTEN:
        return np.clip(img * IMAGE_DTYPE(brightness_factor), 0.0, 1.0)

    raise ValueError(f"unknown transform kind {kind!r}")


def select_augmentation_subset(image_ids: Sequence[str], fraction: float, seed: int) -> list[str]:
    """Sample floor(fraction*n) ids without replacement, deterministically.

    The result keeps the original ordering of ``image_ids``.
    """
    if not 0.0 <= fraction <= 1.0:
        raise FractionOutOfRange(f"fraction must be in [0, 1], got {fraction}")
    n = len(image_ids)
    k = math.floor(fraction * n)
    if k == 0:
        return []
    rng = np.random.default_rng(int(seed) & _MASK64)
    chosen = rng.choice(n, size=k, replace=False)
    return [image_ids[i] for i in sorted(chosen)]


def image_seed(seed: int, image_id: str) -> int:
    """Per-image seed: base seed xor a stable hash of the id, so parallel
    processing order cannot change any result."""
    digest = hashlib.blake2s(image_id.encode("utf-8")).digest()
    return (int(seed) ^ int.from_bytes(digest[:8], "big")) & _MASK64


def augmented_image_id(source_id: str, kind: TransformKind) -> str:
    return f"{source_id}#{kind.value}"


def build_training_pool(
    train: Dataset,
    fraction: float,
    seed: int,
    *,
    crop_fraction: float = CROP_FRACTION,
    scale_min: float = SCALE_MIN,
    scale_max: float = SCALE_MAX,
    brightness_factor: float = BRIGHTNESS_FACTOR,
) -> list[PoolExample]:
    """Resize every training image to 299x299x3 and append four augmented
    variants (one per transform) for a seeded random subset.

    Pool size is always n + 4*floor(fraction*n). Augmented examples
    inherit the source labels and get ids of the form ``<src>#<kind>``.
    """
    if len(train) == 0:
        raise EmptyDataset("training split is empty")

    pool: list[PoolExample] = []
    resized: dict[str, np.ndarray] = {}
    for example in train.examples:
        try:
            tensor = resize_bilinear(load_image(example.image_path), IMAGE_SIDE, IMAGE_SIDE)
        except (ImageDecodeError, ZeroDimension, ValueError) as exc:
            raise ImageDecodeError(f"image {example.image_id!r}: {exc}") from exc
        resized[example.image_id] = tensor
        pool.append(PoolExample(example.image_id, tensor, example.record, "original"))

    records = {e.image_id: e.record for e in train.examples}
    ordered_ids = [e.image_id for e in train.examples]
    for source_id in select_augmentation_subset(ordered_ids, fraction, seed):
        for kind in TransformKind:
            tensor = apply_transform(
                resized[source_id],
                kind,
                image_seed(seed, source_id),
                crop_fraction=crop_fraction,
                scale_min=scale_min,
                scale_max=scale_max,
                brightness_factor=brightness_factor,
            )
            pool.append(
                PoolExample(
                    augmented_image_id(source_id, kind),
                    tensor,
                    records[source_id],
                    f"augmented:{kind.value}:{source_id}",
                )
            )
    return pool
