"""Image preparation: border cropping, text filling, resize to the model grid.

Images are plain numpy arrays throughout: ``(H, W, 3) uint8`` for raster
input, ``(H, W) bool`` for text masks, ``(256, 256, 3) float64 in [0,1]``
after :func:`resize_normalize`.  All functions are pure.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

TARGET_SIZE = 256
DEFAULT_TOLERANCE = 8


class DimensionMismatch(ValueError):
    pass


def _require_rgb8(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 image, got {img.shape} {img.dtype}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must have at least one pixel")
    return img


def load_image(path: str | Path) -> np.ndarray:
    """Read PNG/JPEG as RGB; alpha channels are flattened onto white."""
    with Image.open(path) as im:
        if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
            rgba = im.convert("RGBA")
            flat = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
            flat.alpha_composite(rgba)
            return np.asarray(flat.convert("RGB"))
        return np.asarray(im.convert("RGB"))


def load_mask(path: str | Path) -> np.ndarray:
    """Read a single-channel mask image; nonzero means text pixel."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 0


def save_image(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(_require_rgb8(img), mode="RGB").save(path)


def _corner_majority_color(img: np.ndarray) -> np.ndarray:
    """Most common of the four corner pixels; ties go to the earliest
    corner in reading order (top-left first)."""
    corners = [img[0, 0], img[0, -1], img[-1, 0], img[-1, -1]]
    best, best_count = corners[0], 0
    for i, c in enumerate(corners):
        count = sum(np.array_equal(c, other) for other in corners)
        if count > best_count:
            best, best_count = c, count
    return best.astype(np.int16)


def crop_uniform_border(img: np.ndarray, tolerance: int = DEFAULT_TOLERANCE) -> np.ndarray:
    """Strip outer rows/columns that match the corner-majority color.

    Returns the minimal sub-image whose border still contains at least
    one pixel outside ``tolerance`` of the background color.  An image
    that is uniform throughout collapses to a single background pixel.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    img = _require_rgb8(img)
    background = _corner_majority_color(img)
    within = (np.abs(img.astype(np.int16) - background) <= tolerance).all(axis=2)
    content_rows = np.nonzero(~within.all(axis=1))[0]
    content_cols = np.nonzero(~within.all(axis=0))[0]
    if content_rows.size == 0 or content_cols.size == 0:
        return background.astype(np.uint8).reshape(1, 1, 3)
    r0, r1 = content_rows[0], content_rows[-1] + 1
    c0, c1 = content_cols[0], content_cols[-1] + 1
    return img[r0:r1, c0:c1].copy()


def _mask_boundary_ring(mask: np.ndarray) -> np.ndarray:
    """One-pixel 8-connected outer boundary of the mask, inside bounds."""
    padded = np.pad(mask, 1, mode="constant")
    dilated = np.zeros_like(padded)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            dilated[1:-1, 1:-1] |= padded[1 + dy : padded.shape[0] - 1 + dy,
                                          1 + dx : padded.shape[1] - 1 + dx]
    return dilated[1:-1, 1:-1] & ~mask


def fill_text_region(
    img: np.ndarray,
    mask: np.ndarray,
    white_tolerance: int = DEFAULT_TOLERANCE,
) -> np.ndarray:
    """Blank out the masked text area.

    If every pixel on the mask's outer boundary ring is near-white (all
    channels >= 255 - white_tolerance) the region is filled with pure
    white; otherwise it is filled with the mean color of the ring.
    Pixels outside the mask are returned bit-identical.
    """
    img = _require_rgb8(img)
    mask = np.asarray(mask)
    if mask.shape != img.shape[:2]:
        raise DimensionMismatch(
            f"mask shape {mask.shape} does not match image {img.shape[:2]}"
        )
    mask = mask.astype(bool)
    out = img.copy()
    if not mask.any():
        return out
    ring = _mask_boundary_ring(mask)
    ring_pixels = img[ring]
    # a mask covering the whole image has no ring; treat it as the white
    # fast path (nothing contradicts the near-white assumption)
    if ring_pixels.size == 0 or (ring_pixels >= 255 - white_tolerance).all():
        fill = np.array([255, 255, 255], dtype=np.uint8)
    else:
        fill = np.round(ring_pixels.mean(axis=0)).astype(np.uint8)
    out[mask] = fill
    return out


def resize_normalize(img: np.ndarray, size: int = TARGET_SIZE) -> np.ndarray:
    """Bilinear resample to ``size`` x ``size`` and scale samples to [0,1].

    Corner-aligned sampling: output corners reproduce input corners
    exactly, and interpolated samples stay within the input value range.
    """
    img = _require_rgb8(img)
    h, w = img.shape[:2]
    out_coords_y = _source_coords(h, size)
    out_coords_x = _source_coords(w, size)
    y0 = np.floor(out_coords_y).astype(int)
    x0 = np.floor(out_coords_x).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (out_coords_y - y0)[:, None, None]
    wx = (out_coords_x - x0)[None, :, None]
    data = img.astype(np.float64)
    top = data[y0][:, x0] * (1 - wx) + data[y0][:, x1] * wx
    bottom = data[y1][:, x0] * (1 - wx) + data[y1][:, x1] * wx
    resized = top * (1 - wy) + bottom * wy
    return resized / 255.0


def _source_coords(src: int, dst: int) -> np.ndarray:
    if src == 1 or dst == 1:
        return np.zeros(dst)
    return np.arange(dst) * (src - 1) / (dst - 1)
