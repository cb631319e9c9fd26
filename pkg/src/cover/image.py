"""Image representation and pixel plumbing.

An image is a float64 array of shape (H, W, 3) with every intensity in
[0, 1].  Byte conversion is fixed: in v = byte/255, out byte = round(v*255)
with ties to even (np.rint).  Helper resamplers here are the only ones the
corruption engine uses, so their conventions are pinned once:

- bilinear: sample at output-pixel centers mapped into input coordinates,
  edge values clamped
- area: exact box integration (used for pixelate downscale)
- nearest: floor of the center map (used for pixelate upscale)
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image as PILImage

from .errors import UndecodableImage


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check the (H, W, 3) unit-interval contract, returning a float64 view."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("empty image")
    arr = arr.astype(np.float64, copy=False)
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite intensities")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("intensities must lie in [0, 1]")
    return arr


def from_bytes_array(byte_img: np.ndarray) -> np.ndarray:
    return byte_img.astype(np.float64) / 255.0


def to_bytes_array(img: np.ndarray) -> np.ndarray:
    # np.rint rounds halves to even, which keeps 0.5*255 = 127.5 -> 128
    # reproducible across platforms.
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def read_image(path) -> np.ndarray:
    """Read PNG/JPEG into the float representation."""
    try:
        with PILImage.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise UndecodableImage(f"{path}: {exc}") from exc
    return from_bytes_array(arr)


def write_png(path, img: np.ndarray) -> None:
    PILImage.fromarray(to_bytes_array(img), mode="RGB").save(path, format="PNG")


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    """Encode to JPEG at the given quality and decode back."""
    buf = io.BytesIO()
    PILImage.fromarray(to_bytes_array(img), mode="RGB").save(
        buf, format="JPEG", quality=int(quality)
    )
    buf.seek(0)
    with PILImage.open(buf) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return from_bytes_array(arr)


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Vectorized RGB -> HSV, all channels in [0, 1]."""
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    maxc = img.max(axis=-1)
    minc = img.min(axis=-1)
    delta = maxc - minc
    v = maxc

    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)

    # Hue sextant selection; delta == 0 lanes are masked to hue 0.
    safe = np.where(delta > 0, delta, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB inverse of rgb_to_hsv."""
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6

    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    r = np.choose(i, choices_r)
    g = np.choose(i, choices_g)
    b = np.choose(i, choices_b)
    return np.stack([r, g, b], axis=-1)


def luminance(img: np.ndarray) -> np.ndarray:
    """ITU-R BT.601 gray (the classic 0.299/0.587/0.114 weights)."""
    return img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize sampling at pixel centers, edges clamped."""
    in_h, in_w = img.shape[:2]
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)

    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]

    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def resize_area(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact box (area-average) resize via cumulative integration.

    Each output pixel is the mean of the input over its back-projected
    rectangle, with fractional edge coverage handled exactly.
    """
    in_h, in_w = img.shape[:2]
    out = _area_axis(img, in_h, out_h, axis=0)
    out = _area_axis(out, in_w, out_w, axis=1)
    return out


def _area_axis(arr: np.ndarray, n_in: int, n_out: int, axis: int) -> np.ndarray:
    if n_in == n_out:
        return arr
    moved = np.moveaxis(arr, axis, 0)
    # Prefix integral along the axis; cum[i] = sum of the first i samples.
    cum = np.concatenate(
        [np.zeros((1,) + moved.shape[1:]), np.cumsum(moved, axis=0)], axis=0
    )

    edges = np.arange(n_out + 1) * (n_in / n_out)
    lo, hi = edges[:-1], edges[1:]
    lo_i = np.floor(lo).astype(np.int64)
    hi_i = np.ceil(hi).astype(np.int64)

    out = np.empty((n_out,) + moved.shape[1:])
    for i in range(n_out):
        a, b = lo[i], hi[i]
        ia, ib = lo_i[i], min(hi_i[i], n_in)
        # Full interior sum, then trim the fractional outer slivers.
        total = cum[ib] - cum[ia]
        total = total - moved[ia] * (a - ia)
        if ib > b:
            total = total - moved[ib - 1] * (ib - b)
        out[i] = total / (b - a)
    return np.moveaxis(out, 0, axis)


def upscale_nearest(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = img.shape[:2]
    ys = np.minimum(((np.arange(out_h) + 0.5) * in_h / out_h).astype(np.int64), in_h - 1)
    xs = np.minimum(((np.arange(out_w) + 0.5) * in_w / out_w).astype(np.int64), in_w - 1)
    return img[ys][:, xs]
