"""Seeded image corruptions and expansion of an image into corrupted views.

Each corruption is a pure function from a float RGB image in [0, 1] to
another image of the same shape and range.  Eighteen kinds are supported,
each at five severities; the per-severity parameters live in
``data/severity_tables.json`` and can be overridden with a file of the same
shape.  Randomized kinds draw from a counter-based stream keyed by
(seed, kind, severity), so a given spec always produces the same pixels for
the same input, regardless of call order or platform.
"""

from __future__ import annotations

import dataclasses
import json
from importlib import resources

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmall, UnsupportedKind
from .image import (
    hsv_to_rgb,
    jpeg_roundtrip,
    luminance,
    resize_area,
    rgb_to_hsv,
    upscale_nearest,
    validate_image,
)
from .rng import stream

ORIGINAL = "original"

KINDS = (
    "gaussian_noise",
    "shot_noise",
    "impulse_noise",
    "speckle_noise",
    "defocus_blur",
    "gaussian_blur",
    "glass_blur",
    "motion_blur",
    "zoom_blur",
    "snow",
    "fog",
    "frost_substitute",
    "brightness",
    "contrast",
    "saturate",
    "elastic_transform",
    "pixelate",
    "jpeg_compression",
    "spatter",
)

# The benchmark enumeration: 18 kinds x 5 severities = 90 specs.  The
# frost substitute stays applicable but is kept out of the canonical
# listing; it stands in for a transform that needs photographed texture
# assets and carries no calibration pedigree of its own.
BENCHMARK_KINDS = tuple(k for k in KINDS if k != "frost_substitute")

SEVERITIES = (1, 2, 3, 4, 5)

# Kinds whose output is independent of the seed.  Everything else consumes
# the stream keyed by (seed, kind, severity).
DETERMINISTIC_KINDS = frozenset(
    {
        "defocus_blur",
        "gaussian_blur",
        "zoom_blur",
        "brightness",
        "contrast",
        "saturate",
        "pixelate",
        "jpeg_compression",
    }
)


@dataclasses.dataclass(frozen=True)
class CorruptionSpec:
    """One corruption to apply: a kind, a severity in 1..5, and a seed."""

    kind: str
    severity: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise UnsupportedKind(f"unknown corruption kind {self.kind!r}")
        if not isinstance(self.severity, int) or isinstance(self.severity, bool):
            raise UnsupportedKind(f"severity must be an int, got {self.severity!r}")
        if not 1 <= self.severity <= 5:
            raise UnsupportedKind(f"severity must be in 1..5, got {self.severity}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise UnsupportedKind(f"seed must be an int, got {self.seed!r}")

    @property
    def tag(self) -> str:
        """Wire name of this spec, e.g. ``fog:3``.  Seed is not encoded."""
        return f"{self.kind}:{self.severity}"

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "CorruptionSpec":
        """Parse ``kind:severity`` into a spec.

        Raises ValueError on anything that does not name a known kind with a
        severity in 1..5; the message names the offending token so argument
        parsers can surface it verbatim.
        """
        kind, sep, sev_text = text.partition(":")
        if not sep:
            raise ValueError(f"expected kind:severity, got {text!r}")
        try:
            severity = int(sev_text)
        except ValueError:
            raise ValueError(f"severity in {text!r} is not an integer") from None
        try:
            return cls(kind=kind, severity=severity, seed=seed)
        except UnsupportedKind as exc:
            raise ValueError(str(exc)) from None


@dataclasses.dataclass(frozen=True)
class DimensionSet:
    """An ordered, de-duplicated set of views to score an input under.

    Members are either the ORIGINAL marker or a CorruptionSpec.  Order is
    preserved because downstream tables key rows by tag and reports list
    dimensions in the order given.
    """

    dims: tuple

    def __post_init__(self) -> None:
        if not self.dims:
            raise ValueError("dimension set must not be empty")
        seen = set()
        for d in self.dims:
            if d is not ORIGINAL and d != ORIGINAL and not isinstance(d, CorruptionSpec):
                raise ValueError(f"dimension must be ORIGINAL or CorruptionSpec, got {d!r}")
            t = d if isinstance(d, str) else d.tag
            if t in seen:
                raise ValueError(f"duplicate dimension {t!r}")
            seen.add(t)

    def tags(self) -> list:
        return [d if isinstance(d, str) else d.tag for d in self.dims]

    def __len__(self) -> int:
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)

    @classmethod
    def parse(cls, expr: str, seed: int = 0) -> "DimensionSet":
        """Parse a comma-separated list like ``original,brightness:1,fog:2``.

        The literal ``original`` selects the unmodified input; every other
        token must be ``kind:severity``.  All parsed specs share ``seed``.
        """
        dims = []
        for token in expr.split(","):
            token = token.strip()
            if not token:
                raise ValueError("empty dimension token")
            if token == ORIGINAL:
                dims.append(ORIGINAL)
            else:
                dims.append(CorruptionSpec.parse(token, seed=seed))
        return cls(dims=tuple(dims))


def load_severity_tables(path=None) -> dict:
    """Load and validate per-severity parameters.

    With no path, returns the packaged 224-calibration tables.  A custom
    file must provide all known kinds with exactly five parameter sets each.
    """
    if path is None:
        text = resources.files("cover.data").joinpath("severity_tables.json").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    raw = json.loads(text)
    kinds = raw.get("kinds")
    if not isinstance(kinds, dict):
        raise ValueError("severity tables must contain a 'kinds' object")
    for kind in KINDS:
        levels = kinds.get(kind)
        if not isinstance(levels, list) or len(levels) != 5:
            raise ValueError(f"severity table for {kind!r} must list exactly 5 levels")
    return kinds


_DEFAULT_TABLES = None


def _default_tables() -> dict:
    global _DEFAULT_TABLES
    if _DEFAULT_TABLES is None:
        _DEFAULT_TABLES = load_severity_tables()
    return _DEFAULT_TABLES


def list_corruptions() -> list:
    """The canonical (kind, severities) enumeration: 18 kinds, 90 specs."""
    return [(kind, list(SEVERITIES)) for kind in BENCHMARK_KINDS]


def apply_corruption(img: np.ndarray, spec: CorruptionSpec, tables: dict = None) -> np.ndarray:
    """Apply one corruption and return a new image; the input is never written.

    The result has the input's shape and dtype float64, clipped to [0, 1].
    """
    arr = validate_image(img)
    params = dict((tables or _default_tables())[spec.kind][spec.severity - 1])
    gen = stream(spec.seed, spec.kind, spec.severity)
    fn = _KIND_FUNCS[spec.kind]
    out = fn(arr, gen, **params)
    if out.shape != arr.shape:
        raise AssertionError(f"{spec.kind} changed shape {arr.shape} -> {out.shape}")
    return np.clip(out, 0.0, 1.0)


def expand_dimensions(img: np.ndarray, dims: DimensionSet, tables: dict = None) -> list:
    """Materialize every view of ``img`` named by ``dims``.

    Returns (tag, image) pairs in input order; ORIGINAL yields an untouched
    copy so callers may mutate results freely.
    """
    arr = validate_image(img)
    out = []
    for d in dims:
        if isinstance(d, str):
            out.append((ORIGINAL, arr.copy()))
        else:
            out.append((d.tag, apply_corruption(arr, d, tables=tables)))
    return out


# --- shared helpers ---------------------------------------------------------


def _fit_radius(radius: int, h: int, w: int) -> int:
    # Largest kernel radius whose window 2r+1 fits the short side; the
    # tables are calibrated for 224px inputs, so small images get the
    # biggest kernel they can hold instead of an error.
    limit = (min(h, w) - 1) // 2
    if limit < 1:
        raise ImageTooSmall(f"image {h}x{w} too small for windowed filtering")
    return int(min(radius, limit))


def _correlate_rgb(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = np.empty_like(img)
    for c in range(3):
        out[:, :, c] = ndimage.correlate(img[:, :, c], kernel, mode="reflect")
    return out


def _motion_kernel(radius: int, sigma: float, angle_deg: float) -> np.ndarray:
    # Gaussian-weighted line of length 2r+1, splatted bilinearly so that
    # non-axis angles do not alias to staircase gaps.
    n = 2 * radius + 1
    kernel = np.zeros((n, n))
    ts = np.linspace(-radius, radius, 8 * radius + 1)
    weights = np.exp(-(ts**2) / (2.0 * sigma**2))
    theta = np.deg2rad(angle_deg)
    ys = radius + ts * np.sin(theta)
    xs = radius + ts * np.cos(theta)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    fy = ys - y0
    fx = xs - x0
    for dy in (0, 1):
        for dx in (0, 1):
            wy = fy if dy else 1.0 - fy
            wx = fx if dx else 1.0 - fx
            yy = np.clip(y0 + dy, 0, n - 1)
            xx = np.clip(x0 + dx, 0, n - 1)
            np.add.at(kernel, (yy, xx), weights * wy * wx)
    return kernel / kernel.sum()


def _disk_kernel(radius: int, half: int, alias_blur: float) -> np.ndarray:
    # Disk of the given radius on a (2*half+1)-wide support, softened by a
    # small anti-alias gaussian.  Small disks get the wider fixed support.
    L = np.arange(-half, half + 1)
    X, Y = np.meshgrid(L, L)
    disk = ((X**2 + Y**2) <= radius**2).astype(np.float64)
    disk /= disk.sum()
    smooth_radius = 1 if half <= 8 else 2
    disk = ndimage.gaussian_filter(
        disk, alias_blur, mode="constant", truncate=smooth_radius / alias_blur
    )
    return disk / disk.sum()


def _clipped_zoom(arr: np.ndarray, factor: float) -> np.ndarray:
    # Zoom about the center and crop back to the original size, so the
    # output frames a magnified view of the middle of the input.
    h, w = arr.shape[:2]
    ch = int(np.ceil(h / factor))
    cw = int(np.ceil(w / factor))
    top = (h - ch) // 2
    left = (w - cw) // 2
    crop = arr[top : top + ch, left : left + cw]
    zoom = (factor, factor) if arr.ndim == 2 else (factor, factor, 1)
    big = ndimage.zoom(crop, zoom, order=1, mode="nearest")
    th = (big.shape[0] - h) // 2
    tw = (big.shape[1] - w) // 2
    return big[th : th + h, tw : tw + w]


def _plasma_fractal(mapsize: int, wibble_decay: float, gen: np.random.Generator) -> np.ndarray:
    # Diamond-square heightfield normalized to [0, 1]; mapsize must be a
    # power of two.
    maparray = np.empty((mapsize, mapsize), dtype=np.float64)
    maparray[0, 0] = 0.0
    stepsize = mapsize
    wibble = 100.0

    def wibbledmean(array: np.ndarray) -> np.ndarray:
        return array / 4.0 + wibble * gen.uniform(-wibble, wibble, array.shape)

    def fillsquares() -> None:
        corners = maparray[0:mapsize:stepsize, 0:mapsize:stepsize]
        acc = corners + np.roll(corners, 1, axis=0)
        acc += np.roll(acc, 1, axis=1)
        maparray[stepsize // 2 : mapsize : stepsize, stepsize // 2 : mapsize : stepsize] = (
            wibbledmean(acc)
        )

    def filldiamonds() -> None:
        drgrid = maparray[stepsize // 2 : mapsize : stepsize, stepsize // 2 : mapsize : stepsize]
        ulgrid = maparray[0:mapsize:stepsize, 0:mapsize:stepsize]
        ldrsum = drgrid + np.roll(drgrid, 1, axis=0)
        lulsum = ulgrid + np.roll(ulgrid, -1, axis=1)
        maparray[0:mapsize:stepsize, stepsize // 2 : mapsize : stepsize] = wibbledmean(
            ldrsum + lulsum
        )
        tdrsum = drgrid + np.roll(drgrid, 1, axis=1)
        tulsum = ulgrid + np.roll(ulgrid, -1, axis=0)
        maparray[stepsize // 2 : mapsize : stepsize, 0:mapsize:stepsize] = wibbledmean(
            tdrsum + tulsum
        )

    while stepsize >= 2:
        fillsquares()
        filldiamonds()
        wibble /= wibble_decay
        stepsize //= 2

    maparray -= maparray.min()
    peak = maparray.max()
    if peak == 0.0:
        return maparray
    return maparray / peak


# --- kind implementations ---------------------------------------------------


def _gaussian_noise(img, gen, sigma):
    return img + gen.standard_normal(img.shape) * sigma


def _shot_noise(img, gen, photons):
    return gen.poisson(img * photons) / float(photons)


def _impulse_noise(img, gen, amount):
    u = gen.random(img.shape)
    out = img.copy()
    out[u < amount / 2.0] = 0.0
    out[(u >= amount / 2.0) & (u < amount)] = 1.0
    return out


def _speckle_noise(img, gen, sigma):
    return img + img * gen.standard_normal(img.shape) * sigma


def _defocus_blur(img, gen, radius, alias_blur):
    h, w = img.shape[:2]
    radius = int(radius)
    half = _fit_radius(8 if radius <= 8 else radius, h, w)
    return _correlate_rgb(img, _disk_kernel(min(radius, half), half, alias_blur))


def _gaussian_blur(img, gen, sigma):
    return ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0.0), mode="reflect")


def _glass_blur(img, gen, sigma, max_delta, iterations):
    h, w = img.shape[:2]
    out = ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0.0), mode="reflect")
    d = int(max_delta)
    if min(h, w) <= 2 * d + 1:
        # Not enough interior to shuffle; the pre-blur alone stands.
        return out
    for _ in range(int(iterations)):
        # Local pixel swaps, scanned bottom-right to top-left.  Offsets are
        # drawn all at once so the stream layout is fixed.
        rows = np.arange(h - d, d, -1)
        cols = np.arange(w - d, d, -1)
        deltas = gen.integers(-d, d, size=(rows.size, cols.size, 2))
        for i, y in enumerate(rows):
            for j, x in enumerate(cols):
                dy, dx = deltas[i, j]
                yp, xp = y + dy, x + dx
                tmp = out[y, x].copy()
                out[y, x] = out[yp, xp]
                out[yp, xp] = tmp
    return ndimage.gaussian_filter(out, sigma=(sigma, sigma, 0.0), mode="reflect")


def _motion_blur(img, gen, radius, sigma):
    h, w = img.shape[:2]
    r = _fit_radius(int(radius), h, w)
    angle = gen.uniform(-45.0, 45.0)
    return _correlate_rgb(img, _motion_kernel(r, sigma, angle))


def _zoom_blur(img, gen, max_zoom, step):
    factors = np.arange(1.0, max_zoom, step)
    acc = img.copy()
    for z in factors:
        acc += _clipped_zoom(img, float(z))
    return acc / float(factors.size + 1)


def _snow(img, gen, loc, scale, zoom, threshold, streak_radius, streak_sigma, blend):
    h, w = img.shape[:2]
    layer = gen.normal(loc, scale, size=(h, w))
    layer = _clipped_zoom(layer, zoom)
    layer[layer < threshold] = 0.0
    r = _fit_radius(int(streak_radius), h, w)
    angle = gen.uniform(-135.0, -45.0)
    layer = ndimage.correlate(layer, _motion_kernel(r, streak_sigma, angle), mode="reflect")
    gray = luminance(img) * 1.5 + 0.5
    base = blend * img + (1.0 - blend) * np.maximum(img, gray[:, :, None])
    return base + layer[:, :, None] + np.rot90(layer, 2)[:, :, None]


def _fog(img, gen, amount, wibble_decay):
    h, w = img.shape[:2]
    mapsize = 1
    while mapsize < max(h, w):
        mapsize *= 2
    mapsize = max(mapsize, 2)
    plasma = _plasma_fractal(mapsize, wibble_decay, gen)[:h, :w]
    peak = img.max()
    hazy = img + amount * plasma[:, :, None]
    return hazy * peak / (peak + amount)


def _frost_substitute(img, gen, image_weight, frost_weight):
    # Procedural stand-in for photographed frost: band-pass filtered noise
    # reads as crystalline veins, plus sparse sparkle highlights.
    h, w = img.shape[:2]
    noise = gen.random((h, w))
    veins = ndimage.gaussian_filter(noise, 1.5, mode="reflect") - ndimage.gaussian_filter(
        noise, 4.0, mode="reflect"
    )
    peak = np.abs(veins).max()
    if peak > 0:
        veins = veins / peak
    crystals = np.maximum(veins, 0.0) ** 1.5
    sparkle = ndimage.gaussian_filter((noise > 0.985).astype(np.float64), 0.6, mode="reflect")
    frost = np.clip(0.55 + 1.8 * crystals + 2.0 * sparkle, 0.0, 1.0)
    tint = np.stack([frost * 0.95, frost * 0.98, frost], axis=2)
    return image_weight * img + frost_weight * tint


def _brightness(img, gen, amount):
    hsv = rgb_to_hsv(img)
    hsv[:, :, 2] = np.clip(hsv[:, :, 2] + amount, 0.0, 1.0)
    return hsv_to_rgb(hsv)


def _contrast(img, gen, factor):
    means = img.mean(axis=(0, 1), keepdims=True)
    return (img - means) * factor + means


def _saturate(img, gen, mult, add):
    hsv = rgb_to_hsv(img)
    hsv[:, :, 1] = np.clip(hsv[:, :, 1] * mult + add, 0.0, 1.0)
    return hsv_to_rgb(hsv)


def _elastic_transform(img, gen, alpha_frac, smooth_frac, affine_frac):
    h, w = img.shape[:2]
    side = float(min(h, w))
    alpha = alpha_frac * side
    smooth = smooth_frac * side
    disp = affine_frac * side

    # Small random affine, defined by jittering three anchor points.
    center = np.array([h / 2.0, w / 2.0])
    sq = side / 3.0
    src = np.array(
        [center + [sq, sq], center + [-sq, sq], center + [sq, -sq]], dtype=np.float64
    )
    dst = src + gen.uniform(-disp, disp, size=(3, 2))
    A = np.column_stack([src, np.ones(3)])
    coeff = np.linalg.solve(A, dst)  # rows of [src, 1] -> dst
    matrix = coeff[:2].T
    offset = coeff[2]
    warped = np.empty_like(img)
    for c in range(3):
        warped[:, :, c] = ndimage.affine_transform(
            img[:, :, c], matrix, offset=offset, order=1, mode="reflect"
        )

    dx = ndimage.gaussian_filter(
        gen.uniform(-1.0, 1.0, size=(h, w)), smooth, mode="reflect", truncate=3.0
    ) * alpha
    dy = ndimage.gaussian_filter(
        gen.uniform(-1.0, 1.0, size=(h, w)), smooth, mode="reflect", truncate=3.0
    ) * alpha
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    coords = np.stack([ys + dy, xs + dx])
    out = np.empty_like(img)
    for c in range(3):
        out[:, :, c] = ndimage.map_coordinates(warped[:, :, c], coords, order=1, mode="reflect")
    return out


def _pixelate(img, gen, fraction):
    h, w = img.shape[:2]
    oh = max(1, int(round(h * fraction)))
    ow = max(1, int(round(w * fraction)))
    return upscale_nearest(resize_area(img, oh, ow), h, w)


def _jpeg_compression(img, gen, quality):
    return jpeg_roundtrip(img, int(quality))


def _spatter(img, gen, loc, scale, smooth, threshold, mode, strength=None, smear=None):
    h, w = img.shape[:2]
    liquid = gen.normal(loc, scale, size=(h, w))
    liquid = ndimage.gaussian_filter(liquid, smooth, mode="reflect")
    if mode == "water":
        liquid = np.where(liquid < threshold, 0.0, liquid)
        # Droplet rims: weight the mask by its own gradient magnitude so
        # edges of blobs read as beads of water.
        gy, gx = np.gradient(liquid)
        edge = np.hypot(gy, gx)
        if edge.max() > 0:
            edge = edge / edge.max()
        m = liquid * edge
        if m.max() > 0:
            m = m / m.max()
        m *= strength
        color = np.array([175.0, 238.0, 238.0]) / 255.0
        return img + m[:, :, None] * color[None, None, :]
    mask = (liquid > threshold).astype(np.float64)
    mask = ndimage.gaussian_filter(mask, smear, mode="reflect")
    mask[mask < 0.8] = 0.0
    color = np.array([63.0, 42.0, 20.0]) / 255.0
    return img * (1.0 - mask[:, :, None]) + mask[:, :, None] * color[None, None, :]


_KIND_FUNCS: dict = {
    "gaussian_noise": _gaussian_noise,
    "shot_noise": _shot_noise,
    "impulse_noise": _impulse_noise,
    "speckle_noise": _speckle_noise,
    "defocus_blur": _defocus_blur,
    "gaussian_blur": _gaussian_blur,
    "glass_blur": _glass_blur,
    "motion_blur": _motion_blur,
    "zoom_blur": _zoom_blur,
    "snow": _snow,
    "fog": _fog,
    "frost_substitute": _frost_substitute,
    "brightness": _brightness,
    "contrast": _contrast,
    "saturate": _saturate,
    "elastic_transform": _elastic_transform,
    "pixelate": _pixelate,
    "jpeg_compression": _jpeg_compression,
    "spatter": _spatter,
}
