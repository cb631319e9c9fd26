"""Inference backends.

pixel-prototype is the self-contained default: nearest-class-mean over raw
pixels, logits = scale * cosine against each class mean.  clip-b16 produces
CLIP-style cosine similarities against prompted label embeddings and needs
torch + open_clip plus downloadable weights; without them it raises
ModelUnavailable and the caller reports that cleanly.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ExportError, ModelUnavailable, UndecodableImage


def load_image(path) -> np.ndarray:
    """Decode to float64 HxWx3 in [0,1]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError, SyntaxError) as exc:
        raise UndecodableImage(f"{path}: {exc}") from None
    return arr


def _resize_feature(arr: np.ndarray, size: int) -> np.ndarray:
    # float32 bilinear per channel: no 8-bit quantization on the way through
    chans = [
        np.asarray(
            Image.fromarray(arr[:, :, c].astype(np.float32), mode="F").resize(
                (size, size), Image.BILINEAR
            ),
            dtype=np.float64,
        )
        for c in range(arr.shape[2])
    ]
    return np.stack(chans, axis=2).reshape(-1)


class PixelPrototypeBackend:
    """Desk-scale stand-in for a pretrained network.

    Features are flattened pixels at a square resize, centered by the
    fitting-set mean and unit-normalized; class means are re-normalized.
    """

    name = "pixel-prototype"

    def __init__(self, image_size: int = 32, scale: float = 100.0):
        if image_size < 1:
            raise ExportError(f"image_size must be positive, got {image_size}")
        if not scale > 0:
            raise ExportError(f"scale must be positive, got {scale}")
        self.image_size = int(image_size)
        self.scale = float(scale)
        self.labels = None
        self._means = None
        self._feature_mean = None

    def prepare(self, classes) -> None:
        """Fit class means from (label, [image paths]) pairs."""
        classes = [(label, paths) for label, paths in classes if paths]
        if len(classes) < 2:
            raise ExportError(f"need at least 2 classes with images, got {len(classes)}")
        raws, owners = [], []
        for ci, (_, paths) in enumerate(classes):
            for p in paths:
                raws.append(_resize_feature(load_image(p), self.image_size))
                owners.append(ci)
        raws = np.stack(raws)
        self._feature_mean = raws.mean(axis=0)
        centered = raws - self._feature_mean
        norms = np.linalg.norm(centered, axis=1)
        if np.any(norms == 0.0):
            raise ExportError("a fitting image equals the dataset mean; feature is zero")
        feats = centered / norms[:, None]
        owners = np.asarray(owners)
        means = np.stack([feats[owners == ci].mean(axis=0) for ci in range(len(classes))])
        mean_norms = np.linalg.norm(means, axis=1)
        if np.any(mean_norms == 0.0):
            raise ExportError("a class mean vanished after normalization")
        self._means = means / mean_norms[:, None]
        self.labels = [label for label, _ in classes]

    def logits(self, path) -> list:
        raw = _resize_feature(load_image(path), self.image_size)
        centered = raw - self._feature_mean
        norm = np.linalg.norm(centered)
        if norm == 0.0:
            raise ExportError(f"{path}: image equals the fitting mean; feature is zero")
        return [float(v) for v in self.scale * (self._means @ (centered / norm))]


class ClipBackend:
    """CLIP-B/16 cosine logits against prompted label embeddings."""

    name = "clip-b16"

    def __init__(self, prompt_template: str = "a photo of a {label}", scale: float = 100.0):
        self.prompt_template = prompt_template
        self.scale = float(scale)
        self._model = None
        self._preprocess = None
        self._text = None
        self.labels = None

    def prepare(self, classes) -> None:
        try:
            import torch
            import open_clip
        except ImportError as exc:
            raise ModelUnavailable(
                f"clip-b16 needs the torch and open_clip packages: {exc}"
            ) from None
        try:
            model, _, preprocess = open_clip.create_model_and_transforms(
                "ViT-B-16", pretrained="openai"
            )
            tokenizer = open_clip.get_tokenizer("ViT-B-16")
        except Exception as exc:  # weight download or cache failure
            raise ModelUnavailable(f"could not load CLIP-B/16 weights: {exc}") from None
        model.eval()
        self.labels = [label for label, _ in classes]
        prompts = [self.prompt_template.format(label=label) for label in self.labels]
        with torch.no_grad():
            text = model.encode_text(tokenizer(prompts))
            self._text = text / text.norm(dim=-1, keepdim=True)
        self._model = model
        self._preprocess = preprocess
        self._torch = torch

    def logits(self, path) -> list:
        torch = self._torch
        try:
            with Image.open(path) as im:
                pixel = self._preprocess(im.convert("RGB")).unsqueeze(0)
        except (OSError, ValueError, SyntaxError) as exc:
            raise UndecodableImage(f"{path}: {exc}") from None
        with torch.no_grad():
            feat = self._model.encode_image(pixel)
            feat = feat / feat.norm(dim=-1, keepdim=True)
            sims = (feat @ self._text.T).squeeze(0)
        return [float(v) * self.scale for v in sims]


BACKENDS = {
    PixelPrototypeBackend.name: PixelPrototypeBackend,
    ClipBackend.name: ClipBackend,
}


def build_backend(
    model_name: str,
    image_size: int = 32,
    scale: float = 100.0,
    prompt_template: str = "a photo of a {label}",
):
    if model_name == PixelPrototypeBackend.name:
        return PixelPrototypeBackend(image_size=image_size, scale=scale)
    if model_name == ClipBackend.name:
        return ClipBackend(prompt_template=prompt_template, scale=scale)
    raise ModelUnavailable(
        f"unknown model {model_name!r}; available: {', '.join(sorted(BACKENDS))}"
    )
