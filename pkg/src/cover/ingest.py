"""Logit interchange, dataset layout, and the built-in prototype classifier.

Model logits enter the pipeline as NDJSON: one record per (sample, view)
with the view named by a dimension tag.  Any backend that can write this
format plugs in; for self-contained runs a nearest-class-mean classifier
over raw pixels stands in for a real network.  Corruption selection ranks
candidate views by how much the averaged score improves validation AUROC.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .corruptions import ORIGINAL, CorruptionSpec, DimensionSet
from .errors import (
    DuplicateKey,
    InconsistentK,
    MalformedLine,
    MissingDimension,
    TooFewClasses,
    ZeroFeature,
)
from .image import read_image, resize_bilinear, validate_image
from .metrics import ScoredSplit, fpr_at_tpr
from .metrics import auroc as auroc_of
from .scoring import DimensionalLogits, LogitVector, ScoreConfig, cover_score

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _check_dim_tag(dim: str) -> None:
    if dim == ORIGINAL:
        return
    CorruptionSpec.parse(dim)  # raises ValueError with the offending token


@dataclasses.dataclass(frozen=True)
class LogitRecord:
    sample_id: str
    split: str  # "id" or "ood"
    dim: str  # "original" or "<kind>:<severity>"
    logits: tuple
    label: int = None

    def __post_init__(self) -> None:
        if not isinstance(self.sample_id, str) or not self.sample_id:
            raise ValueError("sample_id must be a non-empty string")
        if self.split not in ("id", "ood"):
            raise ValueError(f"split must be 'id' or 'ood', got {self.split!r}")
        _check_dim_tag(self.dim)
        vals = tuple(float(v) for v in self.logits)
        if not vals:
            raise ValueError("logits must be non-empty")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("logits must be finite")
        object.__setattr__(self, "logits", vals)
        if self.label is not None and (not isinstance(self.label, int) or self.label < 0):
            raise ValueError(f"label must be a non-negative int, got {self.label!r}")


class LogitTable:
    """Records indexed by (sample_id, dim), with a constant K enforced."""

    def __init__(self, records=()):
        self._by_key = {}
        self._samples = {}  # sample_id -> split, in first-seen order
        self.k = None
        for rec in records:
            self.add(rec)

    def add(self, rec: LogitRecord) -> None:
        if self.k is None:
            self.k = len(rec.logits)
        elif len(rec.logits) != self.k:
            raise InconsistentK(
                f"record {rec.sample_id!r}/{rec.dim!r} has K={len(rec.logits)}, table has K={self.k}"
            )
        key = (rec.sample_id, rec.dim)
        if key in self._by_key:
            raise DuplicateKey(f"duplicate record for sample {rec.sample_id!r} dim {rec.dim!r}")
        prev_split = self._samples.get(rec.sample_id)
        if prev_split is not None and prev_split != rec.split:
            raise ValueError(
                f"sample {rec.sample_id!r} appears under both splits {prev_split!r} and {rec.split!r}"
            )
        self._by_key[key] = rec
        self._samples.setdefault(rec.sample_id, rec.split)

    def get(self, sample_id: str, dim: str) -> LogitRecord:
        return self._by_key.get((sample_id, dim))

    def sample_ids(self) -> list:
        return list(self._samples)

    def split_of(self, sample_id: str) -> str:
        return self._samples[sample_id]

    def records(self) -> list:
        return list(self._by_key.values())

    def __len__(self) -> int:
        return len(self._by_key)


def _record_to_json(rec: LogitRecord) -> str:
    obj = {"sample_id": rec.sample_id, "split": rec.split, "dim": rec.dim}
    if rec.label is not None:
        obj["label"] = rec.label
    obj["logits"] = list(rec.logits)
    # repr-based float rendering: shortest decimal that round-trips.
    return json.dumps(obj, allow_nan=False, separators=(",", ":"))


def write_logits(records, sink) -> None:
    """Write records as UTF-8 NDJSON, one per line."""
    if hasattr(sink, "write"):
        for rec in records:
            sink.write(_record_to_json(rec) + "\n")
        return
    with open(sink, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(_record_to_json(rec) + "\n")


def _reject_constant(token: str):
    raise ValueError(f"non-finite literal {token!r}")


def read_logits(source) -> LogitTable:
    """Parse NDJSON into a LogitTable.

    Malformed lines report their 1-based line number; blank lines are
    permitted and skipped.  K mismatches and duplicate (sample_id, dim)
    keys are rejected.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    table = LogitTable()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line, parse_constant=_reject_constant)
        except ValueError as exc:
            raise MalformedLine(lineno, f"invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise MalformedLine(lineno, "record is not a JSON object")
        missing = {"sample_id", "split", "dim", "logits"} - obj.keys()
        if missing:
            raise MalformedLine(lineno, f"missing keys: {sorted(missing)}")
        unknown = obj.keys() - {"sample_id", "split", "dim", "logits", "label"}
        if unknown:
            raise MalformedLine(lineno, f"unknown keys: {sorted(unknown)}")
        logits = obj["logits"]
        if not isinstance(logits, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in logits
        ):
            raise MalformedLine(lineno, "logits must be a list of numbers")
        try:
            rec = LogitRecord(
                sample_id=obj["sample_id"],
                split=obj["split"],
                dim=obj["dim"],
                logits=tuple(float(v) for v in logits),
                label=obj.get("label"),
            )
        except (ValueError, TypeError) as exc:
            raise MalformedLine(lineno, str(exc)) from None
        table.add(rec)
    return table


@dataclasses.dataclass(frozen=True)
class PrototypeModel:
    """Nearest-class-mean classifier over flattened pixels.

    Features are images resized bilinearly to image_size squared, flattened,
    centered by the training-set mean vector, and unit-normalized; class
    means are re-normalized to unit length.  Logits are scale times the
    cosine against each mean.
    """

    class_means: np.ndarray  # (K, d), unit rows
    class_names: tuple
    scale: float
    d: int
    image_size: int
    feature_mean: np.ndarray  # (d,)

    def __post_init__(self) -> None:
        means = np.asarray(self.class_means, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] < 2:
            raise TooFewClasses("prototype model needs at least 2 classes")
        norms = np.linalg.norm(means, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("class means must be unit-normalized")
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "feature_mean", np.asarray(self.feature_mean, dtype=np.float64))

    @property
    def k(self) -> int:
        return self.class_means.shape[0]


def _raw_feature(img: np.ndarray, image_size: int) -> np.ndarray:
    arr = validate_image(img)
    return resize_bilinear(arr, image_size, image_size).reshape(-1)


def list_class_images(dataset_root) -> list:
    """Sorted (class_name, [image paths]) pairs under root/<class>/*."""
    root = Path(dataset_root)
    out = []
    for cls_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        paths = sorted(
            p for p in cls_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()
        )
        out.append((cls_dir.name, paths))
    return out


def fit_prototype(dataset_root, image_size: int = 32, scale: float = 100.0) -> PrototypeModel:
    """Fit class means from a root/<class_name>/*.png|jpg layout."""
    classes = [(name, paths) for name, paths in list_class_images(dataset_root) if paths]
    if len(classes) < 2:
        raise TooFewClasses(
            f"{dataset_root} has {len(classes)} class directories with images; need at least 2"
        )
    raws = []
    owners = []
    for ci, (name, paths) in enumerate(classes):
        for p in paths:
            raws.append(_raw_feature(read_image(p), image_size))
            owners.append(ci)
    raws = np.stack(raws)
    feature_mean = raws.mean(axis=0)
    centered = raws - feature_mean
    norms = np.linalg.norm(centered, axis=1)
    if np.any(norms == 0.0):
        idx = int(np.nonzero(norms == 0.0)[0][0])
        raise ZeroFeature(f"training image #{idx} equals the dataset mean; feature is zero")
    feats = centered / norms[:, None]
    owners = np.asarray(owners)
    means = np.stack([feats[owners == ci].mean(axis=0) for ci in range(len(classes))])
    mean_norms = np.linalg.norm(means, axis=1)
    if np.any(mean_norms == 0.0):
        raise ZeroFeature("a class mean vanished after normalization")
    means = means / mean_norms[:, None]
    return PrototypeModel(
        class_means=means,
        class_names=tuple(name for name, _ in classes),
        scale=float(scale),
        d=int(raws.shape[1]),
        image_size=int(image_size),
        feature_mean=feature_mean,
    )


def prototype_logits(model: PrototypeModel, img: np.ndarray) -> LogitVector:
    """scale * cosine(feature, class mean) per class; deterministic."""
    raw = _raw_feature(img, model.image_size)
    centered = raw - model.feature_mean
    norm = np.linalg.norm(centered)
    if norm == 0.0:
        raise ZeroFeature("image equals the training mean; feature is zero")
    feat = centered / norm
    return LogitVector(values=tuple(float(v) for v in model.scale * (model.class_means @ feat)))


def score_table(table: LogitTable, dims: DimensionSet, cfg: ScoreConfig) -> ScoredSplit:
    """One averaged score per sample, routed to its split.

    Every sample must carry a record for every tag in dims.  Fusion kinds
    are not representable in this single-logits-per-record format and are
    rejected up front.
    """
    if cfg.kind not in ("msp", "energy", "max_logit"):
        raise ValueError(
            f"score_table supports base kinds only; {cfg.kind!r} needs negative logits "
            "that this record format does not carry"
        )
    tags = dims.tags()
    id_scores = []
    ood_scores = []
    for sample_id in table.sample_ids():
        per_dim = []
        for tag in tags:
            rec = table.get(sample_id, tag)
            if rec is None:
                raise MissingDimension(f"sample {sample_id!r} has no record for dim {tag!r}")
            per_dim.append((tag, LogitVector(values=rec.logits)))
        score = cover_score(DimensionalLogits(per_dim=tuple(per_dim)), cfg)
        (id_scores if table.split_of(sample_id) == "id" else ood_scores).append(score)
    return ScoredSplit(id_scores=np.array(id_scores), ood_scores=np.array(ood_scores))


def _cover_scores(table: LogitTable, dims: DimensionSet, cfg: ScoreConfig) -> np.ndarray:
    """Averaged scores for every sample in the table, split ignored."""
    tags = dims.tags()
    out = []
    for sample_id in table.sample_ids():
        per_dim = []
        for tag in tags:
            rec = table.get(sample_id, tag)
            if rec is None:
                raise MissingDimension(f"sample {sample_id!r} has no record for dim {tag!r}")
            per_dim.append((tag, LogitVector(values=rec.logits)))
        out.append(cover_score(DimensionalLogits(per_dim=tuple(per_dim)), cfg))
    return np.array(out)


@dataclasses.dataclass(frozen=True)
class SelectionResult:
    ranked: tuple  # of (CorruptionSpec, auroc)
    chosen: tuple  # of CorruptionSpec


def select_corruptions(
    id_table: LogitTable,
    val_ood_table: LogitTable,
    candidates,
    cfg: ScoreConfig,
    k: int,
) -> SelectionResult:
    """Rank candidate views by single-expansion validation AUROC.

    Each candidate c is scored as the average over {original, c}; ID scores
    come from id_table, OOD scores from val_ood_table.  Ties break toward
    lower FPR95, then lexicographic tag.  chosen is the top min(k, all).
    """
    scored = []
    for spec in candidates:
        dims = DimensionSet(dims=(ORIGINAL, spec))
        split = ScoredSplit(
            id_scores=_cover_scores(id_table, dims, cfg),
            ood_scores=_cover_scores(val_ood_table, dims, cfg),
        )
        scored.append((spec, auroc_of(split), fpr_at_tpr(split)))
    scored.sort(key=lambda t: (-t[1], t[2], t[0].tag))
    ranked = tuple((spec, auc) for spec, auc, _ in scored)
    chosen = tuple(spec for spec, _ in ranked[: max(0, k)])
    return SelectionResult(ranked=ranked, chosen=chosen)
