"""Dataset scan, corruption expansion via the `cover corrupt` subprocess,
and NDJSON emission."""

from __future__ import annotations

import json
import shutil
import subprocess
import tempfile
from pathlib import Path

from .errors import ExportError
from .model import build_backend

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
ORIGINAL = "original"


def parse_dims(expr: str) -> list:
    """Comma list of "original" or "kind:severity" tokens, de-duplicated.

    Only the shape is checked here; kind names are validated by the corrupt
    command itself, which owns the corruption catalog.
    """
    dims, seen = [], set()
    for token in expr.split(","):
        token = token.strip()
        if not token:
            raise ExportError(f"empty dimension token in {expr!r}")
        if token != ORIGINAL:
            kind, sep, sev_text = token.partition(":")
            if not sep or not kind:
                raise ExportError(f"expected 'original' or kind:severity, got {token!r}")
            try:
                sev = int(sev_text)
            except ValueError:
                raise ExportError(f"severity in {token!r} is not an integer") from None
            if not 1 <= sev <= 5:
                raise ExportError(f"severity in {token!r} out of range 1..5")
        if token not in seen:
            seen.add(token)
            dims.append(token)
    return dims


def _images_in(directory: Path) -> list:
    return sorted(
        p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def scan_id_root(id_root) -> list:
    """Sorted (class label, [image paths]) from root/<class>/* layout."""
    root = Path(id_root)
    if not root.is_dir():
        raise ExportError(f"ID root {root} is not a directory")
    out = []
    for cls_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        paths = _images_in(cls_dir)
        if paths:
            out.append((cls_dir.name, paths))
    if len(out) < 2:
        raise ExportError(f"{root} has {len(out)} class directories with images; need 2+")
    return out


def scan_flat(ood_root) -> list:
    root = Path(ood_root)
    if not root.is_dir():
        raise ExportError(f"OOD root {root} is not a directory")
    return _images_in(root)


def corrupt_via_cover(src: Path, dst: Path, tag: str, seed: int, cover_bin: str) -> None:
    kind, _, sev = tag.partition(":")
    cmd = [
        cover_bin, "corrupt", str(src), str(dst),
        "--kind", kind, "--severity", sev, "--seed", str(seed),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        detail = proc.stderr.strip() or proc.stdout.strip() or f"exit {proc.returncode}"
        raise ExportError(f"corrupt command failed for {tag!r} on {src.name}: {detail}")


def _record_line(sample_id, split, dim, label, logits) -> str:
    obj = {"sample_id": sample_id, "split": split, "dim": dim}
    if label is not None:
        obj["label"] = label
    obj["logits"] = logits
    return json.dumps(obj, allow_nan=False, separators=(",", ":"))


def export(
    model_name: str,
    id_root,
    ood_root,
    dims_expr: str,
    prompt_template: str,
    out_path,
    image_size: int = 32,
    scale: float = 100.0,
    seed: int = 0,
    cover_bin: str = "cover",
) -> int:
    """Run the backend over every (sample, dimension) pair; return the
    record count written to out_path."""
    dims = parse_dims(dims_expr)
    if any(d != ORIGINAL for d in dims) and shutil.which(cover_bin) is None:
        raise ExportError(
            f"{cover_bin!r} not found on PATH; corrupted dimensions need the cover CLI"
        )

    classes = scan_id_root(id_root)
    ood_paths = scan_flat(ood_root)

    backend = build_backend(
        model_name, image_size=image_size, scale=scale, prompt_template=prompt_template
    )
    backend.prepare(classes)

    samples = []
    for ci, (label, paths) in enumerate(classes):
        for p in paths:
            samples.append((f"id/{label}/{p.stem}", "id", ci, p))
    for p in ood_paths:
        samples.append((f"ood/{p.stem}", "ood", None, p))

    count = 0
    with tempfile.TemporaryDirectory(prefix="cover-export-") as tmp, open(
        out_path, "w", encoding="utf-8"
    ) as sink:
        tmp_dir = Path(tmp)
        for si, (sample_id, split, label, path) in enumerate(samples):
            for dim in dims:
                if dim == ORIGINAL:
                    view_path = path
                else:
                    view_path = tmp_dir / f"{si}_{dim.replace(':', '_')}.png"
                    corrupt_via_cover(path, view_path, dim, seed, cover_bin)
                sink.write(_record_line(sample_id, split, dim, label, backend.logits(view_path)))
                sink.write("\n")
                count += 1
    return count
