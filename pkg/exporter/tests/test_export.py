"""Exporter conformance: schema, cardinality, determinism, error paths.

Interchange conformance is checked from the consumer side with the
toolkit's own reader where it matters; the exporter itself never imports
the toolkit.
"""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from logit_exporter import (
    ExportError,
    ModelUnavailable,
    PixelPrototypeBackend,
    build_backend,
    export,
    parse_dims,
)
from logit_exporter.cli import main

HAVE_COVER = shutil.which("cover") is not None
needs_cover = pytest.mark.skipif(not HAVE_COVER, reason="cover CLI not on PATH")


def write_png(path, arr):
    Image.fromarray((np.clip(arr, 0.0, 1.0) * 255.0).round().astype(np.uint8), "RGB").save(
        path, format="PNG"
    )


def half_pattern(kind, size=24):
    img = np.full((size, size, 3), 0.15)
    if kind == "left":
        img[:, : size // 2] = 0.85
    elif kind == "right":
        img[:, size // 2 :] = 0.85
    else:
        img[: size // 2, :] = 0.85
    return img


def jitter(base, seed):
    gen = np.random.default_rng(seed)
    return np.clip(base + gen.normal(0.0, 0.02, size=base.shape), 0.0, 1.0)


def make_dataset(root, per_class=2, n_ood=2):
    id_root = root / "id"
    for ci, kind in enumerate(("left", "right")):
        d = id_root / kind
        d.mkdir(parents=True)
        for i in range(per_class):
            write_png(d / f"{i}.png", jitter(half_pattern(kind), 100 * ci + i))
    ood_root = root / "ood"
    ood_root.mkdir()
    for i in range(n_ood):
        write_png(ood_root / f"{i}.png", jitter(half_pattern("top"), 900 + i))
    return id_root, ood_root


class TestParseDims:
    def test_order_and_dedupe(self):
        assert parse_dims("original,fog:2,original,fog:2") == ["original", "fog:2"]

    def test_rejects_shape_errors(self):
        for bad in ("", "fog", "fog:x", "fog:0", "fog:6", ":2", "original,,fog:1"):
            with pytest.raises(ExportError):
                parse_dims(bad)

    def test_kind_names_left_to_corrupt_command(self):
        # shape-valid unknown kinds pass here; the corrupt subprocess owns the catalog
        assert parse_dims("blizzard:1") == ["blizzard:1"]


class TestBackendFactory:
    def test_unknown_model(self):
        with pytest.raises(ModelUnavailable):
            build_backend("resnet-900")

    def test_clip_unavailable_without_packages(self):
        backend = build_backend("clip-b16")
        with pytest.raises(ModelUnavailable):
            backend.prepare([("cat", []), ("dog", [])])


class TestPixelBackend:
    def test_separates_classes(self, tmp_path):
        id_root, _ = make_dataset(tmp_path)
        backend = PixelPrototypeBackend(image_size=16)
        classes = [
            (d.name, sorted(d.iterdir())) for d in sorted(id_root.iterdir())
        ]
        backend.prepare(classes)
        assert backend.labels == ["left", "right"]
        query = tmp_path / "q.png"
        write_png(query, jitter(half_pattern("left"), 12345))
        logits = backend.logits(query)
        assert len(logits) == 2
        assert logits[0] > logits[1]

    def test_needs_two_classes(self, tmp_path):
        d = tmp_path / "only"
        d.mkdir()
        write_png(d / "0.png", half_pattern("left"))
        backend = PixelPrototypeBackend()
        with pytest.raises(ExportError):
            backend.prepare([("only", sorted(d.iterdir()))])

    def test_undecodable_image(self, tmp_path):
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"not a png at all")
        from logit_exporter import UndecodableImage
        from logit_exporter.model import load_image

        with pytest.raises(UndecodableImage):
            load_image(bad)


class TestExportOriginalOnly:
    def test_cardinality_and_schema(self, tmp_path):
        id_root, ood_root = make_dataset(tmp_path, per_class=1, n_ood=0)
        out = tmp_path / "logits.ndjson"
        count = export(
            "pixel-prototype", id_root, ood_root, "original",
            "a photo of a {label}", out, image_size=16,
        )
        assert count == 2
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        for line in lines:
            obj = json.loads(line)
            assert set(obj) == {"sample_id", "split", "dim", "label", "logits"}
            assert obj["split"] == "id"
            assert obj["dim"] == "original"
            assert len(obj["logits"]) == 2

    def test_ood_records_have_no_label(self, tmp_path):
        id_root, ood_root = make_dataset(tmp_path)
        out = tmp_path / "logits.ndjson"
        export("pixel-prototype", id_root, ood_root, "original",
               "a photo of a {label}", out, image_size=16)
        for line in out.read_text().splitlines():
            obj = json.loads(line)
            assert ("label" in obj) == (obj["split"] == "id")

    def test_deterministic_bytes(self, tmp_path):
        id_root, ood_root = make_dataset(tmp_path)
        outs = []
        for name in ("a.ndjson", "b.ndjson"):
            out = tmp_path / name
            export("pixel-prototype", id_root, ood_root, "original",
                   "a photo of a {label}", out, image_size=16)
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_roots(self, tmp_path):
        with pytest.raises(ExportError):
            export("pixel-prototype", tmp_path / "nope", tmp_path, "original",
                   "x", tmp_path / "o.ndjson")


@needs_cover
class TestExportWithCorruptions:
    def test_two_images_two_dims_four_lines(self, tmp_path):
        id_root, ood_root = make_dataset(tmp_path, per_class=1, n_ood=0)
        out = tmp_path / "logits.ndjson"
        count = export(
            "pixel-prototype", id_root, ood_root, "original,brightness:1",
            "a photo of a {label}", out, image_size=16,
        )
        assert count == 4
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 4
        ks = {len(obj["logits"]) for obj in lines}
        assert ks == {2}
        assert {obj["dim"] for obj in lines} == {"original", "brightness:1"}

    def test_round_trips_through_toolkit_reader(self, tmp_path):
        cover = pytest.importorskip("cover", reason="toolkit not installed")
        id_root, ood_root = make_dataset(tmp_path)
        out = tmp_path / "logits.ndjson"
        count = export(
            "pixel-prototype", id_root, ood_root, "original,brightness:1,fog:2",
            "a photo of a {label}", out, image_size=16,
        )
        table = cover.read_logits(out)
        assert len(table) == count == 6 * 3
        assert table.k == 2
        for rec in table.records():
            if rec.dim != "original":
                cover.CorruptionSpec.parse(rec.dim)

    def test_seed_forwarded_to_corrupt(self, tmp_path):
        id_root, ood_root = make_dataset(tmp_path, per_class=1, n_ood=0)
        blobs = []
        for seed in (1, 2):
            out = tmp_path / f"s{seed}.ndjson"
            export("pixel-prototype", id_root, ood_root, "gaussian_noise:3",
                   "a photo of a {label}", out, image_size=16, seed=seed)
            blobs.append(out.read_bytes())
        assert blobs[0] != blobs[1]

    def test_unknown_kind_surfaces_corrupt_error(self, tmp_path):
        id_root, ood_root = make_dataset(tmp_path, per_class=1, n_ood=0)
        with pytest.raises(ExportError) as ei:
            export("pixel-prototype", id_root, ood_root, "blizzard:1",
                   "a photo of a {label}", tmp_path / "o.ndjson", image_size=16)
        assert "blizzard" in str(ei.value)

    def test_missing_cover_binary(self, tmp_path):
        id_root, ood_root = make_dataset(tmp_path, per_class=1, n_ood=0)
        with pytest.raises(ExportError) as ei:
            export("pixel-prototype", id_root, ood_root, "fog:1",
                   "a photo of a {label}", tmp_path / "o.ndjson",
                   cover_bin="cover-binary-that-does-not-exist")
        assert "not found" in str(ei.value)


class TestCli:
    def test_usage_error_on_bad_dims(self):
        with pytest.raises(SystemExit) as ei:
            main(["--id-root", "a", "--ood-root", "b", "--out", "c", "--dims", "fog:9"])
        assert ei.value.code == 2

    def test_runtime_error_exit_1(self, tmp_path, capsys):
        code = main(["--id-root", str(tmp_path / "missing"), "--ood-root", str(tmp_path),
                     "--out", str(tmp_path / "o.ndjson")])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_end_to_end(self, tmp_path, capsys):
        id_root, ood_root = make_dataset(tmp_path)
        out = tmp_path / "logits.ndjson"
        code = main(["--id-root", str(id_root), "--ood-root", str(ood_root),
                     "--out", str(out), "--image-size", "16"])
        assert code == 0
        assert "wrote 6 records" in capsys.readouterr().out
        assert len(out.read_text().splitlines()) == 6

    @needs_cover
    def test_console_script_subprocess(self, tmp_path):
        exe = shutil.which("cover-export")
        if exe is None:
            pytest.skip("cover-export not installed as a script")
        id_root, ood_root = make_dataset(tmp_path)
        out = tmp_path / "logits.ndjson"
        proc = subprocess.run(
            [exe, "--id-root", str(id_root), "--ood-root", str(ood_root),
             "--dims", "original,brightness:1", "--out", str(out), "--image-size", "16"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0, proc.stderr
        assert len(out.read_text().splitlines()) == 12
