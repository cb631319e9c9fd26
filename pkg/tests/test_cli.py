"""End-to-end CLI contract: exit codes, output formats, config handling.

Everything runs in-process through main(argv); argparse usage errors
surface as SystemExit(2), runtime failures as return code 1.
"""

import io
import json
import math

import numpy as np
import pytest

from cover import (
    DimensionSet,
    LogitRecord,
    ScoreConfig,
    cover_score,
    frequency_split,
    write_logits,
)
from cover.cli import CSV_HEADER, main
from cover.image import read_image, write_png
from cover.scoring import DimensionalLogits, LogitVector


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_image(path, seed=0, size=16):
    gen = np.random.default_rng(seed)
    write_png(path, gen.random((size, size, 3)))
    return path


def write_logit_file(path, rows):
    recs = [
        LogitRecord(sample_id=sid, split=split, dim=dim, logits=tuple(logits))
        for sid, split, dim, logits in rows
    ]
    write_logits(recs, path)
    return path


def msp_logits(p):
    return (math.log(p / (1.0 - p)), 0.0)


class TestCorrupt:
    def test_writes_output(self, tmp_path, capsys):
        src = write_image(tmp_path / "in.png")
        out = tmp_path / "out.png"
        code, _, _ = run(
            ["corrupt", str(src), str(out), "--kind", "fog", "--severity", "3", "--seed", "7"],
            capsys,
        )
        assert code == 0
        img = read_image(out)
        assert img.shape == (16, 16, 3)

    def test_byte_identical_same_seed(self, tmp_path, capsys):
        src = write_image(tmp_path / "in.png")
        outs = []
        for name in ("a.png", "b.png"):
            out = tmp_path / name
            code, _, _ = run(
                [
                    "corrupt", str(src), str(out),
                    "--kind", "gaussian_noise", "--severity", "3", "--seed", "11",
                ],
                capsys,
            )
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_seed_changes_bytes(self, tmp_path, capsys):
        src = write_image(tmp_path / "in.png")
        blobs = []
        for seed in ("1", "2"):
            out = tmp_path / f"s{seed}.png"
            run(
                [
                    "corrupt", str(src), str(out),
                    "--kind", "gaussian_noise", "--severity", "3", "--seed", seed,
                ],
                capsys,
            )
            blobs.append(out.read_bytes())
        assert blobs[0] != blobs[1]

    def test_unknown_kind_is_usage_error(self, tmp_path, capsys):
        src = write_image(tmp_path / "in.png")
        with pytest.raises(SystemExit) as ei:
            main(["corrupt", str(src), str(tmp_path / "o.png"),
                  "--kind", "blizzard", "--severity", "1"])
        assert ei.value.code == 2

    def test_severity_out_of_range_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as ei:
            main(["corrupt", "x.png", "y.png", "--kind", "fog", "--severity", "9"])
        assert ei.value.code == 2

    def test_missing_input_is_runtime_error(self, tmp_path, capsys):
        code, _, err = run(
            ["corrupt", str(tmp_path / "nope.png"), str(tmp_path / "o.png"),
             "--kind", "fog", "--severity", "1"],
            capsys,
        )
        assert code == 1
        assert "error" in err

    def test_cover_seed_env_default(self, tmp_path, capsys, monkeypatch):
        src = write_image(tmp_path / "in.png")

        def corrupt(out, extra=()):
            run(
                ["corrupt", str(src), str(out),
                 "--kind", "gaussian_noise", "--severity", "2", *extra],
                capsys,
            )
            return out.read_bytes()

        monkeypatch.setenv("COVER_SEED", "5")
        env5 = corrupt(tmp_path / "env5.png")
        env5_again = corrupt(tmp_path / "env5b.png")
        monkeypatch.setenv("COVER_SEED", "6")
        env6 = corrupt(tmp_path / "env6.png")
        flag5 = corrupt(tmp_path / "flag5.png", ("--seed", "5"))
        assert env5 == env5_again
        assert env5 != env6
        assert flag5 == env5  # explicit flag beats the env default


class TestScore:
    def rows(self):
        return [
            ("a", "id", "original", msp_logits(0.9)),
            ("a", "id", "fog:1", msp_logits(0.5)),
            ("b", "ood", "original", msp_logits(0.6)),
            ("b", "ood", "fog:1", msp_logits(0.8)),
        ]

    def test_scores_match_library(self, tmp_path, capsys):
        logits = write_logit_file(tmp_path / "l.ndjson", self.rows())
        code, out, _ = run(
            ["score", "--logits", str(logits), "--dims", "original,fog:1", "--score", "msp"],
            capsys,
        )
        assert code == 0
        got = {r["sample_id"]: r for r in map(json.loads, out.splitlines())}
        cfg = ScoreConfig(kind="msp")
        dims = DimensionSet.parse("original,fog:1")
        by_key = {(sid, dim): lg for sid, _, dim, lg in self.rows()}
        for sid, split in (("a", "id"), ("b", "ood")):
            want = cover_score(
                DimensionalLogits(
                    per_dim=tuple(
                        (tag, LogitVector(values=tuple(by_key[(sid, tag)])))
                        for tag in dims.tags()
                    )
                ),
                cfg,
            )
            assert got[sid]["score"] == want
            assert got[sid]["split"] == split

    def test_out_file(self, tmp_path, capsys):
        logits = write_logit_file(tmp_path / "l.ndjson", self.rows())
        out = tmp_path / "scores.ndjson"
        code, stdout, _ = run(
            ["score", "--logits", str(logits), "--dims", "original", "--out", str(out)],
            capsys,
        )
        assert code == 0
        assert stdout == ""
        assert len(out.read_text().splitlines()) == 2

    def test_bad_dims_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as ei:
            main(["score", "--logits", "x", "--dims", "fog:9"])
        assert ei.value.code == 2

    def test_nonpositive_tau_usage_error(self):
        with pytest.raises(SystemExit) as ei:
            main(["score", "--logits", "x", "--dims", "original", "--tau", "0"])
        assert ei.value.code == 2

    def test_missing_dim_record_runtime_error(self, tmp_path, capsys):
        logits = write_logit_file(
            tmp_path / "l.ndjson", [("a", "id", "original", msp_logits(0.9))]
        )
        code, _, err = run(
            ["score", "--logits", str(logits), "--dims", "original,fog:1"], capsys
        )
        assert code == 1
        assert "fog:1" in err

    def test_malformed_logits_runtime_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.ndjson"
        bad.write_text("{broken\n")
        code, _, err = run(["score", "--logits", str(bad), "--dims", "original"], capsys)
        assert code == 1


def write_scores(path, values):
    path.write_text("".join(f"{v}\n" for v in values))
    return path


class TestEval:
    def test_json_result(self, tmp_path, capsys):
        idf = write_scores(tmp_path / "id.txt", [0.9, 0.8, 0.95, 0.85])
        oodf = write_scores(tmp_path / "ood.txt", [0.1, 0.2, 0.3, 0.15])
        code, out, _ = run(["eval", "--id", str(idf), "--ood", str(oodf)], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["auroc"] == 1.0
        assert payload["fpr_at_tpr"] == 0.0
        assert payload["tpr_target"] == 0.95

    def test_csv_report_perfect_split(self, tmp_path, capsys):
        idf = write_scores(tmp_path / "id.txt", [0.9, 0.8, 0.95, 0.85])
        oodf = write_scores(tmp_path / "ood.txt", [0.1, 0.2, 0.3, 0.15])
        csv = tmp_path / "report.csv"
        code, _, _ = run(
            ["eval", "--id", str(idf), "--ood", str(oodf), "--csv", str(csv)], capsys
        )
        assert code == 0
        lines = csv.read_text().splitlines()
        assert lines[0] == CSV_HEADER == "method,dataset,auroc,fpr95"
        assert lines[1] == "CoVer,custom,100.00,0.00"

    def test_paper_numbers_row(self, capsys):
        code, out, _ = run(["eval", "--paper-numbers"], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == CSV_HEADER
        assert "CoVer,Average,92.45,34.88" in lines

    def test_plot_svg(self, tmp_path, capsys):
        gen = np.random.default_rng(1)
        idf = write_scores(tmp_path / "id.txt", 0.6 + 0.3 * gen.random(200))
        oodf = write_scores(tmp_path / "ood.txt", 0.4 * gen.random(200))
        svg = tmp_path / "hist.svg"
        code, _, _ = run(
            ["eval", "--id", str(idf), "--ood", str(oodf), "--plot", str(svg)], capsys
        )
        assert code == 0
        text = svg.read_text()
        assert text.startswith("<svg") and text.endswith("</svg>")
        assert "<rect" in text

    def test_score_ndjson_input(self, tmp_path, capsys):
        idf = tmp_path / "id.ndjson"
        idf.write_text(
            "".join(
                json.dumps({"sample_id": f"s{i}", "split": "id", "score": 0.8 + 0.01 * i}) + "\n"
                for i in range(5)
            )
        )
        oodf = write_scores(tmp_path / "ood.txt", [0.1, 0.2])
        code, out, _ = run(["eval", "--id", str(idf), "--ood", str(oodf)], capsys)
        assert code == 0
        assert json.loads(out)["auroc"] == 1.0

    def test_missing_id_flag_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as ei:
            main(["eval", "--ood", "x"])
        assert ei.value.code == 2

    def test_empty_scores_runtime_error(self, tmp_path, capsys):
        empty = tmp_path / "empty.txt"
        empty.write_text("")
        other = write_scores(tmp_path / "ood.txt", [0.1])
        code, _, err = run(["eval", "--id", str(empty), "--ood", str(other)], capsys)
        assert code == 1

    def test_bad_tpr_usage_error(self):
        with pytest.raises(SystemExit) as ei:
            main(["eval", "--id", "a", "--ood", "b", "--tpr", "1.0"])
        assert ei.value.code == 2


class TestSelect:
    def test_k1_winner(self, tmp_path, capsys):
        id_rows, ood_rows = [], []
        for i, p in enumerate([0.90, 0.85, 0.95, 0.80]):
            id_rows += [
                (f"i{i}", "id", "original", msp_logits(p)),
                (f"i{i}", "id", "brightness:1", msp_logits(p)),
                (f"i{i}", "id", "contrast:1", msp_logits(0.5)),
            ]
        for i, p in enumerate([0.88, 0.70, 0.92, 0.60]):
            ood_rows += [
                (f"o{i}", "ood", "original", msp_logits(p)),
                (f"o{i}", "ood", "brightness:1", msp_logits(0.5)),
                (f"o{i}", "ood", "contrast:1", msp_logits(p)),
            ]
        idf = write_logit_file(tmp_path / "id.ndjson", id_rows)
        oodf = write_logit_file(tmp_path / "ood.ndjson", ood_rows)
        code, out, _ = run(
            [
                "select", "--id", str(idf), "--ood", str(oodf),
                "--candidates", "brightness:1,contrast:1", "--k", "1",
            ],
            capsys,
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["chosen"] == ["brightness:1"]
        assert payload["ranked"][0]["dim"] == "brightness:1"
        assert payload["ranked"][0]["auroc"] >= payload["ranked"][1]["auroc"]

    def test_bad_candidate_usage_error(self):
        with pytest.raises(SystemExit) as ei:
            main(["select", "--id", "a", "--ood", "b", "--candidates", "fog:9"])
        assert ei.value.code == 2


class TestSimulate:
    def test_zero_delta(self, capsys):
        code, out, _ = run(["simulate", "--seed", "3"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["fpr_before"] == payload["fpr_after"]
        assert payload["declined"] is False
        assert payload["params_before"] == payload["params_after"]

    def test_keys_and_mc_agreement(self, capsys):
        code, out, _ = run(
            ["simulate", "--d-sigma-id", "-0.3", "--mc-samples", "200000", "--seed", "1"],
            capsys,
        )
        assert code == 0
        payload = json.loads(out)
        for key in (
            "params_before",
            "params_after",
            "fpr_before",
            "fpr_after",
            "mc_fpr_before",
            "mc_fpr_after",
            "declined",
            "assumption_violations",
        ):
            assert key in payload
        assert payload["declined"] is True
        assert abs(payload["mc_fpr_before"] - payload["fpr_before"]) < 0.01
        assert abs(payload["mc_fpr_after"] - payload["fpr_after"]) < 0.01

    def test_deterministic(self, capsys):
        a = run(["simulate", "--d-mu-ood", "-0.2", "--seed", "9"], capsys)[1]
        b = run(["simulate", "--d-mu-ood", "-0.2", "--seed", "9"], capsys)[1]
        assert a == b

    def test_violation_reported(self, capsys):
        code, out, _ = run(["simulate", "--d-mu-ood", "-0.5"], capsys)
        assert code == 0
        assert json.loads(out)["assumption_violations"]

    def test_sigma_collapse_runtime_error(self, capsys):
        code, _, err = run(["simulate", "--d-sigma-id", "-1.0"], capsys)
        assert code == 1


class TestFreq:
    def test_outputs_and_sidecar(self, tmp_path, capsys):
        src = write_image(tmp_path / "in.png", seed=4)
        out_low = tmp_path / "low.png"
        out_high = tmp_path / "high.png"
        code, out, _ = run(
            ["freq", str(src), "--out-low", str(out_low), "--out-high", str(out_high)],
            capsys,
        )
        assert code == 0
        assert out.splitlines()[0] == "radius_fraction 0.6"
        sidecar = json.loads((tmp_path / "high.png.json").read_text())
        assert sidecar["radius_fraction"] == 0.6
        assert sidecar["min"] <= 0.0 <= sidecar["max"]

        img = read_image(src)
        fs = frequency_split(img, 0.6)
        low_png = read_image(out_low)
        assert np.max(np.abs(low_png - np.clip(fs.low, 0.0, 1.0))) <= 1.0 / 255.0
        high_png = read_image(out_high)
        remapped = high_png * (sidecar["max"] - sidecar["min"]) + sidecar["min"]
        assert np.max(np.abs(remapped - fs.high)) <= (sidecar["max"] - sidecar["min"]) / 255.0

    def test_custom_radius_echoed(self, tmp_path, capsys):
        src = write_image(tmp_path / "in.png")
        code, out, _ = run(
            [
                "freq", str(src), "--radius", "0.25",
                "--out-low", str(tmp_path / "l.png"), "--out-high", str(tmp_path / "h.png"),
            ],
            capsys,
        )
        assert code == 0
        assert out.splitlines()[0] == "radius_fraction 0.25"

    def test_bad_radius_runtime_error(self, tmp_path, capsys):
        src = write_image(tmp_path / "in.png")
        code, _, err = run(
            ["freq", str(src), "--radius", "1.5",
             "--out-low", str(tmp_path / "l.png"), "--out-high", str(tmp_path / "h.png")],
            capsys,
        )
        assert code == 1


class TestBenchSynth:
    def test_json_payload(self, capsys):
        code, out, _ = run(
            ["bench-synth", "--n-id", "2000", "--n-ood", "2000", "--gap", "0.3", "--seed", "0"],
            capsys,
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["mutation_gap"] == 0.3
        assert payload["n_id"] == 2000
        assert payload["seed"] == 0
        assert payload["averaged"]["fpr_at_tpr"] < payload["original"]["fpr_at_tpr"]
        assert payload["var_averaged_id"] <= payload["var_original_id"]

    def test_deterministic(self, capsys):
        argv = ["bench-synth", "--n-id", "500", "--n-ood", "500", "--seed", "2"]
        assert run(argv, capsys)[1] == run(argv, capsys)[1]


class TestConfigFile:
    def test_config_supplies_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "cover.cfg"
        cfg.write_text("# benchmark shape\ngap = 0.0\nn-id = 37\nn_ood = 41\n")
        code, out, _ = run(["--config", str(cfg), "bench-synth", "--seed", "1"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["mutation_gap"] == 0.0
        assert payload["n_id"] == 37
        assert payload["n_ood"] == 41

    def test_explicit_flag_wins(self, tmp_path, capsys):
        cfg = tmp_path / "cover.cfg"
        cfg.write_text("gap = 0.0\n")
        code, out, _ = run(
            ["--config", str(cfg), "bench-synth", "--gap", "0.4", "--n-id", "100",
             "--n-ood", "100", "--seed", "1"],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["mutation_gap"] == 0.4

    def test_config_matches_flags_run(self, tmp_path, capsys):
        cfg = tmp_path / "cover.cfg"
        cfg.write_text("n-id = 300\nn-ood = 300\ngap = 0.2\nseed = 8\n")
        via_config = run(["--config", str(cfg), "bench-synth"], capsys)[1]
        via_flags = run(
            ["bench-synth", "--n-id", "300", "--n-ood", "300", "--gap", "0.2", "--seed", "8"],
            capsys,
        )[1]
        assert via_config == via_flags

    def test_malformed_config_runtime_error(self, tmp_path, capsys):
        cfg = tmp_path / "cover.cfg"
        cfg.write_text("gap 0.3\n")
        code, _, err = run(["--config", str(cfg), "bench-synth"], capsys)
        assert code == 1
        assert "key=value" in err

    def test_bad_config_value_runtime_error(self, tmp_path, capsys):
        cfg = tmp_path / "cover.cfg"
        cfg.write_text("tpr = 2.0\n")
        code, _, err = run(["--config", str(cfg), "bench-synth"], capsys)
        assert code == 1


class TestUsage:
    def test_no_command_usage_error(self):
        with pytest.raises(SystemExit) as ei:
            main([])
        assert ei.value.code == 2

    def test_unknown_command_usage_error(self):
        with pytest.raises(SystemExit) as ei:
            main(["explode"])
        assert ei.value.code == 2
