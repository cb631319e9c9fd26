"""Command-line surface for the corruption/scoring/evaluation pipeline.

Exit codes are a stable contract: 0 success, 1 runtime failure, 2 usage
error.  Output is plain text (JSON, NDJSON, CSV, or SVG); no ANSI color is
ever emitted, which makes NO_COLOR a no-op honored by construction.  Every
command is deterministic given its flags and seed; COVER_SEED provides the
default seed.

An optional key=value config file mirrors every flag (keys are long flag
names without the leading dashes, dashes or underscores both accepted);
explicit command-line flags win over config values.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .corruptions import (
    KINDS,
    ORIGINAL,
    CorruptionSpec,
    DimensionSet,
    apply_corruption,
    load_severity_tables,
)
from .errors import CoverError
from .gmm import (
    GMMParams,
    ParamDelta,
    analytic_fpr_highscore,
    apply_cover_delta,
    assumption_violations,
    sample_gmm,
)
from .image import read_image, write_png
from .ingest import LogitTable, read_logits, select_corruptions
from .metrics import ScoredSplit, evaluate, fpr_at_tpr
from .mutation import frequency_split
from .scoring import BASE_KINDS, DimensionalLogits, LogitVector, ScoreConfig, cover_score
from .synth import gen_synthetic_benchmark, run_cover_experiment


@dataclasses.dataclass(frozen=True)
class ReportRow:
    """One CSV report line; AUROC and FPR are percentages, 2 decimals."""

    method: str
    dataset: str
    auroc_pct: float
    fpr95_pct: float

    def __post_init__(self) -> None:
        for name in ("auroc_pct", "fpr95_pct"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} must be in [0,100], got {v}")


CSV_HEADER = "method,dataset,auroc,fpr95"


def render_report_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r.method},{r.dataset},{r.auroc_pct:.2f},{r.fpr95_pct:.2f}")
    return "\n".join(lines) + "\n"


def load_expectation_rows() -> list:
    """Published benchmark rows shipped as documentation, not measurements."""
    text = resources.files("cover.data").joinpath("paper_expectations.json").read_text("utf-8")
    return [
        ReportRow(
            method=r["method"],
            dataset=r["dataset"],
            auroc_pct=r["auroc_pct"],
            fpr95_pct=r["fpr95_pct"],
        )
        for r in json.loads(text)["rows"]
    ]


# --- argument plumbing ------------------------------------------------------


def _env_seed() -> int:
    raw = os.environ.get("COVER_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        return 0


def positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def unit_interval(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must be strictly between 0 and 1, got {text}")
    return v


def dims_expr(text: str) -> str:
    DimensionSet.parse(text)  # raises ValueError -> usage error
    return text


def candidates_expr(text: str) -> str:
    for token in text.split(","):
        CorruptionSpec.parse(token.strip())
    return text


def _read_config(path: str) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CoverError(f"{path}:{lineno}: expected key=value, got {line!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


class _Registry:
    """Remembers each option's dest, flag strings, and coercer so config

    values can be applied with the same types as the command line."""

    def __init__(self):
        self.coercers = {}
        self.flags = {}

    def add(self, parser, *flags, **kwargs):
        action = parser.add_argument(*flags, **kwargs)
        coerce = kwargs.get("type", str)
        if kwargs.get("action") in ("store_true", "store_false"):
            coerce = lambda s: s.strip().lower() in ("1", "true", "yes", "on")  # noqa: E731
        self.coercers[action.dest] = coerce
        self.flags[action.dest] = [f for f in flags if f.startswith("-")]
        return action


def _apply_config(args: argparse.Namespace, registry: _Registry, argv: list) -> None:
    if not getattr(args, "config", None):
        return
    cfg = _read_config(args.config)
    given = set()
    for token in argv:
        if token.startswith("--"):
            given.add(token.split("=", 1)[0])
    for dest, raw in cfg.items():
        if dest not in registry.coercers:
            continue
        if any(flag in given for flag in registry.flags[dest]):
            continue  # explicit flag wins
        try:
            setattr(args, dest, registry.coercers[dest](raw))
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise CoverError(f"config value for {dest}: {exc}") from None


# --- subcommands ------------------------------------------------------------


def cmd_corrupt(args) -> int:
    img = read_image(args.input)
    tables = load_severity_tables(args.tables) if args.tables else None
    spec = CorruptionSpec(kind=args.kind, severity=args.severity, seed=args.seed)
    write_png(args.output, apply_corruption(img, spec, tables=tables))
    return 0


def cmd_score(args) -> int:
    table = read_logits(args.logits)
    dims = DimensionSet.parse(args.dims, seed=args.seed)
    cfg = ScoreConfig(kind=args.score, tau=args.tau, T=args.energy_t)
    tags = dims.tags()
    lines = []
    for sample_id in table.sample_ids():
        per_dim = []
        for tag in tags:
            rec = table.get(sample_id, tag)
            if rec is None:
                raise CoverError(f"sample {sample_id!r} has no record for dim {tag!r}")
            per_dim.append((tag, LogitVector(values=rec.logits)))
        score = cover_score(DimensionalLogits(per_dim=tuple(per_dim)), cfg)
        lines.append(
            json.dumps(
                {"sample_id": sample_id, "split": table.split_of(sample_id), "score": score},
                allow_nan=False,
                separators=(",", ":"),
            )
        )
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _read_scores(path: str) -> np.ndarray:
    """Scores from a file: floats one per line, or score-NDJSON records."""
    vals = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            try:
                obj = json.loads(line)
                vals.append(float(obj["score"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise CoverError(f"{path}:{lineno}: bad score record: {exc}") from None
        else:
            try:
                vals.append(float(line))
            except ValueError:
                raise CoverError(f"{path}:{lineno}: not a number: {line!r}") from None
    if not vals:
        raise CoverError(f"{path} contains no scores")
    return np.array(vals)


def cmd_eval(args, parser) -> int:
    if args.paper_numbers:
        csv_text = render_report_csv(load_expectation_rows())
        if args.csv:
            Path(args.csv).write_text(csv_text, encoding="utf-8")
        else:
            sys.stdout.write(csv_text)
        return 0
    if not args.id or not args.ood:
        parser.error("eval requires --id and --ood (or --paper-numbers)")
    split = ScoredSplit(id_scores=_read_scores(args.id), ood_scores=_read_scores(args.ood))
    result = evaluate(split, args.tpr)
    sys.stdout.write(json.dumps(result.to_dict(), allow_nan=False) + "\n")
    if args.csv:
        row = ReportRow(
            method=args.method,
            dataset=args.dataset,
            auroc_pct=result.auroc * 100.0,
            fpr95_pct=result.fpr_at_tpr * 100.0,
        )
        Path(args.csv).write_text(render_report_csv([row]), encoding="utf-8")
    if args.plot:
        write_score_histogram_svg(args.plot, split.id_scores, split.ood_scores)
    return 0


def cmd_select(args) -> int:
    id_table = read_logits(args.id)
    ood_table = read_logits(args.ood)
    candidates = [
        CorruptionSpec.parse(tok.strip(), seed=args.seed) for tok in args.candidates.split(",")
    ]
    cfg = ScoreConfig(kind=args.score, tau=args.tau, T=args.energy_t)
    result = select_corruptions(id_table, ood_table, candidates, cfg, args.k)
    payload = {
        "ranked": [{"dim": spec.tag, "auroc": auc} for spec, auc in result.ranked],
        "chosen": [spec.tag for spec in result.chosen],
    }
    sys.stdout.write(json.dumps(payload, allow_nan=False) + "\n")
    return 0


def cmd_simulate(args) -> int:
    params = GMMParams(
        mu_id=args.mu_id, sigma_id=args.sigma_id, mu_ood=args.mu_ood, sigma_ood=args.sigma_ood
    )
    delta = ParamDelta(
        d_mu_id=args.d_mu_id,
        d_mu_ood=args.d_mu_ood,
        d_sigma_id=args.d_sigma_id,
        d_sigma_ood=args.d_sigma_ood,
    )
    after = apply_cover_delta(params, delta)
    fpr_before = analytic_fpr_highscore(params, args.tpr)
    fpr_after = analytic_fpr_highscore(after, args.tpr)

    def mc(p: GMMParams, tag: int) -> float:
        split = sample_gmm(p, args.mc_samples, args.mc_samples, seed=args.seed + tag)
        return fpr_at_tpr(split, args.tpr)

    payload = {
        "params_before": params.to_dict(),
        "params_after": after.to_dict(),
        "fpr_before": fpr_before,
        "fpr_after": fpr_after,
        "mc_fpr_before": mc(params, 0),
        "mc_fpr_after": mc(after, 1),
        "declined": fpr_after < fpr_before,
        "assumption_violations": list(assumption_violations(delta)),
    }
    sys.stdout.write(json.dumps(payload, allow_nan=False) + "\n")
    return 0


def cmd_freq(args) -> int:
    img = read_image(args.input)
    fs = frequency_split(img, args.radius)
    sys.stdout.write(f"radius_fraction {args.radius}\n")
    write_png(args.out_low, fs.low)
    lo = float(fs.high.min())
    hi = float(fs.high.max())
    mapped = np.zeros_like(fs.high) if hi == lo else (fs.high - lo) / (hi - lo)
    write_png(args.out_high, mapped)
    sidecar = {"radius_fraction": args.radius, "min": lo, "max": hi}
    Path(str(args.out_high) + ".json").write_text(
        json.dumps(sidecar, allow_nan=False) + "\n", encoding="utf-8"
    )
    return 0


def cmd_bench_synth(args) -> int:
    benchmark = gen_synthetic_benchmark(args.n_id, args.n_ood, args.gap, seed=args.seed)
    result = run_cover_experiment(benchmark, tpr=args.tpr)
    payload = {"mutation_gap": args.gap, "n_id": args.n_id, "n_ood": args.n_ood,
               "seed": args.seed, **result.to_dict()}
    sys.stdout.write(json.dumps(payload, allow_nan=False) + "\n")
    return 0


# --- plotting ---------------------------------------------------------------


def write_score_histogram_svg(path, id_scores, ood_scores, bins: int = 40) -> None:
    """Overlaid score histograms as a self-contained SVG file."""
    id_arr = np.asarray(id_scores, dtype=np.float64)
    ood_arr = np.asarray(ood_scores, dtype=np.float64)
    lo = float(min(id_arr.min(), ood_arr.min()))
    hi = float(max(id_arr.max(), ood_arr.max()))
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    id_counts, _ = np.histogram(id_arr, bins=edges)
    ood_counts, _ = np.histogram(ood_arr, bins=edges)
    peak = max(1, id_counts.max(), ood_counts.max())

    width, height = 640, 360
    pad_l, pad_r, pad_t, pad_b = 50, 20, 30, 40
    plot_w = width - pad_l - pad_r
    plot_h = height - pad_t - pad_b
    bar_w = plot_w / bins

    def bars(counts, color):
        parts = []
        for i, c in enumerate(counts):
            if c == 0:
                continue
            bh = plot_h * (c / peak)
            x = pad_l + i * bar_w
            y = pad_t + plot_h - bh
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{bh:.2f}" '
                f'fill="{color}" fill-opacity="0.55"/>'
            )
        return "".join(parts)

    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
        f"{bars(id_counts, '#4682b4')}{bars(ood_counts, '#e07b39')}"
        f'<line x1="{pad_l}" y1="{pad_t + plot_h}" x2="{pad_l + plot_w}" y2="{pad_t + plot_h}" '
        f'stroke="black"/>'
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + plot_h}" stroke="black"/>'
        f'<text x="{pad_l}" y="{height - 12}" font-size="12">{lo:.3g}</text>'
        f'<text x="{pad_l + plot_w - 30}" y="{height - 12}" font-size="12">{hi:.3g}</text>'
        f'<text x="{pad_l + 10}" y="{pad_t - 10}" font-size="12" fill="#4682b4">ID</text>'
        f'<text x="{pad_l + 40}" y="{pad_t - 10}" font-size="12" fill="#e07b39">OOD</text>'
        f"</svg>"
    )
    Path(path).write_text(svg, encoding="utf-8")


# --- parser -----------------------------------------------------------------


def build_parser() -> tuple:
    parser = argparse.ArgumentParser(
        prog="cover",
        description="Detect out-of-distribution inputs by averaging confidence "
        "over an input and its corrupted views.",
    )
    reg = _Registry()
    parser.add_argument("--config", help="key=value file mirroring flags; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="apply one corruption to an image")
    p.add_argument("input")
    p.add_argument("output")
    reg.add(p, "--kind", required=True, choices=KINDS)
    reg.add(p, "--severity", required=True, type=int, choices=[1, 2, 3, 4, 5])
    reg.add(p, "--seed", type=int, default=_env_seed())
    reg.add(p, "--tables", help="custom severity tables JSON")

    p = sub.add_parser("score", help="averaged confidence scores from a logits file")
    reg.add(p, "--logits", required=True)
    reg.add(p, "--dims", required=True, type=dims_expr, default=ORIGINAL)
    reg.add(p, "--score", choices=BASE_KINDS, default="msp")
    reg.add(p, "--tau", type=positive_float, default=1.0)
    reg.add(p, "--energy-t", type=positive_float, default=1.0)
    reg.add(p, "--seed", type=int, default=_env_seed())
    reg.add(p, "--out", help="output NDJSON path (default stdout)")

    p = sub.add_parser("eval", help="AUROC and FPR at target TPR from score files")
    reg.add(p, "--id", help="ID scores: floats per line or score NDJSON")
    reg.add(p, "--ood", help="OOD scores: floats per line or score NDJSON")
    reg.add(p, "--tpr", type=unit_interval, default=0.95)
    reg.add(p, "--csv", help="write a CSV report row here")
    reg.add(p, "--method", default="CoVer")
    reg.add(p, "--dataset", default="custom")
    reg.add(p, "--plot", help="write an SVG score-histogram overlay here")
    reg.add(p, "--paper-numbers", action="store_true",
            help="render the published large-scale expectations as CSV and exit")
    eval_parser = p

    p = sub.add_parser("select", help="rank candidate corruptions by validation AUROC")
    reg.add(p, "--id", required=True)
    reg.add(p, "--ood", required=True)
    reg.add(p, "--candidates", required=True, type=candidates_expr,
            help="comma list of kind:severity")
    reg.add(p, "--k", type=int, default=3)
    reg.add(p, "--score", choices=BASE_KINDS, default="msp")
    reg.add(p, "--tau", type=positive_float, default=1.0)
    reg.add(p, "--energy-t", type=positive_float, default=1.0)
    reg.add(p, "--seed", type=int, default=_env_seed())

    p = sub.add_parser("simulate", help="analytic and Monte-Carlo FPR under a parameter shift")
    reg.add(p, "--mu-id", type=float, default=1.0)
    reg.add(p, "--sigma-id", type=positive_float, default=1.0)
    reg.add(p, "--mu-ood", type=float, default=0.0)
    reg.add(p, "--sigma-ood", type=positive_float, default=1.0)
    reg.add(p, "--d-mu-id", type=float, default=0.0)
    reg.add(p, "--d-mu-ood", type=float, default=0.0)
    reg.add(p, "--d-sigma-id", type=float, default=0.0)
    reg.add(p, "--d-sigma-ood", type=float, default=0.0)
    reg.add(p, "--tpr", type=unit_interval, default=0.95)
    reg.add(p, "--mc-samples", type=int, default=100000)
    reg.add(p, "--seed", type=int, default=_env_seed())

    p = sub.add_parser("freq", help="split an image into low/high frequency parts")
    p.add_argument("input")
    reg.add(p, "--radius", type=float, default=0.6)
    reg.add(p, "--out-low", required=True)
    reg.add(p, "--out-high", required=True,
            help="high part PNG; remap recorded in <path>.json")

    p = sub.add_parser("bench-synth", help="synthetic benchmark of the three input modes")
    reg.add(p, "--n-id", type=int, default=10000)
    reg.add(p, "--n-ood", type=int, default=10000)
    reg.add(p, "--gap", type=float, default=0.3)
    reg.add(p, "--tpr", type=unit_interval, default=0.95)
    reg.add(p, "--seed", type=int, default=_env_seed())

    return parser, reg, eval_parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, reg, eval_parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, reg, argv)
        if args.command == "corrupt":
            return cmd_corrupt(args)
        if args.command == "score":
            return cmd_score(args)
        if args.command == "eval":
            return cmd_eval(args, eval_parser)
        if args.command == "select":
            return cmd_select(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "freq":
            return cmd_freq(args)
        if args.command == "bench-synth":
            return cmd_bench_synth(args)
        raise AssertionError(f"unroutable command {args.command!r}")
    except (CoverError, OSError, ValueError) as exc:
        print(f"cover: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
