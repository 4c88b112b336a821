"""``ga`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from gaest import __version__
from gaest.aggregation import case_rows_to_csv, read_case_csv
from gaest.cohort import DiskMediaStore, RenderedMediaStore, SynthConfig, load_manifest, save_manifest
from gaest.cohort.splits import read_split_csv, split_patients, write_split_csv
from gaest.cohort.synth import write_media
from gaest.errors import GAError, ValidationError
from gaest.estimator.weights import load_weights, save_weights
from gaest.evalstats import StatsConfig
from gaest.formulae import eval_formula, example_library_path, load_library
from gaest.growth import GrowthConfig, PercentileTable, build_percentile_table
from gaest.pipeline import (
    MODEL_IDS, MediaSource, get_preset, media_id, predict_cases, preprocess_frames, train_models,
)
from gaest.provenance import header_json, header_line, make_header
from gaest.report import build_records, build_report

log = logging.getLogger("gaest")


class InputMissing(GAError):
    pass


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise InputMissing(f"input not found: {p}")
    return p


@contextmanager
def atomic_dir(out):
    """Build into a sibling temp dir, then swap it into place."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out.exists():
        trash = Path(tempfile.mkdtemp(prefix=f".{out.name}.old.", dir=out.parent))
        os.replace(out, trash / "old")
        os.replace(tmp, out)
        shutil.rmtree(trash, ignore_errors=True)
    else:
        os.replace(tmp, out)


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _split_visits(cohort, split_path, subset):
    if split_path is None:
        return cohort
    assignment = read_split_csv(_require(split_path))
    return cohort.subset(pid for pid, name in assignment.items() if name in subset)


class PreprocessedStore:
    """Model-ready arrays written by ``ga preprocess``."""

    def __init__(self, root):
        self.root = Path(root)
        index = json.loads((self.root / "index.json").read_text())
        self.preset = index["preset"]

    def load_preprocessed(self, visit, ref):
        return np.load(self.root / f"{media_id(visit, ref)}.npy")


def _media_source(args, preset):
    if getattr(args, "preprocessed", None):
        store = PreprocessedStore(_require(args.preprocessed))
        if store.preset != preset.name:
            raise GAError(f"{args.preprocessed} was preprocessed with preset {store.preset!r}, not {preset.name!r}")
        return MediaSource(store, preset.clip)
    if getattr(args, "media_root", None):
        return MediaSource(DiskMediaStore(_require(args.media_root)), preset.clip)
    return MediaSource(RenderedMediaStore(), preset.clip)


def _media_inputs(args) -> dict:
    out = {}
    if getattr(args, "preprocessed", None):
        out["preprocessed"] = args.preprocessed
    elif getattr(args, "media_root", None):
        out["media"] = args.media_root
    return out


# -- subcommands -------------------------------------------------------------

def cmd_synth(args):
    config = SynthConfig(n_patients=args.n, rng_seed=args.seed, sga_fraction=args.sga_fraction,
                         lga_fraction=args.lga_fraction)
    from gaest.cohort import synthesize_cohort
    cohort = synthesize_cohort(config)
    header = make_header("synth", args.seed)
    with atomic_dir(args.out) as tmp:
        save_manifest(cohort, tmp / "manifest.jsonl", header)
        if not args.no_media:
            write_media(cohort, tmp, header)
    print(f"wrote {len(cohort)} patients to {args.out}")


def cmd_split(args):
    cohort = load_manifest(_require(args.manifest))
    ratios = tuple(float(x) for x in args.ratios.split(","))
    assignment = split_patients(cohort, ratios, args.seed)
    header = make_header("split", args.seed, {"manifest": args.manifest})
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(args.out).with_name(f".{Path(args.out).name}.tmp")
    write_split_csv(assignment, tmp, header_line(header))
    os.replace(tmp, args.out)
    counts = {name: sum(1 for v in assignment.values() if v == name) for name in ("train", "tune", "test")}
    print(" ".join(f"{k}={v}" for k, v in counts.items()))


def cmd_preprocess(args):
    preset = get_preset(args.preset)
    cohort = load_manifest(_require(args.manifest))
    source = _media_source(args, preset)
    header = make_header("preprocess", None, {"manifest": args.manifest, **_media_inputs(args)})
    count = 0
    with atomic_dir(args.out) as tmp:
        for _, visit in cohort.visits():
            for ref in visit.media:
                frames, spacing = source.store.load(visit, ref)
                path = tmp / f"{media_id(visit, ref)}.npy"
                path.parent.mkdir(parents=True, exist_ok=True)
                np.save(path, preprocess_frames(frames, spacing, ref.kind, preset.clip))
                count += 1
        index = {"_header": json.loads(header_json(header)), "preset": preset.name,
                 "clip": asdict(preset.clip), "count": count}
        (tmp / "index.json").write_text(json.dumps(index, indent=1, sort_keys=True) + "\n")
    print(f"preprocessed {count} media items into {args.out}")


def _config_echo(preset, models) -> dict:
    echo = {"preset": preset.name, "models": list(models), "clip": asdict(preset.clip)}
    for model_id in models:
        cfg = preset.train_config(model_id)
        echo[model_id] = {"schedule": type(cfg.schedule).__name__, **asdict(cfg.schedule),
                          "max_steps": cfg.max_steps, "batch_size": cfg.batch_size, "keep_prob": cfg.keep_prob,
                          "weight_decay": cfg.weight_decay, "betas": list(cfg.betas), "eps": cfg.eps}
    return echo


def cmd_train(args):
    preset = get_preset(args.preset, args.max_steps)
    models = tuple(args.models.split(",")) if args.models else preset.models
    echo = _config_echo(preset, models)
    print(json.dumps(echo, indent=1))
    if args.echo_only:
        return
    if not args.manifest or not args.out:
        raise GAError("train needs --manifest and --out unless --echo-only is given")
    cohort = _split_visits(load_manifest(_require(args.manifest)), args.split, ("train",))
    source = _media_source(args, preset)
    inputs = {"manifest": args.manifest, **_media_inputs(args)}
    if args.split:
        inputs["split"] = args.split
    header = make_header("train", args.seed, inputs)
    results = train_models(cohort, source, preset, args.seed, models)
    with atomic_dir(args.out) as tmp:
        for model_id, (net, curve) in results.items():
            save_weights(net, tmp / f"{model_id}.gawt", header)
            (tmp / f"{model_id}_loss.csv").write_text(curve.to_csv(header_line(header)))
        config = {"_header": json.loads(header_json(header)), **echo}
        (tmp / "config.json").write_text(json.dumps(config, indent=1, sort_keys=True) + "\n")


def cmd_predict(args):
    model_dir = _require(args.models)
    config = json.loads((model_dir / "config.json").read_text())
    preset = get_preset(config["preset"])
    models = {}
    for model_id in MODEL_IDS:
        path = model_dir / f"{model_id}.gawt"
        if path.exists():
            models[model_id], _ = load_weights(path)
    if not models:
        raise InputMissing(f"no weight files in {model_dir}")
    cohort = _split_visits(load_manifest(_require(args.manifest)), args.split, tuple(args.subset.split(",")))
    source = _media_source(args, preset)
    rows = predict_cases(models, cohort, source)
    inputs = {"manifest": args.manifest, "models": args.models, **_media_inputs(args)}
    if args.split:
        inputs["split"] = args.split
    header = make_header("predict", None, inputs)
    _atomic_write(args.out, case_rows_to_csv(rows, header_line(header)))
    print(f"wrote {len(rows)} case estimates to {args.out}")


def cmd_evaluate(args):
    cohort = load_manifest(_require(args.manifest))
    rows = read_case_csv(_require(args.pred))
    library = load_library(_require(args.formulas)) if args.formulas else load_library(example_library_path())
    extra = [n for n in library if n != args.baseline]
    try:
        growth_table = build_percentile_table(cohort, GrowthConfig(min_studies_per_week=args.min_count))
    except ValidationError as exc:
        log.warning("size classes unavailable: %s", exc)
        growth_table = PercentileTable()
    records = build_records(cohort, rows, library, extra + [args.baseline], growth_table)
    config = StatsConfig(ci_method=args.ci_method, bin_width_days=args.bin_width, seed=args.seed)
    inputs = {"manifest": args.manifest, "pred": args.pred}
    if args.formulas:
        inputs["formulas"] = args.formulas
    header = make_header("evaluate", args.seed, inputs)
    files = build_report(records, config, args.baseline, extra_formulas=extra, header_text=header_line(header))
    with atomic_dir(args.out) as tmp:
        for name, content in files.items():
            (tmp / name).write_text(content, encoding="utf-8")
    print(files["report.txt"].split("== table2", 1)[0])


def cmd_percentiles(args):
    cohort = load_manifest(_require(args.manifest))
    config = GrowthConfig(min_studies_per_week=args.min_count)
    table = build_percentile_table(cohort, config)
    header = make_header("percentiles", None, {"manifest": args.manifest})
    _atomic_write(args.out, table.to_csv(header_line(header)))
    print(f"wrote {len(table.cells)} cells to {args.out}")


def cmd_formula_eval(args):
    library = load_library(_require(args.config))
    if args.name not in library:
        raise GAError(f"formula {args.name!r} not in {args.config}; available: {', '.join(sorted(library))}")
    values = {}
    for item in args.set or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise GAError(f"--set expects name=value, got {item!r}")
        values[key.strip()] = float(raw)
    result = eval_formula(library[args.name], values)
    flag = " (outside applicability range)" if result.out_of_range else ""
    print(f"{result.name}: {result.ga_days!r} days{flag}")


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ga", description="Gestational age estimation pipeline.")
    parser.add_argument("--version", action="version", version=f"gaest {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort with media")
    p.add_argument("--n", type=int, required=True, help="number of patients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--sga-fraction", type=float, default=0.10)
    p.add_argument("--lga-fraction", type=float, default=0.10)
    p.add_argument("--no-media", action="store_true", help="write the manifest only")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="assign patients to train/tune/test")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.6,0.2,0.2")
    p.add_argument("--out", required=True, help="split CSV path")
    p.set_defaults(func=cmd_split)

    def media_flags(p):
        p.add_argument("--media-root", help="directory holding the manifest's media paths")
        p.add_argument("--preprocessed", help="output directory of `ga preprocess`")

    p = sub.add_parser("preprocess", help="resample media to a preset's model input spec")
    p.add_argument("--manifest", required=True)
    p.add_argument("--preset", default="desk")
    p.add_argument("--media-root")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train the image and video models")
    p.add_argument("--manifest")
    p.add_argument("--split", help="split CSV; only train patients are used")
    p.add_argument("--preset", default="desk")
    p.add_argument("--models", help=f"comma-separated subset of {','.join(MODEL_IDS)}")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--echo-only", action="store_true", help="print the resolved config and exit")
    p.add_argument("--out", help="output directory for weights and loss curves")
    media_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write case-level predictions")
    p.add_argument("--manifest", required=True)
    p.add_argument("--models", required=True, help="directory written by `ga train`")
    p.add_argument("--split")
    p.add_argument("--subset", default="test", help="comma-separated split names to score")
    p.add_argument("--out", required=True, help="prediction CSV path")
    media_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="build the report suite")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--baseline", default="hadlock")
    p.add_argument("--formulas", help="formula library JSON (default: bundled example)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ci-method", choices=("normal_z", "student_t"), default="normal_z")
    p.add_argument("--bin-width", type=int, default=28)
    p.add_argument("--min-count", type=int, default=14, help="minimum studies per percentile cell")
    p.add_argument("--out", default="report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("percentiles", help="export the AC percentile table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--min-count", type=int, default=14)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_percentiles)

    p = sub.add_parser("formula", help="formula engine utilities")
    fsub = p.add_subparsers(dest="formula_command", required=True)
    e = fsub.add_parser("eval", help="evaluate one formula")
    e.add_argument("--config", required=True)
    e.add_argument("--name", required=True)
    e.add_argument("--set", action="append", metavar="VAR=VALUE")
    e.set_defaults(func=cmd_formula_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (GAError, OSError) as exc:
        print(f"ga {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def run(argv) -> int:
    try:
        return main(argv)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
