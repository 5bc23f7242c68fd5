"""Command-line surface over the generator, pipeline and defenses.

Exit codes: 0 success, 1 runtime failure (bad data, missing file), 2 usage.
Every output lands under --out-dir / --out; --seed threads through every
stochastic step.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .classifier import GBDTClassifier
from .defenses import MODULATION_INTERVALS, PaddingConfig, apply_defense, modulation_preset
from .errors import RobofpError
from .features import (
    FeatureSchema,
    featurize_dataset,
    read_feature_csv,
    write_feature_csv,
)
from .harness import (
    DEFAULT_THRESHOLD_GRID,
    ExperimentConfig,
    load_inputs,
    run_attack_experiment,
    run_defense_sweep,
    threshold_sweep,
    write_csv,
    write_report,
)
from .synthgen import GenConfig, default_kernel_bank, gen_dataset
from .trace import Dataset, save_dataset


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--samples-per-class", type=int, default=50)
    p.add_argument("--manifest", help="load traces from this manifest instead of generating")
    p.add_argument("--config", help="experiment config JSON overriding the flags")


def _config_from_args(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        return ExperimentConfig.from_json(Path(args.config).read_text())
    kw = dict(
        seed=args.seed,
        samples_per_class=args.samples_per_class,
        manifest=args.manifest,
    )
    if getattr(args, "feature_set", None):
        kw["feature_set"] = args.feature_set
    if getattr(args, "workers", None):
        kw["workers"] = args.workers
    return ExperimentConfig(**kw)


def _cmd_generate(args) -> int:
    ds = gen_dataset(GenConfig(seed=args.seed, samples_per_class=args.samples_per_class))
    manifest = save_dataset(ds, args.out_dir)
    print(f"wrote {len(ds.traces)} traces, manifest {manifest}")
    return 0


def _cmd_kernels(args) -> int:
    bank = default_kernel_bank(bin_width=args.bin_width)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    bank.save(out)
    print(f"wrote kernel bank {out} (fingerprint {bank.fingerprint()})")
    return 0


def _cmd_featurize(args) -> int:
    config = _config_from_args(args)
    dataset, bank = load_inputs(config)
    matrix = featurize_dataset(dataset, bank, config.sigproc, config.feature_set)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(matrix, out)
    out.with_suffix(".schema.json").write_text(matrix.schema.to_json() + "\n")
    print(f"wrote {matrix.X.shape[0]}x{matrix.X.shape[1]} features to {out}")
    return 0


def _cmd_train(args) -> int:
    schema = FeatureSchema.from_json(Path(args.schema).read_text())
    matrix = read_feature_csv(args.features, schema)
    model = GBDTClassifier(feature_names=list(schema.names))
    model.fit(matrix.X, matrix.labels)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(model.to_json() + "\n")
    print(f"wrote model {out} ({len(model.classes_)} classes)")
    return 0


def _cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    report = run_attack_experiment(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(report, out_dir / "report.json")
    cv = report["cv"]
    rows = [
        dict(zip(["true_label", *cv["classes"]], [c, *counts]))
        for c, counts in zip(cv["classes"], cv["confusion"])
    ]
    write_csv(out_dir / "confusion.csv", ["true_label", *cv["classes"]], rows)
    print(f"accuracy {cv['accuracy']:.4f} over {report['n_traces']} traces")
    print(f"report {out_dir / 'report.json'}")
    return 0


def _cmd_sweep_threshold(args) -> int:
    config = _config_from_args(args)
    rows = threshold_sweep(config, tuple(args.thresholds or DEFAULT_THRESHOLD_GRID))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "threshold_sweep.csv"
    write_csv(path, ["t", "accuracy"], rows)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _cmd_defend(args) -> int:
    config = _config_from_args(args)
    dataset, _ = load_inputs(config)
    if args.defense == "padding":
        defense = PaddingConfig(args.x)
    else:
        defense = modulation_preset(args.s_p, args.t_i, tail_dummies=args.tail_dummies)
    defended = [apply_defense(t, defense) for t in dataset.traces]
    out_dir = Path(args.out_dir)
    manifest = save_dataset(Dataset([d.trace for d in defended]), out_dir)
    summary = {
        "config": defense.to_doc(),
        "traces": len(defended),
        "mean_overhead": sum(d.bandwidth_overhead() for d in defended) / len(defended),
        "max_added_latency": max(d.max_added_latency for d in defended),
    }
    (out_dir / "defense_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {len(defended)} defended traces, manifest {manifest}")
    print(f"mean overhead {summary['mean_overhead']:.3f}, "
          f"max latency {summary['max_added_latency'] * 1000:.3f} ms")
    return 0


def _cmd_sweep_defense(args) -> int:
    config = _config_from_args(args)
    path = run_defense_sweep(config, args.kind, args.out_dir)
    print(f"wrote {path}")
    return 0


def _cmd_report(args) -> int:
    path = Path(args.run_dir) / "report.json"
    doc = json.loads(path.read_text())
    cv = doc["cv"]
    print(f"run: {path}")
    print(f"traces: {doc['n_traces']}  feature set: {doc['config']['feature_set']}")
    print(f"accuracy: {cv['accuracy']:.4f}")
    print(f"fold accuracies: {' '.join(f'{a:.3f}' for a in cv['fold_accuracies'])}")
    print("confusion (true rows / predicted columns):")
    width = max(len(c) for c in cv["classes"])
    print(" " * (width + 2) + "  ".join(f"{c[:10]:>10}" for c in cv["classes"]))
    for c, row in zip(cv["classes"], cv["confusion"]):
        print(f"{c:>{width}}  " + "  ".join(f"{v:>10}" for v in row))
    print("top features by split gain:")
    for item in doc["top_features"][:10]:
        print(f"  {item['gain']:10.2f}  {item['name']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robofp",
        description="Robot-arm traffic fingerprinting toolkit: synthetic captures, "
        "signal-processing attack pipeline, and traffic-shaping defenses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic labeled dataset")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--samples-per-class", type=int, default=50)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("kernels", help="write the template kernel bank")
    p.add_argument("--out", default="kernels.json")
    p.add_argument("--bin-width", type=float, default=0.01)
    p.set_defaults(func=_cmd_kernels)

    p = sub.add_parser("featurize", help="feature CSV + schema for a dataset")
    _add_dataset_args(p)
    p.add_argument("--feature-set", choices=("full", "command", "summary"), default="full")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="fit a model on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated attack run + report")
    _add_dataset_args(p)
    p.add_argument("--feature-set", choices=("full", "command", "summary"), default="full")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep-threshold", help="accuracy per convolution threshold")
    _add_dataset_args(p)
    p.add_argument("--thresholds", type=float, nargs="*")
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_sweep_threshold)

    p = sub.add_parser("defend", help="apply one defense to a dataset")
    _add_dataset_args(p)
    p.add_argument("--defense", choices=("padding", "modulation"), required=True)
    p.add_argument("--x", type=int, default=1, help="padding factor (padding)")
    p.add_argument("--s-p", type=int, default=200, help="dummy size (modulation)")
    p.add_argument(
        "--t-i", type=float, default=MODULATION_INTERVALS[1], help="send interval (modulation)"
    )
    p.add_argument("--tail-dummies", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_defend)

    p = sub.add_parser("sweep-defense", help="defense grid: accuracy and overhead")
    _add_dataset_args(p)
    p.add_argument("--kind", choices=("padding", "modulation"), required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_sweep_defense)

    p = sub.add_parser("report", help="print a saved report")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except RobofpError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
