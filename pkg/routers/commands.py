"""
Command-line subcommands: cluster, train, predict, synth, bench
"""
import argparse
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from models.schemas import RunConfig
from modules.clustering import save_cluster_assignments, save_distance_matrix
from modules.config_helper import flatten_config, resolve_config, save_config_to_file
from modules.dataset import Dataset, load_uci_layout
from modules.errors import ConfigError
from modules.synth import generate_dataset, sources_from_templates, write_synthetic
from modules.templates import load_templates
from services.experiment_service import BENCH_CUTS, print_bench, run_bench, write_bench
from services.export_service import export_samples, export_templates
from services.pipeline_service import (
    artifact_header,
    cluster_stage,
    load_model_bundle,
    predict,
    prepare_training_set,
    train_pipeline,
    write_prediction_report,
)

logger = logging.getLogger(__name__)

# argparse destination -> dotted config key
FLAG_KEYS = {
    "distance": "pipeline.distance",
    "averaging": "pipeline.averaging",
    "cut": "pipeline.cut",
    "bw": "pipeline.bw",
    "dw": "pipeline.dw",
    "pca_variance": "pipeline.pca_variance",
    "svm_c": "pipeline.svm_c",
    "svm_epochs": "pipeline.svm_epochs",
    "seed": "pipeline.seed",
    "threads": "pipeline.threads",
    "flat_quantile": "pipeline.flat_quantile",
    "train_signals": "data.train_signals",
    "train_labels": "data.train_labels",
    "train_subjects": "data.train_subjects",
    "test_signals": "data.test_signals",
    "test_labels": "data.test_labels",
    "test_subjects": "data.test_subjects",
    "label_offset": "data.label_offset",
    "train_per_activity": "synth.train_per_activity",
    "test_per_activity": "synth.test_per_activity",
    "synth_seed": "synth.seed",
    "noise_scale": "synth.noise_scale",
    "noise_mode": "synth.noise_mode",
    "sources": "synth.sources",
    "log_level": "logging.level",
    "log_file": "logging.file",
}


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values keyed by dotted config key; flags left unset are skipped"""
    overrides = {}
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "no_flat_filter", False):
        overrides["pipeline.flat_quantile"] = None
    if getattr(args, "no_merged_static", False):
        overrides["pipeline.merged_static"] = False
    if getattr(args, "debug", False):
        overrides["logging.level"] = "DEBUG"
    return overrides


def load_split(config: RunConfig, split: str) -> Dataset:
    data = config.data
    signals = getattr(data, f"{split}_signals")
    labels = getattr(data, f"{split}_labels")
    if not signals:
        raise ConfigError(f"no {split} data configured (data.{split}_signals / --{split}-signals)")
    return load_uci_layout(signals, labels, getattr(data, f"{split}_subjects"), label_offset=data.label_offset)


def has_split(config: RunConfig, split: str) -> bool:
    return bool(getattr(config.data, f"{split}_signals"))


def synthetic_data(config: RunConfig):
    sources = None
    if config.synth.sources:
        sources = sources_from_templates(load_templates(config.synth.sources), config.synth.source_channel)
    return generate_dataset(config.synth, sources)


def cmd_cluster(args: argparse.Namespace, config: RunConfig) -> int:
    """Per-activity distance matrices and cluster assignments"""
    output = Path(args.output)
    output.mkdir(parents=True, exist_ok=True)
    train, flat_report = prepare_training_set(load_split(config, "train"), config)
    header = artifact_header("clusters", config)
    rows = None
    if flat_report is not None:
        rows = flat_report.kept_indices
        removed = " ".join(str(i) for i in flat_report.removed_indices) or "none"
        header += [
            "sample_index = row of the input files",
            f"flat rows removed ({flat_report.removed_count}): {removed}",
        ]
    for label, (dists, cluster_set) in cluster_stage(train, config).items():
        save_distance_matrix(dists, output / f"distances_label{label}.txt", header)
        save_cluster_assignments(cluster_set, output / f"clusters_label{label}.txt", header, rows)
    logger.info(f"Cluster artifacts written to {output}")
    return 0


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    """Fit the pipeline and write the model bundle"""
    model = train_pipeline(load_split(config, "train"), config, output_dir=args.output)
    if args.export_dir:
        export_templates(model.templates, args.export_dir)
    return 0


def cmd_predict(args: argparse.Namespace, config: RunConfig) -> int:
    """Classify the test split with a saved bundle"""
    model = load_model_bundle(args.model)
    report = predict(model, load_split(config, "test"), config.pipeline.threads)
    # the bundle fixes the pipeline; the test data comes from this run
    write_prediction_report(report, args.output, model.config.model_copy(update={"data": config.data}))
    return 0


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    """Generate the synthetic train/test sets and manifest"""
    data = synthetic_data(config)
    write_synthetic(data, args.output, flatten_config(config))
    save_config_to_file(config, Path(args.output) / "config.yaml")
    if args.export_dir:
        export_samples(data.train, args.export_dir, prefix="train")
    return 0


def cmd_bench(args: argparse.Namespace, config: RunConfig) -> int:
    """The cut x distance x averaging grid on configured or synthetic data"""
    if has_split(config, "train") and has_split(config, "test") and not args.synthetic:
        train, test = load_split(config, "train"), load_split(config, "test")
    else:
        logger.info("No train/test data configured, running on synthetic data")
        data = synthetic_data(config)
        train, test = data.train, data.test
    rows = run_bench(train, test, config, cuts=args.cuts or BENCH_CUTS)
    write_bench(rows, args.output, config)
    print_bench(rows)
    return 0


def add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", default="config.yaml", help="Path to configuration file")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Override log level")
    parser.add_argument("--log-file", help="Also log to this file")

    pipeline = parser.add_argument_group("pipeline")
    pipeline.add_argument("--distance", choices=["dtw", "dtwsubseq"], help="Distance kind")
    pipeline.add_argument("--averaging", choices=["dpa", "dba"], help="Template averaging method")
    pipeline.add_argument("--cut", type=float, help="Cluster diameter bound as a fraction of d_max")
    pipeline.add_argument("--bw", type=int, help="DTW bandwidth")
    pipeline.add_argument("--dw", type=int, help="Displacement window")
    pipeline.add_argument("--pca-variance", type=float, help="Variance retained by PCA")
    pipeline.add_argument("--svm-c", type=float, help="SVM regularization parameter")
    pipeline.add_argument("--svm-epochs", type=int, help="SVM solver iteration cap")
    pipeline.add_argument("--seed", type=int, help="Pipeline seed (DBA, SVM)")
    pipeline.add_argument("--threads", type=int, help="Worker threads")
    flat = pipeline.add_mutually_exclusive_group()
    flat.add_argument("--flat-quantile", type=float, help="Flat-curve quantile")
    flat.add_argument("--no-flat-filter", action="store_true", help="Disable the flat-curve filter")
    pipeline.add_argument("--no-merged-static", action="store_true", help="Skip merged-static accuracy")

    data = parser.add_argument_group("data")
    data.add_argument("--train-signals", nargs="+", help="Training signal files, one per channel")
    data.add_argument("--train-labels", help="Training label file")
    data.add_argument("--train-subjects", help="Training subject file")
    data.add_argument("--test-signals", nargs="+", help="Test signal files, one per channel")
    data.add_argument("--test-labels", help="Test label file")
    data.add_argument("--test-subjects", help="Test subject file")
    data.add_argument("--label-offset", type=int, help="Subtracted from raw labels (1 for UCI files)")


def add_synth_arguments(parser: argparse.ArgumentParser):
    synth = parser.add_argument_group("synthetic data")
    synth.add_argument("--train-per-activity", type=int, help="Training samples per activity")
    synth.add_argument("--test-per-activity", type=int, help="Test samples per activity")
    synth.add_argument("--synth-seed", type=int, help="Generator seed")
    synth.add_argument("--noise-scale", type=float, help="Spectral noise dispersion")
    synth.add_argument("--noise-mode", choices=["real", "complex"], help="Spectral noise mode")
    synth.add_argument("--sources", help="Template-set file providing source templates")


def register_command_routes(subparsers):
    """Register every subcommand; each sets `func(args, config) -> exit code`"""
    cluster = subparsers.add_parser("cluster", help="Cluster each activity and dump distances")
    add_common_arguments(cluster)
    cluster.add_argument("--output", required=True, help="Output directory")
    cluster.set_defaults(func=cmd_cluster)

    train = subparsers.add_parser("train", help="Train and write a model bundle")
    add_common_arguments(train)
    train.add_argument("--output", required=True, help="Model bundle directory")
    train.add_argument("--export-dir", help="Write plot-ready template files here")
    train.set_defaults(func=cmd_train)

    predict_parser = subparsers.add_parser("predict", help="Classify the test split")
    add_common_arguments(predict_parser)
    predict_parser.add_argument("--model", required=True, help="Model bundle directory")
    predict_parser.add_argument("--output", required=True, help="Prediction report file")
    predict_parser.set_defaults(func=cmd_predict)

    synth = subparsers.add_parser("synth", help="Generate a synthetic dataset")
    add_common_arguments(synth)
    add_synth_arguments(synth)
    synth.add_argument("--output", required=True, help="Output directory")
    synth.add_argument("--export-dir", help="Write plot-ready sample files here")
    synth.set_defaults(func=cmd_synth)

    bench = subparsers.add_parser("bench", help="Run the cut x distance x averaging grid")
    add_common_arguments(bench)
    add_synth_arguments(bench)
    bench.add_argument("--output", required=True, help="Result table file")
    bench.add_argument("--cuts", type=float, nargs="+", help=f"Cut values (default {list(BENCH_CUTS)})")
    bench.add_argument("--synthetic", action="store_true", help="Ignore configured data, use synthetic data")
    bench.set_defaults(func=cmd_bench)


def resolve_args_config(args: argparse.Namespace, environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Effective configuration for a parsed command line"""
    return resolve_config(args.config, collect_overrides(args), environ)
