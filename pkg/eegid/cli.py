# ============================================================================
# FILE: eegid/cli.py
# ============================================================================
"""
Command-line surface. Exit codes: 0 success, 2 validation error, 3 IO error.
"""

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from eegid.core.config import Settings, load_settings
from eegid.core.errors import ConfigurationError, EegIdError, PipelineError, SplitError
from eegid.core.montage import builtin_montage
from eegid.graph.workflow import run_pipeline
from eegid.services.benchmark_service import run_benchmark
from eegid.services.feature_service import extract_manifest_features, load_feature_matrix, save_feature_matrix
from eegid.services.import_service import import_csv_dataset
from eegid.services.metrics_service import metrics_service, save_report
from eegid.services.model_store import load_model, load_params, save_model, save_params, train_model
from eegid.services.preprocess_service import preprocess_dataset
from eegid.services.session_io import load_manifest
from eegid.services.synth_service import SynthConfig, synth_dataset
from eegid.services.tuning_service import random_search_tune, save_trace, trace_path
from eegid.utils.logger import get_logger, set_log_level
from eegid.utils.validators import InputValidator

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3


def _check(result) -> None:
    ok, message = result
    if not ok:
        raise ConfigurationError(message)


def _trial_counts(value: str) -> List[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def _settings(args: argparse.Namespace) -> Settings:
    settings = load_settings(getattr(args, "config", None))
    set_log_level(settings.LOG_LEVEL)
    _check(InputValidator.validate_settings(settings))
    return settings


def _rows_in(features, sessions: List[int], what: str):
    rows = features.select_rows(np.isin(features.session_indices, sessions))
    if rows.n_rows == 0:
        raise SplitError(f"empty split: no {what} rows (sessions {sessions}) in the feature file")
    return rows


def cmd_synth(args: argparse.Namespace) -> int:
    settings = _settings(args)
    base = settings.synth_config().model_dump()
    if args.subjects is not None:
        base["n_subjects"] = args.subjects
    if args.trials is not None:
        _check(InputValidator.validate_trial_counts(args.trials))
        base["trials_per_session"] = args.trials
    if args.seed is not None:
        base["seed"] = args.seed
    manifest = synth_dataset(SynthConfig.model_validate(base), args.out)
    print(f"{manifest.n_sessions} sessions for {len(manifest.subjects)} subjects written to {args.out}")
    return EXIT_OK


def cmd_import(args: argparse.Namespace) -> int:
    settings = _settings(args)
    manifest = import_csv_dataset(args.csv_dir, args.out, fs=settings.SAMPLING_RATE_HZ)
    print(f"{manifest.n_sessions} sessions for {len(manifest.subjects)} subjects written to {args.out}")
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    settings = _settings(args)
    manifest = load_manifest(args.manifest)
    processed = preprocess_dataset(manifest, Path(args.manifest).parent, args.out, builtin_montage(),
                                   settings.preprocessing_config(manifest.sampling_rate_hz))
    print(f"{processed.n_sessions} preprocessed sessions written to {args.out}")
    return EXIT_OK


def cmd_features(args: argparse.Namespace) -> int:
    settings = _settings(args)
    _check(InputValidator.validate_feature_set(args.set))
    manifest = load_manifest(args.manifest)
    features = extract_manifest_features(
        manifest,
        Path(args.manifest).parent,
        args.set,
        builtin_montage(),
        preprocessing=settings.preprocessing_config(manifest.sampling_rate_hz),
        wavelet=settings.wavelet_config(),
        window_s=settings.EPOCH_WINDOW_S,
        offset_s=settings.EPOCH_OFFSET_S,
    )
    save_feature_matrix(features, args.out)
    print(f"{features.n_rows} x {features.n_features} {args.set} features written to {args.out}")
    return EXIT_OK


def cmd_tune(args: argparse.Namespace) -> int:
    settings = _settings(args)
    _check(InputValidator.validate_model(args.model))
    split = settings.split_spec()
    features = load_feature_matrix(args.features)
    train = _rows_in(features, split.train_sessions, "training")
    val = _rows_in(features, split.val_sessions, "validation")
    defaults = settings.svm_hyperparams() if args.model == "svm" else settings.gbt_config()
    budget = args.budget if args.budget is not None else settings.TUNE_BUDGET
    seed = args.seed if args.seed is not None else settings.SEED
    result = random_search_tune(args.model, train, val, budget, seed, defaults)
    save_params(args.model, result.best_params, args.out, extra={
        "seed": result.seed,
        "budget": result.budget,
        "best_trial": result.best_trial,
        "best_val_accuracy": result.best_val_accuracy,
    })
    save_trace(result, trace_path(args.out))
    print(f"best {args.model} draw #{result.best_trial}: val accuracy {result.best_val_accuracy:.4f} -> {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    settings = _settings(args)
    _check(InputValidator.validate_model(args.model))
    split = settings.split_spec()
    features = load_feature_matrix(args.features)
    sessions = list(split.train_sessions)
    if settings.FOLD_VALIDATION:
        sessions += list(split.val_sessions)
    train = _rows_in(features, sessions, "training")

    params: Dict = {}
    if args.params:
        document = load_params(args.params)
        if document.get("model") not in (None, args.model):
            raise ConfigurationError(f"params file is for model {document['model']!r}, not {args.model!r}")
        params = document["params"]
    defaults = settings.svm_hyperparams() if args.model == "svm" else settings.gbt_config()
    model = train_model(args.model, train, params, defaults)
    save_model(model, args.out)
    print(f"{args.model} trained on {train.n_rows} rows -> {args.out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    settings = _settings(args)
    split = settings.split_spec()
    model = load_model(args.model)
    test = _rows_in(load_feature_matrix(args.features), split.test_sessions, "test")
    report = metrics_service.evaluate(model, test, split=split, seed=settings.SEED)
    save_report(report, args.report)
    _print_report(report)
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    settings = _settings(args)
    _check(InputValidator.validate_split_coverage(settings, load_manifest(args.manifest)))
    report = run_pipeline(args.manifest, settings, args.out)
    _print_report(report)
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    settings = _settings(args)
    _check(InputValidator.validate_split_coverage(settings, load_manifest(args.manifest)))
    table = run_benchmark(args.manifest, settings, args.out)
    print(table.to_string(index=False))
    return EXIT_OK


def _print_report(report) -> None:
    print("\n" + "=" * 60)
    print("SUBJECT IDENTIFICATION")
    print("=" * 60)
    print(f"  Accuracy:        {report.accuracy:.4f}")
    print(f"  Macro precision: {report.macro_precision:.4f}")
    print(f"  Macro recall:    {report.macro_recall:.4f}")
    print(f"  Test rows:       {report.n_test}")
    for warning in report.warnings:
        print(f"  ! {warning}")
    print("=" * 60 + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eegid", description="EEG subject identification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler: Callable[[argparse.Namespace], int], help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="KEY=value settings file")
        p.set_defaults(handler=handler)
        return p

    p = command("synth", cmd_synth, "generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int)
    p.add_argument("--trials", type=_trial_counts, help="per-session trial counts, e.g. 100,100,100,50,50")
    p.add_argument("--seed", type=int)

    p = command("import", cmd_import, "convert a CSV export into CEEG files")
    p.add_argument("--csv-dir", required=True)
    p.add_argument("--out", required=True)

    p = command("preprocess", cmd_preprocess, "filter, repair and re-reference every session")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = command("features", cmd_features, "extract a feature matrix")
    p.add_argument("--manifest", required=True)
    p.add_argument("--set", required=True, choices=InputValidator.VALID_FEATURE_SETS)
    p.add_argument("--out", required=True)

    p = command("tune", cmd_tune, "random-search hyperparameters on the validation session")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True, choices=InputValidator.VALID_MODELS)
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = command("train", cmd_train, "fit a classifier on the training sessions")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True, choices=InputValidator.VALID_MODELS)
    p.add_argument("--params")
    p.add_argument("--out", required=True)

    p = command("eval", cmd_eval, "score a model on the test session")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--report", required=True)

    p = command("pipeline", cmd_pipeline, "run every stage end to end")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = command("benchmark", cmd_benchmark, "feature set x classifier grid")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except PipelineError as e:
        logger.error(str(e))
        return EXIT_IO if isinstance(e.cause, OSError) else EXIT_VALIDATION
    except (EegIdError, ValidationError) as e:
        logger.error(str(e))
        return EXIT_VALIDATION
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
