"""Experiment harness: configuration, models, training, persistence, CLI."""

from .config import EXPERIMENTS, ExperimentConfig, default_config
from .experiment import StageError, headline_rows, run_experiment
from .models import AuxUE, build_auxue, build_main, main_spec
from .persist import (
    load_auxue_checkpoint,
    load_ensemble_checkpoint,
    load_main_checkpoint,
    load_report_json,
    save_auxue_checkpoint,
    save_ensemble_checkpoint,
    save_main_checkpoint,
    write_headline_csv,
    write_report_json,
)
from .train import (
    TrainLog,
    auxue_scores,
    ensemble_mean,
    ensemble_scores,
    main_features_for,
    penultimate_features,
    predict,
    train_auxue,
    train_ensemble,
    train_main,
)

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "default_config",
    "StageError",
    "headline_rows",
    "run_experiment",
    "AuxUE",
    "build_auxue",
    "build_main",
    "main_spec",
    "load_auxue_checkpoint",
    "load_ensemble_checkpoint",
    "load_main_checkpoint",
    "load_report_json",
    "save_auxue_checkpoint",
    "save_ensemble_checkpoint",
    "save_main_checkpoint",
    "write_headline_csv",
    "write_report_json",
    "TrainLog",
    "auxue_scores",
    "ensemble_mean",
    "ensemble_scores",
    "main_features_for",
    "penultimate_features",
    "predict",
    "train_auxue",
    "train_ensemble",
    "train_main",
]
