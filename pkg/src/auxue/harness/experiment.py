"""End-to-end experiment runs.

Toy runs train the main model and AuxUE on a synthetic 1D problem and
report region-wise uncertainty statistics over a fixed evaluation grid
of 600 points spanning [-6, 6], plus curve dumps for plotting.

The tabular run reproduces the wine-style OOD protocol: train on the
in-distribution table, build two OOD variants of the test split
(negate_all and shuffle_features, applied to raw features), then score
OOD detection for three methods — DIDO (epistemic, K/S), the aleatoric
head's scale, and a deep-ensembles variance baseline. The main task
consumes raw feature columns by default (``standardize`` turns on
z-scoring with train statistics, applied after the OOD transforms);
the AuxUE standardizes its own input stream internally either way.
Per-seed results and their means go into a stable-key JSON report;
headline means go into a flat CSV that excludes timing so repeated
runs are byte-identical.
"""

import os
import time

import numpy as np

from ..datagen import (
    PerturbationKind,
    Standardizer,
    gen_toy,
    gen_wine_like,
    load_tabular,
    perturb,
    split,
)
from ..errors import AuxueError
from ..metrics import ause_aurg, pr_aupr, roc_auc, sparsification_curves, uce
from .persist import (
    save_auxue_checkpoint,
    save_ensemble_checkpoint,
    save_main_checkpoint,
    write_headline_csv,
    write_report_json,
)
from .train import (
    auxue_scores,
    ensemble_scores,
    main_features_for,
    predict,
    train_auxue,
    train_ensemble,
    train_main,
)

TOY_GRID_POINTS = 600
TOY_GRID_SPAN = (-6.0, 6.0)

# Bands the tabular run is expected to satisfy (recorded in the report
# so the tolerances travel with the numbers they qualify).
TABULAR_BANDS = {
    "dido_auc_mean_min": 0.85,
    "dido_aupr_mean_min": 0.75,
    "test_mse_range": [0.55, 0.75],
    "dido_minus_dens_auc_min": 0.2,
}


class StageError(AuxueError):
    """Wraps a failure with the pipeline stage where it happened."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except AuxueError as exc:
        raise StageError(name, exc) from exc


def _main_test_metrics(main, x_test, y_test):
    residual = y_test - predict(main, x_test)
    return {
        "test_mse": float(np.mean(residual**2)),
        "test_rmse": float(np.sqrt(np.mean(residual**2))),
        "test_mae": float(np.mean(np.abs(residual))),
    }, residual


def _aleatoric_metrics(residual, aleatoric_score, targets):
    curves_rmse = sparsification_curves(residual, aleatoric_score, error_metric="rmse")
    ause_rmse, aurg_rmse = ause_aurg(curves_rmse)
    out = {
        "ause_rmse": ause_rmse,
        "aurg_rmse": aurg_rmse,
        "uce": uce(np.abs(residual), aleatoric_score),
    }
    if np.all(targets != 0.0):
        curves_rel = sparsification_curves(
            residual, aleatoric_score, targets=targets, error_metric="rel"
        )
        out["ause_rel"], out["aurg_rel"] = ause_aurg(curves_rel)
    return out


def _mean_over(dicts):
    """Elementwise mean of identical nested numeric dict structures."""
    out = {}
    for key, value in dicts[0].items():
        if key == "seed":
            continue
        if isinstance(value, dict):
            out[key] = _mean_over([d[key] for d in dicts])
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            values = [d[key] for d in dicts]
            if any(v is None for v in values):
                continue
            out[key] = float(np.mean(values))
    return out


def _region_mean(values, mask, name):
    if not np.any(mask):
        raise StageError("evaluate", f"empty region {name}")
    return float(values[mask].mean())


def _run_toy_seed(config, seed, timing):
    variant = "A" if config.experiment == "toy_a" else "B"
    dataset = split(gen_toy(variant, config.n_data, seed=seed),
                    config.split_fractions, seed=seed)
    train_set, val_set = dataset.subset("train"), dataset.subset("val")
    test_set = dataset.subset("test")

    t0 = time.perf_counter()
    main, main_log = _stage(
        "train-main", train_main, config,
        train_set.features, train_set.targets,
        val_set.features, val_set.targets, seed,
    )
    timing["train_main"] = timing.get("train_main", 0.0) + time.perf_counter() - t0

    t0 = time.perf_counter()
    auxue, disc, aux_log = _stage(
        "train-auxue", train_auxue, config, main,
        train_set.features, train_set.targets,
        val_set.features, val_set.targets, seed,
    )
    timing["train_auxue"] = timing.get("train_auxue", 0.0) + time.perf_counter() - t0

    grid = np.linspace(*TOY_GRID_SPAN, TOY_GRID_POINTS)
    grid_x = grid[:, None]
    feats_grid = main_features_for(config.feature_mode, main, grid_x)
    grid_scores = auxue_scores(auxue, feats_grid)
    epistemic, aleatoric = grid_scores["epistemic"], grid_scores["aleatoric"]

    if variant == "A":
        regions = {
            "epistemic_ood": _region_mean(
                epistemic, (np.abs(grid) >= 4.0) & (np.abs(grid) <= 6.0), "|x| in [4,6]"
            ),
            "epistemic_id": _region_mean(epistemic, np.abs(grid) <= 2.5, "|x| <= 2.5"),
            "aleatoric_noisy": _region_mean(
                aleatoric, (grid >= -3.0) & (grid <= 0.0), "[-3,0]"
            ),
            "aleatoric_quiet": _region_mean(
                aleatoric, (grid > 0.0) & (grid <= 3.0), "(0,3]"
            ),
        }
    else:
        regions = {
            "epistemic_gap": _region_mean(epistemic, (grid >= 0.0) & (grid <= 2.0), "[0,2]"),
            "epistemic_left": _region_mean(
                epistemic, (grid >= -3.0) & (grid <= -1.0), "[-3,-1]"
            ),
            "epistemic_right": _region_mean(
                epistemic, (grid >= 3.0) & (grid <= 5.0), "[3,5]"
            ),
        }

    main_metrics, residual_test = _main_test_metrics(main, test_set.features,
                                                     test_set.targets)
    feats_test = main_features_for(config.feature_mode, main, test_set.features)
    test_scores = auxue_scores(auxue, feats_test)
    entry = {
        "seed": seed,
        "main": {"train_mse": main_log.final_train_loss,
                 "val_mse": main_log.final_val_loss, **main_metrics},
        "auxue": {"train_loss": aux_log.final_train_loss,
                  "val_loss": aux_log.final_val_loss},
        "aleatoric": _aleatoric_metrics(residual_test, test_scores["aleatoric"],
                                        test_set.targets),
        "regions": regions,
        "mean_strength_id_test": float(test_scores["strength"].mean()),
    }
    curves = {
        "grid_x": grid.tolist(),
        "main_prediction": predict(main, grid_x).tolist(),
        "epistemic": epistemic.tolist(),
        "aleatoric": aleatoric.tolist(),
    }
    artifacts = {"main": (main, None), "auxue": (auxue, disc, None)}
    return entry, curves, artifacts


def _ood_detection_block(id_scores, ood_scores):
    scores = np.concatenate([id_scores, ood_scores])
    labels = np.concatenate([
        np.zeros(len(id_scores), dtype=int), np.ones(len(ood_scores), dtype=int)
    ])
    return {"auc": roc_auc(scores, labels), "aupr": pr_aupr(scores, labels)}


def _run_tabular_seed(config, dataset, seed, timing):
    tagged = split(dataset, config.split_fractions, seed=seed)
    train_set, val_set = tagged.subset("train"), tagged.subset("val")
    test_set = tagged.subset("test")
    standardizer = Standardizer.fit(train_set.features) if config.standardize else None

    def prep(features):
        return standardizer.transform(features) if standardizer else features

    x_train = prep(train_set.features)
    x_val = prep(val_set.features)
    x_test = prep(test_set.features)

    t0 = time.perf_counter()
    main, main_log = _stage(
        "train-main", train_main, config, x_train, train_set.targets,
        x_val, val_set.targets, seed,
    )
    timing["train_main"] = timing.get("train_main", 0.0) + time.perf_counter() - t0

    t0 = time.perf_counter()
    members = _stage(
        "train-ensemble", train_ensemble, config, x_train, train_set.targets,
        x_val, val_set.targets, seed,
    )
    timing["train_ensemble"] = timing.get("train_ensemble", 0.0) + time.perf_counter() - t0

    t0 = time.perf_counter()
    auxue, disc, aux_log = _stage(
        "train-auxue", train_auxue, config, main, x_train, train_set.targets,
        x_val, val_set.targets, seed,
    )
    timing["train_auxue"] = timing.get("train_auxue", 0.0) + time.perf_counter() - t0

    main_metrics, residual_test = _main_test_metrics(main, x_test, test_set.targets)
    feats_test = main_features_for(config.feature_mode, main, x_test)
    id_scores = auxue_scores(auxue, feats_test)
    dens_id = ensemble_scores(members, x_test)

    ood_blocks = {}
    perturbations = (
        PerturbationKind("negate_all"),
        PerturbationKind("shuffle_features", seed=seed),
    )
    for kind in perturbations:
        x_ood = prep(perturb(test_set, kind).features)
        feats_ood = main_features_for(config.feature_mode, main, x_ood)
        ood = auxue_scores(auxue, feats_ood)
        block = {
            "dido": _ood_detection_block(id_scores["epistemic"], ood["epistemic"]),
            "sigma1": _ood_detection_block(id_scores["aleatoric"], ood["aleatoric"]),
            "dens": _ood_detection_block(dens_id, ensemble_scores(members, x_ood)),
        }
        ood_blocks[kind.tag] = block
    ood_blocks["mean"] = _mean_over([ood_blocks[k.tag] for k in perturbations])

    entry = {
        "seed": seed,
        "main": {"train_mse": main_log.final_train_loss,
                 "val_mse": main_log.final_val_loss, **main_metrics},
        "auxue": {"train_loss": aux_log.final_train_loss,
                  "val_loss": aux_log.final_val_loss},
        "aleatoric": _aleatoric_metrics(residual_test, id_scores["aleatoric"],
                                        test_set.targets),
        "ood": ood_blocks,
        "mean_strength_id_test": float(id_scores["strength"].mean()),
    }
    artifacts = {
        "main": (main, standardizer),
        "auxue": (auxue, disc, standardizer),
        "ensemble": members,
    }
    return entry, None, artifacts


def _tabular_dataset(config):
    if config.data_path:
        return load_tabular(config.data_path, config.target_column, sep=config.sep)
    return gen_wine_like(config.n_data, seed=config.data_seed)


def run_experiment(config, save_artifacts=True):
    """Train, evaluate, and report over every configured seed."""
    started = time.perf_counter()
    timing = {}
    per_seed = []
    curves = {}
    config_hash = config.config_hash()
    dataset = _tabular_dataset(config) if config.experiment == "tabular" else None

    for seed in config.seeds:
        if config.experiment == "tabular":
            entry, _, artifacts = _run_tabular_seed(config, dataset, seed, timing)
        else:
            entry, seed_curves, artifacts = _run_toy_seed(config, seed, timing)
            curves[str(seed)] = seed_curves
        per_seed.append(entry)
        if save_artifacts:
            _save_seed_artifacts(config, config_hash, seed, artifacts)

    report = {
        "experiment": config.experiment,
        "config": config.to_dict(),
        "config_hash": config_hash,
        "seeds": list(config.seeds),
        "per_seed": per_seed,
        "mean": _mean_over(per_seed),
    }
    if config.experiment == "tabular":
        report["acceptance_bands"] = TABULAR_BANDS
    if curves:
        report["curves"] = curves
    report_path = None
    if save_artifacts:
        report_path = _write_outputs(config, report, timing, started)
        report["paths"] = report_path
    return report


def _save_seed_artifacts(config, config_hash, seed, artifacts):
    out = config.out_dir
    prefix = os.path.join(out, f"{config.experiment}_seed{seed}")
    os.makedirs(out, exist_ok=True)
    main, standardizer = artifacts["main"]
    save_main_checkpoint(f"{prefix}_main.json", main, config_hash, standardizer)
    auxue, disc, standardizer = artifacts["auxue"]
    save_auxue_checkpoint(f"{prefix}_auxue.json", auxue, disc, config_hash, standardizer)
    if "ensemble" in artifacts:
        save_ensemble_checkpoint(f"{prefix}_ensemble.json", artifacts["ensemble"],
                                 config_hash)


def headline_rows(report):
    """Flat, deterministically ordered (metric, value) pairs for the CSV."""
    mean = report["mean"]
    rows = [
        ("experiment", report["experiment"]),
        ("seeds", "|".join(str(s) for s in report["seeds"])),
        ("config_hash", report["config_hash"]),
        ("test_mse_mean", mean["main"]["test_mse"]),
        ("test_rmse_mean", mean["main"]["test_rmse"]),
        ("test_mae_mean", mean["main"]["test_mae"]),
        ("ause_rmse_mean", mean["aleatoric"]["ause_rmse"]),
        ("aurg_rmse_mean", mean["aleatoric"]["aurg_rmse"]),
        ("uce_mean", mean["aleatoric"]["uce"]),
    ]
    if "ood" in mean:
        for method in ("dido", "sigma1", "dens"):
            for metric in ("auc", "aupr"):
                rows.append((
                    f"{method}_{metric}_mean",
                    mean["ood"]["mean"][method][metric],
                ))
        for entry in report["per_seed"]:
            rows.append((
                f"seed{entry['seed']}_dido_auc", entry["ood"]["mean"]["dido"]["auc"]
            ))
            rows.append((f"seed{entry['seed']}_test_mse", entry["main"]["test_mse"]))
    if "regions" in mean:
        for name, value in sorted(mean["regions"].items()):
            rows.append((f"region_{name}_mean", value))
    return rows


def _write_outputs(config, report, timing, started):
    os.makedirs(config.out_dir, exist_ok=True)
    report_path = os.path.join(config.out_dir, f"{config.experiment}_report.json")
    csv_path = os.path.join(config.out_dir, f"{config.experiment}_headline.csv")
    timing = dict(timing)
    timing["total"] = time.perf_counter() - started
    payload = dict(report)
    payload["timing_seconds"] = timing  # JSON only; the CSV must stay reproducible
    write_report_json(report_path, payload)
    write_headline_csv(csv_path, headline_rows(report))
    return {"report_json": report_path, "headline_csv": csv_path}
