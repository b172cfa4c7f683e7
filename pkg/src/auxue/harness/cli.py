"""Command-line entry point.

Subcommands: ``gen-data`` (write a synthetic dataset as CSV),
``train-main``, ``train-auxue``, ``train-ensemble`` (stage-by-stage
training with JSON checkpoints), ``eval`` (metrics from saved
checkpoints), and ``experiment`` (full multi-seed pipeline with a JSON
report and headline CSV). Exit code 0 on success; failures print a
stage-tagged message to stderr and exit nonzero.
"""

import argparse
import os
import sys

import numpy as np

from ..datagen import (
    Standardizer,
    gen_toy,
    gen_wine_like,
    load_tabular,
    save_tabular,
    split,
)
from ..errors import AuxueError
from ..metrics import uce
from .config import default_config
from .experiment import StageError, run_experiment
from .persist import (
    load_auxue_checkpoint,
    load_main_checkpoint,
    save_auxue_checkpoint,
    save_ensemble_checkpoint,
    save_main_checkpoint,
    write_headline_csv,
    write_report_json,
)
from .train import (
    auxue_scores,
    main_features_for,
    predict,
    train_auxue,
    train_ensemble,
    train_main,
)

_EXPERIMENT_NAMES = {"toy-a": "toy_a", "toy-b": "toy_b", "tabular": "tabular"}
_GEN_VARIANTS = ("toy-a", "toy-b", "wine-like")


def _add_data_flags(parser):
    parser.add_argument("--data", help="CSV file with a header row")
    parser.add_argument("--target-column", default="quality")
    parser.add_argument("--sep", default=",", help="CSV delimiter")
    parser.add_argument("--variant", choices=_GEN_VARIANTS,
                        help="synthetic dataset when no --data is given")
    parser.add_argument("--n", type=int, default=None, help="synthetic row count")
    parser.add_argument("--data-seed", type=int, default=0)
    parser.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                        default=None,
                        help="z-score tabular features with train statistics")


def _add_train_flags(parser):
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument("--batch", type=int, default=None)
    parser.add_argument("--out-dir", default="runs")


def _add_auxue_flags(parser):
    parser.add_argument("--k", type=int, default=None, help="number of error classes")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="evidential regularizer weight")
    parser.add_argument("--dist", choices=("gaussian", "laplace", "ggau", "nig"),
                        default=None, help="aleatoric distribution assumption")


def _experiment_tag(args):
    if getattr(args, "data", None):
        return "tabular"
    variant = getattr(args, "variant", None)
    if variant is None:
        raise AuxueError("pass --data CSV or --variant {toy-a,toy-b,wine-like}")
    return "tabular" if variant == "wine-like" else _EXPERIMENT_NAMES[variant]


def _build_config(args, experiment, stage):
    overrides = {
        "data_path": getattr(args, "data", None),
        "target_column": getattr(args, "target_column", None),
        "sep": getattr(args, "sep", None),
        "data_seed": getattr(args, "data_seed", None),
        "out_dir": getattr(args, "out_dir", None),
        "k": getattr(args, "k", None),
        "lam": getattr(args, "lam", None),
        "dist": getattr(args, "dist", None),
        "n_data": getattr(args, "n", None),
        "ensemble_size": getattr(args, "members", None),
        "main_epochs": getattr(args, "main_epochs", None),
        "standardize": getattr(args, "standardize", None),
    }
    seed = getattr(args, "seed", None)
    if seed is not None:
        overrides["seeds"] = (seed,)
    seeds = getattr(args, "seeds", None)
    if seeds is not None:
        overrides["seeds"] = tuple(int(s) for s in seeds.split(","))
    if stage == "main":
        stage_fields = (("epochs", "main_epochs"), ("lr", "main_lr"),
                        ("batch", "main_batch"))
    else:
        stage_fields = (("epochs", "auxue_epochs"), ("lr", "auxue_lr"),
                        ("batch", "auxue_batch"))
    for flag, field in stage_fields:
        if getattr(args, flag, None) is not None:
            overrides[field] = getattr(args, flag)
    return default_config(experiment, **overrides)


def _load_dataset(config, experiment):
    if config.data_path:
        return load_tabular(config.data_path, config.target_column, sep=config.sep)
    if experiment == "tabular":
        return gen_wine_like(config.n_data, seed=config.data_seed)
    variant = "A" if experiment == "toy_a" else "B"
    return gen_toy(variant, config.n_data, seed=config.data_seed)


def _split_arrays(config, experiment, seed, standardizer=None):
    """Dataset -> train/val/test arrays plus the standardizer (if any).

    A caller holding checkpoint statistics passes them in; otherwise
    tabular runs fit fresh statistics on the train split when the
    config asks for standardization.
    """
    tagged = split(_load_dataset(config, experiment), config.split_fractions,
                   seed=seed)
    parts = {tag: tagged.subset(tag) for tag in ("train", "val", "test")}
    features = {tag: parts[tag].features for tag in parts}
    if experiment == "tabular" and (config.standardize or standardizer is not None):
        if standardizer is None:
            standardizer = Standardizer.fit(parts["train"].features)
        features = {tag: standardizer.transform(parts[tag].features) for tag in parts}
    targets = {tag: parts[tag].targets for tag in parts}
    return features, targets, standardizer


def cmd_gen_data(args):
    if args.variant in ("toy-a", "toy-b"):
        dataset = gen_toy(args.variant[-1].upper(), args.n or 1000, seed=args.data_seed)
        dataset = type(dataset)(features=dataset.features, targets=dataset.targets,
                                feature_names=("x",))
        target = "y"
    else:
        dataset = gen_wine_like(args.n or 1599, seed=args.data_seed)
        target = args.target_column
    save_tabular(dataset, args.out, target_column=target, sep=args.sep)
    print(f"wrote {args.out} ({dataset.n} rows, {dataset.d} features)")
    return 0


def cmd_train_main(args):
    experiment = _experiment_tag(args)
    config = _build_config(args, experiment, stage="main")
    features, targets, standardizer = _split_arrays(config, experiment, args.seed)
    mlp, log = train_main(config, features["train"], targets["train"],
                          features["val"], targets["val"], seed=args.seed)
    path = os.path.join(config.out_dir, "main_ckpt.json")
    save_main_checkpoint(path, mlp, config.config_hash(), standardizer)
    print(f"wrote {path} (train mse {log.final_train_loss:.4f}, "
          f"val mse {log.final_val_loss:.4f})")
    return 0


def cmd_train_auxue(args):
    experiment = _experiment_tag(args)
    config = _build_config(args, experiment, stage="auxue")
    main_mlp, _, standardizer = load_main_checkpoint(args.main_ckpt)
    features, targets, standardizer = _split_arrays(config, experiment, args.seed,
                                                    standardizer)
    auxue, disc, log = train_auxue(config, main_mlp, features["train"],
                                   targets["train"], features["val"],
                                   targets["val"], seed=args.seed)
    path = os.path.join(config.out_dir, "auxue_ckpt.json")
    save_auxue_checkpoint(path, auxue, disc, config.config_hash(), standardizer)
    print(f"wrote {path} (train loss {log.final_train_loss:.4f})")
    return 0


def cmd_train_ensemble(args):
    experiment = _experiment_tag(args)
    config = _build_config(args, experiment, stage="main")
    features, targets, _ = _split_arrays(config, experiment, args.seed)
    members = train_ensemble(config, features["train"], targets["train"],
                             features["val"], targets["val"], seed=args.seed)
    path = os.path.join(config.out_dir, "ensemble_ckpt.json")
    save_ensemble_checkpoint(path, members, config.config_hash())
    print(f"wrote {path} ({len(members)} members)")
    return 0


def cmd_eval(args):
    experiment = _experiment_tag(args)
    config = _build_config(args, experiment, stage="auxue")
    main_mlp, _, standardizer = load_main_checkpoint(args.main_ckpt)
    auxue, _, _, _ = load_auxue_checkpoint(args.auxue_ckpt)
    features, targets, _ = _split_arrays(config, experiment, args.seed, standardizer)
    x_test, y_test = features["test"], targets["test"]
    residual = y_test - predict(main_mlp, x_test)
    scores = auxue_scores(auxue, main_features_for(auxue.feature_mode, main_mlp, x_test))
    payload = {
        "test_mse": float(np.mean(residual**2)),
        "test_rmse": float(np.sqrt(np.mean(residual**2))),
        "test_mae": float(np.mean(np.abs(residual))),
        "uce": uce(np.abs(residual), scores["aleatoric"]),
        "mean_epistemic": float(scores["epistemic"].mean()),
        "mean_strength": float(scores["strength"].mean()),
        "n_test": int(len(y_test)),
    }
    os.makedirs(config.out_dir, exist_ok=True)
    if args.format == "csv":
        path = os.path.join(config.out_dir, "eval_metrics.csv")
        write_headline_csv(path, sorted(payload.items()))
    else:
        path = os.path.join(config.out_dir, "eval_metrics.json")
        write_report_json(path, payload)
    print(f"wrote {path}")
    return 0


def cmd_experiment(args):
    experiment = _EXPERIMENT_NAMES[args.name]
    config = _build_config(args, experiment, stage="auxue")
    report = run_experiment(config)
    paths = report.get("paths", {})
    mean = report["mean"]
    print(f"experiment {experiment} seeds {report['seeds']}")
    print(f"  test mse (mean) {mean['main']['test_mse']:.4f}")
    if "ood" in mean:
        ood = mean["ood"]["mean"]
        print(f"  dido auc {ood['dido']['auc']:.4f} aupr {ood['dido']['aupr']:.4f}")
        print(f"  dens auc {ood['dens']['auc']:.4f} aupr {ood['dens']['aupr']:.4f}")
    if "regions" in mean:
        for name, value in sorted(mean["regions"].items()):
            print(f"  {name} {value:.5f}")
    for key in sorted(paths):
        print(f"wrote {paths[key]}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="auxue",
        description="Auxiliary uncertainty estimation experiments "
                    "(aleatoric NLL heads + Dirichlet evidence).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset as CSV")
    p.add_argument("--variant", choices=_GEN_VARIANTS, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", dest="data_seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--sep", default=",")
    p.add_argument("--target-column", default="quality")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-main", help="train the main-task regressor")
    _add_data_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train_main)

    p = sub.add_parser("train-auxue", help="train the auxiliary estimator")
    p.add_argument("--main-ckpt", required=True)
    _add_data_flags(p)
    _add_train_flags(p)
    _add_auxue_flags(p)
    p.set_defaults(func=cmd_train_auxue)

    p = sub.add_parser("train-ensemble", help="train the deep-ensembles baseline")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--members", type=int, default=None)
    p.set_defaults(func=cmd_train_ensemble)

    p = sub.add_parser("eval", help="evaluate saved checkpoints on the test split")
    p.add_argument("--main-ckpt", required=True)
    p.add_argument("--auxue-ckpt", required=True)
    _add_data_flags(p)
    p.add_argument("--seed", type=int, default=1, help="split seed")
    p.add_argument("--out-dir", default="runs")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="full multi-seed experiment run")
    p.add_argument("name", choices=tuple(_EXPERIMENT_NAMES))
    p.add_argument("--seeds", default=None, help="comma-separated, e.g. 1,2,3")
    _add_data_flags(p)
    _add_auxue_flags(p)
    p.add_argument("--epochs", type=int, default=None,
                   help="override AuxUE epochs")
    p.add_argument("--main-epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None, help="override AuxUE lr")
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--out-dir", default="runs")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AuxueError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
