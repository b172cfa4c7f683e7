"""Experiment harness: configuration validation and hashing, model
assembly (including the evidence head's uniform-prior initialization),
training determinism, the frozen-main-model contract, checkpoint
round-trips, and desk-scale end-to-end runs of the experiment driver.
"""

import json

import numpy as np
import pytest

from auxue.datagen import Standardizer, gen_toy, gen_wine_like, split
from auxue.diffkit import tensor as tk
from auxue.diffkit.tensor import backward
from auxue.errors import ContractError, DivergenceError, PersistenceError
from auxue.harness.config import ExperimentConfig, default_config
from auxue.harness.experiment import StageError, headline_rows, run_experiment
from auxue.harness.models import (
    EVIDENCE_INIT_LOG,
    build_auxue,
    build_main,
    mlp_from_state,
    mlp_state,
    n_aleatoric_params,
)
from auxue.harness.persist import (
    load_auxue_checkpoint,
    load_ensemble_checkpoint,
    load_main_checkpoint,
    save_auxue_checkpoint,
    save_ensemble_checkpoint,
    save_main_checkpoint,
    write_headline_csv,
    write_report_json,
)
from auxue.harness.train import (
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


def tiny_toy_config(**overrides):
    base = dict(
        main_widths=(1, 8, 8, 1),
        main_activations=("relu", "relu", "identity"),
        main_epochs=3,
        auxue_epochs=3,
        cos_width=8,
        hidden_width=8,
        k=3,
        n_data=200,
        split_fractions=(0.7, 0.15, 0.15),
        seeds=(1,),
    )
    base.update(overrides)
    return default_config("toy_a", **base)


def tiny_tabular_config(**overrides):
    base = dict(
        main_widths=(11, 8, 1),
        main_activations=("tanh", "identity"),
        main_epochs=3,
        auxue_epochs=3,
        extractor_width=8,
        cos_width=16,
        hidden_width=16,
        k=3,
        ensemble_size=2,
        n_data=200,
        seeds=(1,),
    )
    base.update(overrides)
    return default_config("tabular", **base)


def toy_arrays(config, seed=1):
    tagged = split(gen_toy("A", config.n_data, seed=seed),
                   config.split_fractions, seed=seed)
    parts = [tagged.subset(t) for t in ("train", "val", "test")]
    return [(p.features, p.targets) for p in parts]


# ------------------------------------------------------------------ config


def test_default_configs_reflect_experiment_shape():
    toy = default_config("toy_a")
    assert toy.feature_mode == "penultimate"
    assert toy.main_widths[0] == 1 and toy.seeds == (1,)
    tab = default_config("tabular")
    assert tab.feature_mode == "extractor"
    assert tab.main_widths[0] == 11 and tab.seeds == (1, 2, 3)
    assert tab.split_fractions == (0.72, 0.08, 0.20)


def test_config_overrides_and_unknown_fields():
    cfg = default_config("toy_b", k=7, lam=0.5, seeds=(4, 5))
    assert cfg.k == 7 and cfg.lam == 0.5 and cfg.seeds == (4, 5)
    assert default_config("toy_b", k=None).k == 5  # None means keep default
    with pytest.raises(ContractError):
        default_config("toy_a", momentum=0.9)
    with pytest.raises(ContractError):
        default_config("mnist")


def test_config_validation():
    with pytest.raises(ContractError):
        tiny_toy_config(dist="cauchy")
    with pytest.raises(ContractError):
        tiny_toy_config(feature_mode="raw")
    with pytest.raises(ContractError):
        tiny_toy_config(k=1)
    with pytest.raises(ContractError):
        tiny_toy_config(lam=-0.1)
    with pytest.raises(ContractError):
        tiny_toy_config(main_epochs=0)
    with pytest.raises(ContractError):
        tiny_toy_config(auxue_lr=0.0)
    with pytest.raises(ContractError):
        tiny_toy_config(seeds=())


def test_config_hash_ignores_out_dir_only():
    a = tiny_toy_config(out_dir="runs1")
    b = tiny_toy_config(out_dir="runs2")
    c = tiny_toy_config(k=4)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 12
    # stable across instances: derived from the field values only
    assert ExperimentConfig(**a.to_dict()).config_hash() == a.config_hash()


# ------------------------------------------------------------------ models


def test_aleatoric_param_counts():
    assert n_aleatoric_params("gaussian") == 1
    assert n_aleatoric_params("laplace") == 1
    assert n_aleatoric_params("ggau") == 2
    assert n_aleatoric_params("nig") == 3


def test_build_main_matches_config():
    config = tiny_toy_config()
    mlp = build_main(config, seed=0)
    assert mlp.spec.widths == (1, 8, 8, 1)
    assert mlp.forward(tk.as_tensor(np.zeros((4, 1)))).shape == (4, 1)


def test_fresh_evidence_head_starts_at_the_uniform_prior():
    config = tiny_toy_config(dist="nig")
    auxue = build_auxue(config, in_dim=8, seed=3)
    feats = np.random.default_rng(0).standard_normal((20, 8))
    auxue.fit_feature_norm(feats)
    params, evidence = auxue.forward(tk.as_tensor(feats))
    assert len(params) == 3  # nig emits three positive parameters
    np.testing.assert_allclose(evidence.data, np.exp(EVIDENCE_INIT_LOG),
                               rtol=1e-12)
    scores = auxue_scores(auxue, feats)
    # alpha ~ 1 everywhere: epistemic uncertainty starts at ~1
    np.testing.assert_allclose(scores["epistemic"], 1.0, atol=0.01)


def test_feature_stream_standardized_with_training_statistics():
    config = tiny_toy_config()  # penultimate mode: no extractor in the way
    auxue = build_auxue(config, in_dim=5, seed=0)
    rng = np.random.default_rng(1)
    feats = rng.normal(7.0, 4.0, size=(300, 5))
    auxue.fit_feature_norm(feats)
    h = auxue.features(feats).data
    np.testing.assert_allclose(h.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(h.std(axis=0), 1.0, atol=1e-6)


def test_extractor_mode_wires_the_configured_activation():
    config = tiny_tabular_config()
    auxue = build_auxue(config, in_dim=11, seed=0)
    assert auxue.extractor is not None
    assert auxue.extractor.spec.activations == (config.extractor_activation,)
    assert auxue.sigma2.spec.activations == ("cosine", "relu", "exp")
    assert auxue.sigma2.spec.widths == (8, 16, 16, 3)


def test_mlp_state_round_trip_bit_exact():
    config = tiny_tabular_config()
    auxue = build_auxue(config, in_dim=11, seed=9)
    for mlp in (auxue.extractor, auxue.sigma1, auxue.sigma2):
        rebuilt = mlp_from_state(mlp_state(mlp))
        for original, copy in zip(mlp.parameters(), rebuilt.parameters()):
            np.testing.assert_array_equal(original.data, copy.data)


def test_mlp_from_state_rejects_corrupt_shapes():
    mlp = build_main(tiny_toy_config(), seed=0)
    state = mlp_state(mlp)
    bad = json.loads(json.dumps(state))
    bad["layers"][0]["weight"] = [[1.0, 2.0]]
    with pytest.raises(ContractError):
        mlp_from_state(bad)
    short = json.loads(json.dumps(state))
    short["layers"] = short["layers"][:-1]
    with pytest.raises(ContractError):
        mlp_from_state(short)


# ---------------------------------------------------------------- training


def test_train_main_learns_and_is_deterministic():
    config = tiny_toy_config(main_epochs=20)
    (xt, yt), (xv, yv), _ = toy_arrays(config)
    mlp, log = train_main(config, xt, yt, xv, yv, seed=1)
    assert log.final_train_loss < float(np.var(yt))  # beats the mean predictor
    assert log.final_val_loss is not None
    again, _ = train_main(config, xt, yt, xv, yv, seed=1)
    for a, b in zip(mlp.parameters(), again.parameters()):
        np.testing.assert_array_equal(a.data, b.data)
    other, _ = train_main(config, xt, yt, xv, yv, seed=2)
    assert any(
        not np.array_equal(a.data, b.data)
        for a, b in zip(mlp.parameters(), other.parameters())
    )


def test_training_divergence_raises_structured_error():
    config = tiny_toy_config(main_widths=(1, 4, 4, 1),
                             main_activations=("relu", "relu", "identity"),
                             main_lr=1e80, main_epochs=3)
    (xt, yt), _, _ = toy_arrays(config)
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(DivergenceError):
        train_main(config, xt, yt, seed=1)


def test_main_model_frozen_through_auxue_training():
    config = tiny_toy_config()
    (xt, yt), (xv, yv), _ = toy_arrays(config)
    main, _ = train_main(config, xt, yt, xv, yv, seed=1)
    snapshot = [p.data.copy() for p in main.parameters()]
    auxue, disc, log = train_auxue(config, main, xt, yt, xv, yv, seed=1)
    for before, param in zip(snapshot, main.parameters()):
        np.testing.assert_array_equal(before, param.data)  # bit-identical
        assert param.grad is None  # no adjoint ever reached the main model
    assert np.isfinite(log.final_train_loss)
    assert disc.k == config.k


def test_auxue_loss_gradient_cannot_reach_main_parameters():
    config = tiny_toy_config()
    (xt, yt), _, _ = toy_arrays(config)
    main, _ = train_main(config, xt, yt, seed=1)
    feats = penultimate_features(main, xt[:32])
    auxue = build_auxue(config, feats.shape[1], seed=1)
    auxue.fit_feature_norm(feats)
    from auxue.harness.train import _auxue_batch_loss

    residual = yt[:32] - predict(main, xt[:32])
    targets = np.eye(config.k)[np.zeros(32, dtype=int)]
    loss = _auxue_batch_loss(auxue, feats, residual, targets, config.lam)
    grads = backward(loss)
    tracked = set(map(id, grads))
    for p in main.parameters():
        assert id(p) not in tracked and p.grad is None
    assert all(id(p) in tracked for p in auxue.parameters())


def test_train_auxue_deterministic_per_seed():
    config = tiny_toy_config()
    (xt, yt), (xv, yv), _ = toy_arrays(config)
    main, _ = train_main(config, xt, yt, xv, yv, seed=1)
    a, disc_a, _ = train_auxue(config, main, xt, yt, xv, yv, seed=1)
    b, disc_b, _ = train_auxue(config, main, xt, yt, xv, yv, seed=1)
    assert disc_a.thresholds == disc_b.thresholds
    for pa, pb in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(pa.data, pb.data)
    np.testing.assert_array_equal(a.feature_mean, b.feature_mean)


def test_auxue_scores_shapes_and_ranges():
    config = tiny_toy_config()
    (xt, yt), (xv, yv), (xs, _) = toy_arrays(config)
    main, _ = train_main(config, xt, yt, xv, yv, seed=1)
    auxue, _, _ = train_auxue(config, main, xt, yt, xv, yv, seed=1)
    feats = main_features_for(config.feature_mode, main, xs)
    assert feats.shape[1] == 8  # penultimate width
    scores = auxue_scores(auxue, feats)
    n = xs.shape[0]
    assert scores["aleatoric"].shape == (n,)
    assert np.all(scores["aleatoric"] > 0.0)
    assert np.all((scores["epistemic"] > 0.0) & (scores["epistemic"] <= 1.0))
    np.testing.assert_allclose(
        scores["epistemic"], config.k / scores["strength"], rtol=1e-12
    )


def test_ensemble_variance_and_mean():
    config = tiny_tabular_config(main_epochs=5)
    data = split(gen_wine_like(config.n_data, seed=0), config.split_fractions,
                 seed=1)
    xt, yt = data.subset("train").features, data.subset("train").targets
    xs, ys = data.subset("test").features, data.subset("test").targets
    members = train_ensemble(config, xt, yt, seed=1)
    assert len(members) == 2
    scores = ensemble_scores(members, xs)
    assert scores.shape == (xs.shape[0],) and np.all(scores >= 0.0)
    # forced identical member seeds: zero variance everywhere
    clones = train_ensemble(config, xt, yt, seed=1, member_seeds=[7, 7])
    np.testing.assert_array_equal(ensemble_scores(clones, xs), 0.0)
    # convexity: the ensemble mean cannot beat every member but never
    # loses to the worst one
    mean_mse = float(np.mean((ys - ensemble_mean(members, xs)) ** 2))
    member_mse = [float(np.mean((ys - predict(m, xs)) ** 2)) for m in members]
    assert mean_mse <= max(member_mse) + 1e-12


# ------------------------------------------------------------- persistence


def test_main_checkpoint_round_trip(tmp_path):
    config = tiny_toy_config()
    (xt, yt), _, _ = toy_arrays(config)
    main, _ = train_main(config, xt, yt, seed=1)
    std = Standardizer.fit(xt)
    path = tmp_path / "main.json"
    save_main_checkpoint(path, main, "cafe0123beef", std)
    loaded, config_hash, loaded_std = load_main_checkpoint(path)
    assert config_hash == "cafe0123beef"
    np.testing.assert_array_equal(loaded_std.mean, std.mean)
    x = np.random.default_rng(0).uniform(-3, 3, size=(100, 1))
    np.testing.assert_array_equal(predict(loaded, x), predict(main, x))


def test_auxue_checkpoint_round_trip(tmp_path):
    config = tiny_tabular_config()
    data = split(gen_wine_like(config.n_data, seed=0), config.split_fractions,
                 seed=1)
    xt, yt = data.subset("train").features, data.subset("train").targets
    main, _ = train_main(config, xt, yt, seed=1)
    auxue, disc, _ = train_auxue(config, main, xt, yt, seed=1)
    path = tmp_path / "auxue.json"
    save_auxue_checkpoint(path, auxue, disc, "deadbeef0000")
    loaded, loaded_disc, config_hash, std = load_auxue_checkpoint(path)
    assert config_hash == "deadbeef0000" and std is None
    assert loaded_disc.thresholds == disc.thresholds
    np.testing.assert_array_equal(loaded.feature_mean, auxue.feature_mean)
    np.testing.assert_array_equal(loaded.feature_scale, auxue.feature_scale)
    feats = main_features_for(config.feature_mode, main,
                              data.subset("test").features)
    before = auxue_scores(auxue, feats)
    after = auxue_scores(loaded, feats)
    np.testing.assert_array_equal(before["epistemic"], after["epistemic"])
    np.testing.assert_array_equal(before["aleatoric"], after["aleatoric"])


def test_ensemble_checkpoint_round_trip(tmp_path):
    config = tiny_tabular_config()
    data = split(gen_wine_like(config.n_data, seed=0), config.split_fractions,
                 seed=1)
    xt, yt = data.subset("train").features, data.subset("train").targets
    members = train_ensemble(config, xt, yt, seed=1)
    path = tmp_path / "ens.json"
    save_ensemble_checkpoint(path, members, "0123")
    loaded, config_hash = load_ensemble_checkpoint(path)
    assert config_hash == "0123" and len(loaded) == len(members)
    xs = data.subset("test").features
    np.testing.assert_array_equal(ensemble_scores(loaded, xs),
                                  ensemble_scores(members, xs))


def test_persistence_error_contracts(tmp_path):
    missing = tmp_path / "missing.json"
    with pytest.raises(PersistenceError, match="no such file"):
        load_main_checkpoint(missing)

    config = tiny_toy_config()
    main = build_main(config, seed=0)
    good = tmp_path / "good.json"
    save_main_checkpoint(good, main, "hash")

    truncated = tmp_path / "truncated.json"
    truncated.write_text(good.read_text()[: len(good.read_text()) // 2])
    with pytest.raises(PersistenceError, match="malformed"):
        load_main_checkpoint(truncated)

    payload = json.loads(good.read_text())
    payload["format_version"] = 99
    versioned = tmp_path / "versioned.json"
    versioned.write_text(json.dumps(payload))
    with pytest.raises(PersistenceError, match="format_version"):
        load_main_checkpoint(versioned)

    with pytest.raises(PersistenceError, match="kind"):
        load_auxue_checkpoint(good)  # main checkpoint under the auxue loader

    payload = json.loads(good.read_text())
    del payload["model"]
    gutted = tmp_path / "gutted.json"
    gutted.write_text(json.dumps(payload))
    with pytest.raises(PersistenceError, match="malformed checkpoint"):
        load_main_checkpoint(gutted)

    # writes are atomic: no temp droppings next to the artifact
    leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
    assert leftovers == []


def test_headline_csv_and_report_json_are_stable(tmp_path):
    rows = [("alpha", 0.1 + 0.2), ("label", "toy"), ("count", 3)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_headline_csv(a, rows)
    write_headline_csv(b, rows)
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.splitlines()[0] == "metric,value"
    assert "0.30000000000000004" in text  # shortest round-trip float repr

    report = {"b": 1, "a": {"z": 2.5, "m": [1, 2]}}
    ra, rb = tmp_path / "a.json", tmp_path / "b.json"
    write_report_json(ra, report)
    write_report_json(rb, report)
    assert ra.read_bytes() == rb.read_bytes()
    assert json.loads(ra.read_text()) == report


# ------------------------------------------------------------- experiment


def test_toy_experiment_report_structure(tmp_path):
    config = tiny_toy_config(seeds=(1, 2), out_dir=str(tmp_path / "runs"))
    report = run_experiment(config)
    assert report["experiment"] == "toy_a"
    assert report["seeds"] == [1, 2]
    assert len(report["per_seed"]) == 2
    for entry in report["per_seed"]:
        assert set(entry["regions"]) == {
            "epistemic_ood", "epistemic_id", "aleatoric_noisy", "aleatoric_quiet"
        }
    assert len(report["curves"]["1"]["grid_x"]) == 600
    mean_mse = report["mean"]["main"]["test_mse"]
    per_seed_mse = [e["main"]["test_mse"] for e in report["per_seed"]]
    assert mean_mse == pytest.approx(float(np.mean(per_seed_mse)), abs=1e-12)
    paths = report["paths"]
    report_payload = json.loads(
        (tmp_path / "runs" / "toy_a_report.json").read_text()
    )
    assert "timing_seconds" in report_payload  # JSON carries timing, CSV must not
    csv_text = (tmp_path / "runs" / "toy_a_headline.csv").read_text()
    assert "timing" not in csv_text
    assert "region_epistemic_ood_mean" in csv_text
    assert set(paths) == {"report_json", "headline_csv"}
    for seed in (1, 2):
        assert (tmp_path / "runs" / f"toy_a_seed{seed}_main.json").exists()
        assert (tmp_path / "runs" / f"toy_a_seed{seed}_auxue.json").exists()


def test_tabular_experiment_report_structure(tmp_path):
    config = tiny_tabular_config(out_dir=str(tmp_path / "runs"))
    report = run_experiment(config)
    entry = report["per_seed"][0]
    assert set(entry["ood"]) == {"negate_all", "shuffle_features", "mean"}
    for block in entry["ood"].values():
        assert set(block) == {"dido", "sigma1", "dens"}
        for method in block.values():
            assert 0.0 <= method["auc"] <= 1.0
            assert 0.0 <= method["aupr"] <= 1.0
    assert report["acceptance_bands"]["dido_auc_mean_min"] == 0.85
    rows = dict(headline_rows(report))
    assert "dido_auc_mean" in rows and "dens_aupr_mean" in rows
    assert "seed1_dido_auc" in rows
    assert (tmp_path / "runs" / "tabular_seed1_ensemble.json").exists()


def test_experiment_reports_are_deterministic():
    config = tiny_toy_config()
    a = run_experiment(config, save_artifacts=False)
    b = run_experiment(config, save_artifacts=False)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_stage_failures_carry_the_stage_name():
    config = tiny_toy_config(main_lr=1e80)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(StageError) as excinfo:
            run_experiment(config, save_artifacts=False)
    assert excinfo.value.stage == "train-main"
    assert isinstance(excinfo.value.cause, DivergenceError)
