"""Artifact persistence: versioned JSON checkpoints that round-trip
parameters bit-exactly, plus stable-key JSON reports with a flat
headline CSV.

JSON numbers serialize through Python's shortest-round-trip float repr,
so save -> load reproduces every parameter bit-for-bit. All writes are
atomic (temp file in the target directory, then rename).
"""

import json
import os
import tempfile

import numpy as np

from ..datagen import Standardizer
from ..dido import DiscretizationSpec
from ..errors import PersistenceError
from .models import AuxUE, mlp_from_state, mlp_state

CHECKPOINT_VERSION = 1


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, payload):
    _atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _read_json(path, expect_kind):
    if not os.path.exists(path):
        raise PersistenceError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        raw = fh.read()
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise PersistenceError(f"malformed file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise PersistenceError(f"malformed file {path}: expected a JSON object")
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise PersistenceError(
            f"unrecognized format_version {version!r} in {path} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    kind = payload.get("kind")
    if kind != expect_kind:
        raise PersistenceError(f"{path} holds kind {kind!r}, expected {expect_kind!r}")
    return payload


def _standardizer_field(standardizer):
    return None if standardizer is None else standardizer.to_dict()


def _standardizer_from(payload):
    field = payload.get("standardizer")
    return None if field is None else Standardizer.from_dict(field)


def save_main_checkpoint(path, mlp, config_hash="", standardizer=None):
    _write_json(path, {
        "format_version": CHECKPOINT_VERSION,
        "kind": "main",
        "config_hash": config_hash,
        "model": mlp_state(mlp),
        "standardizer": _standardizer_field(standardizer),
    })


def load_main_checkpoint(path):
    """Returns (mlp, config_hash, standardizer-or-None)."""
    payload = _read_json(path, "main")
    try:
        mlp = mlp_from_state(payload["model"])
        standardizer = _standardizer_from(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"malformed checkpoint {path}: {exc}") from exc
    return mlp, payload.get("config_hash", ""), standardizer


def save_auxue_checkpoint(path, auxue, disc, config_hash="", standardizer=None):
    _write_json(path, {
        "format_version": CHECKPOINT_VERSION,
        "kind": "auxue",
        "config_hash": config_hash,
        "dist": auxue.dist,
        "k": auxue.k,
        "feature_mode": auxue.feature_mode,
        "extractor": None if auxue.extractor is None else mlp_state(auxue.extractor),
        "sigma1": mlp_state(auxue.sigma1),
        "sigma2": mlp_state(auxue.sigma2),
        "feature_mean": auxue.feature_mean.tolist(),
        "feature_scale": auxue.feature_scale.tolist(),
        "discretization": {"k": disc.k, "thresholds": list(disc.thresholds)},
        "standardizer": _standardizer_field(standardizer),
    })


def load_auxue_checkpoint(path):
    """Returns (auxue, discretization, config_hash, standardizer-or-None)."""
    payload = _read_json(path, "auxue")
    try:
        extractor = payload["extractor"]
        auxue = AuxUE(
            dist=payload["dist"],
            k=int(payload["k"]),
            feature_mode=payload["feature_mode"],
            extractor=None if extractor is None else mlp_from_state(extractor),
            sigma1=mlp_from_state(payload["sigma1"]),
            sigma2=mlp_from_state(payload["sigma2"]),
            feature_mean=np.asarray(payload["feature_mean"], dtype=np.float64),
            feature_scale=np.asarray(payload["feature_scale"], dtype=np.float64),
        )
        disc_field = payload["discretization"]
        disc = DiscretizationSpec(
            k=int(disc_field["k"]), thresholds=tuple(disc_field["thresholds"])
        )
        standardizer = _standardizer_from(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"malformed checkpoint {path}: {exc}") from exc
    return auxue, disc, payload.get("config_hash", ""), standardizer


def save_ensemble_checkpoint(path, members, config_hash=""):
    _write_json(path, {
        "format_version": CHECKPOINT_VERSION,
        "kind": "ensemble",
        "config_hash": config_hash,
        "members": [mlp_state(m) for m in members],
    })


def load_ensemble_checkpoint(path):
    payload = _read_json(path, "ensemble")
    try:
        members = [mlp_from_state(state) for state in payload["members"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"malformed checkpoint {path}: {exc}") from exc
    return members, payload.get("config_hash", "")


def write_report_json(path, report):
    """Stable-key JSON dump of a report payload."""
    _write_json(path, report)


def load_report_json(path):
    if not os.path.exists(path):
        raise PersistenceError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise PersistenceError(f"malformed report {path}: {exc}") from exc


def write_headline_csv(path, rows):
    """Flat metric,value CSV; values use shortest-round-trip float repr.

    Timing never belongs here: the headline file must be byte-identical
    across repeated runs of the same configuration.
    """
    lines = ["metric,value"]
    for name, value in rows:
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{name},{value}")
    _atomic_write_text(path, "\n".join(lines) + "\n")
