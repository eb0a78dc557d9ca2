"""JSON persistence for fitted reward models.

Files carry the MDP config fingerprint they were fit under; loading against a
different environment raises DemoCompatibilityError. Linear and GP models are
stored as parameters and rebuilt exactly on load. The BNN model additionally
stores its predicted reward vector, because posterior-mean prediction is a
Monte Carlo quantity and the operational output should not depend on whoever
reloads the file.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .bnn import BnnArchitecture, VariationalPosterior
from .demonstrations import FeatureMap, feature_map
from .environment import MdpConfig, config_fingerprint, config_from_dict, config_to_dict
from .errors import DemoCompatibilityError, DemoFormatError
from .gpirl import GpirlModel, KernelHyperparams, dtc_extrapolate
from .maxent import FitDiagnostics, LinearRewardModel, reward_from_linear

MODEL_KINDS = ("maxent_linear", "gpirl", "bnn")


def _diagnostics_to_dict(diag: FitDiagnostics) -> dict:
    return {
        "iterations": diag.iterations,
        "converged": diag.converged,
        "final_objective": diag.final_objective,
        "final_gradient_norm": diag.final_gradient_norm,
    }


def _diagnostics_from_dict(data: dict) -> FitDiagnostics:
    return FitDiagnostics(
        iterations=int(data["iterations"]),
        converged=bool(data["converged"]),
        final_objective=float(data["final_objective"]),
        final_gradient_norm=float(data["final_gradient_norm"]),
    )


def linear_payload(model: LinearRewardModel) -> dict:
    return {
        "weights": model.weights.tolist(),
        "diagnostics": _diagnostics_to_dict(model.diagnostics),
    }


def gpirl_payload(model: GpirlModel) -> dict:
    return {
        "inducing_state_indices": list(model.inducing_state_indices),
        "inducing_values": model.inducing_values.tolist(),
        "hyperparams": {
            "log_amplitude": model.hyperparams.log_amplitude,
            "log_length_scales": list(model.hyperparams.log_length_scales),
            "log_noise": model.hyperparams.log_noise,
        },
        "diagnostics": _diagnostics_to_dict(model.diagnostics),
    }


def bnn_payload(posterior: VariationalPosterior, architecture: BnnArchitecture, reward) -> dict:
    return {
        "architecture": {
            "layer_sizes": list(architecture.layer_sizes),
            "activation": architecture.activation,
        },
        "mu": posterior.mu.tolist(),
        "rho": posterior.rho.tolist(),
        "reward": np.asarray(reward, dtype=float).tolist(),
    }


def save_model(path, kind: str, payload: dict, mdp_config: MdpConfig, feature_name: str) -> None:
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    document = {
        "version": 1,
        "kind": kind,
        "mdp_config": config_to_dict(mdp_config),
        "fingerprint": config_fingerprint(mdp_config),
        "feature_map": feature_name,
        "payload": payload,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(document, indent=2) + "\n")
    os.replace(tmp, path)


def load_model(path, expected_config: MdpConfig | None = None) -> dict:
    """Parse and validate a model file; returns the raw document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DemoFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(document, dict) or document.get("version") != 1:
        raise DemoFormatError(f"{path}: unsupported or missing model file version")
    for key in ("kind", "mdp_config", "fingerprint", "feature_map", "payload"):
        if key not in document:
            raise DemoFormatError(f"{path}: model file missing {key!r}")
    if document["kind"] not in MODEL_KINDS:
        raise DemoFormatError(f"{path}: unknown model kind {document['kind']!r}")
    try:
        config = config_from_dict(document["mdp_config"])
    except ValueError as exc:
        raise DemoFormatError(f"{path}: embedded config is invalid: {exc}") from exc
    if config_fingerprint(config) != document["fingerprint"]:
        raise DemoFormatError(f"{path}: fingerprint does not match embedded config")
    if expected_config is not None and document["fingerprint"] != config_fingerprint(
        expected_config
    ):
        raise DemoCompatibilityError(
            "model was fit under a different environment configuration"
        )
    return document


def reward_from_document(document: dict) -> np.ndarray:
    """Reconstruct the per-state reward vector a stored model defines."""
    config = config_from_dict(document["mdp_config"])
    features = feature_map(config, document["feature_map"])
    payload = document["payload"]
    kind = document["kind"]
    if kind == "maxent_linear":
        model = LinearRewardModel(
            weights=np.asarray(payload["weights"], dtype=float),
            feature_name=document["feature_map"],
            diagnostics=_diagnostics_from_dict(payload["diagnostics"]),
        )
        return reward_from_linear(model, features)
    if kind == "gpirl":
        indices = tuple(int(i) for i in payload["inducing_state_indices"])
        hyper = KernelHyperparams(
            log_amplitude=float(payload["hyperparams"]["log_amplitude"]),
            log_length_scales=tuple(
                float(x) for x in payload["hyperparams"]["log_length_scales"]
            ),
            log_noise=float(payload["hyperparams"]["log_noise"]),
        )
        model = GpirlModel(
            inducing_state_indices=indices,
            inducing_rows=features.matrix[np.array(indices)],
            inducing_values=np.asarray(payload["inducing_values"], dtype=float),
            hyperparams=hyper,
            feature_name=document["feature_map"],
            diagnostics=_diagnostics_from_dict(payload["diagnostics"]),
        )
        return dtc_extrapolate(model, features)
    reward = np.asarray(payload["reward"], dtype=float)
    if reward.shape[0] != features.matrix.shape[0]:
        raise DemoFormatError("stored reward vector does not cover every state")
    return reward
