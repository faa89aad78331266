"""Federated QUIC traffic share estimation: features, selection, federation."""

import json

from ._quicfed import (
    FEATURE_NAMES,
    ConfigError,
    ContractError,
    EstimatorError,
    IoError,
    ParseError,
    Regressor,
    aggregate_distributions,
    check_convergence,
    conditional_mi,
    config_keys,
    discretize,
    entropy,
    extract_trace,
    fit_regressor,
    mutual_information,
    planted_benchmark,
    read_features,
    run_experiment_json,
    select,
    synthetic_features,
)


def run_experiment(**settings):
    """Run a CR/FR/RFR experiment; keyword arguments are config keys."""
    return json.loads(run_experiment_json(settings))


__all__ = [
    "FEATURE_NAMES",
    "ConfigError",
    "ContractError",
    "EstimatorError",
    "IoError",
    "ParseError",
    "Regressor",
    "aggregate_distributions",
    "check_convergence",
    "conditional_mi",
    "config_keys",
    "discretize",
    "entropy",
    "extract_trace",
    "fit_regressor",
    "mutual_information",
    "planted_benchmark",
    "read_features",
    "run_experiment",
    "run_experiment_json",
    "select",
    "synthetic_features",
]
