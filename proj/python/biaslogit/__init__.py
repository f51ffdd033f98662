"""Logit dynamics under biased cost perception, with correcting mechanisms."""

import json

from ._core import (
    AdditiveBias,
    BiasCurve,
    ConfigError,
    ConjugatePair,
    InvariantViolation,
    MultiplicativeBias,
    RunAborted,
    cmd_check_gains,
    cmd_run,
    cmd_sweep,
    logit_vector_field,
    softmax_q,
    storage_brute_force,
    storage_closed_form,
)
from . import _core


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def simulate(config, certificates=True):
    """Run a configuration (dict or JSON text) and return trajectory columns and reports."""
    return json.loads(_core.simulate_json(_text(config), certificates))


def check_gains(config):
    return _core.check_gains(_text(config))


def normalize_config(config):
    """Parsed configuration with every default filled in."""
    return json.loads(_core.normalize_config(_text(config)))


__all__ = [
    "AdditiveBias",
    "BiasCurve",
    "ConfigError",
    "ConjugatePair",
    "InvariantViolation",
    "MultiplicativeBias",
    "RunAborted",
    "check_gains",
    "cmd_check_gains",
    "cmd_run",
    "cmd_sweep",
    "logit_vector_field",
    "normalize_config",
    "simulate",
    "softmax_q",
    "storage_brute_force",
    "storage_closed_form",
]
