"""Transport-map capacity diagnostics.

Thin Python layer over the native core. Configs are plain dicts with the same
schema as the JSON files accepted by the ``transcap`` command-line tool.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from . import _transcap
from ._transcap import (
    ConfigError,
    DimensionError,
    InvalidArgument,
    NumericalError,
    TranscapError,
    compatible_effective_rank,
    effective_rank,
    entropy,
    log_gram_volume,
    numerical_rank,
    participation_ratio,
    reconfiguration_dimension,
    scenarios,
    singular_values,
    spearman_correlation,
    stable_rank,
    w2_gaussian,
)

__version__ = _transcap.version()

__all__ = [
    "ConfigError",
    "DimensionError",
    "InvalidArgument",
    "NumericalError",
    "TranscapError",
    "compatible_effective_rank",
    "default_config",
    "effective_rank",
    "entropy",
    "log_gram_volume",
    "normalize_config",
    "numerical_rank",
    "participation_ratio",
    "reconfiguration_dimension",
    "run",
    "run_scenario",
    "scenarios",
    "singular_values",
    "spearman_correlation",
    "stable_rank",
    "validate",
    "w2_gaussian",
]


def default_config(scenario: str) -> dict[str, Any]:
    """Default config for a scenario name such as ``"threshold-sweep"``."""
    return json.loads(_transcap.default_config_json(scenario))


def normalize_config(config: dict[str, Any]) -> dict[str, Any]:
    """Fill missing keys with scenario defaults; raises ConfigError on unknown keys."""
    return json.loads(_transcap.normalize_config_json(json.dumps(config)))


def validate(config: dict[str, Any]) -> str:
    """Range-check a config and return its SHA-256 hash."""
    return _transcap.validate_config_json(json.dumps(config))


def run_scenario(config: dict[str, Any], workers: int = 0) -> dict[str, Any]:
    """Run in memory; returns ``{"summary", "violations", "tables"}``."""
    return json.loads(_transcap.run_scenario_json(json.dumps(config), workers))


def run(config: dict[str, Any], output_dir: Optional[str] = None, workers: int = 0) -> dict[str, Any]:
    """Run and write outputs; returns the run manifest with ``output_dir`` added."""
    out_dir, manifest = _transcap.run_experiment_json(json.dumps(config), output_dir, workers)
    result = json.loads(manifest)
    result["output_dir"] = out_dir
    return result
