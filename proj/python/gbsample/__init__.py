"""Gradient-based class weighting, thresholds and rebalancing sampler.

Thin wrapper over the C++ core. Configs and run records are plain dicts.
"""

import json as _json

from ._core import (
    GradientLedger,
    NumericError,
    SolverError,
    __version__,
    balance_residuals,
    class_repeat_rates,
    epsilon_schedule,
    gbt_thresholds,
    jacobi_target,
    loss_and_grad,
    preset_names,
    realize_repeats,
    render_report,
    solve_direct,
    solve_iterative,
    split_dataset,
    weights_from_logits,
)
from . import _core

__all__ = [
    "GradientLedger",
    "NumericError",
    "SolverError",
    "balance_residuals",
    "class_repeat_rates",
    "config",
    "config_schema",
    "default_config",
    "epsilon_schedule",
    "gbt_thresholds",
    "jacobi_target",
    "loss_and_grad",
    "preset_names",
    "realize_repeats",
    "render_report",
    "simulate",
    "solve_direct",
    "solve_iterative",
    "split_dataset",
    "weights_from_logits",
]


def default_config():
    return _json.loads(_core._default_config_json())


def config_schema():
    return _json.loads(_core._config_schema_json())


def config(preset=None, **sections):
    """Defaults, then a preset, then the given sections merged on top.

    config("full", seed=3, task={"scenario": "scarce"})
    """
    return _json.loads(_core._effective_config_json(preset or "", _json.dumps(sections)))


def simulate(cfg=None):
    """Runs the simulated self-training loop; one dict per generation."""
    return _json.loads(_core._simulate_json(_json.dumps(cfg or {})))
