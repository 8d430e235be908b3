"""Hyperspectral/RGB fusion tracker.

Arrays are float64 numpy arrays: cubes (H, W, B), sequences (T, H, W, B),
boxes (T, 4) as x, y, w, h in pixels. Configurations are JSON strings.
"""

import json

from ._core import (
    ConfigError,
    DataError,
    Model,
    NumericalError,
    ShapeError,
    center_error,
    default_config,
    evaluate_boxes,
    iou,
    precision_dp20,
    resolve_config,
    sam_map,
    success_auc,
    synth_sequence,
)


def config(overrides=(), base=""):
    """Resolved configuration as a dict, with `section.key=value` overrides applied."""
    return json.loads(resolve_config(base, list(overrides)))


__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "NumericalError",
    "ShapeError",
    "center_error",
    "config",
    "default_config",
    "evaluate_boxes",
    "iou",
    "precision_dp20",
    "resolve_config",
    "sam_map",
    "success_auc",
    "synth_sequence",
]
