"""Multiplicative identity-expression conditioning for neural radiance fields.

Thin wrapper over the compiled ``_minerf`` extension. Arrays are NumPy
float64; images are H x W x 3 in [0, 1]; configs are JSON strings.
"""

import json

from ._minerf import (
    ConfigError,
    DimensionError,
    NumericError,
    UsageError,
    composite,
    default_config,
    evaluate,
    generate_dataset,
    h_forward,
    m_forward,
    psnr,
    singular_values,
    ssim,
    train,
    variants,
    verify,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "NumericError",
    "UsageError",
    "composite",
    "config",
    "default_config",
    "evaluate",
    "generate_dataset",
    "h_forward",
    "m_forward",
    "psnr",
    "singular_values",
    "ssim",
    "train",
    "variants",
    "verify",
]


def config(**overrides):
    """Default config as a dict with dotted-key overrides, e.g. config(**{"train.steps": 10})."""
    doc = json.loads(default_config())
    for key, value in overrides.items():
        node = doc
        *path, leaf = key.split(".")
        for part in path:
            node = node[part]
        if leaf not in node:
            raise KeyError(key)
        node[leaf] = value
    return doc
