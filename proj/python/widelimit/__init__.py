"""Wide-network Gaussian limits: kernels, sampling, transport distances and experiments."""

import json as _json

from ._core import (
    ConfigError,
    Error,
    empirical_wp,
    gamma_p,
    nngp_kernels,
    pair_moment,
    sample_outputs,
    w2_gaussian,
)
from ._core import run_experiment as _run_experiment

__all__ = [
    "ConfigError",
    "Error",
    "empirical_wp",
    "gamma_p",
    "nngp_kernels",
    "pair_moment",
    "run_experiment",
    "sample_outputs",
    "w2_gaussian",
]


def run_experiment(config, out_dir, threads=1):
    """Run a config given as a dict or a JSON string; outputs land in out_dir."""
    text = config if isinstance(config, str) else _json.dumps(config)
    _run_experiment(text, str(out_dir), threads)
