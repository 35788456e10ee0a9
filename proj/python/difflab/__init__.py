"""Gaussian-mixture diffusion laboratory: exact scores, schedules, samplers and experiments."""

import csv
import io
import json

from . import _difflab
from ._difflab import (
    ConfigError,
    InputError,
    Mixture,
    SamplerError,
    ScheduleError,
    ddpm_step,
    endpoint_bounds,
    kl_budget,
    replay_manifest,
    run_sampler,
    schedule_times,
    score_matching_loss,
    set_thread_count,
    sigma_sq,
    single_gaussian,
    standard_normal,
    thread_count,
    tv_quadrature_1d,
    two_gaussian,
    w2_empirical_1d,
)

__version__ = _difflab.__version__


def resolve_config(config):
    """Fill defaults and validate an experiment config given as a dict."""
    return json.loads(_difflab.resolve_config(json.dumps(config)))


def run_experiment(config):
    """Run an experiment in memory; returns (rows as list of dicts, summary dict, within_policy)."""
    rows_csv, summary, within_policy = _difflab.run_experiment(json.dumps(config))
    rows = list(csv.DictReader(io.StringIO(rows_csv)))
    return rows, json.loads(summary), within_policy


def run_and_write(config, out_root, tag=None):
    """Run an experiment and persist rows.csv and manifest.json; returns the run directory."""
    return _difflab.run_and_write(json.dumps(config), str(out_root), tag)


__all__ = [
    "ConfigError",
    "InputError",
    "Mixture",
    "SamplerError",
    "ScheduleError",
    "ddpm_step",
    "endpoint_bounds",
    "kl_budget",
    "replay_manifest",
    "resolve_config",
    "run_and_write",
    "run_experiment",
    "run_sampler",
    "schedule_times",
    "score_matching_loss",
    "set_thread_count",
    "sigma_sq",
    "single_gaussian",
    "standard_normal",
    "thread_count",
    "tv_quadrature_1d",
    "two_gaussian",
    "w2_empirical_1d",
]
