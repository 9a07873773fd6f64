"""Versioned JSON run configuration for the command-line tools.

All physical quantities carry their unit in the field name.  Parse errors
name the offending field path and the expected type.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channels import ArrayGeometry, OfdmGrid
from .kernels import DelayBeamGrid

__all__ = ["ConfigError", "RunConfig", "GenerationConfig", "EvaluationConfig",
           "EstimatorConfig", "load_config", "default_config_dict", "parse_config"]

CONFIG_VERSION = 1

_WAVELENGTH_3P5GHZ = 299792458.0 / 3.5e9


class ConfigError(ValueError):
    """Configuration problem; the message names the field and expected type."""


_MISSING = object()


def _get(doc: dict, path: str, typ, default=_MISSING):
    node = doc
    parts = path.split(".")
    for i, key in enumerate(parts):
        if not isinstance(node, dict) or key not in node:
            if default is not _MISSING:
                return default
            raise ConfigError(f"{path}: missing required field")
        node = node[key]
    if typ is float:
        if isinstance(node, (int, float)) and not isinstance(node, bool):
            return float(node)
        raise ConfigError(f"{path}: expected number, got {type(node).__name__}")
    if typ is int:
        if isinstance(node, int) and not isinstance(node, bool):
            return node
        raise ConfigError(f"{path}: expected integer, got {type(node).__name__}")
    if typ is bool:
        if isinstance(node, bool):
            return node
        raise ConfigError(f"{path}: expected boolean, got {type(node).__name__}")
    if typ is list:
        if isinstance(node, list):
            return node
        raise ConfigError(f"{path}: expected list, got {type(node).__name__}")
    if typ is str:
        if isinstance(node, str):
            return node
        raise ConfigError(f"{path}: expected string, got {type(node).__name__}")
    if typ is dict:
        if isinstance(node, dict):
            return node
        raise ConfigError(f"{path}: expected object, got {type(node).__name__}")
    raise AssertionError(typ)


@dataclass
class GenerationConfig:
    count: int = 500
    cluster_count: int = 2
    paths_per_cluster: int = 6
    delay_spread_frac: float = 0.002       # of the delay span
    beam_spread_frac_h: float = 0.007      # of the horizontal beam span
    beam_spread_frac_v: float = 0.007
    center_fraction_delay: float = 0.35    # cluster centers use this central part
    center_fraction_h: float = 1.0
    center_fraction_v: float = 0.25

    def spreads(self, grid: DelayBeamGrid):
        return (self.delay_spread_frac * grid.delay_span_s,
                self.beam_spread_frac_h * grid.beam_span_h_cpm,
                self.beam_spread_frac_v * grid.beam_span_v_cpm)

    def center_fractions(self):
        return (self.center_fraction_delay, self.center_fraction_h, self.center_fraction_v)


@dataclass
class EstimatorConfig:
    rank: int = 3
    t_max: int = 30
    t_prime_max: int = 30
    step_size: float = 1.0
    lambda_multiplier: float = 3.0
    debias: bool = True
    gamma: float = 0.0
    debias_snr_factor: float = 16.0
    schedule_paths: list = field(default_factory=list)
    covariance_samples: int = 1000


@dataclass
class EvaluationConfig:
    snr_grid_db: list = field(default_factory=lambda: [-10.0, 0.0])
    trials: int = 100
    estimator_names: list = field(default_factory=lambda: ["ls", "lmmse", "genie", "rkhs"])
    bs_power_dbm: float = 49.0
    ue_noise_dbm: float = -85.0
    n_jobs: int = 1


@dataclass
class RunConfig:
    seed: int
    geometry: ArrayGeometry
    ofdm: OfdmGrid
    oversampling: int
    generation: GenerationConfig
    estimator: EstimatorConfig
    evaluation: EvaluationConfig
    sweep: dict
    bench: dict

    def delay_beam_grid(self, oversampling: int | None = None) -> DelayBeamGrid:
        return DelayBeamGrid.nyquist(self.ofdm, self.geometry,
                                     self.oversampling if oversampling is None else oversampling)


def default_config_dict() -> dict:
    """Desk-scale defaults: 256 subcarriers, stride 4, 4x4 array."""
    return {
        "version": CONFIG_VERSION,
        "seed": 1234,
        "geometry": {
            "n_rows": 4,
            "n_cols": 4,
            "row_spacing_m": _WAVELENGTH_3P5GHZ,
            "col_spacing_m": _WAVELENGTH_3P5GHZ / 2.0,
        },
        "ofdm": {
            "n_subcarriers": 256,
            "subcarrier_spacing_hz": 30e3,
            "carrier_frequency_hz": 3.5e9,
            "pilot_stride": 4,
        },
        "delay_beam": {"oversampling": 1},
        "generation": {
            "count": 500,
            "cluster_count": 2,
            "paths_per_cluster": 6,
            "delay_spread_frac": 0.002,
            "beam_spread_frac_h": 0.007,
            "beam_spread_frac_v": 0.007,
            "center_fraction_delay": 0.35,
            "center_fraction_h": 1.0,
            "center_fraction_v": 0.25,
        },
        "estimator": {
            "rank": 3,
            "t_max": 30,
            "t_prime_max": 30,
            "step_size": 1.0,
            "lambda_multiplier": 3.0,
            "debias": True,
            "gamma": 0.0,
            "debias_snr_factor": 16.0,
            "schedule_paths": [],
            "covariance_samples": 1000,
        },
        "evaluation": {
            "snr_grid_db": [-10.0, 0.0],
            "trials": 100,
            "estimators": ["ls", "lmmse", "genie", "rkhs"],
            "bs_power_dbm": 49.0,
            "ue_noise_dbm": -85.0,
            "n_jobs": 1,
        },
        "sweep": {
            "rank": [1, 2, 3],
            "lambda_multiplier": [1.0, 2.0, 3.0, 5.0, 8.0],
            "oversampling": [1, 2],
            "step_size": [0.5, 1.0, 2.0, 2.5],
            "t_max": [5, 10, 30],
            "debias": [True, False],
        },
        "bench": {
            "sizes_log2": [10, 11, 12, 13, 14, 15, 16],
            "dense_sizes_log2": [10, 11, 12, 13],
            "rank": 2,
            "repeats": 5,
        },
    }


def parse_config(doc: dict) -> RunConfig:
    version = _get(doc, "version", int, CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"version: expected {CONFIG_VERSION}, got {version}")
    defaults = default_config_dict()

    def dget(path, typ):
        node = defaults
        for key in path.split("."):
            node = node[key]
        return _get(doc, path, typ, node)

    geometry = ArrayGeometry(
        n_rows=dget("geometry.n_rows", int),
        n_cols=dget("geometry.n_cols", int),
        row_spacing_m=dget("geometry.row_spacing_m", float),
        col_spacing_m=dget("geometry.col_spacing_m", float),
    )
    ofdm = OfdmGrid(
        n_subcarriers=dget("ofdm.n_subcarriers", int),
        subcarrier_spacing_hz=dget("ofdm.subcarrier_spacing_hz", float),
        carrier_frequency_hz=dget("ofdm.carrier_frequency_hz", float),
        pilot_stride=dget("ofdm.pilot_stride", int),
    )
    generation = GenerationConfig(
        count=dget("generation.count", int),
        cluster_count=dget("generation.cluster_count", int),
        paths_per_cluster=dget("generation.paths_per_cluster", int),
        delay_spread_frac=dget("generation.delay_spread_frac", float),
        beam_spread_frac_h=dget("generation.beam_spread_frac_h", float),
        beam_spread_frac_v=dget("generation.beam_spread_frac_v", float),
        center_fraction_delay=dget("generation.center_fraction_delay", float),
        center_fraction_h=dget("generation.center_fraction_h", float),
        center_fraction_v=dget("generation.center_fraction_v", float),
    )
    estimator = EstimatorConfig(
        rank=dget("estimator.rank", int),
        t_max=dget("estimator.t_max", int),
        t_prime_max=dget("estimator.t_prime_max", int),
        step_size=dget("estimator.step_size", float),
        lambda_multiplier=dget("estimator.lambda_multiplier", float),
        debias=dget("estimator.debias", bool),
        gamma=dget("estimator.gamma", float),
        debias_snr_factor=dget("estimator.debias_snr_factor", float),
        schedule_paths=[str(p) for p in dget("estimator.schedule_paths", list)],
        covariance_samples=dget("estimator.covariance_samples", int),
    )
    evaluation = EvaluationConfig(
        snr_grid_db=[float(s) for s in dget("evaluation.snr_grid_db", list)],
        trials=dget("evaluation.trials", int),
        estimator_names=[str(s) for s in dget("evaluation.estimators", list)],
        bs_power_dbm=dget("evaluation.bs_power_dbm", float),
        ue_noise_dbm=dget("evaluation.ue_noise_dbm", float),
        n_jobs=dget("evaluation.n_jobs", int),
    )
    return RunConfig(
        seed=dget("seed", int),
        geometry=geometry,
        ofdm=ofdm,
        oversampling=_get(doc, "delay_beam.oversampling", int, 1),
        generation=generation,
        estimator=estimator,
        evaluation=evaluation,
        sweep=_get(doc, "sweep", dict, defaults["sweep"]),
        bench=_get(doc, "bench", dict, defaults["bench"]),
    )


def load_config(path=None) -> RunConfig:
    """Load a config file, or the built-in desk-scale defaults when ``path`` is None."""
    if path is None:
        return parse_config(default_config_dict())
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(doc)
