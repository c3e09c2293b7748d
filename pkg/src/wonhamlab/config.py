"""Run configuration files.

One YAML file describes one model pair plus experiment defaults:

    model:
      generator: [[-1.0, 1.0], [1.0, -1.0]]
      levels: [0.0, 1.0]
      initial: [0.5, 0.5]
    approx:
      generator: [[-1.1, 1.1], [0.9, -0.9]]
      levels: [0.0, 1.05]
      initial: [0.45, 0.55]
    grid:
      t_end: 10.0
      dt: 0.001
    experiment:
      n_trials: 200
      seed: 2026
      checkpoints: [0.0, 0.5, 1.0, 2.0, 5.0, 10.0]
      sweep: [0.2, 0.1, 0.05, 0.025]          # optional
      sweep_components: [initial, generator]   # optional
      strict_tolerance: false                  # optional

Matrices are row lists.  Scalar fields can be overridden from the command line.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import yaml

from .errors import ConfigError, WonhamLabError
from .experiments import DEFAULT_CHECKPOINTS, ExperimentSpec
from .models import FilterModel, ModelPair
from .simulate import TimeGrid


@dataclass(frozen=True)
class RunConfig:
    """Parsed and validated contents of one configuration file."""

    pair: ModelPair
    grid: TimeGrid
    n_trials: int
    master_seed: int
    checkpoints: tuple
    sweep_sizes: tuple | None
    sweep_components: tuple
    strict_tolerance: bool

    @classmethod
    def from_mapping(cls, mapping) -> "RunConfig":
        try:
            model = mapping["model"]
            approx = mapping["approx"]
            grid = mapping["grid"]
            experiment = mapping.get("experiment", {})
            pair = ModelPair(
                true_model=FilterModel.from_raw(model["initial"], model["generator"], model["levels"]),
                approx_model=FilterModel.from_raw(approx["initial"], approx["generator"], approx["levels"]),
            )
            time_grid = TimeGrid(t_end=float(grid["t_end"]), dt=float(grid["dt"]))
            sweep = experiment.get("sweep")
            return cls(
                pair=pair,
                grid=time_grid,
                n_trials=int(experiment.get("n_trials", 100)),
                master_seed=int(experiment.get("seed", 0)),
                checkpoints=tuple(float(c) for c in experiment.get("checkpoints", DEFAULT_CHECKPOINTS)),
                sweep_sizes=None if sweep is None else tuple(float(s) for s in sweep),
                sweep_components=tuple(experiment.get("sweep_components", ("initial", "generator", "levels"))),
                strict_tolerance=bool(experiment.get("strict_tolerance", False)),
            )
        except WonhamLabError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc!r}") from exc

    def to_mapping(self) -> dict:
        truth, approx = self.pair.true_model, self.pair.approx_model
        experiment = {
            "n_trials": self.n_trials,
            "seed": self.master_seed,
            "checkpoints": [float(c) for c in self.checkpoints],
            "sweep_components": list(self.sweep_components),
            "strict_tolerance": self.strict_tolerance,
        }
        if self.sweep_sizes is not None:
            experiment["sweep"] = [float(s) for s in self.sweep_sizes]
        return {
            "model": {
                "generator": truth.generator.entries.tolist(),
                "levels": truth.observation.levels.tolist(),
                "initial": truth.initial.tolist(),
            },
            "approx": {
                "generator": approx.generator.entries.tolist(),
                "levels": approx.observation.levels.tolist(),
                "initial": approx.initial.tolist(),
            },
            "grid": {"t_end": float(self.grid.t_end), "dt": float(self.grid.dt)},
            "experiment": experiment,
        }

    def with_overrides(self, *, seed=None, trials=None, dt=None, strict_tolerance=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, master_seed=int(seed))
        if trials is not None:
            cfg = replace(cfg, n_trials=int(trials))
        if dt is not None:
            cfg = replace(cfg, grid=TimeGrid(cfg.grid.t_end, float(dt)))
        if strict_tolerance is not None:
            cfg = replace(cfg, strict_tolerance=bool(strict_tolerance))
        return cfg

    def to_spec(self) -> ExperimentSpec:
        return ExperimentSpec(
            pair=self.pair,
            grid=self.grid,
            n_trials=self.n_trials,
            master_seed=self.master_seed,
            checkpoints=self.checkpoints,
            sweep_sizes=self.sweep_sizes,
            sweep_components=self.sweep_components,
            strict_tolerance=self.strict_tolerance,
        )


def loads_config(text: str) -> RunConfig:
    try:
        mapping = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse configuration: {exc}") from exc
    if not isinstance(mapping, dict):
        raise ConfigError("configuration must be a mapping")
    return RunConfig.from_mapping(mapping)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())


def dumps_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_mapping(), sort_keys=True)
