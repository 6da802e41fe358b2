"""Experiment configuration: presets per experiment and YAML loading.

A config file is a flat YAML mapping whose keys are the fields of
:class:`ExperimentConfig`. Only ``experiment`` is required; every other key
defaults to the preset for that experiment::

    experiment: l96
    F: 8.0
    method: nlbu
    subsampling: true
    clustering: false
    inflation: 1.05
    seed: 7
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

import yaml

OUTPUT_ENV = "NLBAYES_OUTPUT_DIR"
EXPERIMENTS = ("l63", "l96", "darcy")
METHODS = ("eakf", "nlbu")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "l63"
    # model parameters
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    F: float = 8.0
    dim: int = 3
    grid_n: int = 64
    # time stepping
    dt: float = 0.01
    obs_interval: float = 0.4
    n_cycles: int = 500
    spinup_steps: int = 1000
    # ensemble and observations
    ensemble_size: int = 500
    init_value: float = 0.0
    init_variance: float = 0.1
    obs_variance: float = 1e-2
    observed: tuple = (1,)
    # update rule
    method: str = "eakf"
    subsampling: bool = True
    clustering: bool = False
    radius: float = 1.0
    m_min: int | None = None
    oversample_factor: int = 10
    inflation: float = 1.0
    inflation_sweep: tuple = ()
    localization_half_width: float | None = None
    # inversion
    truth: tuple = (1.5, 0.5)
    max_iters: int = 30
    rel_tol: float = 1e-6
    methods: tuple = ("eakf", "nlbu+ss", "nlbu")
    # bookkeeping
    seed: int = 0
    n_jobs: int = 1
    output_dir: str = field(default_factory=lambda: os.environ.get(OUTPUT_ENV, "results"))

    def __post_init__(self):
        for key in ("observed", "inflation_sweep", "truth", "methods"):
            object.__setattr__(self, key, tuple(getattr(self, key)))
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        for key in ("n_cycles", "ensemble_size", "dim", "oversample_factor"):
            if getattr(self, key) < 1:
                raise ValueError(f"{key} must be positive")
        if self.experiment != "darcy":
            ratio = self.obs_interval / self.dt
            if self.dt <= 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ValueError("obs_interval must be a positive integer multiple of dt")

    @property
    def steps_per_cycle(self) -> int:
        return int(round(self.obs_interval / self.dt))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def preset(experiment: str, **overrides) -> ExperimentConfig:
    """Default protocol for ``l63``, ``l96`` or ``darcy`` with field overrides."""
    if experiment == "l63":
        base = dict(dim=3, dt=0.01, obs_interval=0.4, ensemble_size=500, init_value=0.0,
                    init_variance=0.1, obs_variance=1e-2, observed=(1,))
    elif experiment == "l96":
        dim = overrides.get("dim", 40)
        # x_2, x_4, ..., x_40 in one-based numbering
        base = dict(dim=dim, F=8.0, dt=0.1, obs_interval=0.5, ensemble_size=1000,
                    init_value=0.0, init_variance=0.1, obs_variance=1e-2,
                    observed=tuple(range(1, dim, 2)), m_min=40, spinup_steps=0)
    elif experiment == "darcy":
        base = dict(dim=2, grid_n=64, ensemble_size=1000, init_value=0.5, init_variance=5.0,
                    obs_variance=(3e-3) ** 2, observed=(), truth=(1.5, 0.5), max_iters=30,
                    rel_tol=1e-6)
    else:
        raise ValueError(f"unknown experiment {experiment!r}")
    base.update(overrides)
    return ExperimentConfig(experiment=experiment, **base)


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a flat YAML config; ``overrides`` (e.g. from CLI flags) win over file values."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping of config keys")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    experiment = data.pop("experiment", None)
    if experiment is None:
        raise ValueError(f"{path}: missing required key 'experiment'")
    return preset(experiment, **data)
