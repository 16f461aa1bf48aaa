"""Experiment presets: one per headline figure, each fully determining the
system distribution, model size, training budget, and evaluation plan at
desk scale (paper-scale budgets stay reachable through TrainConfig)."""

from __future__ import annotations

from dataclasses import dataclass

from .distributions import get_distribution
from .model import ModelConfig
from .training import TrainConfig

__all__ = ["ExperimentPreset", "EXPERIMENTS", "get_experiment", "desk_model_config"]


def desk_model_config(dist_name: str, context: int = 128) -> ModelConfig:
    """Desk-scale model sized for the given distribution's token layout."""
    dist = get_distribution(dist_name)
    return ModelConfig(layers=4, heads=4, embed_dim=64, context=context,
                       token_dim=dist.token_dim, output_dim=dist.output_dim,
                       precision="f32", input_scale=dist.input_scale)


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    train: TrainConfig
    eval_n: int = 100
    eval_horizon: int = 50
    baselines: tuple = ("kf", "ar-ols")
    switch_at: int | None = None
    shift_sigma2: tuple | None = None
    scaling_grid: tuple | None = None
    trains_model: bool = True

    @property
    def distribution(self) -> str:
        return self.train.preset


def _linear_train(dist_name, **kw) -> TrainConfig:
    defaults = dict(preset=dist_name, m_systems=2000, train_len=50, steps=5000,
                    batch_size=64, seed=0, model=desk_model_config(dist_name))
    defaults.update(kw)
    return TrainConfig(**defaults)


EXPERIMENTS = {
    "linear-iid": ExperimentPreset(
        name="linear-iid",
        train=_linear_train("linear-dense"),
        baselines=("kf", "ar-ols"),
    ),
    "linear-colored": ExperimentPreset(
        name="linear-colored",
        train=_linear_train("linear-colored"),
        baselines=("kf", "ar-ols"),
    ),
    "linear-switching": ExperimentPreset(
        name="linear-switching",
        # positions up to the 100-step evaluation horizon must be trained,
        # so this preset meta-trains on length-100 prompts
        train=_linear_train("linear-dense", train_len=100, steps=4000),
        eval_horizon=100,
        switch_at=50,
        baselines=("kf",),
    ),
    "quadrotor": ExperimentPreset(
        name="quadrotor",
        train=_linear_train("quadrotor", steps=5000),
        baselines=("ekf",),
    ),
    "hard-triangular": ExperimentPreset(
        name="hard-triangular",
        train=_linear_train("linear-triangular"),
        baselines=("kf",),
    ),
    "dist-shift": ExperimentPreset(
        name="dist-shift",
        train=_linear_train("linear-dense"),   # reuses the linear-iid model
        baselines=("kf",),
        shift_sigma2=(0.01, 0.04, 0.09),
        trains_model=False,
    ),
    "risk-scaling": ExperimentPreset(
        name="risk-scaling",
        train=_linear_train("linear-dense", steps=1500),
        baselines=("kf",),
        scaling_grid=((500, 50), (1000, 50), (2000, 50), (4000, 50)),
        trains_model=False,
    ),
}


def get_experiment(name: str) -> ExperimentPreset:
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise KeyError(
            f"unknown experiment {name!r}; valid: {sorted(EXPERIMENTS)}"
        ) from None
