"""System distributions the experiments draw from.

A Distribution bundles everything needed to sample a system and roll a
trajectory: the system family, noise behavior, and how prompts are
tokenized for the model (the quadrotor concatenates the applied rotor
commands onto each output token). Seed namespaces: systems and
trajectories derive their streams from (base_seed, role, index), so train
and test populations never share draws.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .seeding import derive_seed
from .systems import (
    IID_NOISE, NoiseModel, Trajectory,
    sample_linear_system, sample_quadrotor, sample_random_inputs, simulate,
    DivergenceError,
)

__all__ = ["Distribution", "DISTRIBUTIONS", "get_distribution"]

QUAD_RESAMPLE_LIMIT = 50

logger = logging.getLogger("moplab.distributions")


@dataclass(frozen=True)
class Distribution:
    name: str
    kind: str                    # "linear" | "quadrotor"
    n: int
    m: int
    sigma_w2: float              # per-coordinate noise variances
    sigma_v2: float
    mode: str = "dense"          # linear sampling mode
    target_rho: float = 0.95
    noise: NoiseModel = IID_NOISE
    has_inputs: bool = False
    input_scale: float = 1.0     # model conditioning scale suggested per preset

    @property
    def token_dim(self) -> int:
        return self.m + (2 if self.has_inputs else 0)

    @property
    def output_dim(self) -> int:
        return self.m

    def with_noise_var(self, sigma2: float) -> "Distribution":
        return replace(self, sigma_w2=float(sigma2), sigma_v2=float(sigma2))

    def filter_noise_stds(self) -> tuple[float, float]:
        """Noise stds handed to the model-aware filter. For moving-average
        noise the filter (wrongly, and knowingly: it assumes white noise)
        receives the stationary marginal std sqrt(window * variance)."""
        if self.noise.kind == "moving_average":
            var = self.noise.variance
            s = float(np.sqrt(self.noise.window * (var if var is not None else self.sigma_w2)))
            return s, s
        return float(np.sqrt(self.sigma_w2)), float(np.sqrt(self.sigma_v2))

    def sample_system(self, base_seed: int, role: str, index: int):
        """Draw system `index` of the given role ("train" / "test" / ...)."""
        seed = derive_seed(base_seed, self.name, role, "sys", index)
        rng = np.random.default_rng(seed)
        if self.kind == "linear":
            return sample_linear_system(
                rng, self.n, self.m, target_rho=self.target_rho, mode=self.mode,
                sigma_w=float(np.sqrt(self.sigma_w2)),
                sigma_v=float(np.sqrt(self.sigma_v2)), seed=seed)
        return sample_quadrotor(
            rng, sigma_w=float(np.sqrt(self.sigma_w2)),
            sigma_v=float(np.sqrt(self.sigma_v2)), seed=seed)

    def make_trajectory(self, system, t_len: int, base_seed: int, role: str,
                        index: int, epoch: int | None = None,
                        switch=None) -> Trajectory:
        """Roll one trajectory; quadrotor systems get fresh random rotor
        commands and divergent rollouts are re-drawn (bounded retries)."""
        parts = [base_seed, self.name, role, "traj", index]
        if epoch is not None:
            parts += ["epoch", epoch]
        seed = derive_seed(*parts)
        if self.kind == "linear":
            return simulate(system, t_len, noise=self.noise,
                            rng=np.random.default_rng(seed), switch=switch,
                            seed=seed)
        for attempt in range(QUAD_RESAMPLE_LIMIT):
            sub = np.random.default_rng(derive_seed(seed, "try", attempt))
            inputs = sample_random_inputs(sub, t_len, system)
            try:
                return simulate(system, t_len, noise=self.noise, rng=sub,
                                inputs=inputs, seed=seed)
            except DivergenceError:
                logger.warning("quadrotor rollout diverged (system seed %d, "
                               "attempt %d); resampling", system.seed, attempt)
                continue
        raise DivergenceError(
            f"quadrotor rollout diverged {QUAD_RESAMPLE_LIMIT} times "
            f"(system seed {system.seed})")


DISTRIBUTIONS = {
    "linear-dense": Distribution(
        name="linear-dense", kind="linear", n=10, m=5,
        sigma_w2=0.01, sigma_v2=0.01),
    "linear-colored": Distribution(
        name="linear-colored", kind="linear", n=10, m=5,
        sigma_w2=0.01, sigma_v2=0.01,
        noise=NoiseModel(kind="moving_average", window=5, variance=0.01)),
    "linear-triangular": Distribution(
        name="linear-triangular", kind="linear", n=10, m=5,
        sigma_w2=0.01, sigma_v2=0.01, mode="upper_triangular",
        input_scale=0.25),
    "quadrotor": Distribution(
        name="quadrotor", kind="quadrotor", n=6, m=3,
        sigma_w2=0.01, sigma_v2=0.01, has_inputs=True, input_scale=0.1),
}


def get_distribution(name: str) -> Distribution:
    try:
        return DISTRIBUTIONS[name]
    except KeyError:
        raise KeyError(
            f"unknown distribution {name!r}; valid: {sorted(DISTRIBUTIONS)}"
        ) from None
