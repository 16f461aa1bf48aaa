"""Dynamical-system sampling and trajectory simulation.

Systems follow x_{t+1} = f(x_t) + w_{t+1}, y_t = g(x_t) + v_t with x_0 = 0.
Linear systems use f(x) = A x, g(x) = C x; the planar quadrotor uses the
6-state discrete update in `quadrotor_step`. Noise is zero-mean Gaussian,
either i.i.d. or a moving-average (colored) process. All randomness flows
through explicit generators so trajectories are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg

__all__ = [
    "LinearSystem", "QuadrotorSystem", "NoiseModel", "Trajectory",
    "SwitchSpec", "StabilityProfile", "DivergenceError", "SamplingError",
    "sample_linear_system", "sample_quadrotor", "sample_random_inputs",
    "simulate", "colored_noise_sequence", "quadrotor_step",
    "quadrotor_jacobian", "contraction_profile",
    "systems_to_json", "systems_from_json",
]

DIVERGENCE_LIMIT = 1e9
RESAMPLE_ATTEMPTS = 100


class DivergenceError(RuntimeError):
    pass


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearSystem:
    a: np.ndarray           # n x n state matrix
    c: np.ndarray           # m x n output matrix
    sigma_w: float          # process-noise std (per coordinate)
    sigma_v: float          # output-noise std (per coordinate)
    seed: int = 0
    mode: str = "dense"

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class QuadrotorSystem:
    mass: float
    arm_length: float
    inertia: float
    c: np.ndarray           # 3 x 6 output matrix
    sigma_w: float
    sigma_v: float
    gravity: float = 10.0
    tau: float = 0.1
    seed: int = 0

    @property
    def n(self) -> int:
        return 6

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity / 2.0


@dataclass(frozen=True)
class NoiseModel:
    """i.i.d. Gaussian noise or a moving-average sum of i.i.d. innovations.

    `variance`, when set, overrides the per-coordinate innovation variance
    of both channels (the colored-noise experiments use 0.01); when None the
    system's own sigma_w / sigma_v apply.
    """
    kind: str = "iid"
    window: int = 1
    variance: float | None = None

    def __post_init__(self):
        if self.kind not in ("iid", "moving_average"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.kind == "iid" and self.window != 1:
            raise ValueError("iid noise has window 1")


IID_NOISE = NoiseModel()


@dataclass
class Trajectory:
    ys: np.ndarray                 # T x m outputs, y_0 first
    xs: np.ndarray | None = None   # T x n states
    us: np.ndarray | None = None   # T x input-dim inputs
    seed: int | None = None

    def __len__(self) -> int:
        return self.ys.shape[0]


@dataclass(frozen=True)
class SwitchSpec:
    """Replace the dynamics with `system` from time t_switch on (state carries
    over; outputs and transitions at t >= t_switch use the new system)."""
    t_switch: int
    system: LinearSystem


@dataclass
class StabilityProfile:
    rho: float
    norms: np.ndarray              # ||A^t|| for t = 0..t_max
    c_rho: float | None            # sup_t ||A^t|| / rho^t, None if unstable
    l_rho: float | None            # c_rho / (1 - rho)
    unstable: bool = False


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_linear_system(rng, n, m, target_rho=0.95, mode="dense",
                         sigma_w=0.1, sigma_v=0.1, seed=0) -> LinearSystem:
    """Draw a linear system from the benchmark distribution.

    dense: A entries uniform [-1, 1], rescaled so the spectral radius hits
    target_rho; upper_triangular: diagonal uniform [-0.95, 0.95], strict
    upper uniform [-1, 1], no rescaling (the slow-mixing hard class).
    """
    if mode not in ("dense", "upper_triangular"):
        raise ValueError(f"unknown mode {mode!r}")
    if not (0.0 < target_rho < 1.0):
        raise ValueError("target_rho must be in (0, 1)")
    for _ in range(RESAMPLE_ATTEMPTS):
        if mode == "dense":
            a = rng.uniform(-1.0, 1.0, size=(n, n))
            rho = linalg.spectral_radius(a)
            if rho < 1e-9:
                continue
            a *= target_rho / rho
        else:
            a = np.triu(rng.uniform(-1.0, 1.0, size=(n, n)), k=1)
            a[np.diag_indices(n)] = rng.uniform(-0.95, 0.95, size=n)
        c = rng.uniform(0.0, 1.0, size=(m, n))
        return LinearSystem(a=a, c=c, sigma_w=float(sigma_w),
                            sigma_v=float(sigma_v), seed=int(seed), mode=mode)
    raise SamplingError("could not sample a rescalable A (spectral radius ~ 0)")


def sample_quadrotor(rng, sigma_w=0.1, sigma_v=0.1, seed=0) -> QuadrotorSystem:
    """Planar quadrotor with (mass, arm length, inertia) ~ U[0.5, 2] and a
    3x6 output matrix with entries ~ U[0, 1]."""
    mass, arm, inertia = rng.uniform(0.5, 2.0, size=3)
    c = rng.uniform(0.0, 1.0, size=(3, 6))
    return QuadrotorSystem(mass=float(mass), arm_length=float(arm),
                           inertia=float(inertia), c=c,
                           sigma_w=float(sigma_w), sigma_v=float(sigma_v),
                           seed=int(seed))


def sample_random_inputs(rng, t_len, system: QuadrotorSystem,
                         spread=0.5) -> np.ndarray:
    """Rotor commands: hover thrust plus per-rotor uniform [-spread, spread]
    perturbations each step (keeps desk-scale trajectories bounded while
    exciting every mode)."""
    return system.hover_thrust + rng.uniform(-spread, spread, size=(t_len, 2))


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

def colored_noise_sequence(rng, t_len, variance, window=5, dim=1) -> np.ndarray:
    """Moving-average noise w_t = sum of the last `window` i.i.d. innovations.

    Innovations for t < 0 are drawn too, so w_0 already carries a full
    window: per-coordinate variance is window * variance at every t.
    """
    std = float(np.sqrt(variance))
    eta = std * rng.standard_normal((t_len + window - 1, dim))
    return _window_sum(eta, window)


def _window_sum(eta: np.ndarray, window: int) -> np.ndarray:
    if window == 1:
        return eta
    csum = np.cumsum(eta, axis=0)
    out = csum[window - 1:].copy()
    out[1:] -= csum[:-window]
    return out


def _noise_sequences(system, t_len, noise: NoiseModel, rng):
    """Standard draws scaled per channel; moving-average applied if asked.

    Draw order (eps_w then eps_v, shapes fixed by t_len and window) never
    depends on switching, keeping pre-switch prefixes bit-identical.
    """
    pad = noise.window - 1
    eps_w = rng.standard_normal((t_len + pad, system.n))
    eps_v = rng.standard_normal((t_len + pad, system.m))
    if noise.variance is not None:
        std_w = std_v = float(np.sqrt(noise.variance))
    else:
        std_w, std_v = system.sigma_w, system.sigma_v
    w = _window_sum(std_w * eps_w, noise.window)
    v = _window_sum(std_v * eps_v, noise.window)
    return w, v


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------

def quadrotor_step(state, u, noise, system: QuadrotorSystem) -> np.ndarray:
    """One step of the discrete planar-quadrotor update (state order:
    x, z, phi, xdot, zdot, phidot) with additive process noise."""
    x, z, phi, xd, zd, phid = state
    u0, u1 = u
    g, tau = system.gravity, system.tau
    c, s = np.cos(phi), np.sin(phi)
    nxt = np.array([
        x + (xd * c - zd * s) * tau,
        z + (xd * s + zd * c) * tau,
        phi + phid * tau,
        xd + (zd * phid - g * s) * tau,
        zd + (-xd * phid - g * c + (u0 + u1) / system.mass) * tau,
        (u0 - u1) * system.arm_length * tau / system.inertia,
    ])
    return nxt + noise


def quadrotor_jacobian(state, u, system: QuadrotorSystem) -> np.ndarray:
    """Analytic d(next state)/d(state) of `quadrotor_step` at (state, u)."""
    _, _, phi, xd, zd, phid = state
    g, tau = system.gravity, system.tau
    c, s = np.cos(phi), np.sin(phi)
    jac = np.zeros((6, 6))
    jac[0, 0] = 1.0
    jac[0, 2] = (-xd * s - zd * c) * tau
    jac[0, 3] = c * tau
    jac[0, 4] = -s * tau
    jac[1, 1] = 1.0
    jac[1, 2] = (xd * c - zd * s) * tau
    jac[1, 3] = s * tau
    jac[1, 4] = c * tau
    jac[2, 2] = 1.0
    jac[2, 5] = tau
    jac[3, 2] = -g * c * tau
    jac[3, 3] = 1.0
    jac[3, 4] = phid * tau
    jac[3, 5] = zd * tau
    jac[4, 2] = g * s * tau
    jac[4, 3] = -phid * tau
    jac[4, 4] = 1.0
    jac[4, 5] = -xd * tau
    # row 5 (phidot) depends on the inputs only
    return jac


def simulate(system, t_len, noise: NoiseModel = IID_NOISE, rng=None,
             switch: SwitchSpec | None = None, inputs=None,
             record_states=False, seed=None) -> Trajectory:
    """Roll a trajectory of t_len outputs y_0..y_{T-1} from x_0 = 0.

    Under `switch`, the dynamics (and output map) are replaced from
    t_switch on while the state carries over; the noise draws are shared so
    the pre-switch prefix is bit-identical to the unswitched run.
    """
    if t_len < 1:
        raise ValueError("t_len must be >= 1")
    if rng is None:
        raise ValueError("an explicit rng is required")
    if switch is not None and not (0 < switch.t_switch < t_len):
        raise ValueError("switch time must satisfy 0 < t_switch < t_len")
    w, v = _noise_sequences(system, t_len, noise, rng)

    is_quad = isinstance(system, QuadrotorSystem)
    if is_quad and inputs is None:
        raise ValueError("quadrotor simulation needs an input sequence")

    ys = np.empty((t_len, system.m))
    xs = np.empty((t_len, system.n)) if record_states else None
    x = np.zeros(system.n)
    active = system
    for t in range(t_len):
        if switch is not None and t == switch.t_switch:
            active = switch.system
        if xs is not None:
            xs[t] = x
        ys[t] = active.c @ x + v[t]
        if t + 1 < t_len:
            if is_quad:
                x = quadrotor_step(x, inputs[t], w[t + 1], active)
            else:
                nxt = active
                if switch is not None and t + 1 == switch.t_switch:
                    nxt = switch.system
                x = nxt.a @ x + w[t + 1]
            norm = float(np.linalg.norm(x))
            if not np.isfinite(norm) or norm > DIVERGENCE_LIMIT:
                raise DivergenceError(f"state norm {norm:.3e} at t={t + 1}")
    us = np.asarray(inputs)[:t_len] if inputs is not None else None
    return Trajectory(ys=ys, xs=xs, us=us, seed=seed)


def contraction_profile(system: LinearSystem, t_max=100) -> StabilityProfile:
    """Per-step matrix-power norms plus the contraction constants they imply:
    rho from the spectral-radius estimate, C_rho = max_t ||A^t|| / rho^t."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    norms = linalg.matrix_power_norms(system.a, t_max)
    rho = linalg.spectral_radius(system.a)
    if rho >= 1.0:
        return StabilityProfile(rho=rho, norms=norms, c_rho=None, l_rho=None,
                                unstable=True)
    if rho < 1e-12:
        c_rho = 1.0 if float(norms[1:].max(initial=0.0)) == 0.0 else float("inf")
    else:
        c_rho = float(np.max(norms / rho ** np.arange(t_max + 1)))
    return StabilityProfile(rho=rho, norms=norms, c_rho=c_rho,
                            l_rho=c_rho / (1.0 - rho))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _system_record(system) -> dict:
    if isinstance(system, LinearSystem):
        return {
            "kind": "linear",
            "n": system.n,
            "m": system.m,
            "A": [float(x) for x in system.a.ravel()],
            "C": [float(x) for x in system.c.ravel()],
            "sigma_w": system.sigma_w,
            "sigma_v": system.sigma_v,
            "seed": system.seed,
            "mode": system.mode,
        }
    return {
        "kind": "quadrotor",
        "mass": system.mass,
        "arm_length": system.arm_length,
        "inertia": system.inertia,
        "gravity": system.gravity,
        "tau": system.tau,
        "C": [float(x) for x in system.c.ravel()],
        "sigma_w": system.sigma_w,
        "sigma_v": system.sigma_v,
        "seed": system.seed,
    }


def _system_from_record(rec: dict):
    if rec["kind"] == "linear":
        n, m = rec["n"], rec["m"]
        return LinearSystem(
            a=np.array(rec["A"]).reshape(n, n),
            c=np.array(rec["C"]).reshape(m, n),
            sigma_w=rec["sigma_w"], sigma_v=rec["sigma_v"],
            seed=rec["seed"], mode=rec.get("mode", "dense"),
        )
    if rec["kind"] == "quadrotor":
        return QuadrotorSystem(
            mass=rec["mass"], arm_length=rec["arm_length"],
            inertia=rec["inertia"], c=np.array(rec["C"]).reshape(3, 6),
            sigma_w=rec["sigma_w"], sigma_v=rec["sigma_v"],
            gravity=rec["gravity"], tau=rec["tau"], seed=rec["seed"],
        )
    raise ValueError(f"unknown system kind {rec['kind']!r}")


def systems_to_json(systems) -> list[dict]:
    return [_system_record(s) for s in systems]


def systems_from_json(records) -> list:
    return [_system_from_record(r) for r in records]
