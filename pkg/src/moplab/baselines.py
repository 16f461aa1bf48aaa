"""Model-aware and classical model-free predictors.

Every predictor exposes the same interface: `step(y_t, u_t=None)` consumes
the newest output and returns the prediction for y_{t+1}, so the evaluation
harness treats the transformer and the baselines identically. Fresh
instances are created per trajectory; state is never shared.
"""

from __future__ import annotations

import numpy as np

from .linalg import SingularMatrixError, solve_linear
from .systems import LinearSystem, QuadrotorSystem, quadrotor_jacobian, quadrotor_step

__all__ = [
    "GaussianFilter", "KalmanFilter", "QuadrotorEKF",
    "OnlineARPredictor", "ZeroPredictor",
]

PSD_DIAG_TOL = -1e-10
PSD_JITTER = 1e-9


class GaussianFilter:
    """Time-varying Kalman recursion with pluggable mean propagation.

    `propagate(x, u)` advances the mean and `jacobian(x, u)` supplies the
    linearization used for the covariance; passing the exact linear maps
    makes this the standard Kalman filter, passing a nonlinear model plus
    its analytic Jacobian makes it the EKF. Initialized at x_hat = 0, P = 0
    (the initial state is known to be zero). The covariance is
    re-symmetrized every step; if its diagonal drifts below -1e-10 a 1e-9
    jitter is added to restore PSD.
    """

    def __init__(self, propagate, jacobian, c, sigma_w, sigma_v, n, p0=0.0):
        self.propagate = propagate
        self.jacobian = jacobian
        self.c = np.asarray(c, dtype=np.float64)
        self.q = float(sigma_w) ** 2
        self.r = float(sigma_v) ** 2
        self.n = n
        self.m = self.c.shape[0]
        self.x_hat = np.zeros(n)
        self.p = np.eye(n) * float(p0)
        self.innovation = None

    def step(self, y, u=None) -> np.ndarray:
        c, p = self.c, self.p
        self.innovation = y - c @ self.x_hat
        cp = c @ p
        s = cp @ c.T + self.r * np.eye(self.m)
        try:
            k = solve_linear(s, cp).T            # K = P C^T S^-1
        except SingularMatrixError:
            if np.abs(cp).max() <= 1e-12:
                # exact state knowledge with a noise-free output map: the
                # gain's limit is zero (cannot occur for sigma_v > 0)
                k = np.zeros((self.n, self.m))
            else:
                raise
        x_post = self.x_hat + k @ self.innovation
        p_post = (np.eye(self.n) - k @ c) @ p
        f = self.jacobian(x_post, u)
        self.x_hat = self.propagate(x_post, u)
        p_next = f @ p_post @ f.T + self.q * np.eye(self.n)
        p_next = 0.5 * (p_next + p_next.T)
        if p_next.diagonal().min() < PSD_DIAG_TOL:
            p_next = p_next + PSD_JITTER * np.eye(self.n)
        self.p = p_next
        return c @ self.x_hat

    @property
    def predicted_output(self) -> np.ndarray:
        return self.c @ self.x_hat


class KalmanFilter(GaussianFilter):
    """Optimal output predictor for a known linear-Gaussian system.

    Noise stds may be overridden, e.g. to hand the filter the stationary
    marginal variance of a colored-noise process it (wrongly) assumes white.
    """

    def __init__(self, system: LinearSystem, sigma_w=None, sigma_v=None, p0=0.0):
        a = np.asarray(system.a, dtype=np.float64)
        super().__init__(
            propagate=lambda x, u: a @ x,
            jacobian=lambda x, u: a,
            c=system.c,
            sigma_w=system.sigma_w if sigma_w is None else sigma_w,
            sigma_v=system.sigma_v if sigma_v is None else sigma_v,
            n=system.n,
            p0=p0,
        )
        self.a = a


class QuadrotorEKF(GaussianFilter):
    """EKF for the planar quadrotor: nonlinear mean propagation, analytic
    Jacobian linearization, linear output map."""

    def __init__(self, system: QuadrotorSystem, p0=0.0):
        zero_w = np.zeros(6)
        super().__init__(
            propagate=lambda x, u: quadrotor_step(x, u, zero_w, system),
            jacobian=lambda x, u: quadrotor_jacobian(x, u, system),
            c=system.c,
            sigma_w=system.sigma_w,
            sigma_v=system.sigma_v,
            n=6,
            p0=p0,
        )


class OnlineARPredictor:
    """Two-lag linear autoregressor y_{t+1} = a1 y_t + a2 y_{t-1} refit by
    (ridge-stabilized) least squares after every observation.

    Before three observations exist the prediction falls back to the last
    output. The tiny ridge keeps the normal equations solvable in the
    ill-posed early steps without measurably biasing the comparison.
    """

    LAGS = 2

    def __init__(self, m, ridge=1e-6):
        self.m = m
        self.ridge = float(ridge)
        self.gram = np.zeros((2 * m, 2 * m))
        self.cross = np.zeros((2 * m, m))
        self.prev = []                    # last two observations, newest first
        self.samples = 0

    @property
    def coefficients(self) -> np.ndarray:
        """Stacked (a1, a2) as a 2m x m matrix (zeros until data arrives)."""
        if self.samples == 0:
            return np.zeros((2 * self.m, self.m))
        reg = self.gram + self.ridge * np.eye(2 * self.m)
        return solve_linear(reg, self.cross)

    def step(self, y, u=None) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if len(self.prev) == 2:
            z = np.concatenate(self.prev)        # [y_{t-1}; y_{t-2}]
            self.gram += np.outer(z, z)
            self.cross += np.outer(z, y)
            self.samples += 1
        if self.samples == 0:
            pred = y.copy()
        else:
            z_now = np.concatenate([y, self.prev[0]])
            pred = self.coefficients.T @ z_now
        self.prev = [y] + self.prev[:1]
        return pred


class ZeroPredictor:
    """Predicts the prior mean (zero) forever; the no-information floor."""

    def __init__(self, m):
        self.m = m

    def step(self, y, u=None) -> np.ndarray:
        return np.zeros(self.m)
