"""Small-matrix routines used by the simulators and filters.

Everything here is deterministic: fixed pivoting rule, fixed power-iteration
start vector, fixed iteration counts.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "SingularMatrixError", "solve_linear", "spectral_norm",
    "spectral_radius", "matrix_power_norms",
]

PIVOT_TOL = 1e-12


class SingularMatrixError(ValueError):
    pass


def _data(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def solve_linear(a, b) -> np.ndarray:
    """Solve a @ x = b by Gaussian elimination with partial pivoting.

    a is k-by-k, b is k-by-r (a single right-hand-side vector is accepted and
    returned as a vector). Pivot magnitude below 1e-12 raises.
    """
    a = _data(a)
    b = _data(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got {a.shape}")
    vector_rhs = b.ndim == 1
    if vector_rhs:
        b = b[:, None]
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs rows {b.shape[0]} != matrix size {a.shape[0]}")
    k = a.shape[0]
    aug = np.hstack([a.copy(), b.copy()])
    for col in range(k):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) < PIVOT_TOL:
            raise SingularMatrixError(f"pivot {aug[piv, col]:.3e} below {PIVOT_TOL}")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col + 1:] -= np.outer(aug[col + 1:, col] / aug[col, col], aug[col])
    x = np.zeros((k, b.shape[1]))
    for row in range(k - 1, -1, -1):
        x[row] = (aug[row, k:] - aug[row, row + 1: k] @ x[row + 1:]) / aug[row, row]
    return x[:, 0] if vector_rhs else x


def spectral_norm(a, iters: int = 100) -> float:
    """Largest singular value via power iteration on A^T A."""
    a = _data(a)
    k = a.shape[1]
    v = np.full(k, 1.0 / math.sqrt(k))
    ata = a.T @ a
    for _ in range(iters):
        w = ata @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(math.sqrt(v @ (ata @ v)))


def spectral_radius(a, squarings: int = 16, norm_iters: int = 100) -> float:
    """Spectral radius estimate via the repeated-squaring Gelfand sequence
    ||A^(2^s)||^(1/2^s), renormalizing each squaring (log-norm bookkeeping)
    so large powers never overflow. Returns 0 for nilpotent input.
    """
    a = _data(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"square matrix required, got {a.shape}")
    cur = a
    log_scale = 0.0
    for _ in range(squarings):
        n = spectral_norm(cur, norm_iters)
        if n == 0.0:
            return 0.0
        cur = cur / n
        log_scale = 2.0 * (log_scale + math.log(n))
        cur = cur @ cur
    n = spectral_norm(cur, norm_iters)
    if n == 0.0:
        return 0.0
    return float(math.exp((log_scale + math.log(n)) / 2.0 ** squarings))


def matrix_power_norms(a, t_max: int) -> np.ndarray:
    """||A^t||_2 for t = 0..t_max (||A^0|| = 1 by convention)."""
    a = _data(a)
    norms = np.empty(t_max + 1)
    norms[0] = 1.0
    power = np.eye(a.shape[0])
    for t in range(1, t_max + 1):
        power = power @ a
        norms[t] = spectral_norm(power)
    return norms
