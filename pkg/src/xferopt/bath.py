"""Dephasing-bath models: correlation kernel, coupling spectrum, noise sampling.

The bath couples to the source qubit through its ``sigma_z`` and is described
by an exponentially decaying correlation kernel

    Phi(t) = corr_norm * (gamma / t_c) * exp(-|t| / t_c)

with memory time ``t_c``; ``t_c = 0`` denotes the memoryless (Markovian)
limit, handled analytically by the fidelity module.  The kernel area is
``2 * corr_norm * gamma``, so the default ``corr_norm = 0.5`` makes the
memoryless limit a white-noise kernel of weight ``gamma``; with that choice
the linear-ramp transfer has infidelity ``gamma * pi^2 / (8 E)``.  Setting
``corr_norm = 1`` recovers the bare ``(gamma/t_c) exp(-|t|/t_c)`` kernel.

Fourier convention: the coupling spectrum is
``G(omega) = (1/2pi) integral Phi(t) e^{i omega t} dt``, paired with
finite-time transforms ``integral x(tau) e^{-i omega tau} d tau`` in the
fidelity module so that Parseval closes without stray ``2 pi`` factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

DEFAULT_CORR_NORM = 0.5


@dataclass(frozen=True)
class BathModel:
    """Dephasing noise with rate ``gamma`` and correlation time ``t_c``."""

    gamma: float
    t_c: float
    corr_norm: float = DEFAULT_CORR_NORM

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 0.0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if not np.isfinite(self.t_c) or self.t_c < 0.0:
            raise ValueError(f"t_c must be nonnegative, got {self.t_c}")
        if not np.isfinite(self.corr_norm) or self.corr_norm <= 0.0:
            raise ValueError(f"corr_norm must be positive, got {self.corr_norm}")

    @property
    def is_markovian(self) -> bool:
        return self.t_c == 0.0


def correlation(b: BathModel, dt):
    """Correlation kernel ``Phi(dt)``; requires ``t_c > 0``.

    The memoryless limit has no finite kernel value; callers must branch to
    the closed-form Markovian path instead.
    """
    if b.is_markovian:
        raise ValueError("correlation kernel undefined at t_c = 0; use the Markovian closed form")
    dt = np.asarray(dt, dtype=float)
    out = (b.corr_norm * b.gamma / b.t_c) * np.exp(-np.abs(dt) / b.t_c)
    return float(out) if out.ndim == 0 else out


def spectrum(b: BathModel, omega):
    """Coupling spectrum ``G(omega)``, the Fourier transform of the kernel.

    ``G(omega) = (corr_norm * gamma / pi) / (1 + omega^2 t_c^2)``; for
    ``t_c = 0`` this is flat at ``corr_norm * gamma / pi``.
    """
    omega = np.asarray(omega, dtype=float)
    flat = b.corr_norm * b.gamma / np.pi
    out = flat / (1.0 + (omega * b.t_c) ** 2)
    return float(out) if out.ndim == 0 else out


def _check_uniform_grid(grid: np.ndarray) -> float:
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least 2 points")
    dt = np.diff(grid)
    if np.any(dt <= 0.0) or np.max(np.abs(dt - dt[0])) > 1e-9 * abs(grid[-1] - grid[0]):
        raise ValueError("grid must be uniform and increasing")
    return float(dt[0])


def sample_noise_trajectory(b: BathModel, grid, seed: int, trajectory_index: int = 0) -> np.ndarray:
    """Stationary Ornstein-Uhlenbeck noise values on a uniform time grid.

    Uses the exact discrete recursion
    ``b_{k+1} = rho b_k + sigma sqrt(1 - rho^2) xi_k`` with
    ``rho = exp(-dt/t_c)`` and stationary variance
    ``sigma^2 = corr_norm * gamma / t_c``, so the ensemble statistics match
    :func:`correlation` exactly at the grid lags.  Normals come from a
    counter-based Philox generator keyed by ``(seed, trajectory_index)``;
    the result is bitwise reproducible regardless of evaluation order.

    Requires ``t_c > 0`` and grid spacing ``dt <= t_c / 10``.
    """
    if b.is_markovian:
        raise ValueError("trajectory sampling undefined at t_c = 0; sample white phase increments instead")
    grid = np.asarray(grid, dtype=float)
    dt = _check_uniform_grid(grid)
    if dt > b.t_c / 10.0:
        raise ValueError(f"grid too coarse: dt = {dt} exceeds t_c/10 = {b.t_c / 10.0}")
    if seed < 0 or trajectory_index < 0:
        raise ValueError("seed and trajectory_index must be nonnegative")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, trajectory_index], dtype=np.uint64)))
    xi = rng.standard_normal(grid.size)
    rho = np.exp(-dt / b.t_c)
    sigma = np.sqrt(b.corr_norm * b.gamma / b.t_c)
    b0 = sigma * xi[0]
    if grid.size == 1:
        return np.array([b0])
    innov = sigma * np.sqrt(1.0 - rho * rho) * xi[1:]
    tail, _ = lfilter([1.0], [1.0, -rho], innov, zi=np.array([rho * b0]))
    return np.concatenate(([b0], tail))
