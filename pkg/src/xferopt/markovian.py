"""Analytic optimal profile for the memoryless (Markovian) bath.

At long allowed times the variational optimality condition for the
memoryless infidelity reduces to a first-order profile equation in a
dimensionless time ``x``:

    dphi_M/dx = sqrt( sin^2(2 phi_M) / 2 + (2/3) cos^4(phi_M) ),   phi_M(0) = 0.

The profile rises from 0 and approaches ``pi/2`` asymptotically; near the
endpoint the right-hand side linearises to ``sqrt(2) * (pi/2 - phi)``, so the
approach is exponential and the integrator hands over to that closed form
once ``pi/2 - phi < 1e-6`` to avoid step-size collapse.

The profile energy ``e_M = integral |phi_M'(x)|^2 dx`` is evaluated in the
phase variable, ``e_M = integral_0^{pi/2} phi_M'(phi) dphi``, which is a
proper finite integral (the time-domain integral runs to infinity).  The
optimal pulse for budget ``E`` is the time-rescaled profile
``phi(t) = phi_M((E / e_M) t)`` with infidelity ``gamma e_M^2 / E``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .pulse import HALF_PI, EnergyBudget, Pulse, _as_budget

TAIL_SWITCH_EPS = 1e-6
TAIL_DECAY_RATE = np.sqrt(2.0)

_X_LIMIT = 60.0


def profile_slope(phi):
    """Right-hand side of the profile equation as a function of phi."""
    phi = np.asarray(phi, dtype=float)
    out = np.sqrt(0.5 * np.sin(2.0 * phi) ** 2 + (2.0 / 3.0) * np.cos(phi) ** 4)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MarkovianProfile:
    """Solved universal profile ``phi_M(x)`` with its dimensionless energy."""

    x_grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    e_m: float
    x_switch: float = field(repr=False)
    eps_switch: float = field(repr=False)

    def phase_at(self, x):
        """Profile phase at dimensionless time(s) ``x >= 0``.

        Beyond the integrated range the exponential tail
        ``pi/2 - eps * exp(-sqrt(2) (x - x_switch))`` is used.
        """
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0):
            raise ValueError("x must be nonnegative")
        interp = np.interp(x, self.x_grid, self.phi)
        tail = HALF_PI - self.eps_switch * np.exp(-TAIL_DECAY_RATE * (x - self.x_switch))
        out = np.where(x <= self.x_switch, interp, np.minimum(tail, HALF_PI))
        return float(out) if out.ndim == 0 else out

    def x_end(self, eps: float = 1e-8) -> float:
        """Dimensionless time at which ``pi/2 - phi_M`` has decayed to ``eps``."""
        return self.x_switch + np.log(self.eps_switch / eps) / TAIL_DECAY_RATE


@lru_cache(maxsize=8)
def solve_markovian_profile(tol: float = 1e-10) -> MarkovianProfile:
    """Integrate the profile equation and evaluate its energy constant.

    Adaptive embedded Runge-Kutta with relative tolerance ``tol`` (allowed
    range ``[1e-12, 1e-4]``); the returned grid extends through the analytic
    tail down to ``pi/2 - phi = 1e-10``.
    """
    if not (1e-12 <= tol <= 1e-4):
        raise ValueError(f"tolerance out of range [1e-12, 1e-4]: {tol}")

    def reach_switch(x, y):
        return (HALF_PI - y[0]) - TAIL_SWITCH_EPS

    reach_switch.terminal = True
    reach_switch.direction = -1

    sol = solve_ivp(
        lambda x, y: [profile_slope(y[0])],
        (0.0, _X_LIMIT),
        [0.0],
        rtol=tol,
        atol=tol * 1e-3,
        dense_output=True,
        events=reach_switch,
        max_step=0.25,
    )
    if len(sol.t_events[0]) == 0:
        raise RuntimeError("profile integration did not reach the asymptotic switch point")
    x_switch = float(sol.t_events[0][0])
    eps_switch = HALF_PI - float(sol.sol(x_switch)[0])

    x_main = np.linspace(0.0, x_switch, 4001)
    phi_main = sol.sol(x_main)[0]
    x_end = x_switch + np.log(eps_switch / 1e-10) / TAIL_DECAY_RATE
    x_tail = np.linspace(x_switch, x_end, 257)[1:]
    phi_tail = HALF_PI - eps_switch * np.exp(-TAIL_DECAY_RATE * (x_tail - x_switch))
    x_grid = np.concatenate((x_main, x_tail))
    phi = np.minimum(np.concatenate((phi_main, phi_tail)), HALF_PI)
    phi[0] = 0.0

    xg, wg = leggauss(256)
    nodes = 0.5 * HALF_PI * (xg + 1.0)
    e_m = float(0.5 * HALF_PI * np.sum(wg * profile_slope(nodes)))
    if not (1.0 <= e_m <= 1.1):
        raise RuntimeError(f"profile energy {e_m} outside the expected range [1.0, 1.1]")

    for arr in (x_grid, phi):
        arr.setflags(write=False)
    dphi = profile_slope(phi)
    dphi.setflags(write=False)
    return MarkovianProfile(x_grid=x_grid, phi=phi, dphi=dphi, e_m=e_m, x_switch=x_switch, eps_switch=eps_switch)


def optimal_markovian_pulse(budget, n: int = 512, profile: MarkovianProfile | None = None) -> Pulse:
    """Energy-rescaled optimal profile ``phi(t) = phi_M((E / e_M) t)``.

    The pulse is truncated where ``pi/2 - phi < 1e-8`` and capped to exactly
    ``pi/2`` at the final sample; its sampled energy matches the budget to
    within 0.1 percent.
    """
    budget = _as_budget(budget)
    if n < 2:
        raise ValueError(f"grid size must be at least 2 segments, got {n}")
    if profile is None:
        profile = solve_markovian_profile()
    rate = budget.energy / profile.e_m
    t_f = profile.x_end(1e-8) / rate
    t = np.linspace(0.0, t_f, n + 1)
    phases = profile.phase_at(rate * t)
    phases = np.asarray(phases, dtype=float)
    phases[0] = 0.0
    phases[-1] = HALF_PI
    return Pulse(t_f=t_f, phases=phases)


def markovian_optimum_infidelity(gamma: float, energy: float, profile: MarkovianProfile | None = None) -> float:
    """Closed-form optimal memoryless infidelity ``gamma * e_M^2 / E``."""
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    budget = _as_budget(energy)
    if profile is None:
        profile = solve_markovian_profile()
    return gamma * profile.e_m ** 2 / budget.energy
