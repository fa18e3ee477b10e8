"""Shared fixtures.

The working units put t_min = 1 by choosing E = pi^2/4; gamma = 0.02 keeps
every second-order infidelity deep in the weak-coupling regime.
"""

import numpy as np
import pytest

import xferopt as xo

ENERGY = np.pi ** 2 / 4.0
GAMMA = 0.02


@pytest.fixture(scope="session")
def budget():
    return xo.EnergyBudget(ENERGY)


@pytest.fixture(scope="session")
def profile():
    return xo.solve_markovian_profile()


@pytest.fixture(scope="session")
def markovian_opt_12(budget):
    """Memoryless-bath optimum at t_f = 12 t_min on the default grid."""
    prob = xo.OptimizationProblem(
        bath=xo.BathModel(gamma=GAMMA, t_c=0.0), budget=budget, t_f=12.0, grid_n=512
    )
    return xo.optimize_rwa(prob)


@pytest.fixture(scope="session")
def sweep_records(budget):
    """Final-time sweep t_f/t_min in 1..12 for t_c/t_min in {0, 1, 10}."""
    t_f_list = [float(k) for k in range(1, 13)]
    out = {}
    for t_c in (0.0, 1.0, 10.0):
        bath = xo.BathModel(gamma=GAMMA, t_c=t_c)
        out[t_c] = xo.sweep_final_time(bath, budget, t_f_list, {"grid_n": 320})
    return out


@pytest.fixture(scope="session")
def leakage_opt_pair(budget):
    """Leakage-penalised optimum and its leakage-free counterpart.

    omega0 t_min = pi, t_f = 10 t_min, memory time 10 t_min.
    """
    bath = xo.BathModel(gamma=GAMMA, t_c=10.0)
    base = dict(bath=bath, budget=budget, t_f=10.0, grid_n=512)
    rwa = xo.optimize_rwa(xo.OptimizationProblem(**base))
    leak = xo.optimize_with_leakage(
        xo.OptimizationProblem(omega0=np.pi, leak_weight=0.5, **base)
    )
    return rwa, leak


def random_pulse(rng, n, t_f, complete=False, scale=0.1):
    """Smooth-ish random phase profile; optionally transfer-complete."""
    steps = rng.normal(0.0, scale, n)
    phases = np.concatenate([[0.0], np.cumsum(steps)])
    if complete:
        phases *= (np.pi / 2.0) / phases[-1] if phases[-1] != 0 else 1.0
        phases[-1] = np.pi / 2.0
    return xo.make_pulse(phases, t_f)
