"""Shared test fixtures: small exactly-solvable reversible chains."""
from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest

from trapclock.chains import TableModel


@pytest.fixture(scope="session")
def five_state():
    """Reversible 5-cycle with all-distinct weights, exactly solvable by hand.

    Conductances c(x,y) on the cycle 0-1-2-3-4-0 and weights tau give rates
    c(x,y)/tau(x); detailed balance holds by construction.  Every discrete
    step weight w(x) = 1/sum_y rates(x,y) is distinct, so estimator oracles
    exercise the full site dependence.
    """
    tau = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    cond = {(0, 1): 1.0, (1, 2): 2.0, (2, 3): 1.5, (3, 4): 0.5, (4, 0): 1.0}
    rates = np.zeros((5, 5))
    for (a, b), c in cond.items():
        rates[a, b] = c / tau[a]
        rates[b, a] = c / tau[b]
    out = rates.sum(axis=1)
    transition = rates / out[:, None]
    return SimpleNamespace(
        model=TableModel(rates, tau),
        rates=rates,
        tau=tau,
        transition=transition,
        step_weight=1.0 / out,
    )
