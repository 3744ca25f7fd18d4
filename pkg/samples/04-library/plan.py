"""
Compare decoding modes over a range of penalty budgets.

Runs every mode with full CQI (|a21|^2 = 0.01) and with partial CQI
(E|a21|^2 = 0.01) and prints one line per budget.
"""

import logging

import numpy as np

from ucr import FULL_CQI_DECIDERS, PARTIAL_CQI_DECIDERS, RayleighCqi, ScenarioConfig
from ucr.core import db_to_linear

logging.basicConfig(level=logging.INFO)
LOG = logging.getLogger("plan")

P_16DB = db_to_linear(16.0)

full = ScenarioConfig(
    gain2_11=1.0,
    gain2_12=0.01,
    gain2_22=1.0,
    gain2_21=0.01,
    p1=P_16DB,
    p2_local_max=P_16DB,
)
partial = full.replace(gain2_21=None, mean_gain2=0.01)
rayleigh = RayleighCqi(partial.mean_gain2)

for rho in np.geomspace(1e-3, 0.2, 8):
    cells = []
    for mode, decide in FULL_CQI_DECIDERS.items():
        cells.append(f"{mode}={decide(full.replace(rho=rho)).r2:.3f}")
    for mode, decide in PARTIAL_CQI_DECIDERS.items():
        decision = decide(partial.replace(rho=rho), rayleigh)
        cells.append(f"{mode}/partial={decision.r2:.3f}")
    LOG.info("rho=%.4f %s", rho, " ".join(cells))
