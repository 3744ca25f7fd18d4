__version__ = "0.1.0"

from .core import (
    RateRegion,
    ScenarioConfig,
    SnrView,
    UcrArgumentError,
    UcrDegenerateLinkError,
    UcrDomainError,
    UcrError,
    UcrPreconditionError,
    UcrSingularityError,
    capacity,
    max_sum_rate,
)
from .cqidb import CqiDatabase, CqiNotFound, CqiRecord
from .modes import FULL_CQI_DECIDERS, AccessDecision, LambdaPair
from .montecarlo import OutageReport, TrialPlan, run_suite
from .partial import PARTIAL_CQI_DECIDERS, PartialDecision, RayleighCqi

__all__ = [
    "AccessDecision",
    "CqiDatabase",
    "CqiNotFound",
    "CqiRecord",
    "FULL_CQI_DECIDERS",
    "LambdaPair",
    "OutageReport",
    "PARTIAL_CQI_DECIDERS",
    "PartialDecision",
    "RateRegion",
    "RayleighCqi",
    "ScenarioConfig",
    "SnrView",
    "TrialPlan",
    "UcrArgumentError",
    "UcrDegenerateLinkError",
    "UcrDomainError",
    "UcrError",
    "UcrPreconditionError",
    "UcrSingularityError",
    "capacity",
    "max_sum_rate",
    "run_suite",
]

# Set default logging handler to avoid "No handler found" warnings.
import logging
from logging import NullHandler

# Set initial level to WARN. Users must manually enable logging for
# ucr to see our logging.
rootlogger = logging.getLogger(__name__)
rootlogger.addHandler(NullHandler())

if rootlogger.level == logging.NOTSET:
    rootlogger.setLevel(logging.WARN)
