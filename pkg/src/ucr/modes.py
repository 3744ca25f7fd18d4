"""Spectrum-access decisions for the four decoding modes under full CQI."""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np

from .core import (
    ScenarioConfig,
    UcrDegenerateLinkError,
    UcrDomainError,
    UcrSingularityError,
    capacity,
    snr,
)

LOG = logging.getLogger(__name__)

MODE_INDIVIDUAL = "individual"
MODE_SSMD = "ssmd"
MODE_PSMD = "psmd"
MODE_TSMD = "tsmd"
MODES = (MODE_INDIVIDUAL, MODE_SSMD, MODE_PSMD, MODE_TSMD)

ROW_COLUMNS = (
    "mode",
    "branch",
    "r2",
    "p2",
    "delta_c1",
    "c1",
    "primary_outage",
    "secondary_outage",
)

PENALTY_TOL = 1e-12


@dataclass(frozen=True)
class AccessDecision:
    mode: str
    branch: str
    access: bool
    r2: float
    p2: float
    delta_c1: float
    c1: float
    primary_outage_prob: float = 0.0
    secondary_outage_prob: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise UcrDomainError(message=f"unknown mode {self.mode!r}")
        if self.r2 < 0 or self.p2 < 0 or self.c1 < -PENALTY_TOL:
            raise UcrDomainError(
                message="decision rates and power must be non-negative",
                data={"r2": self.r2, "p2": self.p2, "c1": self.c1},
            )
        for name in ("primary_outage_prob", "secondary_outage_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise UcrDomainError(
                    message=f"{name} must be a probability, got {value!r}",
                    data={"field": name},
                )

    def as_row(self) -> Dict[str, object]:
        return {
            "mode": self.mode,
            "branch": self.branch,
            "r2": self.r2,
            "p2": self.p2,
            "delta_c1": self.delta_c1,
            "c1": self.c1,
            "primary_outage": self.primary_outage_prob,
            "secondary_outage": self.secondary_outage_prob,
        }


@dataclass(frozen=True)
class LambdaPair:
    """Gain-ratio thresholds separating the PSMD regimes."""

    lambda1: float
    lambda2: float

    @classmethod
    def from_snr(cls, g11: float, g12: float) -> "LambdaPair":
        return cls(lambda1=(g11 + 1.0) / (g12 + 1.0), lambda2=1.0 / (g12 + 1.0))

    @property
    def ratio(self) -> float:
        return self.lambda1 / self.lambda2


def _check_rho(rho):
    if not 0.0 <= rho < 1.0:
        raise UcrDomainError(
            message=f"rho must lie in [0, 1), got {rho!r}", data={"field": "rho"}
        )


def interference_budget(g11, rho, high_snr=False):
    """Largest Tx2->Rx1 SNR that keeps the penalty at rho * C[g11].

    Exact: g11 / ((1+g11)^(1-rho) - 1) - 1; high-SNR: (1+g11)^rho - 1.
    """
    _check_rho(rho)
    g11 = float(g11)
    if g11 < 0 or not np.isfinite(g11):
        raise UcrDomainError(message=f"g11 must be finite and non-negative, got {g11!r}")
    if rho == 0.0 or g11 == 0.0:
        return 0.0
    if high_snr:
        budget = np.expm1(rho * np.log1p(g11))
    else:
        budget = g11 / np.expm1((1.0 - rho) * np.log1p(g11)) - 1.0
    return max(float(budget), 0.0)


def individual_penalty(g11, g21):
    """Primary capacity lost when it treats the secondary signal as noise."""
    if g11 < 0 or g21 < 0:
        raise UcrDomainError(
            message=f"SNRs must be non-negative, got g11={g11!r}, g21={g21!r}"
        )
    penalty = capacity(g11) - capacity(g11 / (g21 + 1.0))
    return max(float(penalty), 0.0)


def individual_penalty_high_snr(g21):
    """High-SNR approximation of the penalty, C[g21]."""
    return capacity(g21)


def individual_power_cap(g11, rho, gain2_21, n0, high_snr=False):
    """Secondary power keeping the primary penalty within rho * C[g11]."""
    _check_rho(rho)
    if gain2_21 == 0:
        raise UcrSingularityError(
            message="power cap is unbounded for a zero Tx2->Rx1 gain",
            data={"gain2_21": gain2_21},
        )
    if gain2_21 < 0:
        raise UcrDomainError(message=f"gain2_21 must be non-negative, got {gain2_21!r}")
    return (n0 / gain2_21) * interference_budget(g11, rho, high_snr)


def _penalty_cap(cfg: ScenarioConfig) -> float:
    if cfg.gain2_21 == 0:
        return np.inf
    return individual_power_cap(
        cfg.g11, cfg.rho, cfg.gain2_21, cfg.n0, high_snr=cfg.high_snr
    )


def _decision(cfg, mode, branch, r2, p2, delta_c1, **outages) -> AccessDecision:
    c11 = capacity(cfg.g11)
    delta_c1 = min(max(float(delta_c1), 0.0), c11)
    return AccessDecision(
        mode=mode,
        branch=branch,
        access=True,
        r2=max(float(r2), 0.0),
        p2=float(p2),
        delta_c1=delta_c1,
        c1=c11 - delta_c1,
        **outages,
    )


def individual_decide(cfg: ScenarioConfig) -> AccessDecision:
    cfg.require_full("individual_decide")
    cap = _penalty_cap(cfg)
    p2 = min(cfg.p2_local_max, cap)
    if cfg.gain2_21 == 0:
        branch = "interference-free"
    elif cap < cfg.p2_local_max:
        branch = "penalty-capped"
    else:
        branch = "local-capped"
    view = cfg.snr_view(p2)
    r2 = capacity(view.g22 / (view.g12 + 1.0))
    delta_c1 = individual_penalty(view.g11, view.g21)
    LOG.debug("individual: %s p2=%g r2=%g delta_c1=%g", branch, p2, r2, delta_c1)
    return _decision(cfg, MODE_INDIVIDUAL, branch, r2, p2, delta_c1)


def _ssmd_bound(cfg: ScenarioConfig, g12: float, g22: float) -> float:
    return min(
        capacity(g12 + g22) - (1.0 - cfg.rho) * capacity(cfg.g11), capacity(g22)
    )


def ssmd_rate(cfg: ScenarioConfig) -> AccessDecision:
    """Secondary decodes and cancels the primary message; primary treats it as noise."""
    cfg.require_full("ssmd_rate")
    if cfg.gain2_12 < cfg.gain2_11:
        LOG.info("ssmd: |a12| < |a11|, Rx2 cannot decode X1; using individual mode")
        return replace(individual_decide(cfg), mode=MODE_SSMD, branch="ssmd-degraded")
    p2 = min(cfg.p2_local_max, _penalty_cap(cfg))
    view = cfg.snr_view(p2)
    r2 = _ssmd_bound(cfg, view.g12, view.g22)
    return _decision(cfg, MODE_SSMD, "ssmd", r2, p2, cfg.rho * capacity(cfg.g11))


def ssmd_rate_high_snr(cfg: ScenarioConfig) -> float:
    """High-SNR form of the SSMD rate with power from the high-SNR cap."""
    cfg.require_full("ssmd_rate_high_snr")
    if cfg.g11 == 0:
        raise UcrDomainError(message="high-SNR SSMD rate needs g11 > 0")
    if cfg.gain2_21 == 0:
        p2 = cfg.p2_local_max
    else:
        p2 = min(
            cfg.p2_local_max,
            individual_power_cap(cfg.g11, cfg.rho, cfg.gain2_21, cfg.n0, high_snr=True),
        )
    view = cfg.snr_view(p2)
    rate = min(
        np.log2((view.g12 + view.g22) / view.g11) + capacity(view.g21),
        capacity(view.g22),
    )
    return max(float(rate), 0.0)


def noise_rate(g12, g22):
    """Secondary rate with the primary signal treated as noise."""
    return capacity(g22 / (g12 + 1.0))


def decodable_rate(g11, g21):
    """Largest secondary rate the primary can decode without giving up capacity."""
    return max(capacity(g21 + g11) - capacity(g11), 0.0)


def sum_rate_gain(snr_view) -> float:
    """Sum-rate gain of treating interference as noise over zero-penalty decoding.

    Positive exactly when paying capacity penalty improves max(R1 + R2).
    """
    snr_view.require_full("sum_rate_gain")
    g11, g12, g21, g22 = snr_view.g11, snr_view.g12, snr_view.g21, snr_view.g22
    return float(
        capacity(g11 / (g21 + 1.0)) + capacity(g22 / (g12 + 1.0)) - capacity(g11 + g21)
    )


def psmd_decide(cfg: ScenarioConfig) -> AccessDecision:
    """Primary decodes and cancels the secondary message when the gain ratio allows."""
    cfg.require_full("psmd_decide")
    if cfg.gain2_22 == 0:
        raise UcrDegenerateLinkError(
            message="PSMD needs a non-zero Tx2->Rx2 gain", data={"gain2_22": 0.0}
        )
    local = cfg.snr_view()
    if cfg.gain2_21 == 0:
        r2 = noise_rate(local.g12, local.g22)
        return _decision(cfg, MODE_PSMD, "psmd-interference-free", r2, cfg.p2_local_max, 0.0)

    lambdas = LambdaPair.from_snr(cfg.g11, cfg.g12)
    ratio = cfg.gain2_21 / cfg.gain2_22
    LOG.debug("psmd: ratio=%g lambda1=%g lambda2=%g", ratio, lambdas.lambda1, lambdas.lambda2)
    if ratio > lambdas.lambda1:
        r2 = noise_rate(local.g12, local.g22)
        return _decision(cfg, MODE_PSMD, "psmd-above-lambda1", r2, cfg.p2_local_max, 0.0)
    if ratio < lambdas.lambda2:
        p2 = min(cfg.p2_local_max, _penalty_cap(cfg))
        view = cfg.snr_view(p2)
        r2 = noise_rate(view.g12, view.g22)
        delta_c1 = individual_penalty(view.g11, view.g21)
        return _decision(cfg, MODE_PSMD, "psmd-below-lambda2", r2, p2, delta_c1)
    # boundaries are rate-continuous and belong to this window
    r2 = decodable_rate(local.g11, local.g21)
    return _decision(cfg, MODE_PSMD, "psmd-window", r2, cfg.p2_local_max, 0.0)


def tsmd_decide(cfg: ScenarioConfig) -> AccessDecision:
    """Both receivers decode the cross message where the channel allows it."""
    cfg.require_full("tsmd_decide")
    if cfg.gain2_12 < cfg.gain2_11:
        LOG.info("tsmd: |a12| < |a11|, reducing to psmd")
        return replace(psmd_decide(cfg), mode=MODE_TSMD, branch="tsmd-as-psmd")

    local = cfg.snr_view()
    if cfg.gain2_21 >= cfg.gain2_22:
        r2 = min(capacity(local.g21 + local.g11), capacity(local.g12 + local.g22)) - capacity(
            local.g11
        )
        return _decision(cfg, MODE_TSMD, "tsmd-compound-mac", r2, cfg.p2_local_max, 0.0)

    # each arm runs at its own legal power; ties go to the penalty-free arm
    ssmd_arm = ssmd_rate(cfg)
    decode_arm = decodable_rate(local.g11, local.g21)
    if ssmd_arm.r2 > decode_arm:
        return replace(ssmd_arm, mode=MODE_TSMD, branch="tsmd-ssmd-arm")
    return _decision(cfg, MODE_TSMD, "tsmd-decode-arm", decode_arm, cfg.p2_local_max, 0.0)


FULL_CQI_DECIDERS = {
    MODE_INDIVIDUAL: individual_decide,
    MODE_SSMD: ssmd_rate,
    MODE_PSMD: psmd_decide,
    MODE_TSMD: tsmd_decide,
}


def no_access(cfg: ScenarioConfig, mode: str, branch: str = "no-access", **extra):
    """Decision for a secondary that stays out of the primary band."""
    return dict(
        mode=mode,
        branch=branch,
        access=False,
        r2=0.0,
        p2=0.0,
        delta_c1=0.0,
        c1=capacity(cfg.g11),
        **extra,
    )


def describe(decision: AccessDecision, extra: Optional[Dict[str, object]] = None) -> str:
    parts = [f"{k}={v}" for k, v in decision.as_row().items()]
    if extra:
        parts += [f"{k}={v}" for k, v in extra.items()]
    return " ".join(parts)
