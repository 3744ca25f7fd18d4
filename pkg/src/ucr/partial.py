"""Spectrum access when only the Rayleigh law of the Tx2->Rx1 gain is known.

The secondary knows every gain except |a21|^2, for which it only holds the
exponential-law mean (Rayleigh amplitude). All probabilities below are closed
forms of that law:

    Pr(|a21|^2 > t) = exp(-t / E|a21|^2)

Power follows Criterion 1 (primary outage at most O_t); PSMD and TSMD pick the
first case whose probability condition holds, in the order they are listed.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .core import (
    ScenarioConfig,
    UcrDegenerateLinkError,
    UcrDomainError,
    UcrSingularityError,
    capacity,
    snr,
)
from .modes import (
    MODE_INDIVIDUAL,
    MODE_PSMD,
    MODE_SSMD,
    MODE_TSMD,
    AccessDecision,
    LambdaPair,
    decodable_rate,
    interference_budget,
    no_access,
    noise_rate,
)

LOG = logging.getLogger(__name__)

CASE_1 = "Case1"
CASE_2 = "Case2"
CASE_3 = "Case3"
CASE_NO_ACCESS = "NoAccess"

# relative offset keeping the TSMD scaling factor strictly on its side of |a22|^2
SCALING_DELTA = 1e-6


@dataclass(frozen=True)
class RayleighCqi:
    """Exponential law of |a21|^2 with the given mean."""

    mean_gain2: float

    def __post_init__(self):
        if not (np.isfinite(self.mean_gain2) and self.mean_gain2 >= 0):
            raise UcrDomainError(
                message=f"mean_gain2 must be finite and non-negative, got {self.mean_gain2!r}",
                data={"field": "mean_gain2"},
            )

    def tail(self, threshold):
        """Pr(|a21|^2 > threshold)."""
        t = np.asarray(threshold, dtype=float)
        if self.mean_gain2 == 0:
            out = np.where(t < 0, 1.0, 0.0)
        else:
            out = np.exp(-np.maximum(t, 0.0) / self.mean_gain2)
        return float(out) if out.ndim == 0 else out

    def cdf(self, threshold):
        """Pr(|a21|^2 <= threshold)."""
        return 1.0 - self.tail(threshold)

    def mean_snr(self, p2: float, n0: float) -> float:
        return snr(p2, self.mean_gain2, n0)


@dataclass(frozen=True)
class PartialDecision(AccessDecision):
    case_id: Optional[str] = None
    gbar_t: float = 0.0
    scaling_factor: Optional[float] = None

    def as_row(self) -> Dict[str, object]:
        row = super().as_row()
        if self.case_id is not None:
            row["branch"] = f"{self.branch}:{self.case_id}"
        return row


@dataclass(frozen=True)
class ScalingFactor:
    value: float
    secondary_outage: float


@dataclass(frozen=True)
class Case3Feasibility:
    feasible: bool
    failed: Tuple[str, ...]
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def __bool__(self):
        return self.feasible


def _check_probability(name, value):
    if not 0.0 < value < 1.0:
        raise UcrDomainError(
            message=f"{name} must lie strictly between 0 and 1, got {value!r}",
            data={"field": name},
        )


def gamma_threshold(g11, rho, high_snr=False):
    """Instantaneous Tx2->Rx1 SNR above which the primary is in outage."""
    return interference_budget(g11, rho, high_snr)


def outage_prob_primary(gamma_t, gbar21):
    """Pr(g21 > gamma_t) for an exponential g21 with mean gbar21."""
    if gamma_t < 0 or gbar21 < 0:
        raise UcrDomainError(
            message=f"thresholds must be non-negative, got gamma_t={gamma_t!r}, gbar21={gbar21!r}"
        )
    if gbar21 == 0:
        return 0.0
    return float(np.exp(-gamma_t / gbar21))


def mean_snr_cap(g11, rho, o_t, high_snr=False):
    """Mean Tx2->Rx1 SNR that holds the primary outage exactly at o_t."""
    _check_probability("o_t", o_t)
    if not 0.0 <= rho < 1.0:
        raise UcrDomainError(message=f"rho must lie in [0, 1), got {rho!r}")
    if rho == 0.0 or g11 == 0:
        return 0.0
    if high_snr:
        return float(-np.expm1(rho * np.log1p(g11)) / np.log(o_t))
    shrunk = np.expm1((1.0 - rho) * np.log1p(g11))
    return max(float((shrunk - g11) / (shrunk * np.log(o_t))), 0.0)


def power_cap_partial(gbar_t, rayleigh: RayleighCqi, n0):
    """Largest secondary power keeping the mean Tx2->Rx1 SNR at gbar_t."""
    if gbar_t < 0:
        raise UcrDomainError(message=f"gbar_t must be non-negative, got {gbar_t!r}")
    if rayleigh.mean_gain2 == 0:
        raise UcrSingularityError(
            message="power cap is unbounded for a zero-mean Tx2->Rx1 gain",
            data={"mean_gain2": 0.0},
        )
    return gbar_t * n0 / rayleigh.mean_gain2


def _criterion1_power(cfg: ScenarioConfig, rayleigh: RayleighCqi):
    gbar_t = mean_snr_cap(
        cfg.g11, cfg.rho, cfg.outage_threshold_primary, high_snr=cfg.high_snr
    )
    if rayleigh.mean_gain2 == 0:
        return gbar_t, cfg.p2_local_max
    return gbar_t, min(cfg.p2_local_max, power_cap_partial(gbar_t, rayleigh, cfg.n0))


def _primary_outage(cfg: ScenarioConfig, rayleigh: RayleighCqi, p2: float) -> float:
    gamma_t = gamma_threshold(cfg.g11, cfg.rho, high_snr=cfg.high_snr)
    return outage_prob_primary(gamma_t, rayleigh.mean_snr(p2, cfg.n0))


def _partial(cfg, mode, branch, r2, p2, delta_c1, **extra) -> PartialDecision:
    c11 = capacity(cfg.g11)
    delta_c1 = min(max(float(delta_c1), 0.0), c11)
    return PartialDecision(
        mode=mode,
        branch=branch,
        access=True,
        r2=max(float(r2), 0.0),
        p2=float(p2),
        delta_c1=delta_c1,
        c1=c11 - delta_c1,
        **extra,
    )


def _no_access(cfg, mode, **extra) -> PartialDecision:
    return PartialDecision(**no_access(cfg, mode), case_id=CASE_NO_ACCESS, **extra)


def individual_partial_decide(cfg: ScenarioConfig, rayleigh: RayleighCqi) -> PartialDecision:
    """Criterion 1: the highest power whose primary outage stays within O_t."""
    cfg.require_partial("individual_partial_decide")
    gbar_t, p2 = _criterion1_power(cfg, rayleigh)
    view = cfg.snr_view(p2, mean_gain2=rayleigh.mean_gain2)
    outage = _primary_outage(cfg, rayleigh, p2)
    LOG.debug("criterion1: gbar_t=%g p2=%g primary outage=%g", gbar_t, p2, outage)
    return _partial(
        cfg,
        MODE_INDIVIDUAL,
        "criterion1",
        noise_rate(view.g12, view.g22),
        p2,
        cfg.rho * capacity(cfg.g11),
        primary_outage_prob=outage,
        gbar_t=gbar_t,
    )


def ssmd_partial_decide(cfg: ScenarioConfig, rayleigh: RayleighCqi) -> PartialDecision:
    """SSMD keeps the Criterion-1 power and swaps in the SSMD rate."""
    cfg.require_partial("ssmd_partial_decide")
    decision = individual_partial_decide(cfg, rayleigh)
    if cfg.gain2_12 < cfg.gain2_11:
        return replace(decision, mode=MODE_SSMD, branch="ssmd-degraded")
    view = cfg.snr_view(decision.p2, mean_gain2=rayleigh.mean_gain2)
    r2 = min(
        capacity(view.g12 + view.g22) - (1.0 - cfg.rho) * capacity(cfg.g11),
        capacity(view.g22),
    )
    return replace(decision, mode=MODE_SSMD, branch="ssmd", r2=max(float(r2), 0.0))


def case1_threshold(gain2_22, lambda1, o_t) -> float:
    """Smallest mean of |a21|^2 for which the PSMD Case-1 condition holds."""
    _check_probability("o_t", o_t)
    return lambda1 * gain2_22 / np.log(1.0 / (1.0 - o_t))


def case1_condition(rayleigh: RayleighCqi, gain2_22, lambda1, o_t) -> bool:
    return bool(rayleigh.mean_gain2 > case1_threshold(gain2_22, lambda1, o_t))


def case2_mean_cap(lambda2, g22, epsilon, gbar_t) -> float:
    """Largest mean Tx2->Rx1 SNR compatible with PSMD Case 2 and Criterion 1."""
    _check_probability("epsilon", epsilon)
    return float(min(lambda2 * g22 / np.log(1.0 / (1.0 - epsilon)), gbar_t))


def window_probability(gbar21, g22, lambda1, lambda2):
    """Pr(lambda2 <= |a21|^2/|a22|^2 <= lambda1) as a function of the mean SNR."""
    if not lambda1 > lambda2 > 0:
        raise UcrDomainError(
            message=f"need lambda1 > lambda2 > 0, got ({lambda1!r}, {lambda2!r})",
            data={"lambda1": lambda1, "lambda2": lambda2},
        )
    if g22 <= 0:
        raise UcrDomainError(message=f"g22 must be positive, got {g22!r}")
    gbar = np.asarray(gbar21, dtype=float)
    with np.errstate(divide="ignore"):
        safe = np.where(gbar > 0, gbar, np.inf)
        value = np.exp(-g22 * lambda2 / safe) - np.exp(-g22 * lambda1 / safe)
    value = np.where(gbar > 0, value, 0.0)
    return float(value) if value.ndim == 0 else value


def window_peak(g22, lambda1, lambda2) -> Tuple[float, float]:
    """Maximiser of the window probability and its peak value."""
    if not lambda1 > lambda2 > 0:
        raise UcrDomainError(
            message=f"need lambda1 > lambda2 > 0, got ({lambda1!r}, {lambda2!r})"
        )
    spread = lambda1 / lambda2
    argmax = g22 * (lambda1 - lambda2) / np.log(spread)
    peak = np.exp(-np.log(spread) / (spread - 1.0)) * (spread - 1.0) / spread
    return float(argmax), float(peak)


def case3_snr_root(epsilon) -> float:
    """g11 above which g11 < epsilon^(-g11) - 1 holds (0 when it always holds)."""
    _check_probability("epsilon", epsilon)
    slope = np.log(1.0 / epsilon)
    if slope >= 1.0:
        return 0.0

    def excess(g):
        return np.log1p(g) - g * slope

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
    return float(brentq(excess, 1e-9, hi, xtol=1e-12, maxiter=200))


def _snr_above_window_floor(g11, epsilon) -> bool:
    # g11 < epsilon^(-g11) - 1, compared in log space to survive large g11
    return bool(np.log1p(g11) < g11 * np.log(1.0 / epsilon))


def case3_overrate_bound(g11) -> float:
    if g11 < 0:
        raise UcrDomainError(message=f"g11 must be non-negative, got {g11!r}")
    return 1.0 / (g11 + 1.0)


def case3_overrate_exact(g11) -> float:
    """Pr(|a21|^2 > lambda1 |a22|^2) at the window-maximising mean."""
    if g11 <= 0:
        raise UcrDomainError(message=f"g11 must be positive, got {g11!r}")
    spread = g11 + 1.0
    return float(np.exp(-np.log(spread) * spread / (spread - 1.0)))


def case3_mean_floor(gain2_22, lambda2, o_1) -> float:
    """Smallest mean |a21|^2 at which the Case-3 scaling factor can reach lambda2 |a22|^2."""
    _check_probability("o_1", o_1)
    return float(gain2_22 * lambda2 / np.log(1.0 / (1.0 - o_1)))


def case3_feasibility(
    g11, epsilon, rayleigh: RayleighCqi, gain2_22, lambda2, o_1
) -> Case3Feasibility:
    """Necessary conditions for PSMD Case 3, with the reason for any failure."""
    _check_probability("epsilon", epsilon)
    _check_probability("o_1", o_1)
    lambda1 = lambda2 * (g11 + 1.0)
    mean_floor = case3_mean_floor(gain2_22, lambda2, o_1)
    failed = []
    if not _snr_above_window_floor(g11, epsilon):
        failed.append("snr-floor")
    if not rayleigh.mean_gain2 >= mean_floor:
        failed.append("mean-floor")
    diagnostics = {"mean_floor": mean_floor, "overrate_bound": case3_overrate_bound(g11)}
    if g11 > 0 and gain2_22 > 0:
        peak_mean, peak = window_peak(gain2_22, lambda1, lambda2)
        window = window_probability(rayleigh.mean_gain2, gain2_22, lambda1, lambda2)
        diagnostics.update(
            peak_mean=peak_mean, peak_probability=peak, window_probability=window
        )
        if not window > epsilon:
            failed.append("window")
    else:
        failed.append("window")
    return Case3Feasibility(
        feasible=not failed, failed=tuple(failed), diagnostics=diagnostics
    )


def scaling_factor(rayleigh: RayleighCqi, o_1, lower, upper) -> Optional[ScalingFactor]:
    """Largest surrogate for |a21|^2 whose secondary outage stays within o_1.

    Returns ``None`` when that surrogate falls below ``lower`` (no access).
    """
    _check_probability("o_1", o_1)
    if not lower < upper:
        raise UcrDomainError(
            message=f"scaling range must satisfy lower < upper, got ({lower!r}, {upper!r})"
        )
    cap = np.log(1.0 / (1.0 - o_1)) * rayleigh.mean_gain2
    value = min(float(np.nextafter(upper, lower)), float(cap))
    if value < lower * (1.0 - 1e-12):
        LOG.debug("scaling factor cap %g below range floor %g", cap, lower)
        return None
    return ScalingFactor(value=value, secondary_outage=rayleigh.cdf(value))


def _scaling_override(cfg: ScenarioConfig, rayleigh: RayleighCqi, lower, upper):
    # an override must stay inside the range and keep the secondary outage within o_1
    value = cfg.scaling
    cap = np.log(1.0 / (1.0 - cfg.outage_threshold_secondary)) * rayleigh.mean_gain2
    if not lower < value < upper:
        LOG.warning("scaling override %g outside (%g, %g), no access", value, lower, upper)
        return None
    if value > cap * (1.0 + 1e-12):
        LOG.warning("scaling override %g above the outage cap %g, no access", value, cap)
        return None
    return ScalingFactor(value=value, secondary_outage=rayleigh.cdf(value))


def case_probabilities(rayleigh: RayleighCqi, gain2_22, lambdas: LambdaPair) -> Dict[str, float]:
    """Closed-form probabilities of the three PSMD case events."""
    above = rayleigh.tail(lambdas.lambda1 * gain2_22)
    below = rayleigh.cdf(lambdas.lambda2 * gain2_22)
    return {"above_lambda1": above, "below_lambda2": below, "window": 1.0 - above - below}


def psmd_partial_decide(cfg: ScenarioConfig, rayleigh: RayleighCqi) -> PartialDecision:
    """PSMD with partial CQI: Case 1, then Case 2, then Case 3, else no access."""
    cfg.require_partial("psmd_partial_decide")
    if cfg.gain2_22 == 0:
        raise UcrDegenerateLinkError(
            message="PSMD needs a non-zero Tx2->Rx2 gain", data={"gain2_22": 0.0}
        )
    lambdas = LambdaPair.from_snr(cfg.g11, cfg.g12)
    local = cfg.snr_view(mean_gain2=rayleigh.mean_gain2)
    gbar_t = mean_snr_cap(
        cfg.g11, cfg.rho, cfg.outage_threshold_primary, high_snr=cfg.high_snr
    )

    if case1_condition(rayleigh, cfg.gain2_22, lambdas.lambda1, cfg.outage_threshold_primary):
        LOG.debug("psmd partial: case 1")
        return _partial(
            cfg,
            MODE_PSMD,
            "psmd",
            noise_rate(local.g12, local.g22),
            cfg.p2_local_max,
            0.0,
            primary_outage_prob=1.0 - cfg.epsilon,
            case_id=CASE_1,
            gbar_t=gbar_t,
        )

    mean_cap = case2_mean_cap(lambdas.lambda2, local.g22, cfg.epsilon, gbar_t)
    first_arm = case2_mean_cap(lambdas.lambda2, local.g22, cfg.epsilon, np.inf)
    if local.gbar21 <= first_arm:
        if rayleigh.mean_gain2 == 0:
            p2 = cfg.p2_local_max
        else:
            p2 = min(cfg.p2_local_max, power_cap_partial(mean_cap, rayleigh, cfg.n0))
        view = cfg.snr_view(p2, mean_gain2=rayleigh.mean_gain2)
        LOG.debug("psmd partial: case 2 with p2=%g", p2)
        return _partial(
            cfg,
            MODE_PSMD,
            "psmd",
            noise_rate(view.g12, view.g22),
            p2,
            cfg.rho * capacity(cfg.g11),
            primary_outage_prob=_primary_outage(cfg, rayleigh, p2),
            case_id=CASE_2,
            gbar_t=gbar_t,
        )

    feasibility = case3_feasibility(
        cfg.g11,
        cfg.epsilon,
        rayleigh,
        cfg.gain2_22,
        lambdas.lambda2,
        cfg.outage_threshold_secondary,
    )
    if feasibility:
        lower = cfg.gain2_22 * lambdas.lambda2
        upper = cfg.gain2_22 * lambdas.lambda1
        if cfg.scaling is not None:
            chosen = _scaling_override(cfg, rayleigh, lower, upper)
        else:
            chosen = scaling_factor(rayleigh, cfg.outage_threshold_secondary, lower, upper)
        if chosen is not None:
            g11 = cfg.g11
            r2 = decodable_rate(g11, snr(cfg.p2_local_max, chosen.value, cfg.n0))
            LOG.debug("psmd partial: case 3 with scaling %g", chosen.value)
            return _partial(
                cfg,
                MODE_PSMD,
                "psmd",
                r2,
                cfg.p2_local_max,
                0.0,
                secondary_outage_prob=chosen.secondary_outage,
                case_id=CASE_3,
                gbar_t=gbar_t,
                scaling_factor=chosen.value,
            )
    else:
        LOG.debug("psmd partial: case 3 infeasible (%s)", ", ".join(feasibility.failed))
    return _no_access(cfg, MODE_PSMD, gbar_t=gbar_t)


def tsmd_partial_decide(cfg: ScenarioConfig, rayleigh: RayleighCqi) -> PartialDecision:
    """TSMD with partial CQI: Case 1, then Case 2, else no access."""
    cfg.require_partial("tsmd_partial_decide")
    if cfg.gain2_12 < cfg.gain2_11:
        LOG.info("tsmd partial: |a12| < |a11|, reducing to psmd")
        return replace(
            psmd_partial_decide(cfg, rayleigh), mode=MODE_TSMD, branch="tsmd-as-psmd"
        )
    mean = rayleigh.mean_gain2
    direct = cfg.gain2_22
    log_eps = np.log(1.0 / cfg.epsilon)
    gbar_t = mean_snr_cap(
        cfg.g11, cfg.rho, cfg.outage_threshold_primary, high_snr=cfg.high_snr
    )
    local = cfg.snr_view(mean_gain2=mean)

    case1_scaling = cfg.scaling
    if case1_scaling is None:
        case1_scaling = max(direct * (1.0 + SCALING_DELTA), mean * log_eps)
    # both sufficient conditions, compared as products so mean * ln(1/epsilon) ties hold
    budget = mean * log_eps
    if budget >= direct and budget >= case1_scaling > direct:
        r2 = min(
            capacity(snr(cfg.p2_local_max, case1_scaling, cfg.n0) + local.g11),
            capacity(local.g12 + local.g22),
        ) - capacity(local.g11)
        LOG.debug("tsmd partial: case 1 with scaling %g", case1_scaling)
        return _partial(
            cfg,
            MODE_TSMD,
            "tsmd",
            r2,
            cfg.p2_local_max,
            0.0,
            secondary_outage_prob=rayleigh.cdf(case1_scaling),
            case_id=CASE_1,
            gbar_t=gbar_t,
            scaling_factor=case1_scaling,
        )

    case2_scaling = cfg.scaling
    if case2_scaling is None:
        case2_scaling = min(direct * (1.0 - SCALING_DELTA), mean * log_eps)
    upper_mean = direct / np.log(1.0 / (1.0 - cfg.epsilon))
    if mean <= upper_mean and budget >= case2_scaling and case2_scaling < direct:
        _, p2_cap = _criterion1_power(cfg, rayleigh)
        g22_cap = snr(p2_cap, direct, cfg.n0)
        ssmd_arm = min(
            capacity(local.g12 + g22_cap) - (1.0 - cfg.rho) * capacity(cfg.g11),
            capacity(g22_cap),
        )
        decode_arm = decodable_rate(
            local.g11, snr(cfg.p2_local_max, case2_scaling, cfg.n0)
        )
        LOG.debug("tsmd partial: case 2 arms ssmd=%g decode=%g", ssmd_arm, decode_arm)
        if ssmd_arm > decode_arm:
            return _partial(
                cfg,
                MODE_TSMD,
                "tsmd-ssmd-arm",
                ssmd_arm,
                p2_cap,
                cfg.rho * capacity(cfg.g11),
                primary_outage_prob=_primary_outage(cfg, rayleigh, p2_cap),
                case_id=CASE_2,
                gbar_t=gbar_t,
                scaling_factor=case2_scaling,
            )
        return _partial(
            cfg,
            MODE_TSMD,
            "tsmd-decode-arm",
            decode_arm,
            cfg.p2_local_max,
            0.0,
            secondary_outage_prob=rayleigh.cdf(case2_scaling),
            case_id=CASE_2,
            gbar_t=gbar_t,
            scaling_factor=case2_scaling,
        )
    return _no_access(cfg, MODE_TSMD, gbar_t=gbar_t)


PARTIAL_CQI_DECIDERS = {
    MODE_INDIVIDUAL: individual_partial_decide,
    MODE_SSMD: ssmd_partial_decide,
    MODE_PSMD: psmd_partial_decide,
    MODE_TSMD: tsmd_partial_decide,
}
