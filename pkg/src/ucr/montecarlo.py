"""Seeded Monte Carlo checks of the closed-form partial-CQI probabilities.

Trials are cut into fixed-size blocks; block ``k`` draws from its own PCG64
substream spawned from ``(seed, k)``. Workers only decide *who* evaluates a
block, so a report is the same for any worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .core import ScenarioConfig, UcrArgumentError, UcrPreconditionError, snr
from .modes import LambdaPair
from .partial import (
    CASE_1,
    CASE_3,
    PartialDecision,
    RayleighCqi,
    case1_threshold,
    case3_overrate_bound,
    case3_mean_floor,
    case3_overrate_exact,
    case3_snr_root,
    gamma_threshold,
    individual_partial_decide,
    outage_prob_primary,
    window_peak,
    window_probability,
)

LOG = logging.getLogger(__name__)

BLOCK_TRIALS = 1 << 16
PASS_SIGMAS = 4.0
PEAK_GRID_POINTS = 33
PEAK_GRID_SPAN = 4.0
MAX_SEED = 2**64 - 1

EVENT_ABOVE_LAMBDA1 = "ratio_above_lambda1"
EVENT_BELOW_LAMBDA2 = "ratio_below_lambda2"
EVENT_IN_WINDOW = "ratio_in_window"
EVENT_AT_LEAST_DIRECT = "gain_at_least_direct"
EVENT_BELOW_DIRECT = "gain_below_direct"
EVENT_SCALING_LE_GAIN = "scaling_le_gain"
EVENTS = (
    EVENT_ABOVE_LAMBDA1,
    EVENT_BELOW_LAMBDA2,
    EVENT_IN_WINDOW,
    EVENT_AT_LEAST_DIRECT,
    EVENT_BELOW_DIRECT,
    EVENT_SCALING_LE_GAIN,
)

REPORT_COLUMNS = ("name", "analytic", "empirical", "stderr", "trials", "seed", "pass")


@dataclass(frozen=True)
class TrialPlan:
    trials: int = 1_000_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise UcrArgumentError(
                message=f"trials must be a positive integer, got {self.trials!r}",
                data={"field": "trials"},
            )
        if int(self.seed) != self.seed or not 0 <= self.seed <= MAX_SEED:
            raise UcrArgumentError(
                message=f"seed must be an unsigned 64-bit integer, got {self.seed!r}",
                data={"field": "seed"},
            )
        if int(self.workers) != self.workers or self.workers < 1:
            raise UcrArgumentError(
                message=f"workers must be a positive integer, got {self.workers!r}",
                data={"field": "workers"},
            )

    def blocks(self) -> List[Tuple[int, int]]:
        """``(index, size)`` of every trial block; sizes add up to ``trials``."""
        full, rest = divmod(int(self.trials), BLOCK_TRIALS)
        sizes = [BLOCK_TRIALS] * full + ([rest] if rest else [])
        return list(enumerate(sizes))

    def generator(self, block: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(block,))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class OutageReport:
    name: str
    analytic: float
    empirical: float
    stderr: float
    trials: int
    seed: int
    passed: bool
    bound: Optional[float] = None

    def as_row(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "analytic": self.analytic,
            "empirical": self.empirical,
            "stderr": self.stderr,
            "trials": self.trials,
            "seed": self.seed,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class EventParams:
    """Inputs of an event estimate; which fields are needed depends on the event."""

    rayleigh: RayleighCqi
    gain2_22: float
    lambdas: Optional[LambdaPair] = None
    scaling: Optional[float] = None


def sample_gain2(rayleigh: RayleighCqi, rng: np.random.Generator, size=None):
    """Exponential |a21|^2 draws by inversion, ``-mean * ln(u)`` with u in (0, 1]."""
    u = 1.0 - rng.random(size)
    return -rayleigh.mean_gain2 * np.log(u)


def _count_events(plan: TrialPlan, rayleigh: RayleighCqi, event: Callable) -> int:
    def run_block(block):
        index, size = block
        return int(np.count_nonzero(event(sample_gain2(rayleigh, plan.generator(index), size))))

    blocks = plan.blocks()
    LOG.debug("%d trials in %d blocks on %d workers", plan.trials, len(blocks), plan.workers)
    if plan.workers == 1:
        counts = [run_block(block) for block in blocks]
    else:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            counts = list(pool.map(run_block, blocks))
    return sum(counts)


def _report(name, analytic, hits, plan: TrialPlan, bound=None) -> OutageReport:
    empirical = hits / plan.trials
    stderr = float(np.sqrt(analytic * (1.0 - analytic) / plan.trials))
    band = PASS_SIGMAS * stderr
    passed = abs(analytic - empirical) <= band
    if bound is not None:
        passed = passed and empirical <= bound + band
    LOG.info(
        "%s: analytic=%.6g empirical=%.6g stderr=%.3g pass=%s",
        name,
        analytic,
        empirical,
        stderr,
        passed,
    )
    return OutageReport(
        name=name,
        analytic=float(analytic),
        empirical=float(empirical),
        stderr=stderr,
        trials=int(plan.trials),
        seed=int(plan.seed),
        passed=bool(passed),
        bound=bound,
    )


def estimate_primary_outage(
    cfg: ScenarioConfig,
    rayleigh: RayleighCqi,
    decision: PartialDecision,
    plan: TrialPlan,
    name: str = "eq16",
) -> OutageReport:
    """Empirical Pr(p2 |a21|^2 / n0 > gamma_t) at the power the decision chose."""
    gamma_t = gamma_threshold(cfg.g11, cfg.rho, high_snr=cfg.high_snr)
    gbar21 = snr(decision.p2, rayleigh.mean_gain2, cfg.n0)
    analytic = outage_prob_primary(gamma_t, gbar21)
    scale = decision.p2 / cfg.n0
    hits = _count_events(plan, rayleigh, lambda gains: scale * gains > gamma_t)
    # Case 1 and Case 3 are not power-limited by the outage budget
    bounded = decision.access and decision.case_id not in (CASE_1, CASE_3)
    bound = cfg.outage_threshold_primary if bounded else None
    return _report(name, analytic, hits, plan, bound=bound)


def _require(params: EventParams, event: str, *names):
    for name in names:
        if getattr(params, name) is None:
            raise UcrArgumentError(
                message=f"event {event!r} needs {name}", data={"event": event}
            )


def estimate_event_prob(
    event: str, params: EventParams, plan: TrialPlan, name: Optional[str] = None
) -> OutageReport:
    """Empirical frequency of a gain event against its exponential-law closed form."""
    if event not in EVENTS:
        raise UcrArgumentError(
            message=f"unknown event {event!r}, expected one of {', '.join(EVENTS)}",
            data={"event": event},
        )
    rayleigh, direct = params.rayleigh, params.gain2_22
    if event in (EVENT_ABOVE_LAMBDA1, EVENT_BELOW_LAMBDA2, EVENT_IN_WINDOW):
        _require(params, event, "lambdas")
        low = params.lambdas.lambda2 * direct
        high = params.lambdas.lambda1 * direct
        if event == EVENT_ABOVE_LAMBDA1:
            analytic, test = rayleigh.tail(high), (lambda g: g > high)
        elif event == EVENT_BELOW_LAMBDA2:
            analytic, test = rayleigh.cdf(low), (lambda g: g < low)
        else:
            analytic, test = (
                window_probability(
                    rayleigh.mean_gain2, direct, params.lambdas.lambda1, params.lambdas.lambda2
                ),
                (lambda g: (g >= low) & (g <= high)),
            )
    elif event == EVENT_AT_LEAST_DIRECT:
        analytic, test = rayleigh.tail(direct), (lambda g: g >= direct)
    elif event == EVENT_BELOW_DIRECT:
        analytic, test = rayleigh.cdf(direct), (lambda g: g < direct)
    else:
        _require(params, event, "scaling")
        scaling = params.scaling
        analytic, test = rayleigh.tail(scaling), (lambda g: g >= scaling)
    hits = _count_events(plan, rayleigh, test)
    return _report(name or event, float(analytic), hits, plan)


def validate_corollary5(g11, gain2_22, plan: TrialPlan, epsilon=0.9) -> OutageReport:
    """Over-rate probability at the window-maximising mean against 1/(g11 + 1)."""
    root = case3_snr_root(epsilon)
    if g11 <= root:
        raise UcrPreconditionError(
            message=f"g11={g11:g} is below the Case-3 feasibility root {root:g}",
            data={"g11": g11, "root": root},
        )
    # only lambda1/lambda2 = g11 + 1 matters here
    lambdas = LambdaPair(lambda1=g11 + 1.0, lambda2=1.0)
    peak_mean, _ = window_peak(gain2_22, lambdas.lambda1, lambdas.lambda2)
    rayleigh = RayleighCqi(peak_mean)
    threshold = lambdas.lambda1 * gain2_22
    hits = _count_events(plan, rayleigh, lambda g: g > threshold)
    return _report(
        "corollary5",
        case3_overrate_exact(g11),
        hits,
        plan,
        bound=case3_overrate_bound(g11),
    )


def validate_snr_root(gain2_22, plan: TrialPlan, epsilon=0.9) -> OutageReport:
    """At the Case-3 SNR root, Pr(ratio >= lambda2) at the window-maximising mean is epsilon."""
    root = case3_snr_root(epsilon)
    if root == 0.0:
        raise UcrPreconditionError(
            message=f"every g11 clears the Case-3 SNR floor at epsilon={epsilon:g}",
            data={"epsilon": epsilon},
        )
    lambdas = LambdaPair(lambda1=root + 1.0, lambda2=1.0)
    peak_mean, _ = window_peak(gain2_22, lambdas.lambda1, lambdas.lambda2)
    floor = lambdas.lambda2 * gain2_22
    hits = _count_events(plan, RayleighCqi(peak_mean), lambda g: g < floor)
    # compared with the value the root promises, not the closed form at the root
    return _report("corollary3", 1.0 - epsilon, hits, plan)


def validate_mean_floor(cfg: ScenarioConfig, plan: TrialPlan) -> OutageReport:
    """At the Case-3 mean floor the scaling range floor lambda2 |a22|^2 has outage o_1."""
    lambdas = LambdaPair.from_snr(cfg.g11, cfg.g12)
    o_1 = cfg.outage_threshold_secondary
    mean = case3_mean_floor(cfg.gain2_22, lambdas.lambda2, o_1)
    floor = lambdas.lambda2 * cfg.gain2_22
    hits = _count_events(plan, RayleighCqi(mean), lambda g: g < floor)
    return _report("corollary4", o_1, hits, plan)


def locate_window_peak(
    gain2_22, lambdas: LambdaPair, plan: TrialPlan, points=PEAK_GRID_POINTS, span=PEAK_GRID_SPAN
) -> OutageReport:
    """Window frequency over a log grid of means centred on the analytic maximiser.

    The report compares the frequency at the centre with the peak value and fails
    unless the empirical argmax lies within one grid step of the centre. Every grid
    point reuses the plan's draws.
    """
    if points < 3 or points % 2 == 0:
        raise UcrArgumentError(message=f"grid needs an odd number >= 3 of points, got {points!r}")
    peak_mean, peak = window_peak(gain2_22, lambdas.lambda1, lambdas.lambda2)
    grid = np.geomspace(peak_mean / span, peak_mean * span, points)
    low = lambdas.lambda2 * gain2_22
    high = lambdas.lambda1 * gain2_22
    counts = np.array(
        [
            _count_events(plan, RayleighCqi(float(mean)), lambda g: (g >= low) & (g <= high))
            for mean in grid
        ]
    )
    centre = points // 2
    best = int(np.argmax(counts))
    located = abs(best - centre) <= 1
    LOG.info(
        "window peak: empirical argmax %g, analytic %g (grid step x%.4g) located=%s",
        grid[best],
        peak_mean,
        grid[1] / grid[0],
        located,
    )
    report = _report("appendix", peak, int(counts[centre]), plan)
    return replace(report, passed=report.passed and located)


def _suite_eq16(cfg, rayleigh, plan):
    decision = individual_partial_decide(cfg, rayleigh)
    return [estimate_primary_outage(cfg, rayleigh, decision, plan)]


def _suite_corollary1(cfg, rayleigh, plan):
    lambdas = LambdaPair.from_snr(cfg.g11, cfg.g12)
    mean = case1_threshold(cfg.gain2_22, lambdas.lambda1, cfg.outage_threshold_primary)
    params = EventParams(RayleighCqi(mean), cfg.gain2_22, lambdas=lambdas)
    return [estimate_event_prob(EVENT_ABOVE_LAMBDA1, params, plan, name="corollary1")]


def _suite_corollary2(cfg, rayleigh, plan):
    lambdas = LambdaPair.from_snr(cfg.g11, cfg.g12)
    mean = lambdas.lambda2 * cfg.gain2_22 / np.log(1.0 / (1.0 - cfg.epsilon))
    params = EventParams(RayleighCqi(mean), cfg.gain2_22, lambdas=lambdas)
    return [estimate_event_prob(EVENT_BELOW_LAMBDA2, params, plan, name="corollary2")]


def _suite_corollary3(cfg, rayleigh, plan):
    return [validate_snr_root(cfg.gain2_22, plan, epsilon=cfg.epsilon)]


def _suite_corollary4(cfg, rayleigh, plan):
    return [validate_mean_floor(cfg, plan)]


def _suite_corollary5(cfg, rayleigh, plan):
    return [validate_corollary5(cfg.g11, cfg.gain2_22, plan, epsilon=cfg.epsilon)]


def _suite_corollary6(cfg, rayleigh, plan):
    mean = cfg.gain2_22 / np.log(1.0 / cfg.epsilon)
    params = EventParams(RayleighCqi(mean), cfg.gain2_22)
    return [estimate_event_prob(EVENT_AT_LEAST_DIRECT, params, plan, name="corollary6")]


def _suite_corollary7(cfg, rayleigh, plan):
    mean = cfg.gain2_22 / np.log(1.0 / (1.0 - cfg.epsilon))
    params = EventParams(RayleighCqi(mean), cfg.gain2_22)
    return [estimate_event_prob(EVENT_BELOW_DIRECT, params, plan, name="corollary7")]


def _suite_appendix(cfg, rayleigh, plan):
    return [locate_window_peak(cfg.gain2_22, LambdaPair.from_snr(cfg.g11, cfg.g12), plan)]


def _suite_case3_window(cfg, rayleigh, plan):
    lambdas = LambdaPair.from_snr(cfg.g11, cfg.g12)
    params = EventParams(rayleigh, cfg.gain2_22, lambdas=lambdas)
    return [estimate_event_prob(EVENT_IN_WINDOW, params, plan, name="case3-window")]


def _suite_case3_scaling(cfg, rayleigh, plan):
    scaling = np.log(1.0 / (1.0 - cfg.outage_threshold_secondary)) * rayleigh.mean_gain2
    params = EventParams(rayleigh, cfg.gain2_22, scaling=scaling)
    return [estimate_event_prob(EVENT_SCALING_LE_GAIN, params, plan, name="case3-scaling")]


SUITES = {
    "eq16": _suite_eq16,
    "corollary1": _suite_corollary1,
    "corollary2": _suite_corollary2,
    "corollary3": _suite_corollary3,
    "corollary4": _suite_corollary4,
    "corollary5": _suite_corollary5,
    "corollary6": _suite_corollary6,
    "corollary7": _suite_corollary7,
    "appendix": _suite_appendix,
    "case3-window": _suite_case3_window,
    "case3-scaling": _suite_case3_scaling,
}
SUITE_ALIASES = {
    "primary-outage": "eq16",
    "case1-threshold": "corollary1",
    "case2-threshold": "corollary2",
    "snr-root": "corollary3",
    "mean-floor": "corollary4",
    "case3-overrate": "corollary5",
    "tsmd-case1": "corollary6",
    "tsmd-case2": "corollary7",
    "window-peak": "appendix",
}
SUITE_ALL = "all"


def resolve_suite(name: str) -> str:
    """Registered suite name for ``name``, an alias or ``all``."""
    name = SUITE_ALIASES.get(name, name)
    if name != SUITE_ALL and name not in SUITES:
        raise UcrArgumentError(
            message=f"unknown suite {name!r}, expected one of "
            f"{', '.join([*SUITES, *SUITE_ALIASES])} or all",
            data={"suite": name},
        )
    return name


def run_suite(
    name: str, cfg: ScenarioConfig, rayleigh: RayleighCqi, plan: TrialPlan
) -> List[OutageReport]:
    """Run one named check (or ``all`` of them, in registration order)."""
    cfg.require_partial("run_suite")
    name = resolve_suite(name)
    if name == SUITE_ALL:
        reports = []
        for suite_name, suite in SUITES.items():
            try:
                reports.extend(suite(cfg, rayleigh, plan))
            except UcrPreconditionError as exc:
                LOG.warning("skipping %s: %s", suite_name, exc.message)
        return reports
    return SUITES[name](cfg, rayleigh, plan)
