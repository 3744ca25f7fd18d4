"""Capacity arithmetic and rate regions of the two-user Gaussian interference channel"""

import logging
from dataclasses import dataclass, fields, replace
from typing import List, Optional, Tuple

import numpy as np

LOG = logging.getLogger(__name__)

LABEL_STRONG = "I"
LABEL_NOISE = "II"
LABEL_ONESIDED = "III"

# tolerance used when deciding whether a rate pair sits on a region boundary
BOUNDARY_TOL = 1e-9


class UcrError(Exception):
    def __init__(self, message="UCR planner error", status=1, data=None):
        self.message = message
        self.status = status
        self.data = data
        super().__init__(self.message)


class UcrDomainError(UcrError, ValueError):
    def __init__(self, message="Value outside its domain", status=1, data=None):
        super().__init__(message, status, data)


class UcrPreconditionError(UcrError):
    def __init__(self, message="Operation precondition not met", status=1, data=None):
        super().__init__(message, status, data)


class UcrSingularityError(UcrError, ZeroDivisionError):
    def __init__(self, message="Quantity is unbounded", status=1, data=None):
        super().__init__(message, status, data)


class UcrDegenerateLinkError(UcrError):
    def __init__(self, message="Degenerate secondary link", status=1, data=None):
        super().__init__(message, status, data)


class UcrArgumentError(UcrError, ValueError):
    def __init__(self, message="Invalid argument", status=1, data=None):
        super().__init__(message, status, data)


def _finite_nonnegative(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise UcrDomainError(
            message=f"{name} must be finite and non-negative, got {value!r}",
            data={"field": name, "value": value},
        )
    return arr


def _scalar_or_array(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def capacity(x):
    """Shannon capacity log2(1 + x) in bit/s/Hz of a linear SNR (scalar or array)."""
    arr = _finite_nonnegative("snr", x)
    return _scalar_or_array(np.log1p(arr) / np.log(2.0))


def snr(power, gain2, n0):
    """Instantaneous SNR power * |a|^2 / n0."""
    if not np.all(np.asarray(n0, dtype=float) > 0):
        raise UcrDomainError(
            message=f"noise level must be positive, got {n0!r}",
            data={"field": "n0", "value": n0},
        )
    p = _finite_nonnegative("power", power)
    g = _finite_nonnegative("gain2", gain2)
    return _scalar_or_array(p * g / n0)


def db_to_linear(db):
    return _scalar_or_array(np.power(10.0, np.asarray(db, dtype=float) / 10.0))


def linear_to_db(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise UcrDomainError(
            message=f"linear ratio must be positive to express in dB, got {x!r}",
            data={"value": x},
        )
    return _scalar_or_array(10.0 * np.log10(arr))


@dataclass(frozen=True)
class ScenarioConfig:
    """Deterministic world state of the two-user underlay link.

    ``gain2_21`` left as ``None`` marks the partial-CQI world, where only the
    Rayleigh mean of the Tx2->Rx1 squared gain is known (``mean_gain2`` or a
    database lookup supplies it).
    """

    gain2_11: float
    gain2_12: float
    gain2_22: float
    p1: float
    p2_local_max: float
    n0: float = 1.0
    rho: float = 0.0
    gain2_21: Optional[float] = None
    outage_threshold_primary: float = 0.1
    outage_threshold_secondary: float = 0.1
    epsilon: float = 0.9
    high_snr: bool = False
    mean_gain2: Optional[float] = None
    scaling: Optional[float] = None

    def __post_init__(self):
        for name in ("gain2_11", "gain2_12", "gain2_22"):
            _finite_nonnegative(name, getattr(self, name))
        if self.gain2_21 is not None:
            _finite_nonnegative("gain2_21", self.gain2_21)
        if self.mean_gain2 is not None:
            _finite_nonnegative("mean_gain2", self.mean_gain2)
        for name in ("p1", "p2_local_max", "n0"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise UcrDomainError(
                    message=f"{name} must be positive, got {value!r}",
                    data={"field": name, "value": value},
                )
        if not 0.0 <= self.rho < 1.0:
            raise UcrDomainError(
                message=f"rho must lie in [0, 1), got {self.rho!r}",
                data={"field": "rho", "value": self.rho},
            )
        for name in ("outage_threshold_primary", "outage_threshold_secondary"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise UcrDomainError(
                    message=f"{name} must lie in (0, 1), got {value!r}",
                    data={"field": name, "value": value},
                )
        # below one half, Cases 1 and 2 could overlap with no stated precedence
        if not 0.5 < self.epsilon < 1.0:
            raise UcrDomainError(
                message=f"epsilon must lie in (0.5, 1), got {self.epsilon!r}",
                data={"field": "epsilon", "value": self.epsilon},
            )
        if self.scaling is not None and not (
            np.isfinite(self.scaling) and self.scaling > 0
        ):
            raise UcrDomainError(
                message=f"scaling must be positive, got {self.scaling!r}",
                data={"field": "scaling", "value": self.scaling},
            )

    @property
    def full_cqi(self) -> bool:
        return self.gain2_21 is not None

    @property
    def g11(self) -> float:
        return snr(self.p1, self.gain2_11, self.n0)

    @property
    def g12(self) -> float:
        return snr(self.p1, self.gain2_12, self.n0)

    def snr_view(self, p2: Optional[float] = None, mean_gain2: Optional[float] = None):
        """SNRs seen with the secondary transmitting at ``p2`` (local cap by default)."""
        p2 = self.p2_local_max if p2 is None else p2
        g22 = snr(p2, self.gain2_22, self.n0)
        if self.full_cqi:
            return SnrView(
                g11=self.g11,
                g12=self.g12,
                g22=g22,
                g21=snr(p2, self.gain2_21, self.n0),
            )
        mean = self.mean_gain2 if mean_gain2 is None else mean_gain2
        if mean is None:
            raise UcrPreconditionError(
                message="Partial-CQI view needs the Rayleigh mean of |a21|^2",
                data={"field": "mean_gain2"},
            )
        return SnrView(
            g11=self.g11, g12=self.g12, g22=g22, gbar21=snr(p2, mean, self.n0)
        )

    def require_full(self, operation: str):
        if not self.full_cqi:
            raise UcrPreconditionError(
                message=f"{operation} requires full CQI (gain2_21 must be known)",
                data={"operation": operation},
            )

    def require_partial(self, operation: str):
        if self.full_cqi:
            raise UcrPreconditionError(
                message=f"{operation} requires partial CQI (gain2_21 must be absent)",
                data={"operation": operation},
            )

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class SnrView:
    g11: float
    g12: float
    g22: float
    g21: Optional[float] = None
    gbar21: Optional[float] = None

    def __post_init__(self):
        for name in ("g11", "g12", "g22", "g21", "gbar21"):
            value = getattr(self, name)
            if value is not None:
                _finite_nonnegative(name, value)
        if (self.g21 is None) == (self.gbar21 is None):
            raise UcrDomainError(
                message="exactly one of g21 (full CQI) or gbar21 (partial CQI) is required",
                data={"g21": self.g21, "gbar21": self.gbar21},
            )

    @property
    def full_cqi(self) -> bool:
        return self.g21 is not None

    def gain(self, tx: int, rx: int) -> float:
        """SNR of the Tx``tx`` -> Rx``rx`` link."""
        value = {
            (1, 1): self.g11,
            (1, 2): self.g12,
            (2, 1): self.g21,
            (2, 2): self.g22,
        }[(tx, rx)]
        if value is None:
            raise UcrPreconditionError(
                message="the Tx2->Rx1 SNR is unknown under partial CQI",
                data={"link": (tx, rx)},
            )
        return value

    def require_full(self, operation: str):
        if not self.full_cqi:
            raise UcrPreconditionError(
                message=f"{operation} requires full CQI (g21 must be known)",
                data={"operation": operation},
            )


@dataclass(frozen=True)
class RateRegion:
    """Achievable (R1, R2) region as constraints ``c1*R1 + c2*R2 < bound``.

    Bounds are suprema: operating exactly on a bound is the limit case.
    """

    constraints: Tuple[Tuple[float, float, float], ...]
    label: str

    def __post_init__(self):
        for c1, c2, bound in self.constraints:
            if c1 not in (0, 1) or c2 not in (0, 1) or (c1 == 0 and c2 == 0):
                raise UcrDomainError(
                    message=f"constraint coefficients must be 0/1, got ({c1}, {c2})",
                    data={"constraint": (c1, c2, bound)},
                )
            if bound < 0:
                raise UcrDomainError(
                    message=f"constraint bound must be non-negative, got {bound}",
                    data={"constraint": (c1, c2, bound)},
                )
        if self.label == LABEL_STRONG and self._bound(1, 1) is None:
            raise UcrDomainError(message="region I must carry a sum-rate constraint")
        if self.label == LABEL_NOISE:
            singles = [c for c in self.constraints if c[0] + c[1] == 1]
            if len(singles) != 2 or len(self.constraints) != 2:
                raise UcrDomainError(
                    message="region II has exactly two single-rate constraints"
                )

    def _bound(self, c1: int, c2: int) -> Optional[float]:
        matching = [b for a1, a2, b in self.constraints if (a1, a2) == (c1, c2)]
        return min(matching) if matching else None

    @property
    def r1_bound(self) -> float:
        bound = self._bound(1, 0)
        return np.inf if bound is None else bound

    @property
    def r2_bound(self) -> float:
        bound = self._bound(0, 1)
        return np.inf if bound is None else bound

    @property
    def sum_bound(self) -> float:
        bound = self._bound(1, 1)
        return np.inf if bound is None else bound

    def max_sum_rate(self) -> float:
        """Largest R1 + R2 over the region's closure."""
        return float(min(self.sum_bound, self.r1_bound + self.r2_bound))

    def contains(self, r1: float, r2: float, tol: float = BOUNDARY_TOL) -> bool:
        if r1 < -tol or r2 < -tol:
            return False
        return all(c1 * r1 + c2 * r2 <= bound + tol for c1, c2, bound in self.constraints)

    def vertices(self) -> List[Tuple[float, float]]:
        """Corner points of the closed region in the non-negative quadrant."""
        lines = [(float(c1), float(c2), float(b)) for c1, c2, b in self.constraints]
        lines += [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)]
        points = set()
        for i, (a1, a2, b) in enumerate(lines):
            for c1, c2, d in lines[i + 1 :]:
                matrix = np.array([[a1, a2], [c1, c2]])
                if abs(np.linalg.det(matrix)) < 1e-12:
                    continue
                r1, r2 = np.linalg.solve(matrix, np.array([b, d]))
                if self.contains(r1, r2):
                    points.add((round(max(r1, 0.0), 12), round(max(r2, 0.0), 12)))
        return sorted(points)


def region_strong(snr_view: SnrView) -> RateRegion:
    """Compound-MAC region: both receivers decode both messages."""
    snr_view.require_full("region_strong")
    g11, g12, g21, g22 = snr_view.g11, snr_view.g12, snr_view.g21, snr_view.g22
    return RateRegion(
        constraints=(
            (1, 0, capacity(g11)),
            (0, 1, capacity(g22)),
            (1, 1, min(capacity(g21 + g11), capacity(g12 + g22))),
        ),
        label=LABEL_STRONG,
    )


def region_noise(snr_view: SnrView) -> RateRegion:
    """Both receivers treat the cross message as noise."""
    snr_view.require_full("region_noise")
    g11, g12, g21, g22 = snr_view.g11, snr_view.g12, snr_view.g21, snr_view.g22
    return RateRegion(
        constraints=(
            (1, 0, capacity(g11 / (g21 + 1.0))),
            (0, 1, capacity(g22 / (g12 + 1.0))),
        ),
        label=LABEL_NOISE,
    )


def region_onesided(snr_view: SnrView, decoder: int, noise_treated: int) -> RateRegion:
    """Receiver ``decoder`` decodes both messages, ``noise_treated`` decodes only its own."""
    if decoder == noise_treated or {decoder, noise_treated} != {1, 2}:
        raise UcrArgumentError(
            message="decoder and noise-treating user must be 1 and 2 in some order, "
            f"got ({decoder}, {noise_treated})",
            data={"decoder": decoder, "noise_treated": noise_treated},
        )
    snr_view.require_full("region_onesided")
    i, j = decoder, noise_treated
    g = snr_view.gain
    single_j = capacity(g(j, j) / (g(i, j) + 1.0))
    single_i = capacity(g(i, i))
    both = capacity(g(i, i) + g(j, i))
    r1_single, r2_single = (single_i, single_j) if i == 1 else (single_j, single_i)
    return RateRegion(
        constraints=((1, 0, r1_single), (0, 1, r2_single), (1, 1, both)),
        label=LABEL_ONESIDED,
    )


def all_regions(snr_view: SnrView) -> List[RateRegion]:
    return [
        region_strong(snr_view),
        region_noise(snr_view),
        region_onesided(snr_view, 1, 2),
        region_onesided(snr_view, 2, 1),
    ]


def max_sum_rate(snr_view: SnrView) -> float:
    """max(R1 + R2) by comparing regions I, II and both orientations of III."""
    snr_view.require_full("max_sum_rate")
    best = max(region.max_sum_rate() for region in all_regions(snr_view))
    LOG.debug("max sum rate %.6f over %s", best, snr_view)
    return best
