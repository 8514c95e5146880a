"""Energy-detection statistics for the spectrum sensor.

Gaussian (central-limit) tail approximations for the false-alarm and
detection probabilities of an N-sample energy detector on complex baseband
samples, plus the threshold inversion used to pin a detection-probability
target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "DetectorConfig",
    "DetectorPoint",
    "InfeasibleThresholdError",
    "invert_pd",
    "detector_point",
    "num_samples",
    "prob_detection",
    "prob_false_alarm",
    "q_function",
    "q_inverse",
]

_SQRT2 = math.sqrt(2.0)


class InfeasibleThresholdError(ValueError):
    """No positive threshold can meet the requested detection probability."""


@dataclass(frozen=True)
class DetectorConfig:
    """Sensing-side parameters.

    n0    : noise power at the detector (linear)
    tau   : sensing duration in seconds
    fs    : sampling rate in Hz
    gamma : received primary-signal SNR at the detector (linear)
    """

    n0: float
    tau: float
    fs: float
    gamma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.n0) and self.n0 > 0.0):
            raise ValueError("n0 must be positive")
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError("tau must be positive")
        if not (math.isfinite(self.fs) and self.fs > 0.0):
            raise ValueError("fs must be positive")
        if not (math.isfinite(self.gamma) and self.gamma >= 0.0):
            raise ValueError("gamma must be >= 0")

    @property
    def n_samples(self) -> int:
        return num_samples(self)


@dataclass(frozen=True)
class DetectorPoint:
    """Detector operating point at one threshold."""

    eta: float
    n_samples: int
    pf: float
    pd: float


def q_function(x: float) -> float:
    """Standard normal tail probability Q(x) = P(Z > x)."""
    return 0.5 * math.erfc(x / _SQRT2)


def _q_inverse_seed(p: float) -> float:
    # Abramowitz & Stegun 26.2.23 rational approximation, |error| < 4.5e-4,
    # applied to min(p, 1-p) and mirrored.
    pp = p if p <= 0.5 else 1.0 - p
    t = math.sqrt(-2.0 * math.log(pp))
    x = t - (2.515517 + t * (0.802853 + t * 0.010328)) / (
        1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308))
    )
    return x if p <= 0.5 else -x


def q_inverse(p: float) -> float:
    """Inverse of q_function on (0, 1).

    Rational-approximation seed refined by guarded Newton steps on
    q_function(x) - p until the residual is below 1e-12 relative.
    """
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie strictly between 0 and 1")
    if p == 0.5:
        return 0.0
    x = _q_inverse_seed(p)
    lo, hi = x - 1.0, x + 1.0  # seed is within 4.5e-4, so the root is inside
    for _ in range(60):
        q = q_function(x)
        err = q - p
        if abs(err) <= 1e-13 * p:
            break
        if err > 0.0:  # Q decreasing: Q(x) > p means root is to the right
            lo = max(lo, x)
        else:
            hi = min(hi, x)
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if pdf > 0.0:
            step = err / pdf
            x_new = x + step
        else:
            x_new = 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if x_new == x:
            break
        x = x_new
    return x


def num_samples(config: DetectorConfig) -> int:
    """Sample count N = tau * fs rounded half-up to the nearest integer.

    Raises if the sensing window is shorter than one sample.
    """
    n = math.floor(config.tau * config.fs + 0.5)
    if n < 1:
        raise ValueError(
            "sensing window shorter than one sample: tau*fs = %g" % (config.tau * config.fs)
        )
    return n


def prob_false_alarm(eta: float, config: DetectorConfig) -> float:
    """False-alarm probability Q((eta/n0 - 1) * sqrt(N))."""
    if not (math.isfinite(eta) and eta > 0.0):
        raise ValueError("eta must be positive")
    n = num_samples(config)
    return q_function((eta / config.n0 - 1.0) * math.sqrt(n))


def prob_detection(eta: float, config: DetectorConfig) -> float:
    """Detection probability Q((eta/n0 - gamma - 1) * sqrt(N / (2 gamma + 1)))."""
    if not (math.isfinite(eta) and eta > 0.0):
        raise ValueError("eta must be positive")
    n = num_samples(config)
    arg = (eta / config.n0 - config.gamma - 1.0) * math.sqrt(n / (2.0 * config.gamma + 1.0))
    return q_function(arg)


def invert_pd(pd_target: float, config: DetectorConfig) -> float:
    """Largest threshold whose detection probability still reaches pd_target.

    eta_max = n0 * (gamma + 1 + Qinv(pd_target) * sqrt((2 gamma + 1) / N)).
    Raises InfeasibleThresholdError if no positive threshold qualifies.
    """
    if not (0.0 < pd_target < 1.0):
        raise ValueError("pd_target must lie strictly between 0 and 1")
    n = num_samples(config)
    eta = config.n0 * (
        config.gamma
        + 1.0
        + q_inverse(pd_target) * math.sqrt((2.0 * config.gamma + 1.0) / n)
    )
    if eta <= 0.0:
        raise InfeasibleThresholdError(
            "detection target %g is unreachable with N=%d samples" % (pd_target, n)
        )
    return eta


def detector_point(eta: float, config: DetectorConfig) -> DetectorPoint:
    """Bundle (eta, N, pf, pd) for one threshold."""
    return DetectorPoint(
        eta=eta,
        n_samples=num_samples(config),
        pf=prob_false_alarm(eta, config),
        pd=prob_detection(eta, config),
    )
