"""Instantaneous power policies and their fading-averaged aggregates.

The uncapped branch power p0 is classic water-filling against the dual
price on average power; the capped branch p1 additionally respects the
peak-interference limit i_pk over the cross gain g_sp.  Aggregates (average
transmit power, per-branch ergodic capacities, interference diagnostics)
are expectations over the exponential fading laws, evaluated through the
quadrature engine with breakpoints at the water-filling cut-off and at the
onset of the interference cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expectations import (
    FadingState,
    QuadratureSpec,
    _nodes_1d,
    expect_1d,
    expect_2d,
)

__all__ = [
    "BranchPowers",
    "InterferenceReport",
    "PowerPolicy",
    "avg_power",
    "branch_capacities",
    "branch_powers",
    "interference_diagnostics",
    "mixture_weights",
    "waterfill",
]

_LN2 = math.log(2.0)
_MODES = ("p1_only", "mixture")


@dataclass(frozen=True)
class PowerPolicy:
    """Dual price, interference limit, and cap-enforcement mode.

    lam  : dual price on the average-power constraint (per watt, >= 0)
    i_pk : peak interference limit at the primary receiver (linear watts)
    mode : "p1_only" caps only the detected-branch power p1 at i_pk/g_sp;
           "mixture" caps both branches, making the per-state interference
           bound hold surely
    """

    lam: float
    i_pk: float
    mode: str = "p1_only"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise ValueError("lam must be finite and >= 0")
        if math.isnan(self.i_pk) or self.i_pk <= 0.0:
            raise ValueError("i_pk must be positive")
        if self.mode not in _MODES:
            raise ValueError("mode must be one of %s" % (_MODES,))

    @property
    def gamma_cutoff(self) -> float:
        """Cut-off SNR below which the water-filling power is zero."""
        return self.lam * _LN2


@dataclass(frozen=True)
class BranchPowers:
    """Transmit powers for the not-detected (p0) and detected (p1) branches."""

    p0: float
    p1: float


@dataclass(frozen=True)
class InterferenceReport:
    """Aggregate view of the interference delivered to the primary receiver.

    mean           : E[g_sp * (alpha*p0 + beta*p1)]
    violation_prob : probability the per-state mixture exceeds i_pk
    max_ratio      : largest mixture/i_pk ratio observed on the quadrature grid
    """

    mean: float
    violation_prob: float
    max_ratio: float


def waterfill(h, lam: float):
    """Water-filling power (1/(lam*ln2) - 1/h)+ against the dual price lam.

    Accepts a scalar or numpy array of channel gains h >= 0.  lam = 0 is an
    error: the water level would be unbounded.
    """
    if not (math.isfinite(lam) and lam > 0.0):
        raise ValueError("lam must be positive (zero means an unbounded water level)")
    level = 1.0 / (lam * _LN2)
    arr = np.asarray(h, dtype=float)
    if arr.ndim == 0:
        hv = float(arr)
        if math.isnan(hv) or hv < 0.0:
            raise ValueError("h must be >= 0")
        return max(level - 1.0 / hv, 0.0) if hv > 0.0 else 0.0
    with np.errstate(divide="ignore"):
        return np.maximum(level - 1.0 / arr, 0.0)


def branch_powers(state: FadingState, policy: PowerPolicy) -> BranchPowers:
    """Per-state powers for both branches under the policy's mode."""
    p0 = waterfill(state.h, policy.lam)
    cap = policy.i_pk / state.g_sp if state.g_sp > 0.0 else math.inf
    p1 = min(p0, cap)
    if policy.mode == "mixture":
        return BranchPowers(p0=p1, p1=p1)
    return BranchPowers(p0=p0, p1=p1)


def mixture_weights(pf: float, pd: float, pi1: float) -> tuple[float, float]:
    """Branch occupancy weights (alpha, beta) from the detector operating point.

    alpha weights the not-detected branch p0, beta the detected branch p1;
    they sum to one by construction.
    """
    for name, val in (("pf", pf), ("pd", pd), ("pi1", pi1)):
        if not (0.0 <= val <= 1.0):
            raise ValueError("%s must lie in [0, 1]" % name)
    pi0 = 1.0 - pi1
    alpha = pi0 * (1.0 - pf) + pi1 * (1.0 - pd)
    beta = pi0 * pf + pi1 * pd
    return alpha, beta


def _check_weights(weights) -> tuple[float, float]:
    alpha, beta = weights
    for name, val in (("alpha", alpha), ("beta", beta)):
        if not (0.0 <= val <= 1.0):
            raise ValueError("%s must lie in [0, 1]" % name)
    if abs(alpha + beta - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1 within 1e-12")
    return float(alpha), float(beta)


def _require_positive_lam(policy: PowerPolicy) -> None:
    if policy.lam <= 0.0:
        raise ValueError("lam must be positive (zero means an unbounded water level)")


def _h_breakpoints(policy: PowerPolicy) -> tuple[float, ...]:
    """Integration breakpoints in h: the cut-off plus the cap onset layer.

    Just above the cut-off the capped-branch integrands turn on like
    exp(-i_pk/p0(h)); splitting at the gains where p0 reaches i_pk and
    8*i_pk puts panel edges around that layer so the base node count
    resolves it at any cut-off.
    """
    cutoff = policy.gamma_cutoff
    level = 1.0 / cutoff
    bps = [cutoff]
    if math.isfinite(policy.i_pk):
        for p_mark in (policy.i_pk, 8.0 * policy.i_pk):
            if p_mark < level:
                bps.append(1.0 / (level - p_mark))
    return tuple(bps)


def _gstar_breakpoint(policy: PowerPolicy):
    """Inner-axis kink location g* = i_pk/p0(h) of the cap, as a callable."""
    level = 1.0 / policy.gamma_cutoff
    i_pk = policy.i_pk

    def bp(h):
        with np.errstate(divide="ignore"):
            return i_pk / np.maximum(level - 1.0 / h, 0.0)

    return bp


def _f_p0(policy: PowerPolicy):
    level = 1.0 / policy.gamma_cutoff

    def f(h):
        return np.maximum(level - 1.0 / h, 0.0)

    return f


def _f_p1(policy: PowerPolicy):
    level = 1.0 / policy.gamma_cutoff
    i_pk = policy.i_pk

    def f(h, g):
        return np.minimum(np.maximum(level - 1.0 / h, 0.0), i_pk / g)

    return f


def _f_c0(policy: PowerPolicy):
    level = 1.0 / policy.gamma_cutoff

    # 1 + h*p0 = h*level wherever p0 > 0, and 1 elsewhere
    def f(h):
        return np.log2(np.maximum(h * level, 1.0))

    return f


def _f_c1(policy: PowerPolicy):
    level = 1.0 / policy.gamma_cutoff
    i_pk = policy.i_pk

    def f(h, g):
        p1 = np.minimum(np.maximum(level - 1.0 / h, 0.0), i_pk / g)
        return np.log2(1.0 + h * p1)

    return f


def _f_interference(policy: PowerPolicy, alpha: float, beta: float):
    level = 1.0 / policy.gamma_cutoff
    i_pk = policy.i_pk
    mixture = policy.mode == "mixture"

    # g*(alpha*p0 + beta*p1) = alpha*g*p0 + beta*min(g*p0, i_pk); in mixture
    # mode both branches are capped, so the whole mixture is min(g*p0, i_pk).
    def f(h, g):
        t = g * np.maximum(level - 1.0 / h, 0.0)
        capped = np.minimum(t, i_pk)
        if mixture:
            return capped
        return alpha * t + beta * capped

    return f


def _f_violation(policy: PowerPolicy):
    level = 1.0 / policy.gamma_cutoff
    i_pk = policy.i_pk

    # P(g*p0 > i_pk | h) = exp(-i_pk/p0(h)) for exponential g; the zero-power
    # region divides to +inf and exp maps it to 0.
    def f(h):
        with np.errstate(divide="ignore"):
            return np.exp(-i_pk / np.maximum(level - 1.0 / h, 0.0))

    return f


def avg_power(policy: PowerPolicy, weights, spec: QuadratureSpec, *, n0: float = 1.0) -> float:
    """Average transmit power alpha*E[p0] + beta*E[p1] under the policy."""
    alpha, beta = _check_weights(weights)
    _require_positive_lam(policy)
    bps_h = _h_breakpoints(policy)
    if policy.mode == "mixture":
        e_capped = expect_2d(
            _f_p1(policy),
            spec,
            rate_h=n0,
            breakpoints_h=bps_h,
            breakpoints_g=_gstar_breakpoint(policy),
        )
        return alpha * e_capped + beta * e_capped
    e_p0 = 0.0
    if alpha > 0.0:
        e_p0 = expect_1d(_f_p0(policy), spec, rate=n0, breakpoints=(policy.gamma_cutoff,))
    e_p1 = 0.0
    if beta > 0.0:
        e_p1 = expect_2d(
            _f_p1(policy),
            spec,
            rate_h=n0,
            breakpoints_h=bps_h,
            breakpoints_g=_gstar_breakpoint(policy),
        )
    return alpha * e_p0 + beta * e_p1


def branch_capacities(policy: PowerPolicy, spec: QuadratureSpec, *, n0: float = 1.0) -> tuple[float, float]:
    """Ergodic capacities (C0, C1) of the two branches in bits/s/Hz."""
    _require_positive_lam(policy)
    bps_h = _h_breakpoints(policy)
    c1 = expect_2d(
        _f_c1(policy),
        spec,
        rate_h=n0,
        breakpoints_h=bps_h,
        breakpoints_g=_gstar_breakpoint(policy),
    )
    if policy.mode == "mixture":
        return c1, c1
    c0 = expect_1d(_f_c0(policy), spec, rate=n0, breakpoints=(policy.gamma_cutoff,))
    return c0, c1


def interference_diagnostics(
    policy: PowerPolicy, weights, spec: QuadratureSpec, *, n0: float = 1.0
) -> InterferenceReport:
    """Expected interference, cap-violation probability, and grid max ratio."""
    alpha, beta = _check_weights(weights)
    _require_positive_lam(policy)
    bps_h = _h_breakpoints(policy)
    mean = expect_2d(
        _f_interference(policy, alpha, beta),
        spec,
        rate_h=n0,
        breakpoints_h=bps_h,
        breakpoints_g=_gstar_breakpoint(policy),
    )
    if policy.mode == "mixture" or alpha == 0.0:
        violation = 0.0
    else:
        violation = expect_1d(_f_violation(policy), spec, rate=n0, breakpoints=bps_h)
    y_h, _ = _nodes_1d([b * n0 for b in bps_h if 0.0 < b * n0 <= 50.0], spec.nodes_2d)
    y_g, _ = _nodes_1d([], spec.nodes_2d)
    ratios = _f_interference(policy, alpha, beta)(y_h[:, None] / n0, y_g[None, :]) / policy.i_pk
    return InterferenceReport(
        mean=mean,
        violation_prob=violation,
        max_ratio=float(np.max(ratios)) if ratios.size else 0.0,
    )
