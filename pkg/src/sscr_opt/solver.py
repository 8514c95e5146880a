"""Dual-price search and sensing-threshold selection for the mixture link.

The secondary link transmits with the uncapped branch power when the
detector misses and with the capped branch power when it fires; the branch
weights follow from the detector operating point and the primary occupancy
prior.  The average-power budget enters through a scalar dual price, found
either by a projected subgradient iteration or by geometric bisection on
the monotone budget curve.  Threshold selection scans a log-spaced grid
whose upper edge is pinned by the detection-probability floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .expectations import ConvergenceError, QuadratureSpec
from .power import (
    PowerPolicy,
    avg_power,
    branch_capacities,
    mixture_weights,
)
from .sensing import (
    DetectorConfig,
    invert_pd,
    prob_detection,
    prob_false_alarm,
)

__all__ = [
    "BracketError",
    "EtaSweepRow",
    "SolveResult",
    "SubgradientSettings",
    "SweepTable",
    "SystemParams",
    "capacity_mixture",
    "bisection_solve",
    "select_eta",
    "subgradient_solve",
    "sweep_eta",
]

_LN2 = math.log(2.0)
_LAMBDA_FLOOR = 1e-12
_MODES = ("p1_only", "mixture")


class BracketError(RuntimeError):
    """The bisection bracket does not straddle the power budget."""


@dataclass(frozen=True)
class SystemParams:
    """Link, detector, and budget parameters in linear units.

    pi1       : prior probability the primary occupies the band
    n0        : noise power at the secondary receiver (watts)
    p_av      : average transmit-power budget (watts)
    i_pk      : peak interference limit at the primary receiver (watts)
    gamma     : primary-to-secondary SNR seen by the detector (linear)
    tau       : sensing duration per frame (seconds)
    fs        : sampling rate of the detector (Hz)
    t_frame   : total frame duration (seconds)
    pd_target : detection-probability floor protecting the primary
    mode      : interference handling of the power policy
    """

    pi1: float = 0.4
    n0: float = 1.0
    p_av: float = 10.0 ** 1.5
    i_pk: float = 1.0
    gamma: float = 0.1
    tau: float = 1e-3
    fs: float = 6e6
    t_frame: float = 0.1
    pd_target: float = 0.9
    mode: str = "p1_only"

    def __post_init__(self) -> None:
        if not (0.0 <= self.pi1 <= 1.0):
            raise ValueError("pi1 must lie in [0, 1]")
        for name in ("n0", "p_av", "i_pk", "fs"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and val > 0.0) or math.isnan(val):
                raise ValueError("%s must be positive" % name)
        if math.isinf(self.p_av) or math.isinf(self.n0) or math.isinf(self.fs):
            raise ValueError("n0, p_av, and fs must be finite")
        if not (math.isfinite(self.gamma) and self.gamma >= 0.0):
            raise ValueError("gamma must be finite and >= 0")
        if not (0.0 < self.tau < self.t_frame):
            raise ValueError("tau must satisfy 0 < tau < t_frame")
        if not math.isfinite(self.t_frame):
            raise ValueError("t_frame must be finite")
        if not (0.0 < self.pd_target < 1.0):
            raise ValueError("pd_target must lie in (0, 1)")
        if self.mode not in _MODES:
            raise ValueError("mode must be one of %s" % (_MODES,))

    @property
    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(n0=self.n0, tau=self.tau, fs=self.fs, gamma=self.gamma)


@dataclass(frozen=True)
class SubgradientSettings:
    """Tuning of the projected subgradient iteration on the dual price.

    step0 = None scales the initial step as lambda_init / p_av.  The budget
    falls roughly inversely in the price, so this makes the first move the
    first-order correction: a relative budget error maps onto a comparable
    relative price move.
    """

    lambda_init: float = 1.0 / _LN2
    step0: float | None = None
    max_iters: int = 5000
    feas_tol: float = 1e-4
    stall_tol: float = 1e-10

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lambda_init) and self.lambda_init > 0.0):
            raise ValueError("lambda_init must be positive")
        if self.step0 is not None and not (math.isfinite(self.step0) and self.step0 > 0.0):
            raise ValueError("step0 must be positive or None")
        if not (isinstance(self.max_iters, int) and self.max_iters >= 10):
            raise ValueError("max_iters must be an integer >= 10")
        for name in ("feas_tol", "stall_tol"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise ValueError("%s must be positive" % name)


@dataclass(frozen=True)
class SolveResult:
    """Solved operating point at a fixed sensing threshold.

    trace holds one (lambda, p_bar, subgradient) triple per iteration;
    feas_residual is |p_bar - p_av| / p_av at the reported lambda_star.
    """

    lambda_star: float
    gamma_s_star: float
    eta: float
    pf: float
    pd: float
    alpha: float
    beta: float
    c0: float
    c1: float
    c_s: float
    p_bar: float
    feas_residual: float
    iterations: int
    converged: bool
    trace: tuple = field(repr=False, default=())


@dataclass(frozen=True)
class EtaSweepRow:
    """One threshold of a sweep; result is None when the solve errored."""

    eta: float
    result: SolveResult | None
    status: str


@dataclass(frozen=True)
class SweepTable:
    """Ordered sweep rows; iteration and len() delegate to the rows."""

    rows: tuple

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)


def capacity_mixture(c0: float, c1: float, pf: float, pd: float, pi1: float) -> float:
    """Mixture capacity: branch capacities weighted by the four detector
    outcomes (free/occupied crossed with missed/fired)."""
    for name, val in (("pf", pf), ("pd", pd), ("pi1", pi1)):
        if not (0.0 <= val <= 1.0):
            raise ValueError("%s must lie in [0, 1]" % name)
    for name, val in (("c0", c0), ("c1", c1)):
        if math.isnan(val) or val < 0.0:
            raise ValueError("%s must be >= 0" % name)
    pi0 = 1.0 - pi1
    return (
        pi0 * (1.0 - pf) * c0
        + pi1 * (1.0 - pd) * c0
        + pi0 * pf * c1
        + pi1 * pd * c1
    )


def _operating_point(params: SystemParams, eta: float):
    cfg = params.detector_config
    pf = prob_false_alarm(eta, cfg)
    pd = prob_detection(eta, cfg)
    alpha, beta = mixture_weights(pf, pd, params.pi1)
    return pf, pd, alpha, beta


def _budget_curve(params: SystemParams, weights, quad: QuadratureSpec):
    def pbar(lam: float) -> float:
        policy = PowerPolicy(lam=lam, i_pk=params.i_pk, mode=params.mode)
        return avg_power(policy, weights, quad, n0=params.n0)

    return pbar


def _finish(params, eta, pf, pd, alpha, beta, lam, pbar, resid, iters, converged, trace, quad):
    policy = PowerPolicy(lam=lam, i_pk=params.i_pk, mode=params.mode)
    c0, c1 = branch_capacities(policy, quad, n0=params.n0)
    c_s = capacity_mixture(c0, c1, pf, pd, params.pi1)
    return SolveResult(
        lambda_star=lam,
        gamma_s_star=lam * _LN2,
        eta=eta,
        pf=pf,
        pd=pd,
        alpha=alpha,
        beta=beta,
        c0=c0,
        c1=c1,
        c_s=c_s,
        p_bar=pbar,
        feas_residual=resid,
        iterations=iters,
        converged=converged,
        trace=tuple(trace),
    )


def subgradient_solve(
    params: SystemParams,
    eta: float,
    settings: SubgradientSettings | None = None,
    *,
    quad: QuadratureSpec | None = None,
) -> SolveResult:
    """Projected subgradient iteration on the dual price of the power budget.

    The step is diminishing (step0 / sqrt(k)), each move is clipped to a
    factor of two around the current price, and the price never drops below
    1e-12.  The best iterate by budget residual is reported; a run that
    exhausts max_iters or stalls returns converged=False rather than raising.
    """
    settings = settings if settings is not None else SubgradientSettings()
    quad = quad if quad is not None else QuadratureSpec()
    pf, pd, alpha, beta = _operating_point(params, eta)
    pbar_at = _budget_curve(params, (alpha, beta), quad)
    step0 = settings.step0
    if step0 is None:
        step0 = settings.lambda_init / params.p_av

    lam = settings.lambda_init
    best_resid = math.inf
    best_lam = lam
    best_pbar = math.nan
    trace = []
    iters = 0
    for k in range(1, settings.max_iters + 1):
        iters = k
        pbar = pbar_at(lam)
        sub = params.p_av - pbar
        resid = abs(sub) / params.p_av
        trace.append((lam, pbar, sub))
        if resid < best_resid:
            best_resid = resid
            best_lam = lam
            best_pbar = pbar
        if resid <= settings.feas_tol:
            break
        step = step0 / math.sqrt(k)
        proposal = lam - step * sub
        proposal = min(max(proposal, 0.5 * lam), 2.0 * lam)
        proposal = max(proposal, _LAMBDA_FLOOR)
        if abs(proposal - lam) <= settings.stall_tol * lam:
            break
        lam = proposal

    converged = best_resid <= settings.feas_tol
    return _finish(
        params, eta, pf, pd, alpha, beta,
        best_lam, best_pbar, best_resid, iters, converged, trace, quad,
    )


def bisection_solve(
    params: SystemParams,
    eta: float,
    *,
    quad: QuadratureSpec | None = None,
    lam_lo: float = 1e-9,
    lam_hi: float = 1e9,
    rel_tol: float = 1e-8,
    max_iters: int = 200,
) -> float:
    """Geometric bisection of the budget curve; returns the dual price.

    Raises BracketError when [lam_lo, lam_hi] does not straddle the budget,
    which includes budgets so large the constraint never binds.
    """
    quad = quad if quad is not None else QuadratureSpec()
    _, _, alpha, beta = _operating_point(params, eta)
    pbar_at = _budget_curve(params, (alpha, beta), quad)
    if not (0.0 < lam_lo < lam_hi):
        raise ValueError("need 0 < lam_lo < lam_hi")

    p_lo = pbar_at(lam_lo)
    p_hi = pbar_at(lam_hi)
    if not (p_lo >= params.p_av >= p_hi):
        raise BracketError(
            "budget curve does not straddle p_av on the bracket: "
            "p_bar(%g) = %g, p_bar(%g) = %g, p_av = %g"
            % (lam_lo, p_lo, lam_hi, p_hi, params.p_av)
        )
    lo, hi = lam_lo, lam_hi
    for _ in range(max_iters):
        mid = math.sqrt(lo * hi)
        p_mid = pbar_at(mid)
        if abs(p_mid - params.p_av) <= rel_tol * params.p_av:
            return mid
        if p_mid > params.p_av:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-15:
            break
    raise ConvergenceError("bisection exhausted its bracket without meeting rel_tol")


def select_eta(
    params: SystemParams,
    settings: SubgradientSettings | None = None,
    eta_grid_size: int = 20,
    *,
    quad: QuadratureSpec | None = None,
    eta_min: float | None = None,
) -> SolveResult:
    """Best threshold on a log grid capped by the detection floor.

    The grid spans (eta_min, eta_max] with eta_max chosen so pd equals
    pd_target exactly; eta_min defaults to eta_max / 4.  Ties in capacity
    resolve toward the larger threshold.  Raises when no grid point yields
    a converged solve.

    Thresholds are solved from eta_max downward so each dual search warm
    starts at the neighboring converged price, which keeps the auto step
    size matched to the local curvature of the budget.
    """
    if not (isinstance(eta_grid_size, int) and eta_grid_size >= 1):
        raise ValueError("eta_grid_size must be an integer >= 1")
    cfg = params.detector_config
    eta_max = invert_pd(params.pd_target, cfg)
    if eta_min is None:
        eta_min = eta_max / 4.0
    if not (0.0 < eta_min < eta_max):
        raise ValueError("eta_min must lie in (0, eta_max)")
    grid = np.geomspace(eta_min, eta_max, eta_grid_size + 1)[1:]
    grid[-1] = eta_max

    best = None
    run_settings = settings if settings is not None else SubgradientSettings()
    for eta in grid[::-1]:
        try:
            res = subgradient_solve(params, float(eta), run_settings, quad=quad)
        except ConvergenceError:
            continue
        if not res.converged:
            continue
        run_settings = replace(run_settings, lambda_init=res.lambda_star)
        if best is None or res.c_s > best.c_s:
            best = res
    if best is None:
        raise ConvergenceError("no threshold on the grid produced a converged solve")
    return best


def sweep_eta(
    params: SystemParams,
    settings: SubgradientSettings | None = None,
    eta_grid=(),
    *,
    quad: QuadratureSpec | None = None,
) -> SweepTable:
    """Solve at each threshold of an ascending grid, one row per point.

    Failures stay in their row (status "no_convergence") so a partial sweep
    still returns every requested threshold in order.  Internally the grid
    is traversed from the largest threshold downward with each dual search
    warm started at the previous converged price; rows come back in grid
    order regardless.
    """
    grid = np.asarray(eta_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("eta_grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(grid)) or np.any(grid <= 0.0):
        raise ValueError("eta_grid values must be finite and positive")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("eta_grid must be strictly increasing")

    rows = []
    run_settings = settings if settings is not None else SubgradientSettings()
    for eta in grid[::-1]:
        try:
            res = subgradient_solve(params, float(eta), run_settings, quad=quad)
        except ConvergenceError:
            rows.append(EtaSweepRow(eta=float(eta), result=None, status="no_convergence"))
            continue
        status = "ok" if res.converged else "no_convergence"
        if res.converged:
            run_settings = replace(run_settings, lambda_init=res.lambda_star)
        rows.append(EtaSweepRow(eta=float(eta), result=res, status=status))
    return SweepTable(rows=tuple(rows[::-1]))
