"""Frame throughput: capacity scaled by the data fraction of the frame.

Each frame of length t_frame spends tau sensing and the remainder carrying
data, so the throughput is ((t_frame - tau) / t_frame) * c_s.  Longer
sensing sharpens the detector (lower false-alarm rate at a fixed detection
floor, hence more capacity) but shrinks the data fraction; sweeping tau
exposes the interior optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .expectations import ConvergenceError, QuadratureSpec
from .sensing import InfeasibleThresholdError, invert_pd
from .solver import (
    SolveResult,
    SubgradientSettings,
    SweepTable,
    SystemParams,
    subgradient_solve,
)

__all__ = [
    "TauSweepRow",
    "ThroughputPoint",
    "sweep_tau",
    "throughput",
]


@dataclass(frozen=True)
class ThroughputPoint:
    """Operating point of one sensing duration.

    eta_star is the threshold meeting the detection floor with equality;
    xi_s is the throughput, never exceeding the capacity c_s.
    """

    tau: float
    n_samples: int
    eta_star: float
    pf: float
    c_s: float
    xi_s: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.xi_s <= self.c_s * (1.0 + 1e-12)):
            raise ValueError("xi_s must lie in [0, c_s]")


@dataclass(frozen=True)
class TauSweepRow:
    """One sensing duration of a sweep.

    point and result are None when the detection floor is infeasible at
    this tau; status is "ok", "no_convergence", or "infeasible".
    """

    tau: float
    n_samples: int
    point: ThroughputPoint | None
    feasible: bool
    status: str
    result: SolveResult | None


def throughput(c_s: float, tau: float, t_frame: float) -> float:
    """Throughput ((t_frame - tau) / t_frame) * c_s of one frame."""
    if math.isnan(c_s) or c_s < 0.0:
        raise ValueError("c_s must be >= 0")
    if not (math.isfinite(t_frame) and t_frame > 0.0):
        raise ValueError("t_frame must be positive")
    if not (0.0 <= tau <= t_frame):
        raise ValueError("tau must lie in [0, t_frame]")
    return ((t_frame - tau) / t_frame) * c_s


def sweep_tau(
    params: SystemParams,
    settings: SubgradientSettings | None = None,
    tau_grid=(),
    pd_target: float | None = None,
    *,
    quad: QuadratureSpec | None = None,
):
    """Solve at each sensing duration; returns (table, best_row).

    At every tau the threshold is pinned to invert_pd(pd_target), making
    the detection floor tight.  Infeasible or non-converged durations stay
    in their rows; the best row maximizes xi_s over converged rows with
    ties toward the smaller tau, and is None when no row converged.
    Raises InfeasibleThresholdError when every tau is infeasible.  Each
    dual search warm starts at the previous converged price.
    """
    grid = np.asarray(tau_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("tau_grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(grid)):
        raise ValueError("tau_grid values must be finite")
    if np.any(grid <= 0.0) or np.any(grid >= params.t_frame):
        raise ValueError("tau_grid values must satisfy 0 < tau < t_frame")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("tau_grid must be strictly increasing")
    if pd_target is None:
        pd_target = params.pd_target

    # fail fast if any duration is shorter than one detector sample
    per_tau = [replace(params, tau=float(t), pd_target=pd_target) for t in grid]
    n_per_tau = [p.detector_config.n_samples for p in per_tau]

    rows = []
    best = None
    run_settings = settings if settings is not None else SubgradientSettings()
    for tau, p_tau, n in zip(grid, per_tau, n_per_tau):
        tau = float(tau)
        try:
            eta = invert_pd(pd_target, p_tau.detector_config)
        except InfeasibleThresholdError:
            rows.append(TauSweepRow(
                tau=tau, n_samples=n, point=None,
                feasible=False, status="infeasible", result=None,
            ))
            continue
        try:
            res = subgradient_solve(p_tau, eta, run_settings, quad=quad)
        except ConvergenceError:
            rows.append(TauSweepRow(
                tau=tau, n_samples=n, point=None,
                feasible=True, status="no_convergence", result=None,
            ))
            continue
        xi = throughput(res.c_s, tau, params.t_frame)
        point = ThroughputPoint(
            tau=tau, n_samples=n, eta_star=eta,
            pf=res.pf, c_s=res.c_s, xi_s=xi,
        )
        status = "ok" if res.converged else "no_convergence"
        if res.converged:
            run_settings = replace(run_settings, lambda_init=res.lambda_star)
        row = TauSweepRow(
            tau=tau, n_samples=n, point=point,
            feasible=True, status=status, result=res,
        )
        rows.append(row)
        if status == "ok" and (best is None or xi > best.point.xi_s):
            best = row

    if all(not row.feasible for row in rows):
        raise InfeasibleThresholdError(
            "the detection floor is infeasible at every tau in the grid"
        )
    return SweepTable(rows=tuple(rows)), best
