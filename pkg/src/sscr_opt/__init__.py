"""Joint power allocation and sensing-threshold selection for a
spectrum-sharing secondary link.

The library models an energy-detecting secondary user that transmits with
one of two powers depending on the sensing outcome, allocates both powers
by water-filling against a dual price on the average-power budget, and
selects the detection threshold maximizing mixture capacity under a
detection-probability floor.  Monte Carlo samplers and a lattice dynamic
program provide independent checks of every analytic quantity.
"""

from .expectations import (
    ConvergenceError,
    FadingState,
    QuadratureSpec,
    expect_1d,
    expect_2d,
)
from .oracles import (
    CapacityEstimate,
    DetectorEstimate,
    RngSpec,
    fading_lattice,
    grid_oracle,
    mc_capacity,
    mc_detector,
    solve_on_lattice,
)
from .power import (
    BranchPowers,
    InterferenceReport,
    PowerPolicy,
    avg_power,
    branch_capacities,
    branch_powers,
    interference_diagnostics,
    mixture_weights,
    waterfill,
)
from .sensing import (
    DetectorConfig,
    DetectorPoint,
    InfeasibleThresholdError,
    detector_point,
    invert_pd,
    num_samples,
    prob_detection,
    prob_false_alarm,
    q_function,
    q_inverse,
)
from .solver import (
    BracketError,
    EtaSweepRow,
    SolveResult,
    SubgradientSettings,
    SweepTable,
    SystemParams,
    bisection_solve,
    capacity_mixture,
    select_eta,
    subgradient_solve,
    sweep_eta,
)
from .throughput import (
    TauSweepRow,
    ThroughputPoint,
    sweep_tau,
    throughput,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "BranchPowers",
    "CapacityEstimate",
    "ConvergenceError",
    "DetectorConfig",
    "DetectorEstimate",
    "DetectorPoint",
    "EtaSweepRow",
    "FadingState",
    "InfeasibleThresholdError",
    "InterferenceReport",
    "PowerPolicy",
    "QuadratureSpec",
    "RngSpec",
    "SolveResult",
    "SubgradientSettings",
    "SweepTable",
    "SystemParams",
    "TauSweepRow",
    "ThroughputPoint",
    "avg_power",
    "bisection_solve",
    "branch_capacities",
    "branch_powers",
    "capacity_mixture",
    "detector_point",
    "expect_1d",
    "expect_2d",
    "fading_lattice",
    "grid_oracle",
    "interference_diagnostics",
    "invert_pd",
    "mc_capacity",
    "mc_detector",
    "mixture_weights",
    "num_samples",
    "prob_detection",
    "prob_false_alarm",
    "q_function",
    "q_inverse",
    "select_eta",
    "solve_on_lattice",
    "subgradient_solve",
    "sweep_eta",
    "sweep_tau",
    "throughput",
    "waterfill",
    "__version__",
]
