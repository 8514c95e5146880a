"""Independent checks: Monte Carlo estimators and a lattice optimizer.

The detector sampler draws the energy statistic from its exact law (a
scaled Gamma under noise only, a scaled noncentral chi-square with a
primary signal), or literally averages complex baseband samples.  The
capacity sampler estimates the mixture capacity, average power, and
interference along simulated fading draws.  The lattice optimizer solves
the discretized allocation problem two ways: exactly by dynamic
programming over budget bins, and by dual pricing on the same lattice,
giving a solver-independent reference for the capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .power import PowerPolicy, mixture_weights, waterfill
from .sensing import prob_detection, prob_false_alarm
from .solver import SystemParams

__all__ = [
    "CapacityEstimate",
    "DetectorEstimate",
    "RngSpec",
    "fading_lattice",
    "grid_oracle",
    "mc_capacity",
    "mc_detector",
    "solve_on_lattice",
]

_MC_DETECTOR_MIN = 10_000
_MC_CAPACITY_MIN = 100_000
_FADING_GRID_MAX = 12
_POWER_LEVELS_MAX = 32


@dataclass(frozen=True)
class RngSpec:
    """Seed and stream count; streams split the trials deterministically."""

    seed: int
    streams: int = 4

    def __post_init__(self) -> None:
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ValueError("seed must be an integer in [0, 2**64)")
        if not (isinstance(self.streams, int) and self.streams >= 1):
            raise ValueError("streams must be an integer >= 1")


@dataclass(frozen=True)
class DetectorEstimate:
    """Empirical false-alarm and detection rates with binomial stderrs."""

    pf_hat: float
    pd_hat: float
    stderr_pf: float
    stderr_pd: float


@dataclass(frozen=True)
class CapacityEstimate:
    """Sample means over fading draws with their standard errors."""

    c_s_hat: float
    p_bar_hat: float
    interference_mean_hat: float
    violation_rate: float
    stderr_c_s: float
    stderr_p_bar: float
    stderr_interference: float
    stderr_violation: float


def _stream_counts(trials: int, streams: int) -> list[int]:
    base, rem = divmod(trials, streams)
    return [base + (1 if i < rem else 0) for i in range(streams)]


def _stream_rngs(rng: RngSpec):
    root = np.random.SeedSequence(rng.seed)
    return [np.random.default_rng(child) for child in root.spawn(rng.streams)]


def mc_detector(eta, config, trials: int, rng: RngSpec, *, method: str = "statistic") -> DetectorEstimate:
    """Empirical detector operating point at threshold eta.

    method "statistic" draws the averaged energy from its exact sampling
    law; "samples" builds each trial from complex baseband samples with a
    uniformly random signal phase per sample.  Both split the trials over
    rng.streams in a fixed order, so results are reproducible bit for bit.
    """
    if not (isinstance(trials, int) and trials >= _MC_DETECTOR_MIN):
        raise ValueError("trials must be an integer >= %d" % _MC_DETECTOR_MIN)
    if method not in ("statistic", "samples"):
        raise ValueError('method must be "statistic" or "samples"')
    eta = float(eta)
    if not (math.isfinite(eta) and eta > 0.0):
        raise ValueError("eta must be finite and positive")
    n = config.n_samples
    k0 = 0
    k1 = 0
    for m, gen in zip(_stream_counts(trials, rng.streams), _stream_rngs(rng)):
        if m == 0:
            continue
        if method == "statistic":
            t0 = gen.gamma(shape=n, scale=config.n0 / n, size=m)
            k0 += int(np.count_nonzero(t0 > eta))
            if config.gamma > 0.0:
                t1 = gen.noncentral_chisquare(2 * n, 2 * n * config.gamma, size=m)
            else:
                t1 = gen.chisquare(2 * n, size=m)
            k1 += int(np.count_nonzero(t1 * (config.n0 / (2 * n)) > eta))
        else:
            sig = math.sqrt(config.n0 / 2.0)
            amp = math.sqrt(config.gamma * config.n0)
            chunk = max(1, 4_000_000 // n)
            done = 0
            while done < m:
                c = min(chunk, m - done)
                wr = gen.normal(0.0, sig, (c, n))
                wi = gen.normal(0.0, sig, (c, n))
                t0 = np.mean(wr * wr + wi * wi, axis=1)
                k0 += int(np.count_nonzero(t0 > eta))
                ph = gen.uniform(0.0, 2.0 * math.pi, (c, n))
                xr = amp * np.cos(ph) + gen.normal(0.0, sig, (c, n))
                xi = amp * np.sin(ph) + gen.normal(0.0, sig, (c, n))
                t1 = np.mean(xr * xr + xi * xi, axis=1)
                k1 += int(np.count_nonzero(t1 > eta))
                done += c
    pf_hat = k0 / trials
    pd_hat = k1 / trials
    return DetectorEstimate(
        pf_hat=pf_hat,
        pd_hat=pd_hat,
        stderr_pf=math.sqrt(pf_hat * (1.0 - pf_hat) / trials),
        stderr_pd=math.sqrt(pd_hat * (1.0 - pd_hat) / trials),
    )


def mc_capacity(params: SystemParams, policy: PowerPolicy, weights, trials: int, rng: RngSpec) -> CapacityEstimate:
    """Sample-mean estimates of capacity, power, and interference.

    Fading draws are exponential (h at rate n0, g_sp at rate 1); each draw
    contributes the branch-weighted rate, transmit power, delivered
    interference, and a cap-violation indicator.
    """
    if not (isinstance(trials, int) and trials >= _MC_CAPACITY_MIN):
        raise ValueError("trials must be an integer >= %d" % _MC_CAPACITY_MIN)
    alpha, beta = weights
    for name, val in (("alpha", alpha), ("beta", beta)):
        if not (0.0 <= val <= 1.0):
            raise ValueError("%s must lie in [0, 1]" % name)
    if abs(alpha + beta - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1 within 1e-12")

    sums = np.zeros(4)
    sqs = np.zeros(4)
    for m, gen in zip(_stream_counts(trials, rng.streams), _stream_rngs(rng)):
        if m == 0:
            continue
        h = gen.exponential(1.0 / params.n0, m)
        gsp = gen.exponential(1.0, m)
        p0 = waterfill(h, policy.lam)
        with np.errstate(divide="ignore"):
            p1 = np.minimum(p0, policy.i_pk / gsp)
        # interference is capped in the product domain so the cap is exact:
        # g * min(p, i/g) can land one ulp above i_pk, min(g*p, i_pk) cannot
        t = gsp * p0
        capped = np.minimum(t, policy.i_pk)
        if policy.mode == "mixture":
            p0 = p1
            intf = capped
        else:
            intf = alpha * t + beta * capped
        rate = alpha * np.log2(1.0 + h * p0) + beta * np.log2(1.0 + h * p1)
        power = alpha * p0 + beta * p1
        vio = (intf > policy.i_pk).astype(float)
        for idx, arr in enumerate((rate, power, intf, vio)):
            sums[idx] += float(np.sum(arr))
            sqs[idx] += float(np.sum(arr * arr))

    means = sums / trials
    variances = np.maximum(sqs - trials * means * means, 0.0) / (trials - 1)
    stderrs = np.sqrt(variances / trials)
    return CapacityEstimate(
        c_s_hat=means[0],
        p_bar_hat=means[1],
        interference_mean_hat=means[2],
        violation_rate=means[3],
        stderr_c_s=stderrs[0],
        stderr_p_bar=stderrs[1],
        stderr_interference=stderrs[2],
        stderr_violation=stderrs[3],
    )


def fading_lattice(size: int, rate: float):
    """Equal-mass exponential bins with conditional-mean representatives.

    Returns (points, masses): bin edges split the distribution into `size`
    equal-probability cells; each point is the exact conditional mean of
    its cell, so piecewise-constant policies average without grid bias.
    """
    if not (isinstance(size, int) and size >= 1):
        raise ValueError("size must be an integer >= 1")
    if not (math.isfinite(rate) and rate > 0.0):
        raise ValueError("rate must be positive")
    probs = np.arange(size + 1) / size
    edges = -np.log1p(-probs[:-1]) / rate
    points = np.empty(size)
    for k in range(size - 1):
        a, b = edges[k], edges[k + 1]
        ea, eb = math.exp(-rate * a), math.exp(-rate * b)
        points[k] = (a * ea - b * eb + (ea - eb) / rate) / (ea - eb)
    points[size - 1] = edges[size - 1] + 1.0 / rate
    masses = np.full(size, 1.0 / size)
    return points, masses


def _lattice_states(params: SystemParams, eta: float, fading_grid_size: int, power_levels: int, power_max):
    """Shared discretization: per-state (cost, value) arrays over power pairs.

    Masses are folded into both arrays, so totals are plain sums over the
    chosen pair of every state.
    """
    if not (isinstance(fading_grid_size, int) and 1 <= fading_grid_size <= _FADING_GRID_MAX):
        raise ValueError("fading_grid_size must be an integer in [1, %d]" % _FADING_GRID_MAX)
    if not (isinstance(power_levels, int) and 2 <= power_levels <= _POWER_LEVELS_MAX):
        raise ValueError("power_levels must be an integer in [2, %d]" % _POWER_LEVELS_MAX)
    cfg = params.detector_config
    pf = prob_false_alarm(eta, cfg)
    pd = prob_detection(eta, cfg)
    alpha, beta = mixture_weights(pf, pd, params.pi1)
    p_max = float(power_max) if power_max is not None else 6.0 * params.p_av
    if not (math.isfinite(p_max) and p_max > 0.0):
        raise ValueError("power_max must be positive")

    h_pts, h_mass = fading_lattice(fading_grid_size, params.n0)
    g_pts, g_mass = fading_lattice(fading_grid_size, 1.0)
    states = []
    for i, h in enumerate(h_pts):
        for j, g in enumerate(g_pts):
            m = h_mass[i] * g_mass[j]
            cap = min(params.i_pk / g, p_max)
            capped = np.linspace(0.0, cap, power_levels)
            if params.mode == "mixture":
                cost = m * capped
                value = m * np.log2(1.0 + h * capped)
            else:
                free = np.linspace(0.0, p_max, power_levels)
                a, b = np.meshgrid(free, capped, indexing="ij")
                a, b = a.ravel(), b.ravel()
                cost = m * (alpha * a + beta * b)
                value = m * (alpha * np.log2(1.0 + h * a) + beta * np.log2(1.0 + h * b))
            states.append((cost, value))
    return states


def grid_oracle(
    params: SystemParams,
    eta: float,
    fading_grid_size: int = 8,
    power_levels: int = 16,
    *,
    budget_bins: int = 20_000,
    power_max: float | None = None,
) -> float:
    """Exact optimum of the discretized allocation by dynamic programming.

    Fading is quantized to equal-mass cells, powers to linspace levels, and
    the budget to `budget_bins` bins with costs rounded up, so the reported
    capacity is attained by an assignment whose true average power is
    within the budget.
    """
    if not (isinstance(budget_bins, int) and budget_bins >= 100):
        raise ValueError("budget_bins must be an integer >= 100")
    states = _lattice_states(params, eta, fading_grid_size, power_levels, power_max)
    delta = params.p_av / budget_bins
    dp = np.full(budget_bins + 1, -np.inf)
    dp[0] = 0.0
    for cost, value in states:
        bins = np.ceil(cost / delta - 1e-12).astype(np.int64)
        keep = bins <= budget_bins
        bins, vals = bins[keep], value[keep]
        condensed = np.full(budget_bins + 1, -np.inf)
        np.maximum.at(condensed, bins, vals)
        occupied = np.flatnonzero(np.isfinite(condensed))
        ndp = np.full(budget_bins + 1, -np.inf)
        for b in occupied:
            v = condensed[b]
            if b == 0:
                np.maximum(ndp, dp + v, out=ndp)
            else:
                np.maximum(ndp[b:], dp[:-b] + v, out=ndp[b:])
        dp = ndp
    best = float(np.max(dp))
    if not math.isfinite(best):
        raise ValueError("no lattice assignment satisfies the budget")
    return best


def solve_on_lattice(
    params: SystemParams,
    eta: float,
    fading_grid_size: int = 8,
    power_levels: int = 16,
    *,
    power_max: float | None = None,
    lam_lo: float = 1e-9,
    lam_hi: float = 1e9,
) -> tuple[float, float]:
    """Dual-priced optimum on the same lattice; returns (capacity, lam).

    Each state independently picks the pair maximizing value - lam * cost;
    geometric bisection drives the total cost to the budget from the
    feasible side.  Discretization enters exactly as in grid_oracle, so the
    two values differ only by the duality gap and the budget-bin rounding.
    """
    states = _lattice_states(params, eta, fading_grid_size, power_levels, power_max)

    def priced(lam: float):
        total_v = 0.0
        total_c = 0.0
        for cost, value in states:
            k = int(np.argmax(value - lam * cost))
            total_v += float(value[k])
            total_c += float(cost[k])
        return total_v, total_c

    v_lo, c_lo = priced(lam_lo)
    if c_lo <= params.p_av:
        return v_lo, lam_lo
    lo, hi = lam_lo, lam_hi
    for _ in range(200):
        if hi / lo - 1.0 < 1e-12:
            break
        mid = math.sqrt(lo * hi)
        _, c_mid = priced(mid)
        if c_mid > params.p_av:
            lo = mid
        else:
            hi = mid
    v_hi, _ = priced(hi)
    return v_hi, hi
