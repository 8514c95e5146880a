"""Expectations over exponentially distributed channel gains.

Weighted integrals of the form

    E[f] = int_0^inf f(h) rate exp(-rate h) dh

and the two-gain analogue over independent exponential variates, evaluated
with segmented Gauss-Legendre quadrature.  Integrands are piecewise smooth;
callers declare the kink locations as breakpoints and the integration range
is split there.  The infinite tail is mapped to log coordinates, where the
exponential weight and the rational/logarithmic factors that show up in
power-control integrands are analytic, so each panel converges spectrally.
A node-doubling ladder (n, 2n, 4n points per axis) verifies every result to
the requested relative tolerance and raises if agreement is not reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "ConvergenceError",
    "FadingState",
    "QuadratureSpec",
    "expect_1d",
    "expect_2d",
]

# Tail window, in unit-rate coordinates: mass beyond lo + _TAIL is
# exp(-42) ~ 5.7e-19 of the tail and is dropped.
_TAIL = 42.0
# Breakpoints further out than this carry < exp(-50) of the mass; dropped.
_BP_MAX = 50.0
# A tail starting below this gets a linear head before the log leg
# (log coordinates degenerate as lo -> 0).
_LOG_LO = 1e-6
# Maximum panel widths: linear panels in unit-rate coordinates, log panels
# in log coordinates.  Wide segments are subdivided to keep the per-panel
# node density roughly constant.
_LIN_PANEL = 8.0
_LOG_PANEL = 8.0


class ConvergenceError(RuntimeError):
    """Node doubling failed to stabilize the integral to tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts and the doubling tolerance for the quadrature engine.

    nodes_1d : base Gauss-Legendre points per panel for 1-D expectations
    nodes_2d : base points per panel and axis for 2-D expectations
    rel_tol  : relative agreement required between successive node doublings
    """

    nodes_1d: int = 64
    nodes_2d: int = 48
    rel_tol: float = 1e-8

    def __post_init__(self) -> None:
        if not (isinstance(self.nodes_1d, int) and self.nodes_1d >= 8):
            raise ValueError("nodes_1d must be an integer >= 8")
        if not (isinstance(self.nodes_2d, int) and self.nodes_2d >= 8):
            raise ValueError("nodes_2d must be an integer >= 8")
        if not (math.isfinite(self.rel_tol) and self.rel_tol > 0.0):
            raise ValueError("rel_tol must be positive")


@dataclass(frozen=True)
class FadingState:
    """One joint draw of the link gain h and the cross gain g_sp."""

    h: float
    g_sp: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.h) and self.h >= 0.0):
            raise ValueError("h must be finite and >= 0")
        if not (math.isfinite(self.g_sp) and self.g_sp >= 0.0):
            raise ValueError("g_sp must be finite and >= 0")


@lru_cache(maxsize=32)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _lin_block(lo, hi, x, w):
    """One linear panel on [lo, hi] (elementwise), weight exp(-y) folded in.

    Returns a list of zero or one (nodes, weights) blocks of shape
    lo.shape + (n,).  Zero-width entries produce zero weights and are
    harmless.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.maximum(np.asarray(hi, dtype=float), lo)
    width = hi - lo
    wmax = float(np.max(width)) if width.size else 0.0
    if wmax <= 0.0:
        return []
    half = 0.5 * width[..., None]
    y = lo[..., None] + half * (x + 1.0)
    wt = half * w * np.exp(-y)
    return [(y, wt)]


def _log_blocks(lo, hi, x, w):
    """Log-coordinate panels on [lo, hi] for positive lo (elementwise).

    Elements with lo == 0 contribute zero-weight nodes at y = 1, which the
    weighted-sum guard discards.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.maximum(np.asarray(hi, dtype=float), lo)
    pos = lo > 0.0
    ulo = np.log(np.where(pos, lo, 1.0))
    uhi = np.log(np.where(pos, hi, 1.0))
    width = uhi - ulo
    wmax = float(np.max(width)) if width.size else 0.0
    if wmax <= 0.0:
        return []
    panels = max(1, math.ceil(wmax / _LOG_PANEL))
    blocks = []
    for j in range(panels):
        a = ulo + width * (j / panels)
        b = ulo + width * ((j + 1) / panels)
        half = 0.5 * (b - a)[..., None]
        u = a[..., None] + half * (x + 1.0)
        y = np.exp(u)
        wt = half * w * y * np.exp(-y)
        blocks.append((y, wt))
    return blocks


def _seg_blocks(lo, hi, x, w):
    """Panels covering the finite segment [lo, hi] (elementwise).

    A single linear panel handles the first _LIN_PANEL of width; anything
    beyond continues in log coordinates, where node spacing grows with the
    coordinate, matching how far from the origin any integrand structure
    can sit.  A segment starting at a tiny positive lo (below _LOG_LO)
    keeps only a one-octave linear head so the log panels pick up integrand
    variation spread across many decades.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.maximum(np.asarray(hi, dtype=float), lo)
    small = (lo > 0.0) & (lo < _LOG_LO)
    mid = np.minimum(hi, np.where(small, 8.0 * lo, lo + _LIN_PANEL))
    blocks = _lin_block(lo, mid, x, w)
    blocks += _log_blocks(mid, hi, x, w)
    return blocks


def _tail_blocks(lo, x, w):
    """Panels covering [lo, inf) up to the exp(-42) truncation window."""
    lo = np.asarray(lo, dtype=float)
    small = (lo > 0.0) & (lo < _LOG_LO)
    start = np.where(lo >= _LOG_LO, lo, np.where(small, 8.0 * lo, 1.0))
    blocks = _lin_block(lo, start, x, w)
    blocks += _log_blocks(start, start + _TAIL, x, w)
    return blocks


def _clean_breakpoints(breakpoints, rate):
    pts = []
    for b in breakpoints:
        b = float(b)
        if math.isnan(b) or b < 0.0:
            raise ValueError("breakpoints must be >= 0")
        y = b * rate
        if 0.0 < y <= _BP_MAX:
            pts.append(y)
    return sorted(set(pts))


def _blocks_1d(ybps, n):
    x, w = _leggauss(n)
    blocks = []
    prev = np.zeros(())
    for b in ybps:
        b = np.asarray(b, dtype=float)
        blocks += _seg_blocks(prev, b, x, w)
        prev = b
    blocks += _tail_blocks(prev, x, w)
    return blocks


def _nodes_1d(ybps, n):
    """Concatenated node/weight arrays covering [0, inf)."""
    blocks = _blocks_1d(ybps, n)
    y = np.concatenate([np.ravel(b[0]) for b in blocks])
    wt = np.concatenate([np.ravel(b[1]) for b in blocks])
    return y, wt


def _weighted_sum(vals, wt):
    vals = np.asarray(vals, dtype=float)
    with np.errstate(invalid="ignore"):
        prod = vals * wt
    # A zero weight marks a degenerate node; the integrand value there is
    # allowed to be inf/nan and must not poison the sum.
    return np.where(wt != 0.0, prod, 0.0)


def _converged(coarse: float, fine: float, tol: float) -> bool:
    return abs(fine - coarse) <= tol * max(abs(coarse), abs(fine))


def _ladder(value, base_n: int, rel_tol: float, scale: int = 2) -> float:
    """Run value(n) at base_n, 2*base_n, 4*base_n until two rungs agree."""
    v_prev = value(base_n)
    for k in (scale * base_n, 2 * scale * base_n):
        v_next = value(k)
        if math.isfinite(v_next) and math.isfinite(v_prev):
            if _converged(v_prev, v_next, rel_tol):
                return v_next
        v_prev = v_next
    raise ConvergenceError(
        "quadrature did not stabilize to rel_tol=%g after node doubling" % rel_tol
    )


def expect_1d(f, spec: QuadratureSpec, *, rate: float = 1.0, breakpoints=()) -> float:
    """E[f(h)] for h exponential with the given rate.

    f must accept a numpy array and evaluate elementwise.  breakpoints lists
    the kink locations of f (in h units); f is treated as smooth between
    consecutive breakpoints and on the tail beyond the last one.
    """
    if not (math.isfinite(rate) and rate > 0.0):
        raise ValueError("rate must be positive")
    ybps = _clean_breakpoints(breakpoints, rate)

    def value(n: int) -> float:
        y, wt = _nodes_1d(ybps, n)
        return float(_weighted_sum(f(y / rate), wt).sum())

    return _ladder(value, spec.nodes_1d, spec.rel_tol)


def _norm_inner_breakpoints(breakpoints_g):
    if breakpoints_g is None:
        return lambda h: []
    if callable(breakpoints_g):
        def from_callable(h):
            got = breakpoints_g(h)
            if isinstance(got, (tuple, list)):
                return [np.broadcast_to(np.asarray(b, dtype=float), h.shape) for b in got]
            return [np.broadcast_to(np.asarray(got, dtype=float), h.shape)]
        return from_callable
    fixed = tuple(float(b) for b in breakpoints_g)
    for b in fixed:
        if math.isnan(b) or b < 0.0:
            raise ValueError("breakpoints must be >= 0")
    return lambda h: [np.full(h.shape, b) for b in fixed]


def expect_2d(
    f,
    spec: QuadratureSpec,
    *,
    rate_h: float = 1.0,
    rate_g: float = 1.0,
    breakpoints_h=(),
    breakpoints_g=None,
) -> float:
    """E[f(h, g)] over independent exponential h (rate_h) and g (rate_g).

    f must broadcast over numpy arrays.  breakpoints_h lists kinks in the h
    direction; breakpoints_g may be None, a tuple of g values, or a callable
    mapping an array of h values to the g-direction kink locations (one array
    or a sequence of arrays, elementwise ascending; +inf entries mean no kink
    at that h and land beyond the truncation window).
    """
    if not (math.isfinite(rate_h) and rate_h > 0.0):
        raise ValueError("rate_h must be positive")
    if not (math.isfinite(rate_g) and rate_g > 0.0):
        raise ValueError("rate_g must be positive")
    ybps_h = _clean_breakpoints(breakpoints_h, rate_h)
    inner_bps = _norm_inner_breakpoints(breakpoints_g)

    def value(n: int) -> float:
        x, w = _leggauss(n)
        yh, wh = _nodes_1d(ybps_h, n)
        h = yh / rate_h
        h_col = h[:, None]
        inner = np.zeros(h.shape)
        prev = np.zeros(h.shape)
        blocks = []
        for b in inner_bps(h):
            yg = np.asarray(b, dtype=float) * rate_g
            yg = np.minimum(np.maximum(yg, prev), _BP_MAX)
            blocks += _seg_blocks(prev, yg, x, w)
            prev = yg
        blocks += _tail_blocks(prev, x, w)
        for yg, wt in blocks:
            vals = f(h_col, yg / rate_g)
            inner += _weighted_sum(vals, wt).sum(axis=-1)
        return float(_weighted_sum(inner, wh).sum())

    return _ladder(value, spec.nodes_2d, spec.rel_tol)
