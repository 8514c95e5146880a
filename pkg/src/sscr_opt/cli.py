"""Command-line runner: flat key=value configs in, deterministic CSV out.

Four modes share one config namespace: `optimize` reports the best
threshold on a log grid, `sweep-eta` and `sweep-tau` produce plot-ready
tables, and `mc-validate` compares the analytic pipeline against Monte
Carlo estimates.  Every CSV embeds the fully resolved configuration in its
header, so a result file documents how to reproduce itself.

Exit codes: 0 success (including partial sweeps), 1 config error,
2 no convergence, 3 infeasible detection floor.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .expectations import ConvergenceError, QuadratureSpec
from .oracles import RngSpec, mc_capacity, mc_detector
from .power import PowerPolicy, interference_diagnostics
from .sensing import InfeasibleThresholdError, invert_pd
from .solver import (
    BracketError,
    SubgradientSettings,
    SystemParams,
    select_eta,
    subgradient_solve,
    sweep_eta,
)
from .throughput import sweep_tau

__all__ = ["ConfigError", "load_config", "main", "run"]

_MODES = ("optimize", "sweep-eta", "sweep-tau", "mc-validate")


class ConfigError(ValueError):
    """A config key, value, or cross-field constraint is invalid."""


# key -> (kind, default); kind "float_or_auto" accepts the string "auto"
_SCHEMA = {
    "pi1": ("float", 0.4),
    "n0": ("float", 1.0),
    "p_av_db": ("float", 15.0),
    "i_pk_db": ("float", 0.0),
    "gamma_db": ("float", -10.0),
    "tau_ms": ("float", 1.0),
    "t_ms": ("float", 100.0),
    "fs_hz": ("float", 6e6),
    "pd_target": ("float", 0.9),
    "interference_mode": ("str", "p1_only"),
    "eta_min": ("float", 0.95),
    "eta_max": ("float_or_auto", "auto"),
    "eta_points": ("int", 20),
    "eta_grid_size": ("int", 20),
    "tau_min_ms": ("float", 0.1),
    "tau_max_ms": ("float", 20.0),
    "tau_points": ("int", 40),
    "lambda_init": ("float", 1.0 / math.log(2.0)),
    "step0": ("float_or_auto", "auto"),
    "max_iters": ("int", 5000),
    "feas_tol": ("float", 1e-4),
    "stall_tol": ("float", 1e-10),
    "nodes_1d": ("int", 64),
    "nodes_2d": ("int", 48),
    "quad_rel_tol": ("float", 1e-8),
    "seed": ("int", 20260819),
    "streams": ("int", 4),
    "mc_detector_trials": ("int", 1_000_000),
    "mc_capacity_trials": ("int", 200_000),
    "mc_method": ("str", "statistic"),
    "output_path": ("str", ""),
}


def _coerce(key: str, raw):
    if key not in _SCHEMA:
        raise ConfigError("unknown config key: %s" % key)
    kind, _ = _SCHEMA[key]
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "float_or_auto":
            return "auto" if raw == "auto" else float(raw)
    except ValueError:
        raise ConfigError("invalid value for %s: %r" % (key, raw)) from None
    return raw


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _validate(cfg: dict) -> None:
    _require(0.0 <= cfg["pi1"] <= 1.0, "pi1 must lie in [0, 1]")
    for key in ("n0", "fs_hz", "tau_ms", "t_ms", "lambda_init",
                "feas_tol", "stall_tol", "quad_rel_tol", "eta_min",
                "tau_min_ms", "tau_max_ms"):
        _require(math.isfinite(cfg[key]) and cfg[key] > 0.0, "%s must be positive" % key)
    for key in ("p_av_db", "i_pk_db"):
        _require(math.isfinite(cfg[key]), "%s must be finite" % key)
    _require(math.isfinite(cfg["gamma_db"]) or cfg["gamma_db"] == -math.inf,
             "gamma_db must be finite or -inf")
    _require(0.0 < cfg["pd_target"] < 1.0, "pd_target must lie in (0, 1)")
    _require(cfg["interference_mode"] in ("p1_only", "mixture"),
             'interference_mode must be "p1_only" or "mixture"')
    _require(cfg["t_ms"] > cfg["tau_ms"], "t_ms must exceed tau_ms")
    _require(cfg["tau_max_ms"] > cfg["tau_min_ms"], "tau_max_ms must exceed tau_min_ms")
    _require(cfg["tau_max_ms"] < cfg["t_ms"], "tau_max_ms must be below t_ms")
    if cfg["eta_max"] != "auto":
        _require(math.isfinite(cfg["eta_max"]) and cfg["eta_max"] > cfg["eta_min"],
                 "eta_max must exceed eta_min")
    if cfg["step0"] != "auto":
        _require(math.isfinite(cfg["step0"]) and cfg["step0"] > 0.0, "step0 must be positive")
    for key, floor in (("eta_points", 1), ("tau_points", 1), ("eta_grid_size", 1),
                       ("max_iters", 10), ("nodes_1d", 8), ("nodes_2d", 8),
                       ("streams", 1), ("mc_detector_trials", 10_000),
                       ("mc_capacity_trials", 100_000)):
        _require(cfg[key] >= floor, "%s must be >= %d" % (key, floor))
    _require(0 <= cfg["seed"] < 2 ** 64, "seed must lie in [0, 2**64)")
    _require(cfg["mc_method"] in ("statistic", "samples"),
             'mc_method must be "statistic" or "samples"')


def load_config(path: str | None = None, overrides=(), seed: int | None = None,
                out: str | None = None) -> dict:
    """Resolve defaults, an optional config file, then --set/--seed/--out.

    The file format is one `key = value` per line; `#` starts a comment.
    Unknown keys and malformed values raise ConfigError naming the key.
    """
    cfg = {key: default for key, (_, default) in _SCHEMA.items()}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError("cannot read config file: %s" % exc) from None
        for lineno, line in enumerate(lines, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError("line %d: expected key = value" % lineno)
            key, _, value = text.partition("=")
            key = key.strip()
            cfg[key] = _coerce(key, value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set expects key=value, got %r" % item)
        key, _, value = item.partition("=")
        key = key.strip()
        cfg[key] = _coerce(key, value)
    if seed is not None:
        cfg["seed"] = _coerce("seed", str(seed))
    if out is not None:
        cfg["output_path"] = out
    _validate(cfg)
    return cfg


def _from_db(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _build_params(cfg: dict) -> SystemParams:
    return SystemParams(
        pi1=cfg["pi1"],
        n0=cfg["n0"],
        p_av=_from_db(cfg["p_av_db"]),
        i_pk=_from_db(cfg["i_pk_db"]),
        gamma=_from_db(cfg["gamma_db"]),
        tau=cfg["tau_ms"] / 1e3,
        fs=cfg["fs_hz"],
        t_frame=cfg["t_ms"] / 1e3,
        pd_target=cfg["pd_target"],
        mode=cfg["interference_mode"],
    )


def _build_settings(cfg: dict) -> SubgradientSettings:
    step0 = None if cfg["step0"] == "auto" else cfg["step0"]
    return SubgradientSettings(
        lambda_init=cfg["lambda_init"],
        step0=step0,
        max_iters=cfg["max_iters"],
        feas_tol=cfg["feas_tol"],
        stall_tol=cfg["stall_tol"],
    )


def _build_quad(cfg: dict) -> QuadratureSpec:
    return QuadratureSpec(
        nodes_1d=cfg["nodes_1d"],
        nodes_2d=cfg["nodes_2d"],
        rel_tol=cfg["quad_rel_tol"],
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if x == 0.0:
            x = 0.0
        return "%.12g" % x
    return str(value)


def _header_lines(mode: str, cfg: dict, extra=()) -> list[str]:
    lines = ["# sscr-opt %s" % __version__, "# mode = %s" % mode]
    if mode == "sweep-tau":
        lines.append(
            "# xi_s: raw formula (t - tau/t)*c_s read as the data fraction"
            " ((t - tau)/t)*c_s of each frame"
        )
    lines.extend(extra)
    lines.append("# config:")
    for key in sorted(_SCHEMA):
        lines.append("#   %s = %s" % (key, _fmt(cfg[key])))
    return lines


def _write_csv(path: str, header: list[str], columns: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(cell) for cell in row) + "\n")


def _eta_grid(cfg: dict, params: SystemParams) -> np.ndarray:
    if cfg["eta_max"] == "auto":
        eta_max = invert_pd(params.pd_target, params.detector_config)
    else:
        eta_max = cfg["eta_max"]
    _require(eta_max > cfg["eta_min"],
             "eta_min must be below eta_max (%.12g)" % eta_max)
    return np.linspace(cfg["eta_min"], eta_max, cfg["eta_points"])


def _run_optimize(cfg: dict, out: str) -> int:
    params = _build_params(cfg)
    eta_max = invert_pd(params.pd_target, params.detector_config)
    _require(cfg["eta_min"] < eta_max,
             "eta_min must be below the detection-floor threshold %.12g" % eta_max)
    res = select_eta(
        params,
        _build_settings(cfg),
        cfg["eta_grid_size"],
        quad=_build_quad(cfg),
        eta_min=cfg["eta_min"],
    )
    columns = ["lambda_star", "gamma_s_star", "eta", "pf", "pd", "alpha", "beta",
               "c0", "c1", "c_s", "p_bar", "feas_residual", "iterations", "converged"]
    row = [getattr(res, name) for name in columns]
    _write_csv(out, _header_lines("optimize", cfg), columns, [row])
    print("wrote %s (eta = %s, c_s = %s)" % (out, _fmt(res.eta), _fmt(res.c_s)))
    return 0


def _run_sweep_eta(cfg: dict, out: str) -> int:
    params = _build_params(cfg)
    grid = _eta_grid(cfg, params)
    table = sweep_eta(params, _build_settings(cfg), grid, quad=_build_quad(cfg))
    columns = ["eta", "pf", "pd", "alpha", "beta", "lambda", "gamma_s_star",
               "c0", "c1", "c_s", "status"]
    rows = []
    n_ok = 0
    for r in table:
        if r.result is None:
            rows.append([r.eta] + [math.nan] * 9 + [r.status])
            continue
        res = r.result
        rows.append([r.eta, res.pf, res.pd, res.alpha, res.beta, res.lambda_star,
                     res.gamma_s_star, res.c0, res.c1, res.c_s, r.status])
        n_ok += r.status == "ok"
    _write_csv(out, _header_lines("sweep-eta", cfg), columns, rows)
    print("wrote %s (%d rows, %d ok)" % (out, len(rows), n_ok))
    return 0 if n_ok else 2


def _run_sweep_tau(cfg: dict, out: str) -> int:
    params = _build_params(cfg)
    grid = np.linspace(cfg["tau_min_ms"], cfg["tau_max_ms"], cfg["tau_points"]) / 1e3
    table, best = sweep_tau(params, _build_settings(cfg), grid, quad=_build_quad(cfg))
    columns = ["tau_s", "n_samples", "eta_star", "pf", "c_s", "xi_s", "feasible", "status"]
    rows = []
    n_ok = 0
    for r in table:
        if r.point is None:
            rows.append([r.tau, r.n_samples] + [math.nan] * 4 + [r.feasible, r.status])
            continue
        p = r.point
        rows.append([p.tau, p.n_samples, p.eta_star, p.pf, p.c_s, p.xi_s,
                     r.feasible, r.status])
        n_ok += r.status == "ok"
    _write_csv(out, _header_lines("sweep-tau", cfg), columns, rows)
    if best is None:
        print("wrote %s (%d rows, none converged)" % (out, len(rows)))
        return 2
    print("wrote %s (%d rows, best tau = %s s, xi_s = %s)"
          % (out, len(rows), _fmt(best.tau), _fmt(best.point.xi_s)))
    return 0


def _run_mc_validate(cfg: dict, out: str) -> int:
    params = _build_params(cfg)
    eta = invert_pd(params.pd_target, params.detector_config)
    quad = _build_quad(cfg)
    res = subgradient_solve(params, eta, _build_settings(cfg), quad=quad)
    if not res.converged:
        raise ConvergenceError(
            "the dual iteration did not converge (feas_residual = %.3g)"
            % res.feas_residual
        )
    rng = RngSpec(seed=cfg["seed"], streams=cfg["streams"])
    det = mc_detector(eta, params.detector_config, cfg["mc_detector_trials"], rng,
                      method=cfg["mc_method"])
    policy = PowerPolicy(lam=res.lambda_star, i_pk=params.i_pk, mode=params.mode)
    cap = mc_capacity(params, policy, (res.alpha, res.beta),
                      cfg["mc_capacity_trials"], rng)
    diag = interference_diagnostics(policy, (res.alpha, res.beta), quad, n0=params.n0)

    # a zero-count estimate has zero empirical stderr, so the deviation is
    # measured against the 1/trials resolution floor instead
    def sigmas(analytic: float, estimate: float, stderr: float, trials: int) -> float:
        return abs(analytic - estimate) / max(stderr, 1.0 / trials)

    n_det = cfg["mc_detector_trials"]
    n_cap = cfg["mc_capacity_trials"]
    entries = [
        ("pf", res.pf, det.pf_hat, det.stderr_pf, n_det),
        ("pd", res.pd, det.pd_hat, det.stderr_pd, n_det),
        ("p_bar", res.p_bar, cap.p_bar_hat, cap.stderr_p_bar, n_cap),
        ("c_s", res.c_s, cap.c_s_hat, cap.stderr_c_s, n_cap),
        ("interference_mean", diag.mean, cap.interference_mean_hat,
         cap.stderr_interference, n_cap),
        ("violation_prob", diag.violation_prob, cap.violation_rate,
         cap.stderr_violation, n_cap),
    ]
    columns = ["quantity", "analytic", "mc_estimate", "stderr", "sigmas"]
    rows = [[name, a, m, se, sigmas(a, m, se, n)] for name, a, m, se, n in entries]
    extra = [
        "# operating point: eta = %s (detection floor tight)" % _fmt(eta),
        "# sigmas = |analytic - mc_estimate| / max(stderr, 1/trials)",
    ]
    _write_csv(out, _header_lines("mc-validate", cfg, extra), columns, rows)
    worst = max(row[4] for row in rows)
    print("wrote %s (worst deviation %s sigmas)" % (out, _fmt(worst)))
    return 0


_RUNNERS = {
    "optimize": _run_optimize,
    "sweep-eta": _run_sweep_eta,
    "sweep-tau": _run_sweep_tau,
    "mc-validate": _run_mc_validate,
}


def run(mode: str, cfg: dict) -> int:
    """Dispatch one mode; returns the process exit code."""
    if mode not in _RUNNERS:
        raise ConfigError("unknown mode: %s" % mode)
    out = cfg["output_path"] or (mode + ".csv")
    return _RUNNERS[mode](cfg, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sscr-opt",
        description="Joint power allocation and sensing-threshold selection "
                    "for a spectrum-sharing link.",
    )
    parser.add_argument("mode", choices=_MODES)
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--out", help="output CSV path (default: <mode>.csv)")
    parser.add_argument("--seed", type=int, help="override the RNG seed")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.set, args.seed, args.out)
        return run(args.mode, cfg)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    except InfeasibleThresholdError as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return 3
    except (ConvergenceError, BracketError) as exc:
        print("no convergence: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
