"""Config resolution, CSV output, and process exit codes."""

import math

import pytest

from sscr_opt.cli import ConfigError, _SCHEMA, load_config, main, run

# settings that keep CLI solves quick: a warm dual start, loose feasibility,
# and a shallow threshold band
_FAST = [
    "lambda_init=0.05",
    "feas_tol=1e-3",
    "nodes_1d=24",
    "nodes_2d=16",
    "quad_rel_tol=1e-6",
    "eta_min=1.01",
    "eta_grid_size=3",
    "eta_points=3",
]


def _fast_args(*extra):
    args = []
    for item in _FAST + list(extra):
        args += ["--set", item]
    return args


def test_defaults_match_schema():
    cfg = load_config()
    for key, (_, default) in _SCHEMA.items():
        assert cfg[key] == default


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# link setup\n"
        "\n"
        "pi1 = 0.25   # prior\n"
        "p_av_db = 12.5\n"
        "eta_points= 7\n",
        encoding="utf-8",
    )
    cfg = load_config(str(path))
    assert cfg["pi1"] == 0.25
    assert cfg["p_av_db"] == 12.5
    assert cfg["eta_points"] == 7
    assert cfg["n0"] == 1.0  # untouched default


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="unknown config key: bogus"):
        load_config(overrides=["bogus=1"])


def test_malformed_file_reports_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("pi1 = 0.3\njust words\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(str(path))


def test_bad_value_is_named():
    with pytest.raises(ConfigError, match="invalid value for eta_points"):
        load_config(overrides=["eta_points=many"])


def test_missing_file_raises():
    with pytest.raises(ConfigError, match="cannot read config file"):
        load_config("/nonexistent/run.cfg")


def test_override_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("pi1 = 0.25\nseed = 1\n", encoding="utf-8")
    cfg = load_config(str(path), overrides=["pi1=0.3"], seed=99, out="x.csv")
    assert cfg["pi1"] == 0.3
    assert cfg["seed"] == 99
    assert cfg["output_path"] == "x.csv"


def test_cross_field_validation():
    with pytest.raises(ConfigError, match="t_ms must exceed tau_ms"):
        load_config(overrides=["tau_ms=200"])
    with pytest.raises(ConfigError, match="eta_max must exceed eta_min"):
        load_config(overrides=["eta_max=0.5"])
    with pytest.raises(ConfigError, match="mc_method"):
        load_config(overrides=["mc_method=exactly"])
    with pytest.raises(ConfigError, match="pd_target"):
        load_config(overrides=["pd_target=1.5"])
    with pytest.raises(ConfigError, match="max_iters"):
        load_config(overrides=["max_iters=3"])


def test_auto_keywords_survive():
    cfg = load_config(overrides=["eta_max=auto", "step0=auto"])
    assert cfg["eta_max"] == "auto"
    assert cfg["step0"] == "auto"
    cfg = load_config(overrides=["eta_max=1.2", "step0=0.01"])
    assert cfg["eta_max"] == 1.2
    assert cfg["step0"] == 0.01


def test_run_rejects_unknown_mode():
    with pytest.raises(ConfigError, match="unknown mode"):
        run("analyze", load_config())


def test_exit_code_config_error(capsys):
    assert main(["optimize", "--set", "bogus=1"]) == 1
    assert "config error" in capsys.readouterr().err


def test_exit_code_infeasible(tmp_path, capsys):
    # N = 9 samples cannot reach pd = 0.999
    code = main([
        "optimize", "--set", "fs_hz=9000", "--set", "pd_target=0.999",
        "--out", str(tmp_path / "o.csv"),
    ])
    assert code == 3
    assert "infeasible" in capsys.readouterr().err


def test_exit_code_no_convergence(tmp_path, capsys):
    code = main(
        ["optimize"] + _fast_args("max_iters=10", "feas_tol=1e-13")
        + ["--out", str(tmp_path / "o.csv")]
    )
    assert code == 2
    assert "no convergence" in capsys.readouterr().err


def test_optimize_writes_csv(tmp_path, capsys):
    out = tmp_path / "opt.csv"
    assert main(["optimize"] + _fast_args() + ["--out", str(out)]) == 0
    assert "wrote" in capsys.readouterr().out
    lines = out.read_text(encoding="utf-8").splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    assert "# mode = optimize" in header
    # the fully resolved config is echoed, sorted by key
    echoed = [l for l in header if l.startswith("#   ")]
    keys = [l.split("=")[0].strip("# ").strip() for l in echoed]
    assert keys == sorted(_SCHEMA)
    assert "#   eta_grid_size = 3" in header
    assert len(body) == 2  # column line plus one result row
    cols = body[0].split(",")
    row = body[1].split(",")
    assert cols[0] == "lambda_star" and cols[-1] == "converged"
    assert row[-1] == "true"
    assert float(row[cols.index("c_s")]) > 0.0


def test_default_output_name(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["optimize"] + _fast_args()) == 0
    assert (tmp_path / "optimize.csv").exists()


def test_sweep_eta_csv_rows(tmp_path):
    out = tmp_path / "se.csv"
    assert main(["sweep-eta"] + _fast_args() + ["--out", str(out)]) == 0
    lines = [l for l in out.read_text(encoding="utf-8").splitlines()
             if not l.startswith("#")]
    cols = lines[0].split(",")
    assert cols == ["eta", "pf", "pd", "alpha", "beta", "lambda",
                    "gamma_s_star", "c0", "c1", "c_s", "status"]
    rows = [l.split(",") for l in lines[1:]]
    assert len(rows) == 3
    assert all(r[-1] == "ok" for r in rows)
    etas = [float(r[0]) for r in rows]
    assert etas == sorted(etas)


def test_sweep_eta_explicit_eta_max(tmp_path):
    out = tmp_path / "se.csv"
    code = main(
        ["sweep-eta"] + _fast_args("eta_max=1.05") + ["--out", str(out)]
    )
    assert code == 0
    lines = [l for l in out.read_text(encoding="utf-8").splitlines()
             if not l.startswith("#")]
    assert float(lines[-1].split(",")[0]) == pytest.approx(1.05, rel=1e-12)


def test_sweep_tau_csv(tmp_path, capsys):
    out = tmp_path / "st.csv"
    code = main(
        ["sweep-tau"] + _fast_args("tau_min_ms=0.5", "tau_max_ms=2.0",
                                   "tau_points=3", "lambda_init=0.03")
        + ["--out", str(out)]
    )
    assert code == 0
    assert "best tau" in capsys.readouterr().out
    lines = out.read_text(encoding="utf-8").splitlines()
    assert any("xi_s" in l and l.startswith("#") for l in lines)
    body = [l for l in lines if not l.startswith("#")]
    assert body[0].split(",") == ["tau_s", "n_samples", "eta_star", "pf",
                                  "c_s", "xi_s", "feasible", "status"]
    assert len(body) == 4
    for line in body[1:]:
        cells = line.split(",")
        assert cells[6] == "true" and cells[7] == "ok"
        assert float(cells[5]) <= float(cells[4])  # xi_s <= c_s


def test_mc_validate_csv(tmp_path):
    out = tmp_path / "mc.csv"
    code = main(
        ["mc-validate"] + _fast_args("mc_detector_trials=20000",
                                     "mc_capacity_trials=100000")
        + ["--out", str(out), "--seed", "7"]
    )
    assert code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert any(l.startswith("# operating point: eta =") for l in lines)
    assert "#   seed = 7" in lines
    body = [l for l in lines if not l.startswith("#")]
    names = [l.split(",")[0] for l in body[1:]]
    assert names == ["pf", "pd", "p_bar", "c_s", "interference_mean",
                     "violation_prob"]
    worst = max(float(l.split(",")[-1]) for l in body[1:])
    assert worst < 6.0


def test_zero_gamma_via_db_inf(tmp_path):
    out = tmp_path / "g0.csv"
    code = main(
        ["optimize"] + _fast_args("gamma_db=-inf", "eta_min=0.96")
        + ["--out", str(out)]
    )
    assert code == 0
    body = [l for l in out.read_text(encoding="utf-8").splitlines()
            if not l.startswith("#")]
    cols = body[0].split(",")
    row = body[1].split(",")
    assert row[cols.index("pf")] == row[cols.index("pd")]
