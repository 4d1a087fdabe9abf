import csv
import json
import math

import numpy as np
import pytest

from heatlayers import harness, spectrum


def _gauss(x, var):
    return np.exp(-x * x / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


def test_free_gaussian_uniform_sigma():
    sig = 1.3
    t0, tau = 0.1, 0.5
    x, u = harness.fd_solve(
        (-9.0, 9.0), 1500, tau,
        sigma=lambda x: np.full_like(x, sig),
        init=lambda x: _gauss(x, 2.0 * sig ** 2 * t0))
    exact = _gauss(x, 2.0 * sig ** 2 * (t0 + tau))
    assert np.max(np.abs(u - exact)) < 1e-4


def test_convergence_order():
    sig = 1.0
    t0, tau = 0.1, 0.2
    errs = []
    for nx in (300, 600):
        x, u = harness.fd_solve(
            (-7.0, 7.0), nx, tau,
            sigma=lambda x: np.full_like(x, sig),
            init=lambda x: _gauss(x, 2.0 * t0))
        errs.append(np.max(np.abs(u - _gauss(x, 2.0 * (t0 + tau)))))
    assert errs[0] / errs[1] > 3.0


def test_two_layer_strip_vs_series():
    grid = spectrum.LayerGrid([0.0, 1.0, 2.0], [1.0, 0.5])
    tau = 0.2

    def f(x):
        return np.sin(np.pi * x / 2.0)

    lams, coeffs, _ = spectrum.oscillating_series(grid, f, 30)
    x, u = harness.fd_solve(
        (0.0, 2.0), 400, tau,
        sigma=harness.piecewise_sigma([1.0], [1.0, 0.5]),
        init=f)
    series = np.zeros_like(x)
    for lam, c in zip(lams, coeffs):
        series += c * np.exp(-lam ** 2 * tau) * spectrum.theta_eval(grid, lam, x)
    assert np.max(np.abs(u - series)) < 1e-3


def test_steady_state_exact_with_harmonic_mean():
    # piecewise-linear steady profile is reproduced to rounding
    dmin, dplus = 1.0, 0.25  # sigma^2 on each side of the face at 1.0
    x, u = harness.fd_solve(
        (0.0, 2.0), 100, 15.0,
        sigma=harness.piecewise_sigma([1.0], [1.0, 0.5]),
        init=lambda x: np.zeros_like(x),
        bc_values=(0.0, 1.0))
    fluxc = 1.0 / (1.0 / dmin + 1.0 / dplus)
    exact = np.where(x < 1.0, fluxc * x / dmin,
                     fluxc / dmin + fluxc * (x - 1.0) / dplus)
    assert np.max(np.abs(u - exact)) < 1e-6


def test_drift_moves_profile():
    b = 0.8
    t0, tau = 0.1, 0.5
    x, u = harness.fd_solve(
        (-6.0, 6.0), 900, tau,
        sigma=lambda x: np.ones_like(x),
        init=lambda x: _gauss(x, 2.0 * t0), drift=b)
    # u_t = u_xx + b u_x carries the bump toward -x at speed b
    exact = _gauss(x + b * tau, 2.0 * (t0 + tau))
    assert np.max(np.abs(u - exact)) < 1e-4


def test_neumann_mass_conserved():
    x, out = harness.fd_solve(
        (0.0, 2.0), 128, 0.3,
        sigma=harness.piecewise_sigma([1.0], [1.0, 0.6]),
        init=lambda x: np.exp(-10.0 * (x - 0.7) ** 2),
        bc="neumann", checkpoints=[0.1, 0.2])
    dx = x[1] - x[0]
    masses = [out[t].sum() * dx for t in sorted(out)]
    assert max(masses) - min(masses) < 1e-12


def test_unstable_step_guard():
    with pytest.raises(RuntimeError):
        harness.fd_solve(
            (-2.0, 2.0), 100, 1.0,
            sigma=lambda x: np.ones_like(x),
            init=lambda x: np.exp(-20.0 * x * x), cfl=1.2)


def test_bad_arguments():
    with pytest.raises(ValueError):
        harness.fd_solve((1.0, 0.0), 10, 0.1,
                         sigma=lambda x: np.ones_like(x),
                         init=lambda x: np.zeros_like(x))
    with pytest.raises(ValueError):
        harness.fd_solve((0.0, 1.0), 10, 0.1,
                         sigma=lambda x: np.ones_like(x),
                         init=lambda x: np.zeros_like(x), bc="periodic")
    with pytest.raises(ValueError):
        harness.piecewise_sigma([0.0], [1.0])


# ---------------------------------------------------------------------------
# CLI front end


def _config(tmp_path, payload):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_cli_rejects_unknown_key(tmp_path):
    cfgp = _config(tmp_path, {"sigma_1": 7.0, "bogus": 1.0})
    rc = harness.cli_run(["spectrum", "--config", cfgp,
                          "--out", str(tmp_path / "o")])
    assert rc == 2


def test_cli_rejects_unknown_key_in_block(tmp_path):
    cfgp = _config(tmp_path, {"path": {"kind": "linear", "speed": 2.0}})
    rc = harness.cli_run(["obm", "--config", cfgp,
                          "--out", str(tmp_path / "o")])
    assert rc == 2


def test_cli_rejects_bad_types(tmp_path):
    for payload in ({"count": "ten"}, {"count": 2.5}, {"count": True},
                    {"sigma_1": -1.0}, {"l_1": float("nan")}):
        cfgp = _config(tmp_path, payload)
        rc = harness.cli_run(["spectrum", "--config", cfgp,
                              "--out", str(tmp_path / "o")])
        assert rc == 2, payload


def test_cli_rejects_broken_config_file(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text("{not json", encoding="utf-8")
    assert harness.cli_run(["spectrum", "--config", str(bad),
                            "--out", str(tmp_path / "o")]) == 2
    assert harness.cli_run(["spectrum", "--config", str(tmp_path / "no.json"),
                            "--out", str(tmp_path / "o")]) == 2


def test_cli_rejects_cross_field_violations(tmp_path):
    # physically inconsistent temperatures must fail before any math
    cfgp = _config(tmp_path, {"T_s_K": 280.0, "T_m_K": 273.0})
    rc = harness.cli_run(["stefan", "--config", cfgp,
                          "--out", str(tmp_path / "o")])
    assert rc == 2


def test_cli_usage_errors_and_help(capsys):
    assert harness.cli_run([]) == 2
    assert harness.cli_run(["no-such-command"]) == 2
    assert harness.cli_run(["--help"]) == 0
    capsys.readouterr()


def test_cli_spectrum_run(tmp_path, capsys):
    out = tmp_path / "spec"
    cfgp = _config(tmp_path, {"count": 8})
    rc = harness.cli_run(["spectrum", "--config", cfgp, "--out", str(out)])
    assert rc == 0
    captured = capsys.readouterr().out.splitlines()
    assert any(line.startswith("run spectrum config sha256 ")
               for line in captured)
    assert sum(1 for line in captured if line.startswith("phase ")) == 3
    result = json.loads(captured[-1].removeprefix("RESULT "))
    assert result["status"] == "ok"
    rows = _read_csv(out / "eigenvalues.csv")
    assert len(rows) == 8
    assert [r["index"] for r in rows] == [str(n) for n in range(1, 9)]
    for r in rows:
        assert float(r["rel_err_first"]) < 0.02
        assert "." in r["lambda_exact"]
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["config_sha256"] == result["config_sha256"]
    assert set(summary["phase_seconds"]) == {"config", "compute", "write"}
    assert (out / "plot_spectrum.py").exists()


def test_cli_oit_run(tmp_path, capsys):
    out = tmp_path / "oit"
    rc = harness.cli_run(["oit", "--out", str(out)])
    assert rc == 0
    result = json.loads(
        capsys.readouterr().out.splitlines()[-1].removeprefix("RESULT "))
    assert abs(result["metrics"]["mass_from_left"] - 1.0) < 1e-4
    assert abs(result["metrics"]["mass_from_right"] - 1.0) < 1e-4
    assert result["metrics"]["interface_gap"] < 1e-6
    rows = _read_csv(out / "kernels.csv")
    assert len(rows) == 321


def test_cli_mixed_run(tmp_path, capsys):
    out = tmp_path / "mix"
    cfgp = _config(tmp_path, {"nmax": 3, "n_omega": 40})
    rc = harness.cli_run(["mixed", "--config", cfgp, "--out", str(out)])
    assert rc == 0
    result = json.loads(
        capsys.readouterr().out.splitlines()[-1].removeprefix("RESULT "))
    assert result["metrics"]["max_newton_drift"] < 1e-8
    assert len(_read_csv(out / "poles.csv")) == 7
    assert len(_read_csv(out / "cut.csv")) == 40


def test_cli_mixed_numeric_failure(tmp_path):
    # equal coefficients collapse the pole family to infinity
    cfgp = _config(tmp_path, {"sigma": [1.0, 1.0, 1.0]})
    with np.errstate(all="ignore"):
        rc = harness.cli_run(["mixed", "--config", cfgp,
                              "--out", str(tmp_path / "o")])
    assert rc == 3
    assert not (tmp_path / "o").exists()


def test_cli_obm_run(tmp_path, capsys):
    out = tmp_path / "obm"
    cfgp = _config(tmp_path, {"m": 60, "n_points": 121,
                              "checkpoints": [0.5, 1.0]})
    rc = harness.cli_run(["obm", "--config", cfgp, "--out", str(out)])
    assert rc == 0
    result = json.loads(
        capsys.readouterr().out.splitlines()[-1].removeprefix("RESULT "))
    assert abs(result["metrics"]["mass_final"] - 1.0) < 1e-3
    assert len(_read_csv(out / "trace.csv")) == 61
    rows = _read_csv(out / "field.csv")
    assert len(rows) == 121
    assert len(rows[0]) == 3  # x plus one column per checkpoint


def test_cli_multilayer_run(tmp_path, capsys):
    out = tmp_path / "ml"
    cfgp = _config(tmp_path, {
        "paths": [0.0, 1.0], "sigma": [1.0], "horizon": 0.25, "m": 6,
        "init": {"kind": "sine"}, "n_points": 41})
    rc = harness.cli_run(["multilayer", "--config", cfgp, "--out", str(out)])
    assert rc == 0
    result = json.loads(
        capsys.readouterr().out.splitlines()[-1].removeprefix("RESULT "))
    assert result["metrics"]["max_wall_value"] < 1e-10
    rows = _read_csv(out / "profile.csv")
    mid = rows[20]
    assert abs(float(mid["x"]) - 0.5) < 1e-12
    assert abs(float(mid["u_tau0.25"]) - math.exp(-math.pi ** 2 * 0.25)) < 1e-8


def test_cli_stefan_run(tmp_path, capsys):
    out = tmp_path / "st"
    cfgp = _config(tmp_path, {"horizon_s": 3.0, "h0_s": 0.05, "terms": 12,
                              "profile_points": 41})
    rc = harness.cli_run(["stefan", "--config", cfgp, "--out", str(out)])
    assert rc == 0
    result = json.loads(
        capsys.readouterr().out.splitlines()[-1].removeprefix("RESULT "))
    assert result["metrics"]["final_front_mm"] > 1.0
    rows = _read_csv(out / "front.csv")
    ys = [float(r["y_mm"]) for r in rows]
    assert all(b > a for a, b in zip(ys, ys[1:]))
    assert rows[0]["residual_K"] == "nan"
    prof = _read_csv(out / "profile.csv")
    assert abs(float(prof[0]["x_mm"]) - 1.0) < 1e-12
    assert all(abs(float(v) - 270.0) < 1e-6
               for k, v in prof[0].items() if k != "x_mm")
    assert all(abs(float(v) - 290.0) < 1e-6
               for k, v in prof[-1].items() if k != "x_mm")


def test_cli_out_dir_collision(tmp_path):
    block = tmp_path / "taken"
    block.write_text("file in the way", encoding="utf-8")
    rc = harness.cli_run(["spectrum", "--out", str(block)])
    assert rc == 4


def test_cli_threads_match_deterministic(tmp_path):
    cfgp = _config(tmp_path, {"nmax": 3, "n_omega": 30})
    a, b = tmp_path / "a", tmp_path / "b"
    assert harness.cli_run(["mixed", "--config", cfgp, "--out", str(a),
                            "--threads", "4"]) == 0
    assert harness.cli_run(["mixed", "--config", cfgp, "--out", str(b),
                            "--deterministic"]) == 0
    assert (a / "cut.csv").read_bytes() == (b / "cut.csv").read_bytes()
    assert (a / "poles.csv").read_bytes() == (b / "poles.csv").read_bytes()


def test_cli_validate(capsys):
    rc = harness.cli_run(["validate"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert sum(1 for line in lines if line.startswith("ok  ")) == 9
    result = json.loads(lines[-1].removeprefix("RESULT "))
    assert result["status"] == "ok"
    assert all(c["ok"] for c in result["checks"])
