import json
import math

import numpy as np
import pytest

from confined_langevin.cli import list_presets, main, validate


def run_cli(*args):
    return main(list(args))


# ---------------------------------------------------------------------------
# preset listing


def test_list_presets_has_ten_rows(capsys):
    assert run_cli("list-presets") == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 10


def test_list_presets_filter(capsys):
    assert run_cli("list-presets", "hamiltonian") == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 2


def test_list_presets_unknown_filter_is_empty(capsys):
    assert run_cli("list-presets", "nosuchthing") == 0
    assert capsys.readouterr().out.strip() == ""


def test_every_preset_row_describes_itself():
    for name, study, desc in list_presets():
        assert len(desc) > 20
        assert study in ("finite_time", "ergodic", "tau_stats",
                         "energy_drift", "sir", "jacobian")


# ---------------------------------------------------------------------------
# validation


def _base_config():
    return {
        "study": "ergodic",
        "scheme": "baoab",
        "domain": {"shape": "half_line", "a": 1.0},
        "dynamics": {"kind": "potential_langevin", "gamma": 1.0, "beta": 1.0,
                     "potential": {"potential": "quadratic_well", "k": 1.0,
                                   "dim": 1}},
        "observable": "q_squared_half",
        "q0": [2.0], "p0": [-0.1], "p0_law": None,
        "T": 20.0, "h": 0.1, "M": 100, "seed": 0,
        "h_sweep": [0.1], "m_sweep": [100],
        "reference": 1.2625676380804907,
    }


def test_validate_accepts_good_config():
    assert validate(_base_config()) == []


def test_validate_flags_non_integral_step_count():
    cfg = _base_config()
    cfg["T"], cfg["h"] = 1.0, 0.3
    assert any("not integral" in d for d in validate(cfg))


def test_validate_flags_bad_annulus():
    cfg = _base_config()
    cfg["domain"] = {"shape": "annulus", "r1": 2.0, "r2": 1.0}
    assert any("domain" in d for d in validate(cfg))


def test_validate_flags_incompatible_scheme_dynamics():
    cfg = _base_config()
    cfg["scheme"] = "bab"          # deterministic core needs gamma = 0
    assert any("scheme/dynamics" in d for d in validate(cfg))


def test_validate_flags_unknown_scheme_and_noise():
    cfg = _base_config()
    cfg["scheme"] = "rk4"
    cfg["noise"] = "levy"
    diags = validate(cfg)
    assert any("scheme" in d for d in diags)
    assert any("noise" in d or "levy" in d for d in diags)


def test_validate_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(_base_config()))
    assert run_cli("validate", str(good)) == 0
    bad_cfg = _base_config()
    bad_cfg["h"] = 0.3
    bad_cfg["T"] = 1.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(bad_cfg))
    capsys.readouterr()
    assert run_cli("validate", str(bad)) == 2
    assert "diagnostic" in capsys.readouterr().out


def test_validate_missing_file_is_config_error(tmp_path):
    assert run_cli("validate", str(tmp_path / "absent.json")) == 2


# ---------------------------------------------------------------------------
# runs and reports


def test_run_requires_exactly_one_source(tmp_path):
    assert run_cli("run", "--output", str(tmp_path)) == 2
    assert run_cli("run", "--preset", "exp2", "--config", "x.json",
                   "--output", str(tmp_path)) == 2


def test_run_unknown_preset(tmp_path):
    assert run_cli("run", "--preset", "exp99", "--output", str(tmp_path)) == 2


def test_run_single_h_writes_reports_and_stamp(tmp_path):
    code = run_cli("run", "--preset", "exp2", "--scheme", "baoab",
                   "--h", "0.1", "--M", "2000", "--seed", "7",
                   "--output", str(tmp_path))
    assert code == 0
    csv_path = tmp_path / "exp2_convergence.csv"
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0].startswith("h,mean,error")
    assert len(lines) == 2
    fields = lines[1].split(",")
    assert float(fields[0]) == 0.1
    # lossless 17-significant-digit round trip
    for text in fields[1:5]:
        assert format(float(text), ".17g") == text
    sidecar = json.loads((tmp_path / "exp2_convergence.json").read_text())
    assert sidecar["reference"] == pytest.approx(1.2626, abs=5e-5)
    stamp = json.loads((tmp_path / "exp2_stamp.json").read_text())
    assert stamp["seed"] == 7 and stamp["M"] == 2000


def test_stamp_round_trip_is_bitwise(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_cli("run", "--preset", "exp2", "--h", "0.1", "--M", "1500",
                   "--seed", "3", "--output", str(out1)) == 0
    assert run_cli("run", "--config", str(out1 / "exp2_stamp.json"),
                   "--output", str(out2)) == 0
    for name in ("exp2_convergence.csv", "exp2_convergence.json",
                 "exp2_stamp.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_thread_flag_does_not_change_results(tmp_path):
    out1 = tmp_path / "t1"
    out2 = tmp_path / "t2"
    cfg = _base_config()
    cfg.update(M=3000, chunk_size=500, preset="mini")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert run_cli("run", "--config", str(path), "--threads", "1",
                   "--output", str(out1)) == 0
    assert run_cli("run", "--config", str(path), "--threads", "2",
                   "--output", str(out2)) == 0
    assert (out1 / "mini_convergence.csv").read_bytes() == \
        (out2 / "mini_convergence.csv").read_bytes()


def test_underpowered_sweep_exits_4_and_writes_nothing(tmp_path):
    # at M = 400 every sweep error drowns in Monte Carlo noise; the failed
    # run must not leave partial report files behind
    assert run_cli("run", "--preset", "exp2", "--M", "400",
                   "--output", str(tmp_path)) == 4
    assert list(tmp_path.iterdir()) == []


def test_tau_stats_run_writes_histogram(tmp_path):
    code = run_cli("run", "--preset", "tau-stats", "--h", "0.01",
                   "--M", "500", "--output", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "tau-stats_summary.json").read_text())
    row = summary["rows"][0]
    assert row["count"] == 500
    hist_files = list(tmp_path.glob("tau-stats_hist_*.csv"))
    assert len(hist_files) == 1
    lines = hist_files[0].read_text().strip().splitlines()
    total = sum(int(line.split(",")[1]) for line in lines[1:])
    assert total == 500


def test_jacobian_check_run(tmp_path):
    code = run_cli("run", "--preset", "jacobian-check", "--M", "20",
                   "--output", str(tmp_path))
    assert code == 0
    payload = json.loads((tmp_path / "jacobian-check_jacobian.json").read_text())
    assert payload["worst_rel_err"] < 1e-5
    assert len(payload["rows"]) >= 15


def test_energy_drift_run_two_variants(tmp_path):
    code = run_cli("run", "--preset", "hamiltonian-fixed",
                   "--output", str(tmp_path))
    assert code == 0
    free = json.loads((tmp_path / "hamiltonian-fixed_free.json").read_text())
    box = json.loads((tmp_path / "hamiltonian-fixed_box.json").read_text())
    assert abs(free["slope"] - 2.0) < 0.3
    assert abs(box["slope"] - 1.0) < 0.5


def test_sir_run_writes_posterior_and_chain(tmp_path):
    code = run_cli("run", "--preset", "sir", "--T", "12", "--h", "0.002",
                   "--seed", "2", "--output", str(tmp_path))
    assert code == 0
    posterior = json.loads((tmp_path / "sir_posterior.json").read_text())
    assert abs(posterior["posterior"]["eta_mean"] - 0.7) < 0.1
    chain = (tmp_path / "sir_chain.csv").read_text().strip().splitlines()
    assert chain[0] == "step,eta,alpha"
    assert len(chain) - 1 == round((12 - 10) / 0.002)
    curves = (tmp_path / "sir_curves.csv").read_text().strip().splitlines()
    assert curves[0].startswith("t,S_est,I_est,R_est")
    assert len(curves) - 1 == 51


def test_json_format_skips_csv(tmp_path):
    code = run_cli("run", "--preset", "exp2", "--h", "0.1", "--M", "1000",
                   "--format", "json", "--output", str(tmp_path))
    assert code == 0
    assert not (tmp_path / "exp2_convergence.csv").exists()
    payload = json.loads((tmp_path / "exp2_convergence.json").read_text())
    assert len(payload["rows"]) == 1
