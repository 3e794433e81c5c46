import json

import numpy as np
import pytest

from sepadh.cli import main
from sepadh.config import load_estimation, load_scenario, parse_model_spec
from sepadh.errors import ConfigError
from sepadh.graphs import format_dag, load_fixture
from sepadh.manifest import (load_manifest, manifests_equivalent, sha256_file,
                             sha256_text)
from sepadh.panel import emit_csv
from sepadh.render import risk_plot
from sepadh.risk import RiskCurve
from tests.test_panel import make_panel

SIM_INI = """\
[trial]
n_per_arm = 400
horizon = 3
seed = 14

[models]
adherence = 2
"""

EST_INI = """\
[estimand]
z_a = 1
z_y = 0
variant = w_y

[models]
outcome = saturated: a, z
adherence = saturated: a_prev, z
arm_full = saturated: a_prev
arm_mid = saturated: a_prev
arm_base = saturated:
"""


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


# -- configuration parsing ---------------------------------------------------------


def test_load_scenario_fields(tmp_path):
    cfg = load_scenario(write(tmp_path / "sim.ini", SIM_INI))
    assert cfg.n_per_arm == 400
    assert cfg.horizon == 3
    assert cfg.seed == 14
    assert cfg.adherence_model == 2
    assert cfg.crossover is False
    assert (cfg.referent_za, cfg.referent_zy) == (1, 0)


def test_load_scenario_seed_override(tmp_path):
    path = write(tmp_path / "sim.ini", SIM_INI)
    assert load_scenario(path, seed_override=999).seed == 999


def test_load_scenario_coefficient_override(tmp_path):
    text = SIM_INI + "\n[coefficients]\na = 0.5, 0.1, -0.2, 0.0\n"
    cfg = load_scenario(write(tmp_path / "sim.ini", text))
    assert cfg.equations.a == (0.5, 0.1, -0.2, 0.0)
    # untouched rows keep the named adherence model's values
    assert cfg.equations.l_a == (0.05, 0.035, -0.035)


def test_load_scenario_errors(tmp_path):
    cases = [
        ("[models]\nadherence = 1\n", "no [trial] section"),
        ("[trial]\nhorizon = 3\nseed = 1\n", "n_per_arm"),
        ("[trial]\nn_per_arm = few\nhorizon = 3\n", "integer"),
        ("[trial]\nn_per_arm = 10\nhorizon = 3\ncrossover = maybe\n",
         "boolean"),
        (SIM_INI + "\n[coefficients]\nq = 1, 2, 3\n", "unknown coefficient"),
        (SIM_INI + "\n[coefficients]\na = 1, 2\n", "needs 4 values"),
        (SIM_INI + "\n[coefficients]\na = 1, 2, x, 4\n", "non-numeric"),
    ]
    for i, (text, fragment) in enumerate(cases):
        path = write(tmp_path / f"bad{i}.ini", text)
        with pytest.raises(ConfigError) as err:
            load_scenario(path)
        assert fragment in str(err.value)


def test_load_scenario_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(str(tmp_path / "absent.ini"))


def test_parse_model_spec():
    assert parse_model_spec("saturated: a, z") == ("saturated", ("a", "z"))
    assert parse_model_spec("pooled-logistic:") == ("pooled-logistic", ())
    with pytest.raises(ConfigError):
        parse_model_spec("no separator")


def test_load_estimation_defaults(tmp_path):
    cfg = load_estimation(write(tmp_path / "est.ini", "[estimand]\n"))
    assert (cfg.z_a, cfg.z_y) == (1, 0)
    assert cfg.variant == "w_y"
    assert cfg.replicates == 0 and cfg.level == 0.95
    assert set(cfg.specs) == {"outcome", "adherence", "arm_full",
                              "arm_mid", "arm_base", "crossover"}


def test_load_estimation_respecification(tmp_path):
    text = EST_INI + "\n[bootstrap]\nreplicates = 9\nlevel = 0.9\nseed = 3\n"
    cfg = load_estimation(write(tmp_path / "est.ini", text))
    assert cfg.specs["outcome"].conditioning == ("a", "z")
    assert cfg.specs["outcome"].target == "y"
    assert cfg.specs["arm_base"].conditioning == ()
    assert (cfg.replicates, cfg.level, cfg.boot_seed) == (9, 0.9, 3)
    assert load_estimation(write(tmp_path / "e2.ini", text),
                           seed_override=42).boot_seed == 42


def test_load_estimation_errors(tmp_path):
    cases = [
        ("[bootstrap]\nreplicates = 2\n", "no [estimand] section"),
        ("[estimand]\nz_a = 2\n", "z_a must be 0 or 1"),
        ("[estimand]\nvariant = w_q\n", "variant must be"),
        ("[estimand]\n\n[models]\nmystery = saturated: a\n",
         "unknown model name"),
    ]
    for i, (text, fragment) in enumerate(cases):
        path = write(tmp_path / f"bad{i}.ini", text)
        with pytest.raises(ConfigError) as err:
            load_estimation(path)
        assert fragment in str(err.value)


# -- manifests ----------------------------------------------------------------------


def test_sha256_helpers(tmp_path):
    path = tmp_path / "blob.txt"
    path.write_text("k,risk\n1,0.5\n", encoding="utf-8")
    assert sha256_file(str(path)) == sha256_text("k,risk\n1,0.5\n")


def test_manifests_equivalent_ignores_wall_clock():
    a = {"command": "simulate", "outputs": {"panel.csv": "ab"},
         "wall_clock_s": 1.0}
    b = dict(a, wall_clock_s=9.9)
    assert manifests_equivalent(a, b)
    c = dict(a, outputs={"panel.csv": "cd"})
    assert not manifests_equivalent(a, c)


# -- command line -------------------------------------------------------------------


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_cli_simulate(tmp_path, capsys):
    cfg = write(tmp_path / "sim.ini", SIM_INI)
    out = tmp_path / "out"
    assert run_cli("simulate", "--config", cfg, "--out-dir", out) == 0
    text = capsys.readouterr().out
    assert "wrote" in text and "800 individuals" in text
    manifest = load_manifest(out / "manifest.json")
    assert manifest["command"] == "simulate"
    assert manifest["seeds"] == {"simulation": 14}
    assert manifest["config_sha256"] == sha256_file(cfg)
    assert manifest["outputs"]["panel.csv"] == sha256_file(
        str(out / "panel.csv"))


def test_cli_simulate_deterministic(tmp_path):
    cfg = write(tmp_path / "sim.ini", SIM_INI)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    run_cli("simulate", "--config", cfg, "--out-dir", out1)
    run_cli("simulate", "--config", cfg, "--out-dir", out2)
    assert (out1 / "panel.csv").read_bytes() == (out2 / "panel.csv").read_bytes()
    assert manifests_equivalent(load_manifest(out1 / "manifest.json"),
                                load_manifest(out2 / "manifest.json"))


def test_cli_simulate_seed_flag(tmp_path):
    cfg = write(tmp_path / "sim.ini", SIM_INI)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    run_cli("simulate", "--config", cfg, "--out-dir", out1)
    run_cli("simulate", "--config", cfg, "--out-dir", out2, "--seed", 99)
    assert (out1 / "panel.csv").read_bytes() != (out2 / "panel.csv").read_bytes()
    assert load_manifest(out2 / "manifest.json")["seeds"] == {
        "simulation": 99}


def test_cli_simulate_counterfactual(tmp_path, capsys):
    cfg = write(tmp_path / "sim.ini", SIM_INI)
    out = tmp_path / "out"
    code = run_cli("simulate", "--config", cfg, "--out-dir", out,
                   "--counterfactual", 1, 0)
    assert code == 0
    assert (out / "panel_za1_zy0.csv").exists()
    assert "400 individuals" in capsys.readouterr().out


def test_cli_out_dir_env(tmp_path, monkeypatch):
    cfg = write(tmp_path / "sim.ini", SIM_INI)
    target = tmp_path / "from_env"
    monkeypatch.setenv("SEPADH_OUT_DIR", str(target))
    assert run_cli("simulate", "--config", cfg) == 0
    assert (target / "panel.csv").exists()


def test_cli_identify_fixture(capsys):
    assert run_cli("identify", "--fixture", "adherence_only") == 0
    text = capsys.readouterr().out
    assert "graph: fixture adherence_only" in text
    assert "verdict: identified" in text
    assert "assumed (Z randomized)" in text


def test_cli_identify_violated_fixture(capsys):
    assert run_cli("identify", "--fixture",
                   "violation_unmeasured_common_cause") == 0
    text = capsys.readouterr().out
    assert "verdict: violated" in text
    assert "violation (ii): Z_A -> L_A_2 <- U -> Y_2" in text


def test_cli_identify_graph_file(tmp_path, capsys):
    path = write(tmp_path / "graph.txt",
                 format_dag(load_fixture("prognostic_outcome_side")))
    assert run_cli("identify", path) == 0
    assert "verdict: identified" in capsys.readouterr().out


def test_cli_identify_unknown_fixture(capsys):
    assert run_cli("identify", "--fixture", "bogus") == 2
    err = capsys.readouterr().err
    assert err.startswith("configuration error:") and "available" in err


def test_cli_identify_bad_graph_file(tmp_path, capsys):
    path = write(tmp_path / "graph.txt", "Z -> -> Y\n")
    assert run_cli("identify", path) == 3
    assert capsys.readouterr().err.startswith("data error:")


@pytest.fixture(scope="module")
def sim_outputs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli_est")
    cfg = write(tmp / "sim.ini", SIM_INI)
    out = tmp / "simout"
    assert run_cli("simulate", "--config", cfg, "--out-dir", out) == 0
    return tmp, str(out / "panel.csv")


def test_cli_estimate(sim_outputs, capsys):
    tmp, panel = sim_outputs
    cfg = write(tmp / "est.ini", EST_INI)
    out = tmp / "estout"
    assert run_cli("estimate", "--config", cfg, "--panel", panel,
                   "--out-dir", out) == 0
    text = capsys.readouterr().out
    assert "separable risk (z_a=1, z_y=0) via w_y" in text
    manifest = load_manifest(out / "manifest.json")
    expected = {"separable_risk.csv", "comparator_risk.csv",
                "weight_diagnostics.csv", "models.txt", "risk.svg"}
    assert set(manifest["outputs"]) == expected
    for name in expected:
        assert (out / name).exists()
    diag = (out / "weight_diagnostics.csv").read_text(encoding="utf-8")
    assert diag.startswith("k,n,min,max,mean,ess\n")


def test_cli_estimate_deterministic(sim_outputs):
    tmp, panel = sim_outputs
    text = EST_INI + "\n[bootstrap]\nreplicates = 4\nseed = 11\n"
    cfg = write(tmp / "est_boot.ini", text)
    outs = [tmp / "det1", tmp / "det2"]
    for out in outs:
        assert run_cli("estimate", "--config", cfg, "--panel", panel,
                       "--out-dir", out) == 0
    assert manifests_equivalent(load_manifest(outs[0] / "manifest.json"),
                                load_manifest(outs[1] / "manifest.json"))


def test_cli_estimate_bootstrap_summary(sim_outputs, capsys):
    tmp, panel = sim_outputs
    text = EST_INI + "\n[bootstrap]\nreplicates = 4\nseed = 11\n"
    cfg = write(tmp / "est_boot2.ini", text)
    out = tmp / "bootout"
    assert run_cli("estimate", "--config", cfg, "--panel", panel,
                   "--out-dir", out) == 0
    text = capsys.readouterr().out
    assert "bootstrap: 4/4 replicates, level 0.95" in text
    banded = (out / "separable_risk.csv").read_text(encoding="utf-8")
    assert banded.splitlines()[0] == "k,lambda,risk,lo,hi,atrisk_mass"


def test_cli_estimate_bad_config(sim_outputs, tmp_path, capsys):
    _, panel = sim_outputs
    cfg = write(tmp_path / "bad.ini", "[estimand]\nvariant = w_q\n")
    assert run_cli("estimate", "--config", cfg, "--panel", panel,
                   "--out-dir", tmp_path) == 2
    assert capsys.readouterr().err.startswith("configuration error:")


def test_cli_estimate_invalid_panel(tmp_path, capsys):
    cfg = write(tmp_path / "est.ini", EST_INI)
    panel = write(tmp_path / "panel.csv",
                  "id,k,z,a,l_a,l_y,y\n0,2,1,1,0,0,0\n")
    assert run_cli("estimate", "--config", cfg, "--panel", panel,
                   "--out-dir", tmp_path) == 3
    assert capsys.readouterr().err.startswith("data error:")


def test_cli_estimate_positivity_exit_code(tmp_path, capsys):
    # a single-arm panel cannot support transport toward the other arm
    # under the saturated default models
    rows = [(i, 1, 1, i % 2, 0, 0, 1 if i == 0 else 0) for i in range(12)]
    panel_path = tmp_path / "one_arm.csv"
    emit_csv(make_panel(rows), str(panel_path))
    cfg = write(tmp_path / "est.ini", "[estimand]\nz_a = 1\nz_y = 0\n")
    assert run_cli("estimate", "--config", cfg, "--panel", panel_path,
                   "--out-dir", tmp_path) == 4
    assert capsys.readouterr().err.startswith("numerical error:")


def test_cli_oracle_check(tmp_path, capsys):
    cfg = write(tmp_path / "sim.ini", SIM_INI)
    assert run_cli("oracle-check", "--config", cfg) == 0
    text = capsys.readouterr().out
    assert "channel pair (z_a=1, z_y=0): pass" in text
    assert "channel pair (z_a=0, z_y=0): pass" in text
    assert "all channel pairs agree with the g-formula" in text


def test_cli_oracle_check_horizon_flag(tmp_path, capsys):
    cfg = write(tmp_path / "sim.ini", SIM_INI)
    assert run_cli("oracle-check", "--config", cfg, "--horizon", 2) == 0
    text = capsys.readouterr().out
    assert "k=2:" in text and "k=3:" not in text


def test_cli_reproduce(tmp_path, capsys):
    cfg = write(tmp_path / "sim.ini",
                "[trial]\nn_per_arm = 4000\nhorizon = 3\nseed = 23\n")
    out = tmp_path / "study"
    assert run_cli("reproduce", "--config", cfg, "--out-dir", out,
                   "--scale", 1, "--models", "1") == 0
    text = capsys.readouterr().out
    assert "model 1:" in text
    manifest = load_manifest(out / "manifest.json")
    for name in ("model1_separable.csv", "model1_itt_arm0.csv",
                 "model1_itt_arm1.csv", "model1_adherence.csv",
                 "model1_risk.svg", "model1_adherence.svg", "summary.csv"):
        assert name in manifest["outputs"]
        assert (out / name).exists()
    assert manifest["seeds"]["n_per_arm"] == 4000
    summary = (out / "summary.csv").read_text(encoding="utf-8").splitlines()
    assert summary[0] == "model,itt_arm0,itt_arm1,separable_10,exact_10"
    assert len(summary) == 2


def test_cli_reproduce_bad_scale(tmp_path, capsys):
    cfg = write(tmp_path / "sim.ini", SIM_INI)
    assert run_cli("reproduce", "--config", cfg, "--out-dir", tmp_path,
                   "--scale", -1) == 2
    assert capsys.readouterr().err.startswith("configuration error:")


def test_cli_version(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("--version")
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("sepadh ")


def test_cli_requires_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli()
    assert exc.value.code == 2


# -- svg rendering ------------------------------------------------------------------


def test_risk_plot_renders_series_and_band():
    curve = RiskCurve(
        ks=np.array([1, 2]), hazard=np.array([0.1, 0.1]),
        risk=np.array([0.1, 0.19]),
        atrisk_mass=np.array([10.0, 9.0]), label="example")
    svg = risk_plot("title", [curve]).render()
    assert svg.startswith("<svg ") and svg.endswith("</svg>\n")
    assert "polyline" in svg and "example" in svg and "polygon" not in svg
    banded = curve.with_band(np.array([0.05, 0.1]), np.array([0.2, 0.3]),
                             0.95)
    svg = risk_plot("title", [banded]).render()
    assert "polygon" in svg
    assert risk_plot("title", [curve]).render() == \
        risk_plot("title", [curve]).render()


def test_json_manifest_shape(tmp_path):
    cfg = write(tmp_path / "sim.ini", SIM_INI)
    out = tmp_path / "out"
    run_cli("simulate", "--config", cfg, "--out-dir", out)
    raw = (out / "manifest.json").read_text(encoding="utf-8")
    payload = json.loads(raw)
    assert sorted(payload) == ["command", "config_path", "config_sha256",
                               "outputs", "seeds", "version",
                               "wall_clock_s"]
    assert raw.endswith("\n")
