import textwrap
from dataclasses import replace

import pytest

from jtcran import experiments
from jtcran.charfn import AnalyticOptions
from jtcran.cli import EXIT_CONFIG, EXIT_GATE, EXIT_NUMERIC, EXIT_OK, main
from jtcran.core_model import FIG4_BASE, NetworkParams, TruncationPolicy
from jtcran.experiments import (DEFAULT_SWEEPS, SEED_ENV, ConfigError, ExperimentSpec, default_config,
                                parse_config, parse_config_text, run_experiment, to_ini)
from jtcran.quadrature import QuadratureError

MINIMAL = "[network]\nlambda_R = 1e-4\nlambda_U = 2e-5\n"


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


def test_minimal_config_takes_defaults():
    spec = parse_config_text(MINIMAL)
    assert spec.params == NetworkParams(1e-4, 2e-5)
    assert spec.kind == "coverage_curve"
    assert spec.sweep == DEFAULT_SWEEPS["coverage_curve"]
    assert spec.n_realizations == 10_000 and spec.master_seed == 0 and spec.workers == 1
    assert spec.options == AnalyticOptions() and spec.policy == TruncationPolicy()


def test_malformed_number_names_field_and_line():
    text = "[network]\nlambda_R = 1e-4\nlambda_U = 2e-5x\n"
    with pytest.raises(ConfigError, match=r"line 3: network\.lambda_U"):
        parse_config_text(text)


def test_unknown_key_and_section_are_rejected():
    with pytest.raises(ConfigError, match=r"line 4: network\.lambda_X: unknown key"):
        parse_config_text(MINIMAL + "lambda_X = 3\n")
    with pytest.raises(ConfigError, match=r"\[plotting\]: unknown section"):
        parse_config_text(MINIMAL + "[plotting]\ncolor = red\n")


def test_invalid_values_are_rejected():
    with pytest.raises(ConfigError, match="missing required key network.lambda_U"):
        parse_config_text("[network]\nlambda_R = 1e-4\n")
    with pytest.raises(ConfigError, match="alpha must exceed 2"):
        parse_config_text(MINIMAL + "alpha = 2\n")
    with pytest.raises(ConfigError, match="experiment.kind"):
        parse_config_text(MINIMAL + "[experiment]\nkind = heatmap\n")
    with pytest.raises(ConfigError, match="analytic.gamma_source"):
        parse_config_text(MINIMAL + "[analytic]\ngamma_source = guessed\n")
    with pytest.raises(ConfigError, match="sweep.M"):
        parse_config_text(MINIMAL + "[sweep]\nM = \n")
    with pytest.raises(ConfigError, match="montecarlo.mode"):
        parse_config_text(MINIMAL + "[montecarlo]\nmode = fast\n")
    with pytest.raises(ConfigError, match="integer"):
        parse_config_text(MINIMAL + "[montecarlo]\nn_realizations = 10.5\n")


def test_threshold_ranges_and_default_threshold_axis():
    spec = parse_config_text(MINIMAL + "[sweep]\nM = 1, 2\n")
    assert spec.axes()["M"] == (1.0, 2.0)
    assert spec.axes()["theta_db"] == DEFAULT_SWEEPS["coverage_curve"][0][1]
    spec = parse_config_text(MINIMAL + "[sweep]\ntheta_db = -10:20:2.5\n")
    assert len(spec.axes()["theta_db"]) == 13


@pytest.mark.parametrize("kind", experiments.KINDS)
def test_manifest_round_trip(kind):
    spec = parse_config_text(default_config(kind))
    spec = replace(spec, master_seed=99, options=AnalyticOptions.calibrated(),
                   policy=TruncationPolicy(tail_mass_eps=3e-7))
    again = parse_config_text(to_ini(spec, {"wall_time_s": 1.5, "code_version": "x"}))
    assert again == spec


def test_seed_override(tmp_path, monkeypatch):
    path = write(tmp_path, MINIMAL)
    monkeypatch.setenv(SEED_ENV, "123")
    assert parse_config(path).master_seed == 123
    monkeypatch.setenv(SEED_ENV, "abc")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_run_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "out"
    path = write(tmp_path, f"""\
        [experiment]
        kind = coverage_curve
        output = {out}
        [network]
        lambda_R = 9.5e-5
        lambda_U = 9.5e-5
        [sweep]
        M = 1, 2
        theta_db = 0, 10
        [montecarlo]
        n_realizations = 200
        """)
    assert main(["run", str(path)]) == EXIT_OK
    lines = (out / "coverage.csv").read_text().splitlines()
    assert lines[0] == "M,theta_db,value,error,source"
    assert len(lines) == 1 + 2 * 2 * 2
    assert {l.rsplit(",", 1)[1] for l in lines[1:]} == {"analytic", "empirical:exact"}
    gap = (out / "coverage_gap.csv").read_text().splitlines()
    assert gap[0] == "M,value,error,source" and len(gap) == 3
    manifest = (out / "manifest.ini").read_text()
    assert "wall_time_s" in manifest and "max_wilson_half_width" in manifest
    assert parse_config_text(manifest) == parse_config(path)


def _ratio_config(tmp_path, out, workers):
    return write(tmp_path, f"""\
        [experiment]
        kind = interference_ratio_map
        output = {out}
        workers = {workers}
        [network]
        lambda_R = 9.5e-5
        lambda_U = 9.5e-5
        [sweep]
        nodes_R = 1, 3
        nodes_U = 2
        [montecarlo]
        n_realizations = 90
        chunk = 20
        master_seed = 5
        """, f"ratio{workers}.ini")


def test_csv_identical_across_worker_counts(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(_ratio_config(tmp_path, a, 1))]) == EXIT_OK
    assert main(["run", str(_ratio_config(tmp_path, b, 3))]) == EXIT_OK
    assert (a / "interference_ratio.csv").read_bytes() == (b / "interference_ratio.csv").read_bytes()
    assert (a / "interference_ratio.csv").read_text().splitlines()[0] == "nodes_R,nodes_U,value,error,source"


def test_exit_codes(tmp_path, monkeypatch, capsys):
    assert main(["run", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    bad = write(tmp_path, MINIMAL + "lambda_Q = 1\n", "bad.ini")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert "lambda_Q" in capsys.readouterr().err

    def fail(*args, **kwargs):
        raise QuadratureError("coverage failed at theta=1 over strata n_R<=3, n_U<=4", 1e-3)

    monkeypatch.setattr(experiments, "coverage_point", fail)
    ok = write(tmp_path, MINIMAL + f"[experiment]\noutput = {tmp_path / 'o'}\n[montecarlo]\nenabled = false\n",
               "ok.ini")
    assert main(["run", str(ok)]) == EXIT_NUMERIC
    assert "theta=1" in capsys.readouterr().err


def test_validate_and_gate_exit(monkeypatch, capsys):
    assert main(["validate"]) == EXIT_OK
    assert capsys.readouterr().out.count("PASS") == 4
    from jtcran import validation

    failing = validation.Check("forced", False, 1.0, 0.5, 0.0)
    monkeypatch.setattr(validation, "run_all", lambda: [failing])
    assert main(["validate"]) == EXIT_GATE


def test_validation_suite_kind(tmp_path):
    out = tmp_path / "v"
    path = write(tmp_path, MINIMAL + f"[experiment]\nkind = validation_suite\noutput = {out}\n")
    assert main(["run", str(path)]) == EXIT_OK
    rows = (out / "validation.csv").read_text().splitlines()
    assert rows[0] == "check,value,error,source,passed" and len(rows) == 5


def test_show_defaults_parses(capsys):
    assert main(["show-defaults", "--kind", "interference_ratio_map"]) == EXIT_OK
    spec = parse_config_text(capsys.readouterr().out)
    assert spec.params == FIG4_BASE
    assert spec.kind == "interference_ratio_map"
