import csv
import io
import json

import pytest

from landscape_lab.cli import main
from landscape_lab.config import ConfigError, load_config, parse_config
from landscape_lab.experiments import emit_plots_data, run_experiment
from landscape_lab.serialization import loads_instance


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


PCA_OPT = {"experiment": "optimize", "generator": {"family": "pca", "d": 5}, "n_runs": 2, "master_seed": 4}


# --- config --------------------------------------------------------------------


def test_parse_config_fills_defaults():
    cfg = parse_config(PCA_OPT)
    echo = cfg.echo()
    assert echo["generator"]["family_params"]["spectrum"][0] == 2.0
    assert echo["optimizer"]["grad_tol"] == 1e-8
    assert echo["params"]["value_tol"] == 1e-6
    assert cfg.generator.seed == 4


@pytest.mark.parametrize("doc, path", [
    ({**PCA_OPT, "n_runs": 0}, "n_runs"),
    ({**PCA_OPT, "generator": {"family": "pca", "d": 1}}, "generator.d"),
    ({**PCA_OPT, "generator": {"family": "cubic", "d": 3}}, "generator.family"),
    ({**PCA_OPT, "generator": {"family": "pca", "d": 3, "family_params": {"rank": 1}}}, "generator.family_params"),
    ({**PCA_OPT, "optimizer": {"kind": "newton"}}, "optimizer.kind"),
    ({**PCA_OPT, "optimizer": {"step_size": -1.0}}, "optimizer.step_size"),
    ({**PCA_OPT, "certifier": {"alpha": 0.0}}, "certifier"),
    ({**PCA_OPT, "bogus": 1}, "config"),
    ({**PCA_OPT, "experiment": "concentration"}, "generator.family"),
    ({**PCA_OPT, "experiment": "fly"}, "experiment"),
])
def test_config_errors_name_field(doc, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.path == path


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"experiment": "optimize",\n  "n_runs": }')
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.path == f"{p}:2:13"


def test_seed_override_applies_to_generator():
    cfg = parse_config(PCA_OPT, seed_override=99)
    assert cfg.master_seed == 99 and cfg.generator.seed == 99


# --- command line ---------------------------------------------------------------


def test_cli_pass_writes_report(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["optimize", "--config", write_cfg(tmp_path, PCA_OPT), "--out", str(out)])
    assert code == 0
    assert "PASS  converged" in capsys.readouterr().out
    report = json.loads((out / "report.json").read_text())
    assert report["config_echo"]["optimizer"]["max_iters"] == 100_000
    assert {"config_echo", "per_run_rows", "summary", "wall_time", "version"} <= set(report)
    rows = list(csv.DictReader(io.StringIO((out / "rows.csv").read_text())))
    assert len(rows) == 2 and rows[0]["step_size"]


def test_cli_failing_check_exits_one(tmp_path, capsys):
    doc = {**PCA_OPT, "optimizer": {"kind": "gd", "max_iters": 3}}
    code = main(["optimize", "--config", write_cfg(tmp_path, doc), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "converged" in capsys.readouterr().err


def test_cli_usage_and_config_errors_exit_two(tmp_path, capsys):
    assert main([]) == 2
    assert main(["optimize"]) == 2
    assert main(["optimize", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["optimize", "--config", str(bad)]) == 2
    assert "bad.json:1:2" in capsys.readouterr().err
    assert main(["certify", "--config", write_cfg(tmp_path, PCA_OPT)]) == 2


def test_cli_generate_round_trips(tmp_path):
    spec = write_cfg(tmp_path, {"family": "mc", "d": 40, "family_params": {"p": 0.5}, "seed": 3}, "spec.json")
    out = tmp_path / "inst.json"
    assert main(["generate", "--config", spec, "--out", str(out)]) == 0
    inst = loads_instance(out.read_text())
    assert inst.d == 40 and inst.seed == 3
    too_sparse = write_cfg(tmp_path, {"family": "mc", "d": 40, "family_params": {"p": 0.01}}, "s2.json")
    assert main(["generate", "--config", too_sparse]) == 2


def test_plots_flag_writes_decay_and_sweep(tmp_path):
    out = tmp_path / "o"
    assert main(["optimize", "--config", write_cfg(tmp_path, PCA_OPT), "--out", str(out), "--plots"]) == 0
    assert (out / "decay_run000.csv").read_text().startswith("iter,log10_err\n")
    assert (out / "sweep.csv").exists()


def test_plots_without_traces_writes_header_only(tmp_path):
    doc = {"experiment": "landscape-sweep", "generator": {"family": "pca", "d": 4}, "output_dir": str(tmp_path)}
    report = run_experiment(parse_config(doc), write=False)
    emit_plots_data(report, tmp_path)
    assert (tmp_path / "decay.csv").read_text() == "iter,log10_err\n"
    sweep = (tmp_path / "sweep.csv").read_text().splitlines()
    assert sweep[0] == "grad_norm,hess_min_eig" and len(sweep) == 1 + 9


def test_report_rows_are_seed_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["optimize", "--config", write_cfg(tmp_path, PCA_OPT), "--out", str(a)])
    main(["optimize", "--config", write_cfg(tmp_path, PCA_OPT), "--out", str(b)])
    assert (a / "rows.csv").read_bytes() == (b / "rows.csv").read_bytes()
    c = tmp_path / "c"
    main(["optimize", "--config", write_cfg(tmp_path, PCA_OPT), "--out", str(c), "--seed", "5"])
    assert (a / "rows.csv").read_bytes() != (c / "rows.csv").read_bytes()
