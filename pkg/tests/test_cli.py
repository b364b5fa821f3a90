import numpy as np
import pytest

import fraccn.cli as cli
import fraccn.harness as harness
from fraccn.cli import PRESETS, main, preset_argv
from fraccn.stepper import SteppingError


def csv_body(text):
    return [line for line in text.splitlines() if not line.startswith("# generated")]


def rates_by_block(text):
    out, block = {}, None
    for line in text.splitlines():
        if line.startswith("# block: "):
            block = line[len("# block: "):]
            out[block] = []
        elif line and not line.startswith("#") and not line.startswith("alpha,"):
            rate = line.split(",")[5]
            if rate:
                out[block].append(float(rate))
    return out


def test_weights_alpha_one(capsys):
    assert main(["weights", "--alpha", "1", "--n", "3"]) == 0
    assert capsys.readouterr().out.split() == ["1", "-1", "0", "0"]


def test_weights_half(capsys):
    assert main(["weights", "--alpha", "0.5", "--n", "2"]) == 0
    assert [float(x) for x in capsys.readouterr().out.split()] == [1.0, -0.5, -0.125]


@pytest.mark.parametrize("argv", [
    ["weights", "--alpha", "1.5", "--n", "3"],
    ["weights", "--alpha", "0.5"],
    ["run", "--problem", "sq_z", "--alpha", "0.5", "--n-list", "10,20"],
    ["run", "--problem", "sq_a", "--alpha", "0.5", "--n-list", "20,10"],
    ["run", "--problem", "sq_a", "--alpha", "0.5", "--n-list", "10..30"],
    ["run", "--problem", "sq_a", "--alpha", "2", "--n-list", "10"],
    ["run", "--problem", "sq_a", "--alpha", "0.5", "--n-list", "10", "--mesh", "7"],
    ["run", "--problem", "sq_d", "--alpha", "0.5", "--n-list", "10"],
    ["run", "--problem", "sq_a", "--alpha", "0.5", "--n-list", "10", "--reference", "exact"],
    ["run", "--problem", "sq_a", "--alpha", "0.5", "--n-list", "10", "--variant", "bdf2"],
    ["decay", "--problem", "sq_a", "--alpha", "0.5", "--t-list", "1e-4,1e-3"],
    ["certify", "--alpha", "0.5", "--tau", "1e-3", "--theta", "3"],
    ["table", "--preset", "tab99"],
    ["table"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_2_before_computing(argv, monkeypatch, capsys):
    def boom(*a, **k):
        raise AssertionError("computation started")

    monkeypatch.setattr(cli, "run_convergence_study", boom)
    monkeypatch.setattr(cli, "run_time_decay_study", boom)
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("# small ex1b run\nproblem = ex1b\nalpha = 0.5\nn-list = 10..40\nmesh = 8\n"
                   "refinement = 100\n")
    assert main(["run", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "# space_M: 8" in out
    assert main(["run", "--config", str(cfg), "--mesh", "12"]) == 0
    assert "# space_M: 12" in capsys.readouterr().out


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("alpha = 0.5\ncolour = blue\n")
    assert main(["weights", "--config", str(cfg), "--n", "2"]) == 2
    assert "colour" in capsys.readouterr().err
    cfg.write_text("not a pair\n")
    assert main(["weights", "--config", str(cfg)]) == 2
    assert main(["weights", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_certify_prints_report(capsys):
    assert main(["certify", "--alpha", "0.5", "--tau", "1e-3", "--samples", "200"]) == 0
    out = capsys.readouterr().out
    assert "beta_abs_min" in out and "inside sector: True" in out


def test_out_file(tmp_path, capsys):
    path = tmp_path / "t.csv"
    argv = ["run", "--problem", "sq_b", "--alpha", "0.5", "--n-list", "10,20", "--mesh", "4",
            "--refinement", "50", "--out", str(path)]
    assert main(argv) == 0
    assert capsys.readouterr().out == ""
    assert "alpha,N,tau,l2_error,normalized_error,rate" in path.read_text()
    assert main(argv[:-1] + [str(tmp_path / "no" / "t.csv")]) == 2


def test_numerical_failure_exit_1(monkeypatch, capsys):
    def broken(*a, **k):
        raise SteppingError("non-finite state at step 1")

    monkeypatch.setattr(harness, "advance", broken)
    argv = ["run", "--problem", "sq_a", "--alpha", "0.5", "--n-list", "10", "--mesh", "4",
            "--refinement", "20"]
    assert main(argv) == 1
    captured = capsys.readouterr()
    assert "numerical failure" in captured.err
    assert "# failed:" in captured.out


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(name, capsys):
    assert main(["table", "--preset", name, "--mesh", "4"]) == 0
    via_preset = capsys.readouterr().out
    assert main(preset_argv(name, mesh=4)) == 0
    explicit = capsys.readouterr().out
    assert csv_body(via_preset) == csv_body(explicit)
    assert "alpha,N,tau,l2_error,normalized_error,rate" in explicit


def test_preset_sizes():
    assert len(cli.plan_run(cli._parser().parse_args(preset_argv("tab3")[0:]))) == 1
    specs = cli.plan_run(cli._parser().parse_args(preset_argv("tab5")))
    assert [s.t_eval for s in specs] == [1.0, 0.01, 0.001]
    assert {s.space_M for s in specs} == {64}
    full = cli.plan_run(cli._parser().parse_args(preset_argv("tab1", paper_scale=True)))
    assert full[0].space_M == 10000
    assert cli.plan_run(cli._parser().parse_args(preset_argv("tab4", paper_scale=True)))[0].space_M == 500


def test_table3_preset_rate(capsys):
    assert main(["table", "--preset", "tab3"]) == 0
    rates = rates_by_block(capsys.readouterr().out)
    block = next(k for k in rates if "alpha=0.5" in k)
    assert 1.85 <= np.mean(rates[block][-3:]) <= 2.15


def test_low_regularity_run(capsys):
    argv = ["run", "--problem", "sq_d", "--beta", "0.2", "--alpha", "0.5", "--n-list", "10..160"]
    assert main(argv) == 0
    (rates,) = rates_by_block(capsys.readouterr().out).values()
    assert abs(np.mean(rates[-3:]) - 1.21) <= 0.12


@pytest.mark.parametrize("command", ["weights", "certify", "run", "decay", "table"])
def test_help_lists_every_flag(command, capsys):
    with pytest.raises(SystemExit):
        cli._parser().parse_args([command, "--help"])
    text = capsys.readouterr().out
    sub = cli._subparser(cli._parser(), command)
    for action in sub._actions:
        for opt in action.option_strings:
            assert opt in text
