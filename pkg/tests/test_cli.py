"""Command-line entry points, exercised through main() with tiny configs."""

import os

import numpy as np
import pytest

from sdlowrank import cli
from sdlowrank import harness


@pytest.fixture
def tiny_cfg_file(tmp_path):
    cfg = harness.desk_config(
        n1=5, n2=5, rank=1, ell=16, oversampling_grid=(2.0, 4.0),
        orders=(1,), trials=2, master_seed=77,
        output_path=str(tmp_path / "out"),
    )
    path = tmp_path / "tiny.cfg"
    harness.save_config(cfg, path)
    return str(path)


def test_selftest_passes(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "SELFTEST PASS" in out
    assert "FAIL" not in out


def test_quantize_prints_and_saves(tiny_cfg_file, tmp_path, capsys):
    out_dir = str(tmp_path / "inst")
    code = cli.main(["quantize", "--config", tiny_cfg_file, "--out", out_dir])
    assert code == 0
    out = capsys.readouterr().out
    assert "overflow: False" in out
    assert "alphabet" in out
    saved = np.load(os.path.join(out_dir, "quantize_instance.npz"))
    assert set(saved.files) == {"y", "q", "u", "X"}
    assert saved["y"].shape == saved["q"].shape == saved["u"].shape


def test_recover_reports_converged_instance(tiny_cfg_file, capsys):
    assert cli.main(["recover", "--config", tiny_cfg_file]) == 0
    out = capsys.readouterr().out
    assert "relative error" in out
    assert "converged True" in out


def test_recover_instance_matches_sweep_first_row(tiny_cfg_file, tmp_path):
    cfg = harness.load_config(tiny_cfg_file, output_path=str(tmp_path / "sw"))
    task = cli._first_instance_task(cfg)
    record = harness._run_trial(task)
    sweep = harness.run_oversampling_sweep(cfg)
    first = [
        t for t in sweep.records
        if t.r == cfg.orders[0]
        and t.lam == cfg.oversampling_grid[0]
        and t.trial_index == 0
    ]
    assert len(first) == 1
    assert record == first[0]


def test_sweep_oversampling_cli(tiny_cfg_file, tmp_path, capsys):
    out_dir = str(tmp_path / "sweep")
    code = cli.main(["sweep-oversampling", "--config", tiny_cfg_file, "--out", out_dir])
    assert code == 0
    out = capsys.readouterr().out
    assert "fitted slope" in out
    assert os.path.exists(os.path.join(out_dir, "oversampling.csv"))


def test_sweep_noise_cli(tiny_cfg_file, tmp_path, capsys):
    out_dir = str(tmp_path / "noise")
    code = cli.main(["sweep-noise", "--config", tiny_cfg_file, "--out", out_dir])
    assert code == 0
    assert os.path.exists(os.path.join(out_dir, "noise.csv"))


def test_rate_distortion_cli(tmp_path, capsys):
    cfg = harness.desk_config(
        n1=5, n2=5, rank=1, ell=16, oversampling_grid=(2.0, 4.0),
        orders=(2,), trials=2, master_seed=77, encoder_dim=16,
        constraint_form="encoded", output_path=str(tmp_path / "out"),
    )
    path = tmp_path / "rate.cfg"
    harness.save_config(cfg, path)
    code = cli.main(["rate-distortion", "--config", str(path)])
    assert code == 0
    assert os.path.exists(os.path.join(cfg.output_path, "rate_distortion.csv"))


def test_rip_check_cli(tiny_cfg_file, capsys):
    assert cli.main(["rip-check", "--config", tiny_cfg_file, "--trials", "20"]) == 0
    out = capsys.readouterr().out
    assert "delta_hat" in out


def test_seed_flag_changes_the_instance(tiny_cfg_file, capsys):
    cli.main(["quantize", "--config", tiny_cfg_file, "--seed", "1"])
    first = capsys.readouterr().out
    cli.main(["quantize", "--config", tiny_cfg_file, "--seed", "2"])
    second = capsys.readouterr().out
    assert first != second


def test_missing_config_file_exits_one(capsys):
    assert cli.main(["recover", "--config", "/nonexistent/x.cfg"]) == 1
    assert "error:" in capsys.readouterr().err


def test_invalid_config_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("constraint_form = banana\n")
    assert cli.main(["sweep-oversampling", "--config", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2
