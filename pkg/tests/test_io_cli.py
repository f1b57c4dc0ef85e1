# Command-line surface: config parsing, per-kind outputs, the documented
# exit codes, and byte-level reproducibility of every CSV.

import json
import shutil
import subprocess

import numpy as np
import pytest

import torustip as tt
from torustip.io_cli import parse_config, run_cli

SIM_TOML = """\
experiment = "simulate"

[params]
eps = 0.001

[simulate]
t_end = 50.0
window = 10.0
"""

HYST_TOML = """\
experiment = "hysteresis"

[params]
eps = 0.001

[hysteresis]
c_min = 0.5
c_max = 0.6
rate = 1e-3
seeds = [0, 1]
settle = 100.0
window = 25.0
class_window = 50.0
"""

INTERM_TOML = """\
experiment = "intermittency"

[intermittency]
deltas = [0.0]
t_unperturbed = 300.0
t_total = 1300.0
window = 50.0
dt = 1e-3
seeds = [0]
"""

MULTI_TOML = """\
experiment = "multistability"

[params]
eps = 0.0

[multistability]
c_values = [0.5]
trials = 10
dt = 1e-3
explore_time = 200.0
settle_time = 200.0
observe_time = 300.0
q_max = 10
"""

TONGUE_TOML = """\
experiment = "tongue"

[tongue]
c_grid = [0.5, 0.55, 0.6]
tau_grid = [0.953]
rate = 1e-3
settle = 100.0
window = 25.0
"""


def cli(tmp_path, kind, toml_text, out="out", *extra):
    cfg = tmp_path / f"{kind}.toml"
    cfg.write_text(toml_text)
    return run_cli([kind, "--config", str(cfg), "--out",
                    str(tmp_path / out), *extra])


def read_bytes(tmp_path, out, name):
    return (tmp_path / out / name).read_bytes()


# ------------------------------------------------------------- config layer

def test_empty_config_resolves_the_full_preset():
    cfg = parse_config("", kind="hysteresis")
    assert cfg.kind == "hysteresis"
    assert cfg.options["c_min"] == 2.55
    assert cfg.options["c_max"] == 3.15
    assert cfg.options["rate"] == 1e-6
    assert cfg.params.eps == 5e-4  # noise preset differs per experiment
    assert parse_config("", kind="simulate").params.eps == 0.0
    assert parse_config("", kind="intermittency").params.eps == 1e-3


def test_config_rejects_unknown_keys_by_name():
    with pytest.raises(tt.ValidationError, match="bogus"):
        parse_config('experiment = "simulate"\nbogus = 1\n')
    with pytest.raises(tt.ValidationError, match="typo"):
        parse_config('experiment = "simulate"\n[params]\ntypo = 2.0\n')
    with pytest.raises(tt.ValidationError, match="wrong"):
        parse_config('experiment = "simulate"\n[simulate]\nwrong = 1.0\n')


def test_config_kind_conflicts_and_unknown_kind():
    with pytest.raises(tt.ValidationError):
        parse_config('experiment = "tongue"\n', kind="simulate")
    with pytest.raises(tt.ValidationError):
        parse_config('experiment = "nonsense"\n')


def test_other_experiment_sections_are_inert():
    cfg = parse_config('experiment = "simulate"\n[tongue]\nrate = 5.0\n')
    assert cfg.kind == "simulate"
    assert cfg.options["rate"] == 0.0


def test_config_validates_physical_constraints():
    with pytest.raises(tt.ValidationError):
        parse_config('experiment = "simulate"\n[params]\ntau = 0.9531\n')
    with pytest.raises(tt.ValidationError):
        parse_config('experiment = "hysteresis"\n'
                     '[hysteresis]\nc_min = 3.0\nc_max = 2.0\n')
    with pytest.raises(tt.ValidationError):
        parse_config('experiment = "multistability"\n'
                     '[multistability]\ntrials = 5\n')
    with pytest.raises(tt.ValidationError):
        parse_config('experiment = "intermittency"\n'
                     '[intermittency]\nt_unperturbed = 10.0\nt_total = 5.0\n')


# ---------------------------------------------------------------- exit codes

def test_validation_failure_exits_one(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "simulate"\nbogus = 1\n')
    assert run_cli(["simulate", "--config", str(bad),
                    "--out", str(tmp_path / "x")]) == 1
    assert run_cli(["simulate", "--config", str(tmp_path / "missing.toml"),
                    "--out", str(tmp_path / "x")]) == 1


def test_numerical_failure_exits_two_and_leaves_no_files(tmp_path):
    blow = ('experiment = "simulate"\n[simulate]\n'
            'c_start = 1e8\nc_stop = 1e8\nt_end = 6.0\nwindow = 2.0\n')
    assert cli(tmp_path, "simulate", blow, out="boom") == 2
    left = list((tmp_path / "boom").glob("*"))
    assert left == []


def test_successful_run_exits_zero(tmp_path):
    assert cli(tmp_path, "simulate", SIM_TOML) == 0


# ------------------------------------------------------------- output files

def test_simulate_outputs_and_manifest(tmp_path):
    assert cli(tmp_path, "simulate", SIM_TOML) == 0
    out = tmp_path / "out"
    traj = (out / "trajectory.csv").read_text()
    lines = traj.splitlines()
    assert lines[0] == "t,h"
    assert b"\r" not in (out / "trajectory.csv").read_bytes()
    # every value survives a parse round trip at 17 significant digits
    t, h = lines[1234].split(",")
    assert format(float(h), ".17g") == h
    env = (out / "envelope.csv").read_text().splitlines()
    assert env[0] == "t_center,c,amp"

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["kind"] == "simulate"
    import hashlib
    for name, entry in manifest["outputs"].items():
        blob = (out / name).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == entry["sha256"]
        assert len(blob) == entry["bytes"]


def test_hysteresis_outputs(tmp_path):
    assert cli(tmp_path, "hysteresis", HYST_TOML) == 0
    out = tmp_path / "out"
    up = (out / "sweep_up.csv").read_text().splitlines()
    assert up[0] == "c,amp,class,p,q"
    assert (out / "sweep_down.csv").is_file()
    ev = (out / "events.csv").read_text().splitlines()
    assert ev[0] == "c,drop"


def test_tongue_outputs(tmp_path):
    assert cli(tmp_path, "tongue", TONGUE_TOML) == 0
    rows = read_bytes(tmp_path, "out", "tongue.csv").decode().splitlines()
    assert rows[0] == "c,tau,amp,class,p,q"
    assert len(rows) == 4  # header + 3 grid cells


def test_intermittency_outputs(tmp_path):
    assert cli(tmp_path, "intermittency", INTERM_TOML) == 0
    rows = read_bytes(tmp_path, "out", "residence.csv").decode().splitlines()
    assert rows[0] == "delta_c,seed,fraction_lower,visits_upper,visits_lower"
    assert len(rows) == 2


def test_multistability_outputs(tmp_path):
    assert cli(tmp_path, "multistability", MULTI_TOML) == 0
    rows = read_bytes(tmp_path, "out", "states.csv").decode().splitlines()
    assert rows[0] == "c,amp,class,p,q,basin_count"
    assert rows[1].startswith("0.5,")
    assert rows[1].endswith(",10")


# ----------------------------------------------------------- reproducibility

def test_rerun_is_byte_identical(tmp_path):
    assert cli(tmp_path, "simulate", SIM_TOML, out="a") == 0
    assert cli(tmp_path, "simulate", SIM_TOML, out="b") == 0
    for name in ("trajectory.csv", "envelope.csv"):
        assert read_bytes(tmp_path, "a", name) == read_bytes(tmp_path, "b", name)


def test_thread_count_does_not_change_bytes(tmp_path):
    assert cli(tmp_path, "hysteresis", HYST_TOML, "t1", "--threads", "1") == 0
    assert cli(tmp_path, "hysteresis", HYST_TOML, "t2", "--threads", "2") == 0
    for name in ("sweep_up.csv", "sweep_down.csv", "events.csv"):
        assert read_bytes(tmp_path, "t1", name) == read_bytes(tmp_path, "t2", name)


def test_seed_flag_changes_noisy_output(tmp_path):
    assert cli(tmp_path, "simulate", SIM_TOML, "s0", "--seed", "0") == 0
    assert cli(tmp_path, "simulate", SIM_TOML, "s9", "--seed", "9") == 0
    assert (read_bytes(tmp_path, "s0", "trajectory.csv")
            != read_bytes(tmp_path, "s9", "trajectory.csv"))
    m = json.loads((tmp_path / "s9" / "manifest.json").read_text())
    assert m["config"]["seed"] == 9


def test_seed_flag_offsets_listed_seeds(tmp_path):
    assert cli(tmp_path, "intermittency", INTERM_TOML, "off", "--seed", "5") == 0
    row = read_bytes(tmp_path, "off", "residence.csv").decode().splitlines()[1]
    assert row.split(",")[1] == "5"


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("torustip")
    assert exe, "console script not installed"
    cfg = tmp_path / "sim.toml"
    cfg.write_text(SIM_TOML)
    proc = subprocess.run([exe, "simulate", "--config", str(cfg),
                           "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "o" / "manifest.json").is_file()
