"""Command-line interface: configs, exit codes, deterministic outputs."""

import csv
import json
from pathlib import Path

import pytest

from spinrelax.cli import main
from spinrelax.config import ConfigError, load_config
from spinrelax.runner import format_value

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_SWEEP = """
[run]
mode = "fid-sweep"
name = "small"

[cell]
edge_length = 0.2

[spin]
diffusion = 0.2

[sweep]
axis = "gamma_g"
values = [0.0, 500.0, 1000.0]
series = "gamma0"
series_values = [20.0, 200.0]

[solver]
mode_truncation = 7
n_steps = 400
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_bundled_configs_validate(path, capsys):
    assert main(["validate", str(path)]) == 0


def test_sweep_outputs_identical_across_worker_counts(tmp_path):
    cfg = write(tmp_path, SMALL_SWEEP)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("small.csv", "small.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = read_rows(tmp_path / "a" / "small.csv")
    assert len(rows) == 6
    zero = [r for r in rows if float(r["gamma_g"]) == 0.0]
    assert all(float(r["DeltaGamma2"]) == 0.0 for r in zero)
    assert all(float(r["DeltaGamma2"]) <= float(r["Gamma2_upper_bound"]) for r in rows)


def test_manifest_round_trip(tmp_path):
    cfg = write(tmp_path, SMALL_SWEEP)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
    manifest = tmp_path / "a" / "small.manifest.json"
    data = json.loads(manifest.read_text())
    assert data["config"]["run"]["mode"] == "fid-sweep"
    assert main(["run", str(manifest), "--out-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "small.csv").read_bytes() == (tmp_path / "b" / "small.csv").read_bytes()


def test_table_command(tmp_path):
    out = tmp_path / "out"
    assert main(["table", str(CONFIGS / "perturbation_table.toml"), "--out-dir", str(out)]) == 0
    rows = read_rows(out / "perturbation_table.csv")
    assert [int(r["m"]) for r in rows[:3]] == [1, 2, 3]
    assert all(float(r["rel_diff"]) < 1e-6 for r in rows[:3])


def test_empty_sweep_is_config_error(tmp_path, capsys):
    text = SMALL_SWEEP.replace("values = [0.0, 500.0, 1000.0]", "values = []")
    assert main(["run", str(write(tmp_path, text)), "--out-dir", str(tmp_path)]) == 2
    assert "sweep" in capsys.readouterr().err


def test_missing_required_key_reports_location(tmp_path):
    text = SMALL_SWEEP.replace("diffusion = 0.2", "")
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert "diffusion" in str(info.value)


def test_wrong_type_reports_line(tmp_path):
    text = SMALL_SWEEP.replace("edge_length = 0.2", 'edge_length = "wide"')
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    expected = text.splitlines().index('edge_length = "wide"') + 1
    assert info.value.line == expected


def test_unknown_key_and_bad_file(tmp_path):
    assert main(["validate", str(write(tmp_path, SMALL_SWEEP + "\nbogus = 1\n"))]) == 2
    assert main(["validate", str(write(tmp_path, "[run\n", "broken.toml"))]) == 2
    assert main(["validate", str(tmp_path / "missing.toml")]) == 2


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = CONFIGS / "perturbation_table.toml"
    assert main(["run", str(cfg), "--out-dir", str(blocker / "sub")]) == 4


def test_convention_override(tmp_path):
    cfg = load_config(CONFIGS / "fig4.toml", {("run", "q_convention"): "scaled-q"})
    assert cfg.data["run"]["q_convention"] == "scaled-q"
    angular = load_config(CONFIGS / "fig4.toml", {("run", "units"): "angular"})
    assert angular.spin().gyro == pytest.approx(2 * 3.141592653589793)


def test_float_formatting_round_trips():
    for v in (0.1, 1 / 3, 1e-300, 12345.678901234567):
        assert float(format_value(v)) == v
    assert format_value(-0.0) == "0"


def test_gamma_g_sweep_ordered_by_base_rate(tmp_path):
    text = (CONFIGS / "fig2a.toml").read_text().replace("count = 21", "count = 3")
    text += "\n[solver]\nmode_truncation = 9\nn_steps = 400\n"
    assert main(["run", str(write(tmp_path, text, "fig2a.toml")), "--out-dir", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "fig2a.csv")
    for gg in {r["gamma_g"] for r in rows}:
        curve = sorted((float(r["gamma0"]), float(r["Gamma2"])) for r in rows if r["gamma_g"] == gg)
        assert all(b[1] > a[1] for a, b in zip(curve, curve[1:]))


def test_symmetry_config_single_row(tmp_path):
    assert main(["run", str(CONFIGS / "symmetry.toml"), "--out-dir", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "symmetry.csv")
    assert len(rows) == 1
    assert float(rows[0]["residual"]) <= 1e-8
    assert float(rows[0]["control_residual"]) > 1e-4


def test_zero_gradient_table(tmp_path):
    text = (CONFIGS / "perturbation_table.toml").read_text().replace("g = 1000.0", "g = 0.0")
    assert main(["table", str(write(tmp_path, text, "t.toml")), "--out-dir", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "t.csv")
    assert all(float(r["summed"]) == 0.0 for r in rows)
    assert all(float(r["closed_form"]) == 0.0 for r in rows if r["closed_form"])


def test_repeat_runs_byte_identical(tmp_path):
    cfg = CONFIGS / "fig1a_fid.toml"
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "b")]) == 0
    for name in ("fig1a_fid.csv", "fig1a_fid.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
