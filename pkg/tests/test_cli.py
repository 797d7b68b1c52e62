import csv

import numpy as np
import pytest

from hetdelay import cli
from hetdelay.curves import CdfCurve, read_curves
from hetdelay.model import ConfigError

TINY = """
[network]
alpha = 4.0
theta = 1.0
p = {p}

[tier.1]
power_dbm = 39.0
density = 1e-05

[tier.2]
power_dbm = 24.0
density = 5e-05

[traffic]
lambda_u = 5e-05
xi_min = 0.2
xi_max = 0.3
beta_min = 18.0
beta_max = 20.0

[simulation]
slots = 1500
warmup = 100
realizations = 2
window_side = 1500.0

[grid]
t_max = 12.0
u_points = 6
"""


@pytest.fixture
def tiny(tmp_path):
    def make(p=0.5):
        path = tmp_path / f"tiny_{p}.toml"
        path.write_text(TINY.format(p=p))
        return str(path)
    return make


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_presets_command(capsys):
    assert cli.main(["presets"]) == 0
    assert "fig6" in capsys.readouterr().out.split()


def test_analytic_delay(tiny, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["analytic-delay", "--config", tiny(), "--policy", "random", "--policy", "rr",
                     "--out", str(out)]) == 0
    curves = read_curves(out / "analytic_delay.csv")
    assert [c.policy for c in curves] == ["random", "rr"]
    for c in curves:
        assert np.array_equal(c.grid, np.arange(1.0, 13.0))
        assert np.all(c.lower <= c.upper)


def test_analytic_success_sweep_files(tiny, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["analytic-success", "--config", tiny(), "--policy", "random",
                     "--sweep", "p=0.3,0.6", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["analytic_success_p=0.3.csv", "analytic_success_p=0.6.csv"]
    (c,) = read_curves(out / "analytic_success_p=0.3.csv")
    assert c.q == 0.3


def test_outage_sweep(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["analytic-outage", "--config", "fig6", "--policy", "random",
                     "--sweep", "tier.2.bias=1,4", "--out", str(out)]) == 0
    rows = read_rows(out / "outage.csv")
    assert list(rows[0]) == cli.OUTAGE_HEADER
    assert [r["value"] for r in rows] == ["1", "4"]
    for r in rows:
        assert 0 <= float(r["lower"]) <= float(r["upper"]) <= 1


def test_simulate_p_zero(tiny, tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", tiny(0.0), "--policy", "fifo", "--out", str(out)]) == 0
    (row,) = read_rows(out / "simulate_summary.csv")
    assert float(row["stable_fraction"]) == 0.0
    assert float(row["outage"]) == 1.0
    curves = read_curves(out / "empirical.csv")
    assert np.all(curves[0].values == 0)


def test_simulate_byte_identical(tiny, tmp_path):
    cfg = tiny()
    for d in ("a", "b"):
        assert cli.main(["simulate", "--config", cfg, "--seed", "7", "--out", str(tmp_path / d)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "users_fifo.csv" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override_changes_output(tiny, tmp_path):
    cfg = tiny()
    for d, seed in (("a", "1"), ("b", "2")):
        cli.main(["simulate", "--config", cfg, "--policy", "random", "--seed", seed,
                  "--out", str(tmp_path / d)])
    a = (tmp_path / "a" / "users_random.csv").read_bytes()
    assert a != (tmp_path / "b" / "users_random.csv").read_bytes()


def test_validate_exit_matches_report(tiny, tmp_path, capsys):
    code = cli.main(["validate", "--config", tiny(), "--policy", "random", "--out", str(tmp_path)])
    report = capsys.readouterr().out.strip().splitlines()[-1]
    assert report.startswith("containment: max violation")
    assert code == (0 if report.endswith("PASS") else 1)
    rows = read_rows(tmp_path / "validate.csv")
    assert list(rows[0]) == cli.VALIDATE_HEADER
    worst = max(float(r["violation"]) for r in rows)
    assert f"{worst:.4f}" in report
    failing = any(float(r["violation"]) > float(r["slack"]) for r in rows)
    assert code == int(failing)


def test_containment_is_pure():
    grid = np.arange(1.0, 5.0)
    bound = CdfCurve(grid, [0.1, 0.3, 0.5, 0.7], "delay", [0.1, 0.3, 0.5, 0.7], [0.2, 0.4, 0.6, 0.8])
    emp = CdfCurve(grid, [0.15, 0.2, 0.65, 0.75], "delay", [0.14, 0.19, 0.64, 0.74],
                   [0.16, 0.21, 0.66, 0.76])
    viol, slack = cli.containment(emp, bound)
    assert np.allclose(viol, [0, 0.1, 0.05, 0])
    assert np.allclose(slack, cli.SLACK_BASE + cli.SLACK_SE * 0.01)


@pytest.mark.parametrize("argv", [
    ["analytic-delay", "--config", "fig5_heavy", "--sweep", "gamma=1,2"],
    ["analytic-delay", "--config", "fig5_heavy", "--sweep", "tier.9.bias=1"],
    ["analytic-delay", "--config", "fig5_heavy", "--sweep", "p"],
    ["analytic-delay", "--config", "fig5_heavy", "--sweep", "xi=0.2"],
    ["analytic-delay", "--config", "fig5_heavy", "--sweep", "p=high"],
    ["analytic-delay", "--config", "no_such_preset"],
    ["analytic-delay"],
])
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert "config error" in capsys.readouterr().err


def test_apply_sweep_paths():
    raw = {"network": {"p": 0.5}, "tier": {"1": {"power_dbm": 39.0, "density": 1e-5},
                                           "2": {"power_dbm": 24.0, "density": 5e-5}},
           "traffic": {"xi_min": 0.2, "xi_max": 0.3}}
    assert cli.apply_sweep(raw, "B2", "8")["tier"]["2"]["bias"] == 8.0
    assert cli.apply_sweep(raw, "p", "0.25")["network"]["p"] == 0.25
    swept = cli.apply_sweep(raw, "xi", "0.01:0.05")["traffic"]
    assert (swept["xi_min"], swept["xi_max"]) == (0.01, 0.05)
    assert raw["traffic"]["xi_min"] == 0.2  # the input is not mutated
    with pytest.raises(ConfigError):
        cli.apply_sweep(raw, "network.gamma", "1")
