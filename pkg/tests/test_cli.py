import json
import math
from pathlib import Path

import pytest

from bfmhd.cli import main
from bfmhd.config import ConfigError, parse_config_text
from bfmhd.io_store import read_snapshot, read_timeseries

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """
[physics]
nu = 0.1
kappa = 0.2
a = 1
alpha = {alpha}

[grid]
N = 8

[time]
t_end = 0.2
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestParseConfig:
    def test_defaults(self):
        m = parse_config_text(MINIMAL.format(alpha=2))
        c = m.config
        assert c.grid.N == 8 and c.grid.L == pytest.approx(2 * math.pi)
        assert c.time.dt_init == c.time.dt_max == pytest.approx(0.01)
        assert c.time.dt_min == pytest.approx(1e-6)
        assert c.time.cfl_safety == 0.5 and c.time.rk_order == 4
        assert c.ic.kind == "random_band" and c.ic.seed == 0
        assert c.monitor_every == 1 and c.checkpoint_every == 0
        assert m.out_dir == "out" and m.snapshot
        d = m.to_dict()
        assert d["physics"] == {"nu": 0.1, "kappa": 0.2, "a": 1.0, "alpha": 2.0}
        assert d["time"]["dt_max"] == pytest.approx(0.01)

    def test_fixed_dt(self):
        m = parse_config_text(MINIMAL.format(alpha=2) + "dt = 0.02\n")
        assert m.config.time.is_fixed and m.config.time.dt_max == 0.02

    def test_pi_syntax(self):
        m = parse_config_text(MINIMAL.format(alpha=2).replace("N = 8", "N = 8\nL = 4*pi"))
        assert m.config.grid.L == pytest.approx(4 * math.pi)

    def test_lint_warns_and_proceeds(self, caplog):
        m = parse_config_text(MINIMAL.format(alpha=1.0), experiment="dependence")
        assert m.warnings and "3/2" in m.warnings[0]
        assert "3/2" in caplog.text

    def test_lint_only_for_sensitive_experiments(self):
        assert parse_config_text(MINIMAL.format(alpha=1.0), experiment="run").warnings == []

    def test_strict_promotes_warning(self):
        with pytest.raises(ConfigError, match="3/2"):
            parse_config_text(MINIMAL.format(alpha=1.0), experiment="dependence", strict=True)

    def test_unknown_key(self):
        text = MINIMAL.format(alpha=2).replace("nu = 0.1", "viscocity = 0.1")
        with pytest.raises(ConfigError, match="viscocity") as info:
            parse_config_text(text, path="c.ini")
        assert "c.ini:3:" in str(info.value)

    def test_type_error_line_number(self):
        text = MINIMAL.format(alpha=2).replace("N = 8", "N = eight")
        with pytest.raises(ConfigError, match=":9:.*grid.N"):
            parse_config_text(text, path="c.ini")

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="time.t_end"):
            parse_config_text(MINIMAL.format(alpha=2).replace("t_end = 0.2", ""))

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="solver"):
            parse_config_text(MINIMAL.format(alpha=2) + "\n[solver]\nx = 1\n")

    def test_invalid_values(self):
        with pytest.raises(ConfigError, match="grid"):
            parse_config_text(MINIMAL.format(alpha=2).replace("N = 8", "N = 7"))
        with pytest.raises(ConfigError, match="physics"):
            parse_config_text(MINIMAL.format(alpha=-1))

    def test_seed_override(self):
        assert parse_config_text(MINIMAL.format(alpha=2), seed=99).config.ic.seed == 99

    def test_shipped_configs_parse(self):
        files = sorted(CONFIGS.glob("*.ini"))
        assert files
        for f in files:
            parse_config_text(f.read_text(), path=str(f))


def _summary(out):
    return json.loads((Path(out) / "summary.json").read_text())


class TestCommands:
    def test_run_linear_decay(self, tmp_path):
        out = tmp_path / "lin"
        with pytest.warns(UserWarning):
            code = main(["run", "--config", str(CONFIGS / "linear_decay.ini"), "--out", str(out)])
        assert code == 0
        recs = read_timeseries(out / "timeseries.csv")
        # E ~ e^(-2 nu |k|^2 T) with nu = 0.01, |k| = 1, T = 1
        assert recs[-1].E / recs[0].E == pytest.approx(math.exp(-0.02), rel=1e-12)
        s = _summary(out)
        assert s["passed"] and s["t_final"] == 1.0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"][:2] == ["bfmhd", "run"]
        _, _, meta = read_snapshot(out / "final.bin", with_metadata=True)
        assert meta["manifest"]["command"] == manifest["command"]

    def test_report_empty_directory(self, tmp_path, capsys):
        assert main(["report", "--out", str(tmp_path)]) == 2
        assert "empty" in capsys.readouterr().err
        assert _summary(tmp_path)["passed"] is False

    def test_report_renders_columns(self, tmp_path):
        out = tmp_path / "r"
        cfg = write(tmp_path, MINIMAL.format(alpha=2) + "\n[output]\nsnapshot = false\n")
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        assert main(["report", "--out", str(out)]) == 0
        dat = (out / "timeseries.dat").read_text().splitlines()
        assert dat[0].startswith("# t E grad_u_sq")
        assert len(dat) == 1 + len(read_timeseries(out / "timeseries.csv"))
        assert "timeseries.csv" in (out / "report.txt").read_text()

    def test_missing_config(self, tmp_path):
        assert main(["run", "--out", str(tmp_path)]) == 2
        assert main(["run", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)]) == 2

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = write(tmp_path, MINIMAL.format(alpha=2).replace("nu = 0.1", "viscocity = 0.1"))
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
        assert "viscocity" in capsys.readouterr().err
        assert _summary(tmp_path / "o")["passed"] is False

    def test_dependence_strict(self, tmp_path):
        cfg = write(tmp_path, MINIMAL.format(alpha=1.0))
        assert main(["dependence", "--strict", "--config", cfg, "--out", str(tmp_path / "d")]) == 2

    def test_dependence_small(self, tmp_path):
        text = MINIMAL.format(alpha=2) + "\n[ic]\nenergy = 20\nseed = 7\n\n[dependence]\nt_end = 0.5\n"
        out = tmp_path / "dep"
        assert main(["dependence", "--config", write(tmp_path, text), "--out", str(out)]) == 0
        s = _summary(out)
        assert s["contracts"]["zero_delta_identical"] and s["separations"][-1] == 0.0
        assert (out / "dependence.txt").read_text().startswith("# T = 0.5")

    def test_sweep_rows(self, tmp_path):
        text = MINIMAL.format(alpha=2).replace("t_end = 0.2", "t_end = 1\ndt = 0.05\nmonitor_every = 2")
        text += "\n[sweep]\nalpha = 1.5, 2, 3\n\n[output]\nsnapshot = false\n"
        out = tmp_path / "sw"
        assert main(["sweep", "--config", write(tmp_path, text), "--out", str(out)]) == 0
        rows = (out / "sweep_summary.csv").read_text().splitlines()
        assert rows[0] == "cell,alpha,a,nu,kappa,R2,limsup_E,E_final,pass"
        assert [r.split(",")[1] for r in rows[1:]] == ["1.5", "2", "3"]
        assert all(r.endswith(",1") for r in rows[1:])
        for i, alpha in enumerate([1.5, 2.0, 3.0]):
            assert (out / f"cell_{i:03d}" / "timeseries.csv").exists()
            cell = json.loads((out / f"cell_{i:03d}" / "manifest.json").read_text())
            assert cell["physics"]["alpha"] == alpha

    def test_deterministic_outputs(self, tmp_path):
        cfg = write(tmp_path, MINIMAL.format(alpha=2) + "\n[ic]\nenergy = 5\nseed = 3\n")
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", cfg, "--out", str(a), "--seed", "11", "--threads", "1"]) == 0
        assert main(["run", "--config", cfg, "--out", str(b), "--seed", "11", "--threads", "1"]) == 0
        assert (a / "timeseries.csv").read_bytes() == (b / "timeseries.csv").read_bytes()
        assert _summary(a)["E_final"] == _summary(b)["E_final"]

    def test_resume(self, tmp_path):
        text = MINIMAL.format(alpha=2).replace("t_end = 0.2", "t_end = 0.4\ndt = 0.02\ncheckpoint_every = 10")
        text += "\n[ic]\nenergy = 5\nseed = 3\n"
        cfg = write(tmp_path, text)
        full, part = tmp_path / "full", tmp_path / "part"
        assert main(["run", "--config", cfg, "--out", str(full)]) == 0
        ck = full / "checkpoints" / "step_00000010.bin"
        assert main(["run", "--config", cfg, "--out", str(part), "--resume", str(ck)]) == 0
        sf, _ = read_snapshot(full / "final.bin")
        sp, _ = read_snapshot(part / "final.bin")
        assert (sf.u_hat.c == sp.u_hat.c).all() and (sf.b_hat.c == sp.b_hat.c).all()

    def test_bad_seed(self, tmp_path):
        assert main(["run", "--config", "x", "--seed", "-1"]) == 2
