import json
import math
from pathlib import Path

import numpy as np
import pytest

from whitham import cli, io
from whitham.config import ConfigError, load_config, parse_config, serialize_config
from whitham.evolve import Integrator, InitialData, SolverConfig, resume
from whitham.spectral_core import Grid, SpectralField

SMALL = """\
[grid]
n_points = 64
half_length = 4*pi

[equation]
variant = modified
eps = 0.01

[stepper]
dt = 0.02
t_end = 0.2

[output]
snapshot_stride = 2

[initial]
profile = gaussian
amplitude = 0.3
width = 1.5
"""


@pytest.fixture
def small_cfg_file(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(SMALL)
    return p


class TestConfig:
    def test_parse(self):
        cfg, sweep = parse_config(SMALL)
        assert sweep is None
        assert cfg.n_points == 64 and cfg.half_length == 4 * math.pi
        assert cfg.eps == 0.01 and cfg.snapshot_stride == 2
        assert cfg.initial.width == 1.5

    def test_round_trip_idempotent(self):
        cfg, _ = parse_config(SMALL)
        text = serialize_config(cfg)
        cfg2, _ = parse_config(text)
        assert cfg2 == cfg
        assert serialize_config(cfg2) == text

    @pytest.mark.parametrize("value, expected", [("pi", math.pi), ("32*pi", 32 * math.pi),
                                                 ("2.5", 2.5)])
    def test_half_length_forms(self, value, expected):
        cfg, _ = parse_config(f"[grid]\nhalf_length = {value}\n")
        assert cfg.half_length == expected

    def test_odd_n_points_names_field(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("[grid]\nn_points = 63\n")
        assert ei.value.section == "grid" and ei.value.key == "n_points"
        assert ei.value.line == 2
        assert "even" in str(ei.value)

    def test_unknown_key_and_section(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("[stepper]\ndt = 0.1\nfoo = 1\n")
        assert ei.value.key == "foo" and ei.value.line == 3
        with pytest.raises(ConfigError):
            parse_config("[nope]\na = 1\n")

    def test_bad_value(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("[stepper]\ndt = fast\n")
        assert ei.value.key == "dt"
        with pytest.raises(ConfigError):
            parse_config("[equation]\nvariant = kdv\n")

    def test_sweep_only_when_allowed(self):
        text = SMALL + "\n[sweep]\nkind = family\neps = 1e-1, 1e-2\n"
        with pytest.raises(ConfigError):
            parse_config(text)
        cfg, spec = parse_config(text, allow_sweep=True)
        assert spec.eps == [0.1, 0.01] and spec.mollify
        cfg2, spec2 = parse_config(serialize_config(cfg, spec), allow_sweep=True)
        assert (cfg2, spec2) == (cfg, spec)

    def test_inline_comments(self):
        cfg, _ = parse_config("[equation]\nvariant = whitham_classic  # or modified\n"
                              "[initial]\nprofile = sine ; one mode\n")
        assert cfg.variant == "whitham_classic" and cfg.initial.profile == "sine"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.ini")


class TestSnapshots:
    def test_bit_exact_round_trip(self, tmp_path, rng):
        g = Grid(128, 8 * math.pi)
        f = SpectralField(g, samples=rng.standard_normal(128))
        p = io.save_field(tmp_path / "f.bin", f, t=0.1 + 0.2, eps=1e-3)
        header, back = io.read_snapshot(p)
        assert header["t"] == 0.1 + 0.2
        assert back.grid == g
        assert np.array_equal(back.samples, f.samples)

    def test_bad_magic_and_truncation(self, tmp_path, rng):
        g = Grid(16, math.pi)
        p = io.save_field(tmp_path / "f.bin", SpectralField(g, samples=rng.standard_normal(16)))
        blob = p.read_bytes()
        (tmp_path / "bad.bin").write_bytes(b"XXXXXXXX" + blob[8:])
        (tmp_path / "short.bin").write_bytes(blob[:-8])
        for name in ("bad.bin", "short.bin"):
            with pytest.raises(io.SnapshotFormatError):
                io.load_field(tmp_path / name)
        with pytest.raises(io.SnapshotFormatError):
            io.load_checkpoint(p)

    def test_checkpoint_resume_matches(self, tmp_path):
        cfg = SolverConfig(n_points=128, half_length=8 * math.pi, t_end=1.0, dt=0.01,
                           eps=1e-2, initial=InitialData("gaussian", 0.4, 1.5))
        full = Integrator(cfg).run()
        first = Integrator(cfg)
        first.run(0.5)
        path = io.save_checkpoint(tmp_path / "c.bin", cfg, first.checkpoint())
        cfg2, state = io.load_checkpoint(path)
        assert cfg2 == cfg
        rest = resume(cfg2, state)
        d = np.max(np.abs(rest.final.coeffs - full.final.coeffs))
        assert d <= 1e-12 * np.max(np.abs(full.final.coeffs))
        assert rest.dissipation_n[-1] == pytest.approx(full.dissipation_n[-1], rel=1e-12)

    def test_file_profile(self, tmp_path):
        g = Grid(64, 4 * math.pi)
        f = SpectralField(g, samples=0.2 * np.cos(g.x / 2))
        p = io.save_field(tmp_path / "u0.bin", f)
        init = InitialData("file", path=str(p))
        assert np.array_equal(init.build(g).samples, f.samples)


class TestManifest:
    def test_run_id_stable(self):
        cfg, _ = parse_config(SMALL)
        a = io.run_id(cfg)
        assert a == io.run_id(parse_config(serialize_config(cfg))[0])
        assert len(a) == 16
        assert a != io.run_id(cfg.with_(eps=0.02))
        assert a != io.run_id(cfg, {"mollify": 0.1})

    def test_file_data_hashed(self, tmp_path):
        g = Grid(64, 4 * math.pi)
        p = tmp_path / "u0.bin"
        io.save_field(p, SpectralField(g, samples=np.ones(64)))
        cfg = SolverConfig(n_points=64, half_length=4 * math.pi,
                           initial=InitialData("file", path=str(p)))
        a = io.run_id(cfg)
        io.save_field(p, SpectralField(g, samples=2 * np.ones(64)))
        assert io.run_id(cfg) != a

    def test_created_before_run_and_finalized_once(self, tmp_path):
        cfg, _ = parse_config(SMALL)
        m = io.RunManifest.create(cfg, tmp_path)
        on_disk = io.RunManifest.load(m.path)
        assert on_disk.status == "running" and not on_disk.finalized
        m.finalize("completed", series="x.csv")
        with pytest.raises(io.ManifestStateError):
            m.finalize("completed")
        back = io.RunManifest.load(m.path)
        assert back.finalized and back.paths["series"] == "x.csv"

    def test_output_dir_precedence(self, monkeypatch, tmp_path):
        monkeypatch.setenv("WHITHAM_OUT", str(tmp_path / "env"))
        assert io.output_dir("cli") == Path("cli")
        assert io.output_dir(None) == tmp_path / "env"
        monkeypatch.delenv("WHITHAM_OUT")
        assert str(io.output_dir(None)) == "whitham_out"


class TestCLI:
    def test_run_writes_everything(self, small_cfg_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert cli.main(["run", "--config", str(small_cfg_file), "--out", str(out)]) == 0
        rid = capsys.readouterr().out.split()[0]
        d = out / f"run_{rid}"
        m = json.loads((d / "manifest.json").read_text())
        assert m["status"] == "completed" and m["finalized"]
        for name in ("series.csv", "energy.csv", "energy.json", "checkpoint.bin",
                     "norms.png", "energy.png", "profiles.png"):
            assert (d / name).exists(), name
        rows = io.read_csv(d / "series.csv")
        assert len(rows) - 1 == len(m["paths"]["snapshots"]) == 6
        header, f = io.read_snapshot(m["paths"]["snapshots"][-1])
        assert header["t"] == pytest.approx(0.2)

    def test_run_deterministic(self, small_cfg_file, tmp_path, capsys):
        outs = []
        for name in ("a", "b"):
            cli.main(["run", "--config", str(small_cfg_file), "--out", str(tmp_path / name),
                      "--no-figures"])
            rid = capsys.readouterr().out.split()[0]
            outs.append((rid, (tmp_path / name / f"run_{rid}" / "series.csv").read_bytes()))
        assert outs[0] == outs[1]

    def test_env_out(self, small_cfg_file, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("WHITHAM_OUT", str(tmp_path / "env"))
        assert cli.main(["run", "--config", str(small_cfg_file), "--no-figures"]) == 0
        assert any((tmp_path / "env").glob("run_*/manifest.json"))

    def test_config_error_exit_code(self, tmp_path, capsys):
        p = tmp_path / "bad.ini"
        p.write_text("[grid]\nn_points = 63\n")
        assert cli.main(["run", "--config", str(p), "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "n_points" in err and "line 2" in err
        assert cli.main(["run", "--out", str(tmp_path)]) == 2

    def test_failed_run_recorded(self, tmp_path, capsys):
        p = tmp_path / "blow.ini"
        p.write_text(SMALL.replace("dt = 0.02", "dt = 0.02\nblowup_cap = 0.1\nadaptive_dt = false"))
        code = cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o"), "--no-figures"])
        assert code == 1
        m = json.loads(next((tmp_path / "o").glob("run_*/manifest.json")).read_text())
        assert m["finalized"] and m["status"] != "completed"

    def test_verify(self, tmp_path, capsys):
        assert cli.main(["verify", "--suite", "symbols", "--out", str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "verify_symbols.json").read_text())
        assert rep["passed"]
        assert "[PASS]" in capsys.readouterr().out

    def test_family_sweep(self, tmp_path, capsys):
        p = tmp_path / "fam.ini"
        p.write_text(SMALL + "\n[sweep]\nkind = family\neps = 1e-2, 1e-3\n")
        assert cli.main(["sweep", "--config", str(p), "--out", str(tmp_path / "s"),
                         "--jobs", "2"]) == 0
        rows = io.read_csv(tmp_path / "s" / "sweep_summary.csv")
        assert len(rows) == 3
        assert all(float(r[3]) > 0 for r in rows[1:])
        assert (tmp_path / "s" / "family.png").exists()
        assert len(list((tmp_path / "s").glob("run_*"))) == 3

    def test_empty_sweep(self, tmp_path, capsys):
        p = tmp_path / "empty.ini"
        p.write_text(SMALL + "\n[sweep]\nkind = twin\nscales =\n")
        assert cli.main(["sweep", "--config", str(p), "--out", str(tmp_path / "e")]) == 0
        rows = io.read_csv(tmp_path / "e" / "sweep_summary.csv")
        assert len(rows) == 1 and rows[0][0] == "scale"

    def test_twin_sweep(self, tmp_path, capsys):
        p = tmp_path / "twin.ini"
        p.write_text(SMALL + "\n[sweep]\nkind = twin\nscales = 1e-4, 1e-6\n")
        assert cli.main(["sweep", "--config", str(p), "--out", str(tmp_path / "t")]) == 0
        rows = io.read_csv(tmp_path / "t" / "sweep_summary.csv")
        assert len(rows) == 3
        assert float(rows[2][3]) == pytest.approx(100.0, rel=0.05)
        assert (tmp_path / "t" / "twins.png").exists()

    def test_kernel_study(self, tmp_path, capsys):
        assert cli.main(["kernel-study", "--out", str(tmp_path), "--orders", "1.5"]) == 0
        rep = json.loads((tmp_path / "kernel_quartic.json").read_text())
        assert rep["slopes"]["1.5"] == pytest.approx(-0.5, abs=0.01)
        assert (tmp_path / "kernel_quartic.png").exists()

    def test_compare(self, small_cfg_file, tmp_path, capsys):
        assert cli.main(["compare", "--config", str(small_cfg_file), "--out", str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "compare.json").read_text())
        assert set(rep) == {"modified", "whitham_classic"}
        assert rep["modified"]["final_l2"] < rep["whitham_classic"]["final_l2"]
        assert (tmp_path / "compare.png").exists()
