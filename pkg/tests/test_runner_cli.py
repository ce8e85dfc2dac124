import json
import math
import re

import numpy as np
import pytest

from diracqed import cli, runner
from diracqed.config import PRESETS, load_config, parse_config, preset
from diracqed.errors import GridMismatchError, IntegrationError, ValidationError
from diracqed.propagator import ObservableSeries

SMALL = """\
[run]
name = small
scenario = free1d
tiers = ideal, full

[physics]
chi_mhz = 0.1
alpha = 1
omega_sb_mhz = 20
delta_omega_mhz = 0

[sweep]
parameter = delta_omega_mhz
values = 0, 0.25

[hilbert]
trunc = 12

[grid]
t1_us = 1
sample_us = 0.05

[output]
dir = out
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("small")
    return runner.run(write(d, SMALL))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_parse(name):
    cfg = parse_config(preset(name))
    assert cfg.points and cfg.tiers


def test_preset_caption_parameters():
    k = parse_config(preset("klein"))
    assert [p.values["delta_omega_mhz"] for p in k.points] == [0, 0.05, 0.15]
    assert k.grid.t1 == 20
    assert k.points[0].model.drives[0].gamma == pytest.approx(-2 * math.pi * 0.05)
    ls = parse_config(preset("landau-spectrum"))
    assert (ls.grid.t1, ls.grid.t1_full) == (5000, 1000)
    assert ls.points[0].model.drives[0].delta_alpha == -1
    rw = parse_config(preset("rwa-scaling"))
    assert [p.values["omega_sb_mhz"] for p in rw.points] == [20, 40, 100]
    assert parse_config(preset("zitterbewegung-1d-100mhz")).points[0].model.omega_sb == pytest.approx(2 * math.pi * 100)
    lt = parse_config(preset("landau-trajectory"))
    assert [p.values["delta_alpha"] for p in lt.points] == [0.5, 0, -0.5, -1]


def test_unknown_preset():
    with pytest.raises(ValidationError):
        preset("tachyon")
    assert cli.main(["preset", "tachyon"]) == 2


def test_units_converted_once():
    cfg = parse_config(SMALL)
    m = cfg.points[1].model
    assert m.delta_omega == pytest.approx(2 * math.pi * 0.25)
    assert m.chi[0] == pytest.approx(2 * math.pi * 0.1)
    assert m.omega_sb == pytest.approx(2 * math.pi * 20)


@pytest.mark.parametrize("old,new,where", [
    ("chi_mhz = 0.1", "chi_mhz = -0.1", "[physics] chi_mhz"),
    ("alpha = 1", "alpha = one", "[physics] alpha"),
    ("scenario = free1d", "scenario = warp", "[run] scenario"),
    ("tiers = ideal, full", "tiers = ideal, exact", "[run] tiers"),
    ("trunc = 12", "trunc = 12, 12", "[hilbert] trunc"),
    ("values = 0, 0.25", "values =", "[sweep] values"),
    ("parameter = delta_omega_mhz", "parameter = mass", "[sweep] parameter"),
    ("sample_us = 0.05", "sample_us = 5", "[grid] sample_us"),
    ("omega_sb_mhz = 20", "omega_sb_mhz = 20\nwarp = 9", "[physics] warp"),
])
def test_field_precise_errors(old, new, where):
    with pytest.raises(ValidationError, match=re.escape(where)):
        parse_config(SMALL.replace(old, new))


def test_empty_sweep_writes_nothing(tmp_path):
    p = write(tmp_path, SMALL.replace("values = 0, 0.25", "values ="))
    assert cli.main(["run", str(p)]) == 2
    assert not (tmp_path / "out").exists()


def test_run_artifacts(small_run):
    names = sorted(f.name for f in small_run.iterdir())
    assert names == ["deviation.json", "manifest.json", "p0_full.csv", "p0_ideal.csv", "p1_full.csv", "p1_ideal.csv"]
    raw = (small_run / "p1_ideal.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").split("\n")
    assert lines[0] == "t_us,X1,P1,sx,sy,sz,purity,norm,leak"
    assert lines[-1] == ""
    assert len(lines[2].split(",")) == 9
    dev = json.loads((small_run / "deviation.json").read_text())
    assert set(dev) == {"p0", "p1"} and "ideal_vs_full" in dev["p1"]
    assert dev["p1"]["ideal_vs_full"]["X1"]["rms"] > 0


def test_manifest_contents(small_run):
    man = json.loads((small_run / "manifest.json").read_text())
    assert man["config"] == SMALL
    assert man["config_parsed"]["physics"]["chi_mhz"] == "0.1"
    assert len(man["runs"]) == 4
    for r in man["runs"]:
        assert r["diagnostics"]["norm_drift"] < 1e-6
        assert r["wall_s"] >= 0
    assert all(runner.verify_manifest(small_run).values())


def test_manifest_detects_tampering(tmp_path):
    out = runner.run(write(tmp_path, SMALL.replace("values = 0, 0.25", "values = 0")))
    with open(out / "p0_ideal.csv", "a", encoding="utf-8") as fh:
        fh.write("\n")
    assert runner.verify_manifest(out) == {"deviation.json": True, "p0_full.csv": True, "p0_ideal.csv": False}


def checksums(d):
    return json.loads((d / "manifest.json").read_text())["checksums"]


def test_rerun_byte_identical(small_run, tmp_path):
    again = runner.run(write(tmp_path, SMALL))
    assert checksums(again) == checksums(small_run)


def test_parallel_workers_identical(small_run, tmp_path, monkeypatch):
    monkeypatch.setenv(runner.WORKERS_ENV, "2")
    par = runner.run(write(tmp_path, SMALL))
    assert json.loads((par / "manifest.json").read_text())["workers"] == 2
    assert checksums(par) == checksums(small_run)
    monkeypatch.setenv(runner.WORKERS_ENV, "zero")
    with pytest.raises(ValidationError):
        runner.run(write(tmp_path, SMALL))


def test_compare_self_is_zero(small_run):
    rep = runner.compare(small_run, small_run)
    assert len(rep) == 4
    assert all(v["rms"] == 0 and v["max"] == 0 for cols in rep.values() for v in cols.values())


def test_compare_ideal_vs_full_grows(tmp_path):
    base = (SMALL.replace("values = 0, 0.25", "values = 0.25").replace("t1_us = 1", "t1_us = 20")
            .replace("trunc = 12", "trunc = 30"))
    a = runner.run(write(tmp_path, base.replace("tiers = ideal, full", "tiers = ideal").replace("dir = out", "dir = a"), "a.ini"))
    b = runner.run(write(tmp_path, base.replace("tiers = ideal, full", "tiers = full").replace("dir = out", "dir = b"), "b.ini"))
    rep = runner.compare(a, b)
    assert list(rep) == ["p0:ideal_vs_full"]
    assert rep["p0:ideal_vs_full"]["X1"]["rms"] > 0
    sa = ObservableSeries.from_csv(a / "p0_ideal.csv")
    sb = ObservableSeries.from_csv(b / "p0_full.csv")
    # rms per quarter of the run: the RWA error accumulates
    q = np.array_split(sa["X1"] - sb["X1"], 4)
    rms = [np.sqrt(np.mean(e**2)) for e in q]
    assert all(b > a for a, b in zip(rms, rms[1:]))


def test_compare_grid_and_identity_mismatch(small_run, tmp_path):
    coarse = runner.run(write(tmp_path, SMALL.replace("sample_us = 0.05", "sample_us = 0.1").replace("dir = out", "dir = c")))
    with pytest.raises(GridMismatchError):
        runner.compare(small_run, coarse)
    one = runner.run(write(tmp_path, SMALL.replace("values = 0, 0.25", "values = 0").replace("dir = out", "dir = d")))
    with pytest.raises(ValidationError):
        runner.compare(small_run, one)
    assert cli.main(["compare", str(small_run), str(coarse)]) == 4
    assert cli.main(["compare", str(small_run), str(one)]) == 2


def test_cli_roundtrip(tmp_path, capsys):
    cfg = tmp_path / "rwa.ini"
    assert cli.main(["preset", "rwa-scaling", "--out", str(cfg)]) == 0
    assert load_config(cfg).name == "rwa-scaling"
    assert cli.main(["preset", "klein"]) == 0
    assert "[physics]" in capsys.readouterr().out
    small = write(tmp_path, SMALL.replace("values = 0, 0.25", "values = 0").replace("tiers = ideal, full", "tiers = ideal"))
    assert cli.main(["run", str(small)]) == 0
    out = tmp_path / "out"
    assert cli.main(["compare", str(out), str(out), "--json", str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["p0:ideal_vs_ideal"]["X1"]["max"] == 0
    with pytest.raises(SystemExit):
        cli.main(["--version"])


def test_integration_failure_carries_run_identity(tmp_path, capsys):
    # a tiny truncation with a strong coherent state trips the leak guard
    text = SMALL.replace("trunc = 12", "trunc = 3").replace("t1_us = 1", "t1_us = 20")
    text += "\n[initial]\nqubit = plus\nmodes = vacuum\n"
    with pytest.raises(IntegrationError, match=r"run p0_ideal"):
        runner.run(write(tmp_path, text))
    assert cli.main(["run", str(tmp_path / "c.ini")]) == 3
    assert "error: run p0_ideal" in capsys.readouterr().err
