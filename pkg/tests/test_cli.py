import json

import numpy as np
import pytest

from nlsexit import cli
from nlsexit.config import ConfigError, merge, parse_config_text
from nlsexit.manifest import fmt, sha256_file
from nlsexit.propagator import RunAborted
from nlsexit.snapshot import read_snapshot


def test_parse_config_and_override():
    vals = parse_config_text("# comment\np = 9\nladder = 1e-2, 1e-3, 1e-4, 1e-5\n")
    assert vals["p"] == 9.0 and vals["ladder"] == (1e-2, 1e-3, 1e-4, 1e-5)
    cfg = merge(vals, {"p": "7", "N": None})
    assert cfg["p"] == 7.0 and cfg["N"] == 2048


@pytest.mark.parametrize(
    "text,msg",
    [
        ("foo = 1", "unknown key"),
        ("p = seven", "cannot parse"),
        ("p 7", "key = value"),
    ],
)
def test_config_syntax_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config_text(text)


@pytest.mark.parametrize(
    "override,msg",
    [
        ({"p": 5.0}, "s_c = 0"),
        ({"dim": 3, "p": 5.0}, "s_c = 1"),
        ({"N": 1000}, "power of two"),
        ({"dt": 0.5}, "dt"),
        ({"eta": 0.2}, "eta"),
        ({"ladder": (1e-2, 1e-3, 1e-4)}, "at least 4"),
        ({"tol": 1e-16}, "round-off"),
    ],
)
def test_validation_messages(override, msg):
    with pytest.raises(ConfigError, match=msg):
        merge({}, override)


def test_accepts_intercritical():
    assert merge({}, {})["p"] == 7.0
    assert merge({}, {"dim": 3, "p": 3.0})["dim"] == 3


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0**-40, 1e300):
        assert float(fmt(x)) == x
    assert fmt(0.1) == "0.10000000000000001"


def test_ground_state_and_spectrum(tmp_path, capsys):
    gs_dir, sp_dir = tmp_path / "gs", tmp_path / "sp"
    assert cli.main(["ground-state", "--N", "1024", "--out", str(gs_dir)]) == 0
    info = json.loads((gs_dir / "ground_state.json").read_text())
    assert set(info) >= {"residual", "mass", "energy", "virial_gap"}
    snap = read_snapshot(gs_dir / "ground_state.nlsf")
    assert snap.grid.N == 1024
    assert cli.main(["spectrum", "--input", str(gs_dir / "ground_state.nlsf"), "--trials", "100", "--out", str(sp_dir)]) == 0
    spectrum = json.loads((sp_dir / "spectrum.json").read_text())
    assert spectrum["c_min"] > 0 and abs(spectrum["F_epem"] + 1) < 1e-12
    man = json.loads((sp_dir / "manifest.json").read_text())
    assert man["status"] == "ok"
    for name, digest in man["files"].items():
        assert sha256_file(sp_dir / name) == digest


def test_config_file_with_flag_override(tmp_path):
    cfgf = tmp_path / "run.cfg"
    cfgf.write_text("N = 512\np = 9\n")
    out = tmp_path / "gs"
    assert cli.main(["ground-state", "--config", str(cfgf), "--p", "7", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["params"]["N"] == 512 and man["params"]["p"] == 7.0


def test_validation_exit_code(tmp_path, capsys):
    assert cli.main(["ground-state", "--p", "5", "--out", str(tmp_path / "x")]) == cli.EXIT_INVALID
    assert "s_c" in capsys.readouterr().err


def test_certificate_exit_code(tmp_path):
    from nlsexit.grid import make_grid
    from nlsexit.snapshot import write_snapshot

    g = make_grid(1, 20, 512)
    bogus = write_snapshot(tmp_path / "bogus.nlsf", g, np.exp(-g.x**2))
    assert cli.main(["spectrum", "--input", str(bogus), "--out", str(tmp_path / "s")]) == cli.EXIT_CERTIFICATE


def test_evolve_outputs(tmp_path):
    gs_dir, ev = tmp_path / "gs", tmp_path / "ev"
    cli.main(["ground-state", "--N", "512", "--out", str(gs_dir)])
    code = cli.main(["evolve", "--init", str(gs_dir / "ground_state.nlsf"), "--dt", "1e-3", "--tend", "0.01", "--stride", "5", "--out", str(ev)])
    assert code == 0
    lines = (ev / "series.csv").read_text().splitlines()
    assert lines[0] == "t,mass,energy,scattering_density,accumulated_scattering"
    assert len(lines) == 12
    assert sorted(p.name for p in ev.glob("*.nlsf")) == ["snap_00000000.nlsf", "snap_00000005.nlsf", "snap_00000010.nlsf"]


def test_aborted_run_manifest(tmp_path, monkeypatch):
    gs_dir, ev = tmp_path / "gs", tmp_path / "ev"
    cli.main(["ground-state", "--N", "512", "--out", str(gs_dir)])

    def boom(state, p, grid, stop, **kw):
        raise RunAborted("mass drift 1e-3 exceeds 1e-07 at t=0.1", state)

    monkeypatch.setattr(cli, "evolve", boom)
    code = cli.main(["evolve", "--init", str(gs_dir / "ground_state.nlsf"), "--tend", "0.1", "--out", str(ev)])
    assert code == cli.EXIT_ABORTED
    man = json.loads((ev / "manifest.json").read_text())
    assert man["status"] == "aborted"
    assert man["diagnostic_snapshot"] == "aborted_state.nlsf"
    assert (ev / "aborted_state.nlsf").exists()


def test_sweep_and_report_deterministic(tmp_path):
    args = ["--ladder", "1e-2,3e-3,1e-3,1e-4", "--N", "1024", "--dt", "1e-3", "--backward", "false"]
    hashes = []
    for k in range(2):
        out = tmp_path / f"sw{k}"
        assert cli.main(["exit-sweep", *args, "--out", str(out)]) == 0
        hashes.append(json.loads((out / "manifest.json").read_text())["files"])
    assert hashes[0] == hashes[1]
    assert len([n for n in hashes[0] if n.startswith("modulation_")]) == 4
    header = (tmp_path / "sw0" / "sweep.csv").read_text().splitlines()[0]
    assert header == "a,eps,T_plus,S_accum,rate,alpha_dot_exit"
    rp = tmp_path / "rp"
    assert cli.main(["report", "--input", str(tmp_path / "sw0"), "--out", str(rp)]) == 0
    data = np.loadtxt(rp / "logeps_T_plus.dat", delimiter=",", skiprows=1)
    assert data.shape == (4, 2)
    assert "2/lambda1" in (rp / "summary.txt").read_text()
