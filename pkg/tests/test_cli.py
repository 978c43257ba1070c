"""End-to-end command-line workflows on temporary directories."""

import json

import numpy as np
import pytest
from helpers import random_stable_pvar

from spvar import PvarParams
from spvar.cli import main
from spvar.io import params_doc, params_from_doc, write_json


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def workspace(tmp_path, capsys):
    """A simulated two-variable, two-season data set plus its generator."""
    params = random_stable_pvar(S=2, m=2, orders=(1, 1), seed=10, rho=0.5,
                                names=("gdp", "rate"))
    doc = params_doc(params)
    sim_cfg = tmp_path / "sim.json"
    write_json(str(sim_cfg), {
        "out_dir": str(tmp_path / "sim"),
        "seed": 4,
        "simulate": {"params": doc, "cycles": 30},
    })
    code, out, err = run(capsys, "simulate", "--config", str(sim_cfg))
    assert code == 0, err
    assert "simulate: 60 rows" in out
    data = tmp_path / "sim" / "simulated.csv"
    base = {
        "data": str(data),
        "num_seasons": 2,
        "orders": 1,
        "bootstrap": {"L": 19, "seed": 5},
        "horizon": 3,
    }
    return tmp_path, base, doc


def write_cfg(tmp_path, name, cfg):
    path = tmp_path / name
    write_json(str(path), cfg)
    return str(path)


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == "spvar 0.1.0"


def test_fit_identify_irf_workflow(workspace, tmp_path, capsys):
    ws, base, _ = workspace

    cfg = write_cfg(ws, "fit.json", dict(base, out_dir=str(ws / "fit")))
    code, out, _ = run(capsys, "fit", "--config", cfg)
    assert code == 0
    assert "free parameters" in out and "margin" in out
    fitted = json.load(open(ws / "fit" / "params.json"))
    back = params_from_doc(fitted)
    assert isinstance(back, PvarParams)
    assert fitted["fit"]["stationary"] is True
    manifest = json.load(open(ws / "fit" / "manifest.json"))
    assert sorted(manifest) == ["command", "config_hash", "seed", "version"]
    assert manifest["command"] == "fit"
    assert len(manifest["config_hash"]) == 64

    cfg = write_cfg(ws, "ident.json", dict(base, out_dir=str(ws / "ident")))
    code, out, _ = run(capsys, "identify", "--config", cfg)
    assert code == 0 and "cholesky" in out
    sdoc = json.load(open(ws / "ident" / "structural.json"))
    h0 = np.array(sdoc["h0"])
    assert h0.shape == (2, 2, 2)
    assert h0[0, 0, 1] == 0.0 and h0[1, 0, 1] == 0.0
    assert sdoc["longrun"] is None

    cfg = write_cfg(ws, "irf.json", dict(base, out_dir=str(ws / "irf")))
    code, out, _ = run(capsys, "irf", "--config", cfg)
    assert code == 0
    lines = open(ws / "irf" / "irf.csv").read().splitlines()
    assert lines[0] == "season,horizon,response,shock,value"
    assert len(lines) == 1 + 2 * 4 * 2 * 2
    assert lines[1].startswith("1,0,gdp,shock1,")


def test_bootstrap_bands_and_diagnose(workspace, tmp_path, capsys):
    ws, base, _ = workspace

    cfg = write_cfg(ws, "bci.json", dict(base, out_dir=str(ws / "bci")))
    code, out, _ = run(capsys, "bootstrap-ci", "--config", cfg)
    assert code == 0
    assert "19 draws kept" in out and "b^3/T" in out
    lines = open(ws / "bci" / "bands.csv").read().splitlines()
    assert lines[0] == "season,horizon,response,shock,value,lower,upper,ci_method"
    assert len(lines) == 1 + 2 * 4 * 2 * 2
    assert lines[1].endswith(",median_adjusted")
    cells = lines[1].split(",")
    assert float(cells[5]) <= float(cells[4]) <= float(cells[6])

    cfg = write_cfg(ws, "diag.json", dict(base, out_dir=str(ws / "diag")))
    code, out, _ = run(capsys, "diagnose", "--config", cfg)
    assert code == 0
    acf = open(ws / "diag" / "acf.csv").read().splitlines()
    assert acf[0] == "series,transform,season,lag,value"
    sd = open(ws / "diag" / "sd.csv").read().splitlines()
    assert sd[0] == "series,transform,frequency,value"
    white = open(ws / "diag" / "whiteness.csv").read().splitlines()
    assert white[0] == "series,lag,acf_level,acf_square,flag_level,flag_square"
    assert set(line.split(",")[0] for line in white[1:]) == {"shock1", "shock2"}


def test_coverage_command(workspace, tmp_path, capsys):
    ws, base, doc = workspace
    cfg = write_cfg(ws, "cov.json", {
        "out_dir": str(ws / "cov"),
        "seed": 9,
        "bootstrap": {"L": 19},
        "coverage": {"params": doc, "cycles": 12, "mc_reps": 3,
                     "horizons": [0, 2]},
    })
    code, out, _ = run(capsys, "coverage", "--config", cfg)
    assert code == 0
    assert "3 replicates scored" in out
    lines = open(ws / "cov" / "coverage.csv").read().splitlines()
    assert lines[0] == "spec,b,N,season,shock,response,horizon,coverage,mc_se,failures"
    assert len(lines) == 1 + 2 * 2 * 2 * 2
    assert lines[1].startswith("G0,1,12,1,shock1,gdp,0,")


def test_exit_codes_name_the_category(workspace, tmp_path, capsys):
    ws, base, _ = workspace

    code, _, err = run(capsys, "fit", "--config", str(ws / "nope.json"))
    assert code == 2 and "spvar: error: [config]" in err

    cfg = write_cfg(ws, "unknown.json", dict(base, wat=1))
    code, _, err = run(capsys, "fit", "--config", cfg)
    assert code == 2 and "wat: unknown key" in err

    cfg = write_cfg(ws, "alpha.json", dict(base, bootstrap={"alpha": 2}))
    code, _, err = run(capsys, "bootstrap-ci", "--config", cfg)
    assert code == 2 and "bootstrap.alpha" in err

    cfg = write_cfg(ws, "nodata.json", dict(base, data=str(ws / "gone.csv")))
    code, _, err = run(capsys, "fit", "--config", cfg)
    assert code == 3 and "spvar: error: [data]" in err

    bad = ws / "bad.csv"
    bad.write_text("u,v\n1.0,oops\n")
    cfg = write_cfg(ws, "badcell.json", dict(base, data=str(bad)))
    code, _, err = run(capsys, "fit", "--config", cfg)
    assert code == 3 and "not a number" in err

    short = ws / "short.csv"
    short.write_text("u,v\n" + "\n".join("1.0,2.0" for _ in range(8)) + "\n")
    cfg = write_cfg(ws, "short.json", dict(base, data=str(short), orders=2))
    code, _, err = run(capsys, "fit", "--config", cfg)
    assert code == 4 and "spvar: error: [numerical]" in err


def test_outputs_are_reproducible_across_threads(workspace, tmp_path, capsys):
    ws, base, _ = workspace
    outs = {}
    for tag, extra in (("one", ["--threads", "1"]), ("two", ["--threads", "2"]),
                       ("rerun", ["--threads", "1"])):
        cfg = write_cfg(ws, f"{tag}.json", dict(base, out_dir=str(ws / tag)))
        code, _, err = run(capsys, "bootstrap-ci", "--config", cfg, *extra)
        assert code == 0, err
        outs[tag] = (ws / tag / "bands.csv").read_bytes()
        manifest = json.loads((ws / tag / "manifest.json").read_text())
        outs[tag + "_hash"] = manifest["config_hash"]
    assert outs["one"] == outs["two"] == outs["rerun"]
    assert outs["one_hash"] == outs["two_hash"]


def test_flag_overrides_reach_the_engine(workspace, tmp_path, capsys):
    ws, base, _ = workspace
    cfg = write_cfg(ws, "ovr.json", dict(base, out_dir=str(ws / "ovr")))
    code, out, _ = run(capsys, "bootstrap-ci", "--config", cfg,
                       "--L", "29", "--alpha", "0.5", "--b", "2")
    assert code == 0
    assert "29 draws kept" in out and "alpha = 0.5" in out
    base_hash = json.loads((ws / "ovr" / "manifest.json").read_text())["config_hash"]
    code, _, _ = run(capsys, "bootstrap-ci", "--config", cfg)
    other = json.loads((ws / "ovr" / "manifest.json").read_text())["config_hash"]
    assert base_hash != other


def test_seed_flag_and_env_threads(workspace, tmp_path, capsys, monkeypatch):
    ws, base, doc = workspace
    sim = {"out_dir": str(ws / "s1"), "simulate": {"params": doc, "cycles": 5}}
    cfg = write_cfg(ws, "seed.json", sim)
    assert run(capsys, "simulate", "--config", cfg, "--seed", "1")[0] == 0
    first = (ws / "s1" / "simulated.csv").read_bytes()
    assert run(capsys, "simulate", "--config", cfg, "--seed", "2")[0] == 0
    assert (ws / "s1" / "simulated.csv").read_bytes() != first
    assert run(capsys, "simulate", "--config", cfg, "--seed", "1")[0] == 0
    assert (ws / "s1" / "simulated.csv").read_bytes() == first

    cfg = write_cfg(ws, "env.json", dict(base, out_dir=str(ws / "env")))
    monkeypatch.setenv("SPVAR_THREADS", "2")
    code, _, err = run(capsys, "bootstrap-ci", "--config", cfg)
    assert code == 0, err
    monkeypatch.setenv("SPVAR_THREADS", "abc")
    code, _, err = run(capsys, "bootstrap-ci", "--config", cfg)
    assert code == 2 and "SPVAR_THREADS" in err
