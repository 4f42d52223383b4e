import json

import pytest

from mmqcels import cli
from mmqcels.estimator import DegenerateModeError
from mmqcels.sampling import Dataset
from mmqcels.spectral import Spectrum

SMALL = {
    "model": {"kind": "tfim", "L": 4, "g": 1.0},
    "weights": [0.5, 0.3],
    "data": {"T": 5.0, "N": 64},
    "schedule": {"gamma": 1.0, "T0_gap": 2.0, "N0": 400, "Nj": 400, "l": 2},
    "qpe": {"d_min": 3, "d_max": 6},
    "trials": 2,
    "landscape": {"levels": [1, 2], "points": 25},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return p


@pytest.mark.parametrize("command", cli.COMMANDS)
def test_every_command_succeeds(command, cfg_path, tmp_path, capsys):
    out = tmp_path / "out" / f"{command}.out"
    assert cli.main([command, "--config", str(cfg_path), "--seed", "11", "--out", str(out)]) == 0
    assert out.exists() and out.stat().st_size > 0
    json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_outputs_parse(cfg_path, tmp_path):
    cli.main(["spectrum", "--config", str(cfg_path), "--out", str(tmp_path / "s.json")])
    sp = Spectrum.load(tmp_path / "s.json")
    assert sp.M == 16
    cli.main(["generate", "--config", str(cfg_path), "--seed", "3", "--out", str(tmp_path / "d.jsonl")])
    d = Dataset.load(tmp_path / "d.jsonl")
    assert d.N == 64 and d.seed == 3
    cli.main(["estimate", "--config", str(cfg_path), "--seed", "3", "--out", str(tmp_path / "e.json")])
    est = json.loads((tmp_path / "e.json").read_text())
    assert set(est) == {"theta", "r_re", "r_im", "intervals", "t_max", "t_total", "loss"}
    assert len(est["theta"]) == 2


def test_seed_reproducibility(cfg_path, tmp_path):
    for name in ("a", "b"):
        cli.main(["bench", "--config", str(cfg_path), "--seed", "0x2a", "--out", str(tmp_path / f"{name}.csv")])
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
    cli.main(["bench", "--config", str(cfg_path), "--seed", "43", "--out", str(tmp_path / "c.csv")])
    assert (tmp_path / "a.csv").read_text() != (tmp_path / "c.csv").read_text()


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**SMALL, "unexpected": True}))
    assert cli.main(["bench", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["bench", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 2
    bad.write_text("{not json")
    assert cli.main(["qpe", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    big = tmp_path / "big.json"
    big.write_text(json.dumps({**SMALL, "model": {"kind": "tfim", "L": 14}}))
    assert cli.main(["spectrum", "--config", str(big), "--out", str(tmp_path / "x")]) == 2
    und = tmp_path / "und.json"
    und.write_text(json.dumps({**SMALL, "weights": [0.3, 0.2], "schedule": {"l": 2}}))
    assert cli.main(["estimate", "--config", str(und), "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["bench", "--config", str(big), "--seed", "-4", "--out", "x"]) == 2
    assert cli.main(["nonsense"]) == 2


def test_numerical_failure_exit_3(cfg_path, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise DegenerateModeError("singular Gram matrix")

    monkeypatch.setattr(cli, "mm_qcels", broken)
    assert cli.main(["estimate", "--config", str(cfg_path), "--out", str(tmp_path / "x")]) == 3

    def nan_run(*args, **kwargs):
        raise FloatingPointError("overflow")

    monkeypatch.setattr(cli.bench, "run_figure3", nan_run)
    assert cli.main(["bench", "--config", str(cfg_path), "--out", str(tmp_path / "x")]) == 3
