import json

import pytest

from annni_fidelity import cli
from annni_fidelity.lanczos import Spectrum, lanczos_lowest


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_spectrum_table(capsys):
    assert run("spectrum", "--n-sites", 8, "--alpha", 0, "--bx", 0, "--k", 2) == 0
    out = capsys.readouterr().out
    assert out.count("-8.000000000000000") == 2


def test_spectrum_json(capsys):
    assert run("spectrum", "--n-sites", 6, "--alpha", 0.3, "--json") == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["eigenvalues"]) == 6 and doc["converged"]


def test_sweep_and_plot(tmp_path, capsys):
    out = tmp_path / "s"
    rc = run("sweep", "--n-sites", 8, "--alpha-min", 0.1, "--alpha-max", 0.12, "--points", 3,
             "--out", out)
    assert rc == 0
    assert (out / "sweep.csv").exists() and (out / "crossings.json").exists()
    assert run("plot", out / "sweep.csv", "--out", tmp_path / "p") == 0
    assert (tmp_path / "p" / "levels.gp").exists()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nn-sites = 8\nalpha_min = 0.1\nalpha-max = 0.12\npoints = 5\n")
    out = tmp_path / "c"
    assert run("sweep", "--config", cfg, "--points", 3, "--out", out) == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert len(rows) == 4


@pytest.mark.parametrize("argv", [
    ["sweep", "--d-alpha", "0"],
    ["sweep", "--n-sites", "3"],
    ["sweep", "--points", "2"],
    ["sweep", "--bogus"],
    ["grid", "--bx-min", "0.3", "--bx-max", "0.1"],
    ["spectrum"],
    ["spectrum", "--alpha", "0.2", "--n-sites", "40"],
    ["plot", "/nonexistent/sweep.csv"],
])
def test_validation_exit_code(argv, tmp_path):
    if argv[0] in ("sweep", "grid"):
        argv = argv + ["--out", str(tmp_path / "o")]
    assert cli.main(argv) == 2


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    assert "sweep" in capsys.readouterr().out


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nsites = 8\n")
    assert run("sweep", "--config", cfg, "--out", tmp_path / "o") == 2


def test_unconverged_exit_code(tmp_path, monkeypatch):
    import annni_fidelity.sweep as sweep

    def starved(spec, cfg=None, **kw):
        sp = lanczos_lowest(spec, cfg, **kw)
        return Spectrum(**{**sp.__dict__, "converged": False})

    monkeypatch.setattr(sweep, "lanczos_lowest", starved)
    rc = run("sweep", "--n-sites", 8, "--alpha-min", 0.1, "--alpha-max", 0.12, "--points", 3,
             "--out", tmp_path / "u")
    assert rc == 3
    text = (tmp_path / "u" / "sweep.csv").read_text()
    assert text.count(",false,") >= 3
