import numpy as np
import pytest

from cmsphere import cli
from cmsphere.diagnostics import CSV_HEADER
from cmsphere.errors import NonFiniteState
from cmsphere.mapping import load_chain
from cmsphere.tracers import cosine_bells


def test_mesh_command(capsys, tmp_path):
    out = tmp_path / "meshdir"
    assert cli.main(["mesh", "--k", "2", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "vertices=162" in text and "triangles=320" in text
    assert (out / "vertices.txt").exists()
    assert (out / "triangles.txt").exists()


def test_run_saves_chain_and_csv(capsys, tmp_path):
    chain_path = tmp_path / "chain.npz"
    csv_path = tmp_path / "err.csv"
    code = cli.main(
        [
            "run", "--test", "solid_body", "--alpha", "1.05", "--k", "2",
            "--n-steps", "6", "--samples", "20000",
            "--save-chain", str(chain_path), "--csv", str(csv_path),
        ]
    )
    assert code == 0
    text = capsys.readouterr().out
    assert "solid_body: k=2 steps=6" in text
    assert "submaps=1" in text
    assert CSV_HEADER in text
    assert load_chain(str(chain_path)).n_submaps == 1
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert lines[1].startswith("solid_body,2,6,0,")


def test_usage_errors(capsys):
    cases = [
        ["run", "--test", "tornado"],
        ["run", "--test", "compressible", "--alpha", "0.5"],
        ["run", "--k", "9"],
        ["run", "--k", "7"],  # needs --allow-deep
        ["mesh", "--k", "-1"],
        ["converge", "--k-min", "4", "--k-max", "3"],
        ["render", "--t", "0", "--width", "1e-9",
         "--center-lam", "0", "--center-theta", "1"],
        ["render", "--t", "0", "--width", "0.5"],
        ["mass", "--n-list", "4,8", "--k", "2", "--n-steps", "2"],
    ]
    for argv in cases:
        assert cli.main(argv) == 2, argv
        assert "error:" in capsys.readouterr().err


def test_config_resolution(capsys, tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[run]\nk = 2\nn-steps = 4\nsamples = 5000\ntest = solid_body\n")
    assert cli.main(["run", "--config", str(cfg)]) == 0
    assert "steps=4" in capsys.readouterr().out
    # a flag beats the config value
    assert cli.main(["run", "--config", str(cfg), "--n-steps", "3"]) == 0
    assert "steps=3" in capsys.readouterr().out

    bad_section = tmp_path / "bad1.ini"
    bad_section.write_text("[transport]\nk = 2\n")
    assert cli.main(["run", "--config", str(bad_section)]) == 2
    assert "unknown section" in capsys.readouterr().err

    bad_key = tmp_path / "bad2.ini"
    bad_key.write_text("[run]\nfoo = 1\n")
    assert cli.main(["run", "--config", str(bad_key)]) == 2
    assert "unknown key" in capsys.readouterr().err

    bad_value = tmp_path / "bad3.ini"
    bad_value.write_text("[run]\nk = three\n")
    assert cli.main(["run", "--config", str(bad_value)]) == 2

    assert cli.main(["run", "--config", str(tmp_path / "missing.ini")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_converge_reports_slopes(capsys, tmp_path):
    csv_path = tmp_path / "conv.csv"
    code = cli.main(
        [
            "converge", "--test", "solid_body", "--alpha", "0.0",
            "--k-min", "2", "--k-max", "3", "--n-steps", "4",
            "--samples", "20000", "--csv", str(csv_path),
        ]
    )
    assert code == 0
    text = capsys.readouterr().out
    assert CSV_HEADER in text
    assert text.count("slope ") == 3
    lines = csv_path.read_text().strip().split("\n")
    assert len(lines) == 3
    assert lines[1].split(",")[1] == "2"
    assert lines[2].split(",")[1] == "3"


def test_render_equirect_matches_direct_sampling(capsys, tmp_path):
    img = tmp_path / "r.pgm"
    csv_path = tmp_path / "vals.csv"
    code = cli.main(
        [
            "render", "--test", "solid_body", "--k", "2", "--t", "0",
            "--resolution", "16", "--gray",
            "--out", str(img), "--csv", str(csv_path),
        ]
    )
    assert code == 0
    assert "wrote" in capsys.readouterr().out
    raw = img.read_bytes()
    assert raw.startswith(b"P5\n32 16\n255\n")
    assert len(raw) == len(b"P5\n32 16\n255\n") + 32 * 16

    # at t=0 the image is the raw tracer on the grid
    grid = cli._equirect_grid(16)
    want = cosine_bells()(grid)
    rows = csv_path.read_text().strip().split("\n")[1:]
    got = np.array([float(r.split(",")[2]) for r in rows]).reshape(16, 32)
    assert np.array_equal(got, want)


def test_render_window_ppm(tmp_path):
    img = tmp_path / "w.ppm"
    code = cli.main(
        [
            "render", "--test", "solid_body", "--k", "2", "--t", "0",
            "--resolution", "8", "--width", "0.5",
            "--center-lam", "3.67", "--center-theta", "1.57",
            "--out", str(img),
        ]
    )
    assert code == 0
    raw = img.read_bytes()
    assert raw.startswith(b"P6\n8 8\n255\n")
    assert len(raw) == len(b"P6\n8 8\n255\n") + 3 * 8 * 8


def test_mixing_reports_zero_residual(capsys, tmp_path):
    out = tmp_path / "mix.csv"
    code = cli.main(
        ["mixing", "--k", "2", "--n-steps", "4", "--resolution", "12",
         "--out", str(out)]
    )
    assert code == 0
    assert "correlation residual 0.000e+00" in capsys.readouterr().out
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "q1,q2"
    assert len(lines) == 1 + 12 * 12
    vals = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    q1, q2 = vals[:, 0], vals[:, 1]
    assert np.array_equal(q2, -0.8 * q1 * q1 + 0.9)


def test_mass_command(capsys, tmp_path):
    out = tmp_path / "mass.csv"
    code = cli.main(
        ["mass", "--k", "2", "--n-steps", "4", "--n-list", "8,16",
         "--out", str(out)]
    )
    assert code == 0
    text = capsys.readouterr().out
    assert "N=8 |1-mass|=" in text and "N=16 |1-mass|=" in text
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "N,mass_err"
    assert len(lines) == 3


def test_remap_study(capsys, tmp_path):
    csv_path = tmp_path / "remap.csv"
    code = cli.main(
        [
            "remap-study", "--k", "2", "--n-steps", "4", "--T", "0.5",
            "--strides", "0,2", "--samples", "5000",
            "--tracer", "cosine_bells", "--csv", str(csv_path),
        ]
    )
    assert code == 0
    text = capsys.readouterr().out
    assert "stride,remaps,linf,walltime" in text
    lines = csv_path.read_text().strip().split("\n")
    assert len(lines) == 3
    assert lines[1].startswith("0,0,")
    assert lines[2].startswith("2,1,")


def test_nonfinite_exit_code(capsys, monkeypatch):
    def explode(*args, **kwargs):
        raise NonFiniteState("field values left the finite range")

    monkeypatch.setattr(cli, "evolve_run", explode)
    assert cli.main(["run", "--k", "2", "--n-steps", "2"]) == 3
    assert "finite" in capsys.readouterr().err
