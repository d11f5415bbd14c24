import math

import numpy as np
import pytest

from rearrangement import fixtures as fx
from rearrangement import make_domain, read_grid, read_profile, sample, write_grid
from rearrangement.cli import main
from rearrangement.geometry import read_constants
from rearrangement.inequalities import parse_trace_csv, read_reports


@pytest.fixture
def grids(tmp_path):
    paths = {}
    for name, g in {
        "cos": fx.cosine_square(1 / 32),
        "w": fx.perturbation_square(1 / 32),
        "bump": fx.two_bump(1 / 32),
        "const": sample(make_domain(bounds=[(0, 1), (0, 1)], h=1 / 8), 2.5),
    }.items():
        paths[name] = tmp_path / f"{name}.rgrid"
        write_grid(g, paths[name])
    return paths


def test_symmetrize_constant(grids, tmp_path):
    out = tmp_path / "sym"
    assert main(["symmetrize", "--input", str(grids["const"]), "--out", str(out)]) == 0
    prof = read_profile(out / "profile.rprof")
    assert np.all(prof.values == 2.5)
    g = read_grid(out / "symmetrized.rgrid")
    assert np.all(g.values == 2.5)
    assert "l2_input=2.5" in (out / "summary.txt").read_text()


def test_symmetrize_counterexample_seed(tmp_path):
    h = 1 / 64
    d = make_domain(kind="ball", n=2, radius=1.0, h=h)
    write_grid(sample(d, "sqrt(pi)*r"), tmp_path / "seed.rgrid")
    assert main(["symmetrize", "--input", str(tmp_path / "seed.rgrid"), "--out", str(tmp_path)]) == 0
    prof = read_profile(tmp_path / "profile.rprof")
    s = np.linspace(0.1, 3.0, 7)
    np.testing.assert_allclose(prof(s), np.sqrt(prof.measure - s), atol=4 * h)


def test_symmetrize_idempotent(grids, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["symmetrize", "--input", str(grids["bump"]), "--out", str(a), "--emit-plots"]) == 0
    assert (a / "profile.csv").exists()
    assert main(["symmetrize", "--input", str(a / "symmetrized.rgrid"), "--out", str(b)]) == 0
    pa, pb = read_profile(a / "profile.rprof"), read_profile(b / "profile.rprof")
    assert abs(pa.measure - pb.measure) < 4 * (1 / 32)
    s = np.linspace(0, min(pa.measure, pb.measure), 50)
    diff = pa.fine_linear_view()(s) - pb.fine_linear_view()(s)
    assert np.max(np.abs(diff)) < 0.1


def test_verify_thm_2_1(grids, tmp_path, capsys):
    rc = main(["verify", "--input", str(grids["cos"]), "--thm", "2.1", "--eps", "0.5", "--out", str(tmp_path)])
    assert rc == 0
    reps = read_reports(tmp_path / "report_2_1.rrep")
    assert len(reps) == 1 and reps[0].name == "thm_2_1"
    assert reps[0].metadata["c_eps"] == 1.0


def test_verify_with_constants_file(grids, tmp_path):
    assert main(["constants", "--input", str(grids["cos"]), "--case", "iii", "--eps", "0.2", "--out", str(tmp_path)]) == 0
    consts, cert = read_constants(tmp_path / "constants.rconst")
    assert consts.Q == pytest.approx(math.sqrt(2) / 2)
    assert cert.case == "iii"
    rc = main(["verify", "--input", str(grids["cos"]), "--input", str(grids["w"]), "--thm", "2.2",
               "--constants", str(tmp_path / "constants.rconst"), "--out", str(tmp_path)])
    assert rc == 0


def test_verify_orlicz(grids, tmp_path):
    rc = main(["verify", "--input", str(grids["bump"]), "--thm", "3.4", "--nfunc", "tag=p-log p=2", "--out", str(tmp_path)])
    assert rc == 0
    nf = tmp_path / "a.nfunc"
    nf.write_text("NFUNC v1\ntag=custom expr=t*log1p(t)\n")
    rc = main(["verify", "--input", str(grids["cos"]), "--thm", "3.9", "--nfunc", str(nf), "--out", str(tmp_path)])
    assert rc == 0


def test_missing_q_in_constants(grids, tmp_path):
    bad = tmp_path / "bad.rconst"
    bad.write_text("RCONST v1\nC=2.0 method=searched\n")
    rc = main(["verify", "--input", str(grids["cos"]), "--thm", "2.1", "--constants", str(bad), "--out", str(tmp_path)])
    assert rc == 1


def test_violated_exit_code(tmp_path):
    # Q far below the true constant: the local estimate is violated
    write_grid(fx.cosine_square(1 / 32), tmp_path / "c.rgrid")
    (tmp_path / "tiny.rconst").write_text("RCONST v1\nQ=0.001 method=given\nC=1.0 method=given\n")
    rc = main(["verify", "--input", str(tmp_path / "c.rgrid"), "--thm", "2.1", "--eps", "0.4",
               "--constants", str(tmp_path / "tiny.rconst"), "--out", str(tmp_path)])
    assert rc == 2


def test_missing_input_file(tmp_path):
    assert main(["verify", "--input", str(tmp_path / "missing.rgrid"), "--thm", "1.1", "--out", str(tmp_path)]) == 1


def test_verify_without_input(tmp_path):
    assert main(["verify", "--thm", "1.1", "--out", str(tmp_path)]) == 1


def test_unknown_command_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1


def test_unknown_theorem(grids, tmp_path):
    assert main(["verify", "--input", str(grids["cos"]), "--thm", "4.2", "--out", str(tmp_path)]) == 1


def test_malformed_grid(tmp_path):
    p = tmp_path / "bad.rgrid"
    p.write_text("RGRID v1\nn=2 h=0.5\n2 2\nmask=full\n1\n2\n3\nnan\n")
    assert main(["symmetrize", "--input", str(p), "--out", str(tmp_path)]) == 1


def test_counterexample_command(tmp_path):
    assert main(["counterexample", "--n", "2", "--out", str(tmp_path)]) == 0
    eps, e, x, slope = parse_trace_csv((tmp_path / "counterexample_n2.csv").read_text())
    assert len(eps) == 16
    assert slope == pytest.approx(math.pi**2, rel=0.02)
