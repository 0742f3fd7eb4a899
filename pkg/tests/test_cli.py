import json
import math
import re
import subprocess
import sys

import numpy as np
import pytest

from cylwigner import cli
from cylwigner.cyl_core import AngleGrid
from cylwigner.dynamics import snapshots_from_csv
from cylwigner.tomography import CharCoeffs, CoverageError, TomogramSet
from cylwigner.wigner_map import WignerGrid, closed_form_superposition_wigner

INV2PI = 1 / (2 * math.pi)


def read_pairs(path):
    rows = path.read_text().strip().splitlines()[1:]
    return np.array([[float(x) for x in r.split(",")] for r in rows])


def test_wigner_coherent(tmp_path, capsys):
    assert cli.main(["wigner", "--state", "coherent", "--l0", "0", "--phi0", "0", "--out", str(tmp_path)]) == 0
    marg = read_pairs(tmp_path / "marginal_ell.csv")
    peak = marg[np.argmax(marg[:, 1])]
    assert peak[0] == 0
    assert peak[1] == pytest.approx(0.5641, abs=1e-4)
    text = capsys.readouterr().out
    assert "negative cells" in text
    m = re.search(r"most negative at ell = (-?\d+), phi = (\S+)", text)
    assert int(m.group(1)) % 2 == 1
    assert abs(float(m.group(2))) > 2.5
    grid = WignerGrid.from_csv((tmp_path / "wigner.csv").read_text())
    assert grid.values.min() < 0
    assert read_pairs(tmp_path / "marginal_phi.csv").shape == (128, 2)


def test_wigner_eigenstate(tmp_path):
    assert cli.main(["wigner", "--state", "eigenstate", "--l0", "2", "--lmin", "-2", "--lmax", "5",
                     "--out", str(tmp_path)]) == 0
    grid = WignerGrid.from_csv((tmp_path / "wigner.csv").read_text())
    ref = np.zeros_like(grid.values)
    ref[list(grid.ells).index(2)] = INV2PI
    assert np.max(np.abs(grid.values - ref)) < 1e-12


def test_wigner_superposition_ring(tmp_path):
    assert cli.main(["wigner", "--state", "superposition", "--l1", "3", "--l2", "-3", "--theta", "0",
                     "--nphi", "60", "--format", "json", "--out", str(tmp_path)]) == 0
    grid = WignerGrid.from_json((tmp_path / "wigner.json").read_text())
    row = grid.values[list(grid.ells).index(0)]
    np.testing.assert_allclose(row, INV2PI * np.cos(6 * grid.phis), atol=1e-11)
    for i, ell in enumerate(grid.ells):
        for j in (0, 17, 41):
            assert grid.values[i, j] == pytest.approx(
                closed_form_superposition_wigner(3, -3, 0.0, ell, grid.phis[j]), abs=1e-10)


def test_evolve_stationary(tmp_path, capsys):
    args = ["evolve", "--lambda", "0", "--state", "eigenstate", "--l0", "3", "--t", "1",
            "--dt", "0.01", "--save-every", "25", "--nphi", "16", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    snaps = snapshots_from_csv((tmp_path / "evolve.csv").read_text())
    assert [s.t for s in snaps] == [0.0, 0.25, 0.5, 0.75, 1.0]
    for s in snaps[1:]:
        np.testing.assert_array_equal(s.grid.values, snaps[0].grid.values)
    assert "max |W(t) - W(0)| = 0.000e+00" in capsys.readouterr().out


def test_evolve_json(tmp_path):
    args = ["evolve", "--lambda", "0.5", "--state", "coherent", "--t", "0.02", "--dt", "0.005",
            "--nphi", "72", "--format", "json", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    obj = json.loads((tmp_path / "evolve.json").read_text())
    assert [s["t"] for s in obj["snapshots"]] == [0.0, 0.02]


def test_tomo_roundtrip(tmp_path, capsys):
    assert cli.main(["tomo", "--state", "eigenstate", "--l0", "1", "--roundtrip", "--out", str(tmp_path)]) == 0
    m = re.search(r"max reconstruction error: wigner (\S+)  density (\S+)", capsys.readouterr().out)
    assert float(m.group(1)) < 1e-8 and float(m.group(2)) < 1e-8
    t = TomogramSet.from_csv((tmp_path / "tomograms.csv").read_text(), (tmp_path / "spectrum.csv").read_text())
    assert np.max(np.abs(t.probabilities - INV2PI)) < 1e-12
    CharCoeffs.from_csv((tmp_path / "char.csv").read_text())
    WignerGrid.from_csv((tmp_path / "wigner_reconstructed.csv").read_text())


def test_tomo_noisy_seeded(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        args = ["tomo", "--state", "superposition", "--l1", "0", "--l2", "2", "--shots", "5000",
                "--seed", "11", "--out", str(d)]
        assert cli.main(args) == 0
        outs.append({f.name: f.read_bytes() for f in d.iterdir()})
    assert outs[0] == outs[1]


def test_determinism_all_files(tmp_path):
    for name in ("a", "b"):
        d = tmp_path / name
        assert cli.main(["wigner", "--state", "coherent", "--l0", "1", "--phi0", "0.3", "--out", str(d)]) == 0
        assert cli.main(["evolve", "--lambda", "0.5", "--state", "coherent", "--t", "0.02", "--dt", "0.005",
                         "--nphi", "72", "--out", str(d)]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_thread_env_keeps_output(tmp_path, monkeypatch):
    cli.main(["wigner", "--state", "coherent", "--l0", "2", "--out", str(tmp_path / "one")])
    monkeypatch.setenv("CYLWIGNER_THREADS", "4")
    cli.main(["wigner", "--state", "coherent", "--l0", "2", "--out", str(tmp_path / "four")])
    assert (tmp_path / "one" / "wigner.csv").read_bytes() == (tmp_path / "four" / "wigner.csv").read_bytes()


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text(f"command = wigner\nstate = eigenstate  # vortex\nl0 = 4\nnphi = 8\nout = {tmp_path / 'f'}\n")
    assert cli.main(["-c", str(conf)]) == 0
    grid = WignerGrid.from_csv((tmp_path / "f" / "wigner.csv").read_text())
    assert list(grid.ells) == [4]
    assert cli.main(["-c", str(conf), "wigner", "--l0", "-1", "--out", str(tmp_path / "g")]) == 0
    grid = WignerGrid.from_csv((tmp_path / "g" / "wigner.csv").read_text())
    assert list(grid.ells) == [-1] and grid.angle_grid.n_phi == 8


def test_state_file(tmp_path):
    f = tmp_path / "psi.csv"
    f.write_text("ell,re,im\n-1,0.6,0\n2,0,0.8\n")
    assert cli.main(["wigner", "--state", "file", "--state-file", str(f), "--out", str(tmp_path)]) == 0
    marg = read_pairs(tmp_path / "marginal_ell.csv")
    np.testing.assert_allclose(marg[:, 1], [0.36, 0, 0, 0.64], atol=1e-12)
    j = tmp_path / "psi.json"
    j.write_text(json.dumps({"ell": [0, 1], "re": [1, 0], "im": [0, 0]}))
    assert cli.main(["wigner", "--state", "file", "--state-file", str(j), "--out", str(tmp_path)]) == 0


def test_exit_codes(tmp_path, monkeypatch, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("command = wigner\nbogus = 1\n")
    assert cli.main(["-c", str(conf)]) == 2
    assert cli.main(["wigner", "--l0", "x", "--out", str(tmp_path)]) == 2
    assert cli.main(["wigner", "--state", "eigenstate", "--l0", "5", "--lmin", "0", "--lmax", "3"]) == 2
    assert cli.main(["wigner", "--state", "superposition", "--l1", "1", "--l2", "1"]) == 2
    assert cli.main(["wigner", "--state", "file", "--state-file", str(tmp_path / "missing.csv")]) == 2
    assert cli.main(["evolve", "--lambda", "0.5", "--dt", "0.5", "--t", "1", "--out", str(tmp_path)]) == 3
    assert cli.main([]) == 2

    def no_cover(*a, **k):
        raise CoverageError([(1, 0)])

    monkeypatch.setattr(cli, "reconstruct_char", no_cover)
    assert cli.main(["tomo", "--state", "eigenstate", "--out", str(tmp_path)]) == 4
    capsys.readouterr()


def test_selftest(capsys):
    assert cli.main(["selftest"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert json.loads(lines[-1]) == {"passed": True, "failed": []}
    assert all(ln.startswith("PASS") for ln in lines[:-1])


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cylwigner", "wigner", "--state", "eigenstate",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "wigner.csv").exists()
