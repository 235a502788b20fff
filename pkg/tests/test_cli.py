import csv
import json
from pathlib import Path

import numpy as np
import pytest

from saturnq import fileio, oracle
from saturnq.cli import main
from saturnq.config import ConfigError, OUTPUT_ENV, load_config
from saturnq.mesh import cubed_sphere_shell, read_msh
from saturnq.qtensor import Q_INF

SMALL = ["--n-surface", "4", "--n-radial", "7"]


def jsonl(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    """One small solve shared by the tests that read its artifacts."""
    out = tmp_path_factory.mktemp("solve")
    assert main(["solve", *SMALL, "--k", "0", "5", "--output-dir", str(out)]) == 0
    return out


class TestVerify:
    def test_quick_passes(self, capsys):
        assert main(["verify", "--quick"]) == 0
        recs = jsonl(capsys.readouterr().out)
        assert recs[-1] == {"summary": True, "checks": len(recs) - 1, "failed": 0}
        names = {r["name"] for r in recs[:-1]}
        assert {"fourier_consistency", "homogeneity", "c_constant_indicator"} <= names
        assert {r["k"] for r in recs if r.get("name") == "fourier_consistency"} == {-0.9, 0.0, 1.0, 5.0, 20.0}

    def test_full_single_k(self, capsys, tmp_path):
        assert main(["verify", "--k", "5", "--output", str(tmp_path / "audit.jsonl")]) == 0
        recs = jsonl(capsys.readouterr().out)
        adj = [r for r in recs if r.get("name", "").startswith("adjoint")]
        assert len(adj) == 2 and all(r["passed"] for r in adj)
        assert jsonl((tmp_path / "audit.jsonl").read_text()) == recs

    def test_injected_fault(self, capsys):
        assert main(["verify", "--quick", "--inject-fault", "f11-scale"]) == 1
        cap = capsys.readouterr()
        failed = {r["name"] for r in jsonl(cap.out)[:-1] if not r["passed"]}
        assert "fourier_consistency" in failed
        assert "laplace_collapse_F11" in failed
        assert "laplace_collapse_F22" not in failed
        assert "FAILED fourier_consistency" in cap.err

    def test_deterministic(self, capsys):
        main(["verify", "--quick"])
        a = capsys.readouterr().out
        main(["verify", "--quick"])
        assert capsys.readouterr().out == a


class TestMeshCommand:
    def test_generate_and_write(self, capsys, tmp_path):
        path = tmp_path / "m.msh"
        assert main(["mesh", "--n-surface", "2", "--n-radial", "2", "--output", str(path)]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["n_vertices"] == 78 and rep["n_tets"] == 288
        assert read_msh(path).hash() == rep["hash"]

    def test_read_msh(self, capsys, tmp_path):
        from saturnq.mesh import write_msh
        write_msh(cubed_sphere_shell(2, 2), tmp_path / "in.msh")
        assert main(["mesh", "--mesh", str(tmp_path / "in.msh")]) == 0
        assert json.loads(capsys.readouterr().out)["n_tets"] == 288

    def test_missing_mesh(self, capsys, tmp_path):
        assert main(["mesh", "--mesh", str(tmp_path / "nope.msh")]) == 2
        assert "not found" in capsys.readouterr().err

    def test_binary_mesh(self, capsys, tmp_path):
        (tmp_path / "b.msh").write_text("$MeshFormat\n2.2 1 8\n$EndMeshFormat\n")
        assert main(["mesh", "--mesh", str(tmp_path / "b.msh")]) == 2
        assert "binary" in capsys.readouterr().err


class TestSolve:
    def test_artifacts(self, solved):
        for k in ("0", "5"):
            for name in (f"solution_k{k}.csv", f"solution_k{k}.vtk", f"gap_profile_k{k}.csv",
                         f"map_xz_0_k{k}.csv"):
                assert (solved / name).exists(), name
        ring = read_csv(solved / "ring.csv")
        assert ring[0] == ["k", "radius", "z_offset", "gap_at_ring", "band_inner", "band_outer", "note"]
        assert len(ring) == 3
        assert all(abs(float(r[2])) <= 0.05 for r in ring[1:])
        energy = jsonl((solved / "energy.jsonl").read_text())
        assert [e["k"] for e in energy] == [0.0, 5.0]
        assert all(e["converged"] and e["residual"] <= 1e-8 for e in energy)

    def test_vtk_content(self, solved):
        text = (solved / "solution_k0.vtk").read_text().splitlines()
        assert text[0] == "# vtk DataFile Version 3.0"
        for key in ("DATASET UNSTRUCTURED_GRID", "SCALARS normQ double 1", "SCALARS biaxiality double 1",
                    "VECTORS director double", "FIELD FieldData 1"):
            assert key in text
        nv = int(text[4].split()[1])
        assert f"Q 6 {nv} double" in text
        i = text.index("SCALARS normQ double 1") + 2
        norms = np.array([float(v) for v in text[i:i + nv]])
        assert np.all(norms <= 1.2 * np.sqrt(2 / 3))

    def test_rerun_byte_identical(self, solved, tmp_path):
        assert main(["solve", *SMALL, "--k", "0", "5", "--output-dir", str(tmp_path)]) == 0
        for path in sorted(solved.iterdir()):
            assert (tmp_path / path.name).read_bytes() == path.read_bytes(), path.name

    def test_config_and_env(self, tmp_path, monkeypatch, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[problem]\nk = 1.0\n[mesh]\nn_surface = 2\nn_radial = 3\n"
                       "[output]\ndirectory = ignored\nvtk = no\n[analysis]\nplanes = xy:0\nresolution = 11\n")
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env_out"))
        assert main(["solve", "--config", str(cfg)]) == 0
        out = tmp_path / "env_out"
        assert (out / "solution_k1.csv").exists()
        assert not (out / "solution_k1.vtk").exists()
        assert (out / "map_xy_0_k1.csv").exists()
        assert jsonl(capsys.readouterr().out)[0]["k"] == 1.0

    def test_invalid_k(self, capsys, tmp_path):
        assert main(["solve", *SMALL, "--k", "-1", "--output-dir", str(tmp_path)]) == 2
        assert "k must exceed -1" in capsys.readouterr().err

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--bogus"])
        assert exc.value.code == 2


class TestRepresent:
    def write_points(self, path, pts, header=True):
        lines = (["x,y,z"] if header else []) + [",".join(repr(float(v)) for v in p) for p in pts]
        path.write_text("\n".join(lines) + "\n")

    def test_analytic(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        d = rng.normal(size=(10, 3))
        pts = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(1.5, 5.0, size=(10, 1))
        self.write_points(tmp_path / "p.csv", pts)
        assert main(["represent", "--points", str(tmp_path / "p.csv"), "--output", str(tmp_path / "o.csv"),
                     "--tolerance", "1e-4"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["evaluated"] == 10 and summary["max_delta"] <= 1e-4
        rows = read_csv(tmp_path / "o.csv")
        assert rows[0] == ["x", "y", "z", "q11", "q22", "q33", "q12", "q13", "q23", "max_delta", "status"]
        q = np.array([[float(v) for v in r[3:9]] for r in rows[1:]])
        ref = oracle.harmonic_solution(pts)
        np.testing.assert_allclose(q[:, 0], ref[:, 0, 0], atol=1e-4)
        np.testing.assert_allclose(q[:, 5], ref[:, 1, 2], atol=1e-4)

    def test_margin_rows(self, tmp_path, capsys):
        self.write_points(tmp_path / "p.csv", [[1.05, 0, 0], [0, 2.0, 0]], header=False)
        assert main(["represent", "--points", str(tmp_path / "p.csv"), "--output", str(tmp_path / "o.csv"),
                     "--n-theta", "16"]) == 0
        rows = read_csv(tmp_path / "o.csv")
        assert rows[1][-1] == "skipped_margin" and rows[1][3] == ""
        assert rows[2][-1] == "ok"
        assert json.loads(capsys.readouterr().out)["evaluated"] == 1

    def test_empty_points(self, tmp_path, capsys):
        (tmp_path / "p.csv").write_text("x,y,z\n")
        assert main(["represent", "--points", str(tmp_path / "p.csv"), "--output", str(tmp_path / "o.csv")]) == 0
        assert len(read_csv(tmp_path / "o.csv")) == 1
        assert json.loads(capsys.readouterr().out)["points"] == 0

    def test_missing_points(self, tmp_path, capsys):
        assert main(["represent", "--points", str(tmp_path / "none.csv")]) == 2

    def test_analytic_needs_k0(self, tmp_path, capsys):
        self.write_points(tmp_path / "p.csv", [[0, 2.0, 0]])
        assert main(["represent", "--points", str(tmp_path / "p.csv"), "--k", "5",
                     "--output", str(tmp_path / "o.csv")]) == 2

    def test_checkpoint_mode(self, solved, tmp_path, capsys):
        self.write_points(tmp_path / "p.csv", [[0, 2.0, 0.5], [1.5, 1.5, 0.0]])
        args = ["represent", *SMALL, "--points", str(tmp_path / "p.csv"), "--mode", "checkpoint",
                "--checkpoint", str(solved / "solution_k5.csv"), "--k", "5", "--n-theta", "32",
                "--output", str(tmp_path / "o.csv")]
        assert main(args + ["--tolerance", "0.2"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["evaluated"] == 2 and summary["passed"]
        assert main(args + ["--tolerance", "1e-9"]) == 1

    def test_checkpoint_wrong_mesh(self, solved, tmp_path, capsys):
        self.write_points(tmp_path / "p.csv", [[0, 2.0, 0.5]])
        assert main(["represent", "--n-surface", "2", "--n-radial", "2", "--points", str(tmp_path / "p.csv"),
                     "--mode", "checkpoint", "--checkpoint", str(solved / "solution_k5.csv")]) == 2
        assert "hash" in capsys.readouterr().err


class TestAnalyze:
    def test_outputs(self, solved, tmp_path, capsys):
        assert main(["analyze", *SMALL, "--checkpoint", str(solved / "solution_k0.csv"),
                     "--output-dir", str(tmp_path)]) == 0
        res = json.loads(capsys.readouterr().out)
        assert res["ring"]["radius"] == pytest.approx(1.4656, abs=0.1)
        assert res["max_normQ"] == pytest.approx(np.sqrt(2 / 3), rel=0.03)
        decay = read_csv(tmp_path / "decay_k0.csv")
        assert decay[0] == ["radius", "equatorial", "polar", "diagonal"]
        assert float(decay[1][1]) == pytest.approx(np.sqrt(2), abs=1e-6)
        assert float(decay[-1][1]) == pytest.approx(0.0, abs=1e-12)

    def test_missing_checkpoint(self, tmp_path, capsys):
        assert main(["analyze", *SMALL, "--checkpoint", str(tmp_path / "x.csv")]) == 2


class TestConfig:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv(OUTPUT_ENV, raising=False)
        cfg = load_config()
        assert cfg.k == 0.0 and cfg.mesh.n_surface == 8 and cfg.mesh.n_radial is None
        assert cfg.solver.tol == 1e-8 and cfg.solver.preconditioner == "jacobi"
        assert cfg.output_dir == Path("out")

    def test_relative_mesh_path(self, tmp_path, monkeypatch):
        monkeypatch.delenv(OUTPUT_ENV, raising=False)
        (tmp_path / "sub").mkdir()
        (tmp_path / "sub" / "c.ini").write_text("[mesh]\nsource = msh\npath = shell.msh\n")
        cfg = load_config(tmp_path / "sub" / "c.ini")
        assert cfg.mesh.path == tmp_path / "sub" / "shell.msh"

    @pytest.mark.parametrize("text", [
        "[problem]\nk = -1\n",
        "[problem]\nk = abc\n",
        "[mesh]\nsource = msh\n",
        "[mesh]\nsource = cad\n",
        "[solver]\npreconditioner = amg\n",
        "[analysis]\nplanes = xw:0\n",
        "[output]\nvtk = maybe\n",
    ])
    def test_invalid(self, tmp_path, text):
        (tmp_path / "c.ini").write_text(text)
        with pytest.raises(ConfigError):
            load_config(tmp_path / "c.ini")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "none.ini")

    def test_overrides(self, monkeypatch):
        monkeypatch.delenv(OUTPUT_ENV, raising=False)
        cfg = load_config(overrides={"n_surface": 4, "k": 2.5, "output_dir": Path("x"), "grading": None})
        assert cfg.mesh.n_surface == 4 and cfg.k == 2.5 and cfg.output_dir == Path("x")
        assert cfg.echo()["mesh"]["n_surface"] == 4


class TestFileIO:
    def test_points_csv(self, tmp_path):
        (tmp_path / "p.csv").write_text("x,y,z\n# comment\n1,2,3\n\n4.5, -1e-3, 0\n")
        np.testing.assert_array_equal(fileio.read_points_csv(tmp_path / "p.csv"), [[1, 2, 3], [4.5, -1e-3, 0]])

    def test_points_csv_errors(self, tmp_path):
        (tmp_path / "p.csv").write_text("1,2,3\na,b,c\n")
        with pytest.raises(ValueError, match="line 2"):
            fileio.read_points_csv(tmp_path / "p.csv")
        (tmp_path / "q.csv").write_text("1,2\n")
        with pytest.raises(ValueError, match="three"):
            fileio.read_points_csv(tmp_path / "q.csv")

    def test_vtk_degenerate_director(self, tmp_path):
        m = cubed_sphere_shell(2, 2)
        full = np.broadcast_to(Q_INF, (m.n_vertices, 3, 3)).copy()
        full[0] = 0.0  # isotropic: no director
        fileio.write_vtk(tmp_path / "f.vtk", m, full)
        lines = (tmp_path / "f.vtk").read_text().splitlines()
        i = lines.index("VECTORS director double") + 1
        assert lines[i] == "0.0 0.0 0.0"
        assert [abs(float(v)) for v in lines[i + 1].split()] == [0.0, 0.0, 1.0]

    def test_jsonl_sorted(self, tmp_path):
        fileio.write_jsonl(tmp_path / "a.jsonl", [{"b": 1, "a": 2.5}])
        assert (tmp_path / "a.jsonl").read_text() == '{"a": 2.5, "b": 1}\n'
