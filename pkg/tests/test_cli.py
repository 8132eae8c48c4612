import csv
import json
from pathlib import Path

import numpy as np
import pytest

from frontlab import cli
from frontlab.spectral_grid import PeriodicGrid

FAST = ["--ell", "12", "--modes", "32", "--dt", "1e-3", "--t-final", "0.05", "--save-every", "10"]


def run(*argv):
    return cli.parse_and_dispatch([str(a) for a in argv])


def _check_manifest(path):
    manifest = json.loads(Path(path).read_text())
    for entry in manifest["outputs"]:
        data = Path(entry["path"]).read_bytes()
        assert cli.fnv1a64(data) == entry["checksum"]
        assert data.decode().count("\n") - 1 == entry["row_count"] or entry["path"].endswith(".json")
    return manifest


def test_fnv_reference_values():
    assert cli.fnv1a64(b"") == "cbf29ce484222325"
    assert cli.fnv1a64(b"a") == "af63dc4c8601ec8c"
    assert cli.fnv1a64(b"foobar") == "85944171f73967e8"


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, -2.5e-300, 1e22):
        assert float(cli.fmt(x)) == x
    assert cli.fmt(-0.0) == "0"


def test_parse_ic_terms():
    grid = PeriodicGrid(12.0, 32)
    f = cli.parse_ic("cos:1:1.0,sin:2:-0.5", grid)
    arg = 2 * np.pi * grid.nodes / 12.0
    assert np.allclose(f.values, np.cos(arg) - 0.5 * np.sin(2 * arg))


@pytest.mark.parametrize("text, where", [("cos:1:1.0,tan:2:1", "position 10"),
                                         ("cos:11:1.0", "dealias"),
                                         ("cos:0:1.0", "position 0"),
                                         ("cos:1:1.0.0", "amplitude")])
def test_parse_ic_errors(text, where):
    with pytest.raises(cli.ValidationError, match=where):
        cli.parse_ic(text, PeriodicGrid(12.0, 32))


def test_parse_ic_file(tmp_path):
    grid = PeriodicGrid(12.0, 16)
    path = tmp_path / "ic.csv"
    np.savetxt(path, np.arange(16.0), delimiter=",")
    assert np.array_equal(cli.parse_ic(f"file:{path}", grid).values, np.arange(16.0))
    np.savetxt(path, np.arange(8.0), delimiter=",")
    with pytest.raises(cli.ValidationError):
        cli.parse_ic(f"file:{path}", grid)


def test_symbols(tmp_path):
    out = tmp_path / "sym.csv"
    assert run("symbols", "--eps", 0.5, "--fek-variant", "14", "--out", out) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 9
    assert float(rows[0]["b"]) == 1.0
    manifest = _check_manifest(f"{out}.manifest.json")
    assert manifest["fek_variant"] == "14"
    assert manifest["grid"] == {"ell0": 2 * np.pi, "n": 16}
    assert manifest["tool_version"]


def test_symbols_oracle_label(tmp_path):
    out = tmp_path / "sym.csv"
    assert run("symbols", "--eps", 0, "--out", out) == 0
    assert _check_manifest(f"{out}.manifest.json")["fek_variant"] == "oracle:skipped(eps=0)"
    assert run("symbols", "--eps", 0.5, "--modes", 8, "--out", out) == 0
    assert _check_manifest(f"{out}.manifest.json")["fek_variant"] == "oracle:14"


def test_oracle(tmp_path, capsys):
    out = tmp_path / "oracle.csv"
    assert run("oracle", "--eps", 0.5, "--modes", 8, "--out", out) == 0
    assert "winner=14" in capsys.readouterr().out
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["winner"] == "both"  # lambda = 0 cannot tell the variants apart
    assert {r["winner"] for r in rows[1:]} == {"14"}
    assert run("oracle", "--eps", 0, "--out", out) == 1


def test_solve_ks(tmp_path):
    assert run("solve-ks", *FAST, "--out", tmp_path) == 0
    manifest = _check_manifest(tmp_path / "solve-ks.manifest.json")
    assert manifest["scheme"] == "etdrk4" and manifest["dt"] == 1e-3
    snaps = list(csv.reader((tmp_path / "snapshots.csv").open()))
    assert len(snaps[0]) == 33 and len(snaps) == 7


def test_solve_front_writes_remainder(tmp_path):
    assert run("solve-front", "--eps", 0.02, "--fek-variant", "14", *FAST, "--out", tmp_path) == 0
    manifest = _check_manifest(tmp_path / "solve-front.manifest.json")
    names = sorted(Path(e["path"]).name for e in manifest["outputs"])
    assert names == ["norms.csv", "remainder.csv", "snapshots.csv"]
    header = (tmp_path / "norms.csv").read_text().splitlines()[0]
    assert header.startswith("eps,")


def test_solve_front_eps_zero_matches_ks(tmp_path):
    assert run("solve-ks", *FAST, "--out", tmp_path / "a") == 0
    assert run("solve-front", "--eps", 0, *FAST, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a/snapshots.csv").read_bytes() == (tmp_path / "b/snapshots.csv").read_bytes()


def test_converge(tmp_path, capsys):
    assert run("converge", *FAST, "--fek-variant", "14", "--eps-list", "0.04,0.02", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "converge.json").read_text())
    assert set(summary) == {"ell0", "T", "n", "dt", "order", "M_estimate", "failed"}
    assert "order=" in capsys.readouterr().out
    _check_manifest(tmp_path / "converge.manifest.json")


def test_converge_rejects_increasing_list(tmp_path):
    assert run("converge", *FAST, "--fek-variant", "14", "--eps-list", "0.01,0.02", "--out", tmp_path) == 1


def test_energy_and_ansatz(tmp_path, capsys):
    assert run("energy", *FAST, "--fek-variant", "14", "--eps-list", "0.02,0.01", "--out", tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "energy.csv").open()))
    assert [float(r["eps"]) for r in rows] == [0.02, 0.01]
    assert run("energy", *FAST, "--eps-list", "0", "--out", tmp_path) == 1
    assert run("ansatz", "--out", tmp_path) == 0
    rows = dict(csv.reader((tmp_path / "ansatz.csv").open()))
    assert float(rows["zeroth_interior_symbolic"]) <= 1e-12
    assert run("ansatz", "--psi-tau", "zero", "--out", tmp_path) == 0
    assert float(capsys.readouterr().out.strip().splitlines()[-1].split("=")[1]) > 1


def test_threshold(capsys):
    assert run("threshold", "--eps", 0) == 0
    value = float(capsys.readouterr().out.strip().split("=")[1])
    assert value == pytest.approx(2 * np.pi * np.sqrt(3), rel=1e-10)


def test_exit_codes(tmp_path):
    assert run("bogus") == 1
    assert run("symbols", "--eps", 0.7, "--out", tmp_path / "x.csv") == 1
    assert run("solve-ks", "--modes", 7, "--out", tmp_path) == 1
    assert run("solve-ks", "--dt", -1, "--out", tmp_path) == 1
    assert run("--version") == 0


def test_blow_up_exit_code(tmp_path, monkeypatch):
    def explode(*a, **k):
        raise cli.ks_solver.BlowUpError(0.5, None)
    monkeypatch.setattr(cli.ks_solver, "solve_ks", explode)
    assert run("solve-ks", *FAST, "--out", tmp_path) == 2


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# quick run\nell = 12\nmodes = 32\ndt = 1e-3\nt_final = 0.05\nsave_every = 50\neps = 0.02\n"
                   "fek_variant = 14\n")
    assert run("solve-front", "--config", cfg, "--modes", 16, "--out", tmp_path / "o") == 0
    manifest = json.loads((tmp_path / "o/solve-front.manifest.json").read_text())
    assert manifest["grid"]["n"] == 16
    assert manifest["parameters"]["eps"] == 0.02
    cfg.write_text("nonsense = 1\n")
    assert run("solve-ks", "--config", cfg, "--out", tmp_path) == 1


def test_outputs_are_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("solve-front", "--eps", 0.02, "--fek-variant", "14", *FAST, "--out", tmp_path / name) == 0
    for fname in ("snapshots.csv", "norms.csv", "remainder.csv"):
        assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()
