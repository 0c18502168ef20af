import json

from vvof.cases import CASE_NAMES
from vvof.cli import main


def test_list(capsys):
    assert main(["list"]) == 0
    assert capsys.readouterr().out.split() == list(CASE_NAMES)


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["case", "nope"]) == 1
    assert main(["case", "zalesak", "--grid", "2"]) == 1
    assert main(["convergence", "ellipsoid"]) == 1
    assert "error" in capsys.readouterr().err


def test_bad_config_exits_1(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"case": "zalesak", "grid": [32, 32], "colour": "red"}))
    assert main(["run", str(p)]) == 1
    assert "$.colour" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "absent.json")]) == 1


def _custom(tmp_path, dt):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({
        "case": "custom", "extent": [1.0, 1.0], "grid": 24, "dt": dt, "t_final": 4 * dt,
        "shapes": [{"kind": "disc", "center": [0.5, 0.5], "r": 0.2}],
        "motion": {"kind": "curvature"}, "outputs": {"snapshots": [0.0]},
    }))
    return p


def test_runtime_abort_exits_2(tmp_path):
    assert main(["run", str(_custom(tmp_path, 0.01)), "--out", str(tmp_path / "o")]) == 2


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(_custom(tmp_path, 1e-4)), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["custom_0000000.vtk", "custom_0000000_contour.csv", "custom_diagnostics.csv"]


def test_case_with_paper_step_is_reproducible(tmp_path, capsys):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["case", "zalesak", "--grid", "32", "--dt", "0.001", "--out", str(out)]) == 0
    assert "1000 steps" in capsys.readouterr().out
    files = sorted(p.name for p in outs[0].iterdir())
    assert "zalesak_diagnostics.csv" in files and "zalesak_0001000.vtk" in files
    for name in files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_convergence_table(capsys):
    assert main(["convergence", "zalesak", "--grids", "16,32"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0].split() == ["N", "dt", "L1", "order"]
    assert [r.split()[0] for r in rows[1:]] == ["16", "32"]
    assert rows[1].split()[3] == "nan" and float(rows[2].split()[3]) > 0
