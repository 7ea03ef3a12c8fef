import json
import math
import subprocess
import sys

import numpy as np

from laguerre_limits.cli import main
from laguerre_limits.geometry import Box
from laguerre_limits.sampling import PointConfiguration, read_points_csv, write_points_csv
from laguerre_limits.tessellation import complex_to_json, laguerre_diagram, read_complex_json


def ini(path, text):
    path.write_text(text)
    return str(path)


def run(argv, capsys=None):
    code = main(argv)
    out = capsys.readouterr() if capsys is not None else None
    return code, out


def points(path, rows):
    a = np.asarray(rows, float).reshape(-1, 3)
    write_points_csv(PointConfiguration(a[:, :2], a[:, 2]), str(path))


def test_sample_beta(tmp_path):
    cfg = ini(tmp_path / "run.ini", "[sample]\ndensity = beta\nbeta = 0.5\nx1 = 10\ny1 = 10\nh_lo = 0\nh_hi = 25\nseed = 7\n")
    out = tmp_path / "out"
    assert main(["sample", "--config", cfg, "--out", str(out)]) == 0
    c = read_points_csv(str(out / "points.csv"))
    # mass = 100 * c_{3,0.5} / 1.5 * 25^1.5
    mean = 100 * (2.5 * 1.5 / math.pi ** 2) / 1.5 * 25 ** 1.5
    assert abs(len(c) - mean) < 4 * math.sqrt(mean)
    assert c.h.min() >= 0 and c.h.max() <= 25
    assert main(["sample", "--config", cfg, "--out", str(out)]) == 2
    first = (out / "points.csv").read_bytes()
    assert main(["sample", "--config", cfg, "--out", str(out), "--force"]) == 0
    assert (out / "points.csv").read_bytes() == first
    assert main(["sample", "--config", cfg, "--out", str(out), "--force", "--seed", "8"]) == 0
    assert (out / "points.csv").read_bytes() != first


def test_sample_empty_region(tmp_path):
    cfg = ini(tmp_path / "run.ini", "[sample]\ndensity = beta\nbeta = 0.5\nh_lo = -3\nh_hi = -1\n")
    assert main(["sample", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "points.csv").read_text() == "id,x,y,h\n"


def test_sample_invalid_density(tmp_path):
    cfg = ini(tmp_path / "run.ini", "[sample]\ndensity = beta\nbeta = -1.5\nh_lo = 0\nh_hi = 1\n")
    assert main(["sample", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_malformed_config(tmp_path):
    assert main(["sample", "--config", ini(tmp_path / "a.ini", "[sample]\nbogus = 1\n")]) == 2
    assert main(["sample", "--config", ini(tmp_path / "b.ini", "this is not ini\n")]) == 2
    assert main(["sample", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["nope"]) == 2


def test_tessellate_examples(tmp_path):
    points(tmp_path / "three.csv", [[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    cfg = ini(tmp_path / "t.ini", "[tessellate]\npoints = three.csv\n")
    assert main(["tessellate", "--config", cfg, "--out", str(tmp_path / "a"), "--svg"]) == 0
    data = json.loads((tmp_path / "a" / "complex.json").read_text())
    assert len(data["simplices"]) == 1
    assert (tmp_path / "a" / "complex.svg").exists()

    points(tmp_path / "buried.csv", [[0, 0, 0], [2, 0, 0], [2.2, 2, 0], [0, 1.9, 0], [1, 1, 5]])
    cfg = ini(tmp_path / "b.ini", "[tessellate]\npoints = buried.csv\n")
    assert main(["tessellate", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert len(json.loads((tmp_path / "b" / "complex.json").read_text())["simplices"]) == 2

    points(tmp_path / "line.csv", [[0, 0, 0], [1, 1, 1], [2, 2, 0]])
    cfg = ini(tmp_path / "c.ini", "[tessellate]\npoints = line.csv\n")
    assert main(["tessellate", "--config", cfg, "--out", str(tmp_path / "c")]) == 2


def test_round_trip_sample_tessellate(tmp_path):
    cfg = ini(
        tmp_path / "run.ini",
        "[sample]\ndensity = beta\nbeta = 0\nx1 = 4\ny1 = 4\nh_lo = 0\nh_hi = 4\nseed = 3\n"
        "[tessellate]\npoints = points.csv\nframe = 0 0 4 4\n"
        "[render]\ncomplex = complex.json\nskeleton_radius = 1\n",
    )
    assert main(["sample", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert main(["tessellate", "--config", cfg, "--out", str(tmp_path)]) == 0
    mem = laguerre_diagram(read_points_csv(str(tmp_path / "points.csv")), Box(0, 0, 4, 4))
    assert complex_to_json(read_complex_json(str(tmp_path / "complex.json"))) == complex_to_json(mem)
    first = (tmp_path / "complex.json").read_bytes()
    assert main(["tessellate", "--config", cfg, "--out", str(tmp_path), "--force"]) == 0
    assert (tmp_path / "complex.json").read_bytes() == first
    assert main(["render", "--config", cfg, "--out", str(tmp_path)]) == 0
    svg = (tmp_path / "render.svg").read_bytes()
    assert main(["render", "--config", cfg, "--out", str(tmp_path), "--force"]) == 0
    assert (tmp_path / "render.svg").read_bytes() == svg


def test_certify(tmp_path, capsys):
    rng = np.random.default_rng(0)
    xy = rng.uniform(-6, 6, (720, 2))
    points(tmp_path / "dense.csv", np.column_stack([xy, np.zeros(len(xy))]))
    cfg = ini(tmp_path / "a.ini", "[certify]\npoints = dense.csv\nR = 1\nr = 1\n")
    assert main(["certify", "--config", cfg]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res == {"E": True, "Hmax": True, "Hmin": True, "certified": True}

    holed = xy[np.hypot(xy[:, 0], xy[:, 1]) > 3.5]
    points(tmp_path / "holed.csv", np.column_stack([holed, np.zeros(len(holed))]))
    cfg = ini(tmp_path / "b.ini", "[certify]\npoints = holed.csv\nR = 1\nr = 1\n")
    assert main(["certify", "--config", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["certified"] is False

    points(tmp_path / "far.csv", [[50, 0, 0]])
    cfg = ini(tmp_path / "c.ini", "[certify]\npoints = far.csv\nt = 0\n")
    assert main(["certify", "--config", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["Hmin"] is True

    points(tmp_path / "empty.csv", [])
    cfg = ini(tmp_path / "d.ini", "[certify]\npoints = empty.csv\n")
    assert main(["certify", "--config", cfg]) == 2


def test_experiment(tmp_path):
    cfg = ini(tmp_path / "e.ini", "[experiment]\nscenario = nope\n")
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path)]) == 2
    cfg = ini(
        tmp_path / "c.ini",
        "[experiment]\nscenario = constant\nreplicates = 3\nintensity_replicates = 2\nn_grid = 1 2\nwindow = 3\nseed = 5\n",
    )
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "x")]) == 0
    rows = (tmp_path / "x" / "coincidence.csv").read_text().splitlines()[1:]
    assert [float(r.split(",")[5]) for r in rows] == [1.0, 1.0]
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "y"), "--workers", "2"]) == 0
    for name in ("coincidence.csv", "envelope.csv", "intensities.csv", "report.json"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "laguerre_limits", "sample", "--config", str(tmp_path / "none.ini")], capture_output=True)
    assert proc.returncode == 2
