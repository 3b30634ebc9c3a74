import io
import json

import numpy as np
import pytest

from minconvex import __version__
from minconvex.cli import build_parser, default_workers, dispatch, load_point_set, UsageError


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = dispatch(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def report(argv):
    code, out, err = run(argv)
    assert code == 0, err
    return json.loads(out)


@pytest.fixture
def circle_set(tmp_path, unit_circle):
    p = tmp_path / "circle.json"
    p.write_text(json.dumps({"dim": 3, "points": unit_circle.tolist()}))
    return str(p)


FAST = [
    ["check-psh", "--field", "x1^2+x2^2", "--p", "2", "--samples", "50"],
    ["check-domain", "--domain", "ball:1", "--p", "2", "--samples", "20"],
    ["mdisc", "--field", "x1^2+x2^2+x3^2", "--point", "1,0,0", "--radius", "0.05", "--steps", "10", "--rays", "8"],
    ["tau", "--a", "1,2,3", "--c0", "1", "--mu", "1.5", "--validate", "2000", "--p-samples", "500"],
    ["mse", "--r0", "2", "--r1", "8", "--grid", "16x64"],
    ["konti", "--count", "8", "--coverage", "100"],
]


@pytest.mark.parametrize("argv", FAST, ids=lambda a: a[0])
def test_report_keys(argv):
    rep = report(argv + ["--reproducible"])
    assert set(rep) == {"tool", "version", "command", "check", "config", "result"}
    assert rep["tool"] == "minconvex" and rep["version"] == __version__
    assert rep["command"] == argv[0]


def test_wall_time_by_default():
    rep = report(FAST[0])
    assert rep["wall_time"] >= 0


@pytest.mark.parametrize("argv", FAST[2:5], ids=lambda a: a[0])
def test_reproducible_is_byte_identical(argv):
    a = run(argv + ["--reproducible"])
    b = run(argv + ["--reproducible"])
    assert a[0] == 0 and a[1] == b[1]


def test_report_file(tmp_path):
    path = tmp_path / "rep.json"
    code, out, _ = run(FAST[0] + ["--reproducible", "--report", str(path)])
    assert code == 0
    assert path.read_text() == out


@pytest.mark.parametrize("argv, message", [
    (["bogus"], "invalid choice"),
    ([], ""),
    (["mse", "--r0", "8", "--r1", "2"], "r0 < r1"),
    (["mse", "--r0", "2"], "--r1"),
    (["mse", "--r0", "2", "--r1", "8", "--grid", "big"], "grid"),
    (["mse", "sweep", "--r0", "2"], "--R"),
    (["check-psh", "--field", "x1^2"], "--p"),
    (["check-psh", "--field", "x1^^2", "--p", "2"], ""),
    (["mdisc", "--field", "x1^2", "--point", "1,0"], "3 numbers"),
    (["hull", "--set", "missing.json", "--query", "0,0,0"], "not found"),
    (["konti", "--family", "sphere"], "unknown family"),
    (["maxdist", "--domain", "ball:1", "--surface", "torus"], "unknown surface"),
])
def test_usage_errors_exit_1(argv, message):
    code, out, err = run(argv)
    assert code == 1
    assert out == ""
    assert message in err


def test_coarse_grid_exit_1():
    code, _, err = run(["mse", "--r0", "2", "--r1", "8", "--grid", "4x8"])
    assert code == 1 and "GridTooCoarse" in err


@pytest.mark.parametrize("argv", [
    ["check-psh", "--field", "log(x1)", "--p", "2", "--samples", "50"],
    ["konti", "--family", "bulge:0.5,2", "--count", "5"],
])
def test_numerical_failure_exit_2(argv):
    code, out, err = run(argv)
    if code == 0:
        # a sweep that finds a violation reports it rather than failing
        assert json.loads(out)["result"]["passed"] is False
    else:
        assert code == 2 and "numerical failure" in err


def test_log_field_is_a_numerical_failure():
    code, _, err = run(["check-psh", "--field", "log(x1)", "--p", "2", "--samples", "50"])
    assert code == 2 and "SampleEvaluationError" in err


def test_negative_field_needs_equals():
    rep = report(["check-psh", "--field=-x1^2", "--p", "1", "--samples", "20", "--reproducible"])
    assert rep["result"]["result"] == "fails"


def test_hull_outside_by_lp(circle_set):
    rep = report(["hull", "--set", circle_set, "--query", "2,0,0", "--reproducible"])
    assert rep["result"]["status"] == "OUTSIDE"
    assert rep["result"]["route"] == "lp"
    assert rep["check"] == "minimal-hull"


def test_hull_inside(circle_set):
    rep = report(["hull", "--set", circle_set, "--query", "0,0,0", "--reproducible"])
    assert rep["result"]["status"] == "INSIDE"
    assert rep["result"]["witness"]["functional"] < 1e-6


def test_hull_query_required(circle_set):
    code, _, err = run(["hull", "--set", circle_set])
    assert code == 1 and "--query" in err


def test_hull_sweep_csv(circle_set, tmp_path):
    csv_path = tmp_path / "sweep.csv"
    rep = report(["hull", "--set", circle_set, "--sweep", "3", "--plane", "xy", "--extent", "2",
                  "--budget", "200", "--degree", "1", "--starts", "2", "--out", str(csv_path)])
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "x,y,z,status" and len(lines) == 10
    assert sum(rep["result"]["sweep"]["counts"].values()) == 9


def test_mse_csv_and_obj(tmp_path):
    csv_path, obj_path = tmp_path / "u.csv", tmp_path / "u.obj"
    rep = report(["mse", "--r0", "2", "--r1", "8", "--grid", "16x64", "--out", str(csv_path),
                  "--emit-obj", str(obj_path)])
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "r,theta,u"
    assert len(lines) - 1 == rep["result"]["csv"]["rows"]
    obj = obj_path.read_text().splitlines()
    assert sum(l.startswith("v ") for l in obj) == rep["result"]["obj"]["vertices"]
    assert sum(l.startswith("f ") for l in obj) == rep["result"]["obj"]["faces"]


ACOSH = "log(x1+sqrt(x1^2-1))"


def test_mse_reference_comparison():
    # outer data is raised by delta, so the solution lies between v and v + delta
    rep = report(["mse", "--r0", "2", "--r1", "8", "--grid", "64x256", "--inner", ACOSH.replace("x1", "2"),
                  "--outer", ACOSH.replace("x1", "8") + "+0.05", "--reference", ACOSH, "--delta", "0.05"])
    cmp = rep["result"]["comparison"]
    assert cmp["holds"] and cmp["witness"] is None


def test_mdisc_csv(tmp_path):
    csv_path = tmp_path / "disc.csv"
    rep = report(FAST[2] + ["--out", str(csv_path)])
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("zeta_re,zeta_im,alpha1")
    assert len(lines) - 1 == rep["result"]["csv"]["rows"]


def test_tau_outputs(tmp_path):
    h_csv, rep_json = tmp_path / "h.csv", tmp_path / "tau.json"
    rep = report(FAST[3] + ["--out", f"{h_csv},{rep_json}"])
    assert h_csv.read_text().splitlines()[0] == "t,h,dh,d2h"
    assert json.loads(rep_json.read_text()) == rep["result"]["tau"]


def test_check_domain_obj(tmp_path):
    obj_path = tmp_path / "ball.obj"
    rep = report(["check-domain", "--domain", "ball:1", "--p", "2", "--samples", "20", "--emit-obj", str(obj_path)])
    assert rep["result"]["obj"]["vertices"] > 0
    assert obj_path.exists()


def test_null_hull_query(tmp_path):
    from minconvex.hulls import null_line_seed

    K = null_line_seed(np.zeros(3), 0.3 + 0.1j, 1.0).boundary(256)
    p = tmp_path / "null.json"
    p.write_text(json.dumps({"dim": 3, "points": [[[z.real, z.imag] for z in row] for row in K]}))
    rep = report(["hull", "--kind", "null", "--set", str(p), "--query", "0,0,2", "--reproducible"])
    assert rep["check"] == "null-hull" and rep["result"]["status"] == "OUTSIDE"


@pytest.mark.parametrize("doc", [
    {"points": [[0, 0, 0]]},
    {"dim": 3, "points": []},
    {"dim": 3, "points": [[0, 0]]},
    {"dim": 3, "points": [["a", 0, 0]]},
    {"dim": 3, "points": [[[0, 1], [0, 0], [0, 0]]]},
])
def test_load_point_set_rejects(tmp_path, doc):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(UsageError):
        load_point_set(str(p))


def test_load_point_set_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    with pytest.raises(UsageError):
        load_point_set(str(p))


@pytest.mark.parametrize("env, expected", [(None, 1), ("4", 4), ("0", 1), ("many", 1)])
def test_workers_default(monkeypatch, env, expected):
    if env is None:
        monkeypatch.delenv("MINCONVEX_WORKERS", raising=False)
    else:
        monkeypatch.setenv("MINCONVEX_WORKERS", env)
    assert default_workers() == expected
    args = build_parser().parse_args(["mse", "--r0", "2", "--r1", "8"])
    assert args.workers == expected


def test_version_flag(capsys):
    assert dispatch(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
