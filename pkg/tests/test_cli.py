import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from swidel.cli import main

EX1 = {"plant": {"A": [[0, 2], [2, 0]], "B": [[0], [1]]}, "delays": [0, 1],
       "controller": {"type": "none"}, "x0": [1, 0]}
DEADBEAT = {"plant": {"A": [[2]], "B": [[1]]}, "delays": [0, 1],
            "controller": {"type": "delay_dependent", "gains": {"0": [[-2, -1]], "1": [[-4, -2]]}},
            "x0": [1]}


def ex2(a, k1=0.0, k2=0.0):
    return {"controller": {"type": "example2", "a": a, "b": 1, "k1": k1, "k2": k2}}


def write(tmp_path, data, name="inst.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(p)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_build_gadget(tmp_path, capsys):
    inst = {"controller": {"type": "hardness_gadget", "A1": [[1, 2], [0, 1]], "A2": [[0, 1], [3, 1]]}}
    code, out, _ = run(capsys, "build", write(tmp_path, inst))
    assert code == 0
    rep = json.loads(out)
    assert rep["dim"] == 4
    M0, M1 = np.array(rep["matrices"]["0"]), np.array(rep["matrices"]["1"])
    Z, I = np.zeros((2, 2)), np.eye(2)
    assert np.array_equal(M0, np.block([[np.array([[1, 2], [0, 1]]), Z], [Z, Z]]))
    assert np.array_equal(M1, np.block([[Z, I], [np.array([[0, 1], [3, 1]]), Z]]))


def test_build_zero_controller_repeats_base(tmp_path, capsys):
    code, out, _ = run(capsys, "build", write(tmp_path, EX1))
    rep = json.loads(out)
    assert code == 0 and rep["matrices"]["0"] == rep["matrices"]["1"]
    assert [b["name"] for b in rep["layout"]] == ["x", "u_1"]


def test_build_example2(tmp_path, capsys):
    code, out, _ = run(capsys, "build", write(tmp_path, ex2(1.1, 0, -0.5)))
    rep = json.loads(out)
    assert np.allclose(rep["matrices"]["0"], [[0, 1, 0], [0, 0.6, 1], [0, 0, 0]])
    assert np.allclose(rep["matrices"]["1"], [[0, 1, 0], [0, 1.1, 1], [0, -0.5, 0]])


def test_build_writes_out_file(tmp_path, capsys):
    out_path = tmp_path / "sys.json"
    code, out, _ = run(capsys, "build", write(tmp_path, EX1), "--out", out_path)
    assert code == 0 and out == ""
    assert json.loads(out_path.read_text())["dim"] == 3


def test_simulate_cross_coupled_doubling(tmp_path, capsys):
    code, out, err = run(capsys, "simulate", write(tmp_path, EX1), "--signal", "periodic:0,1",
                         "--horizon", 10)
    assert code == 0
    table = rows(out)
    assert len(table) == 11
    assert [float(r["x_1"]) for r in table[::2]] == [2.0 ** t for t in range(0, 11, 2)]
    assert table[-1]["sigma"] == ""
    assert "final_norm=1024.0" in err and "diverged=false" in err


def test_simulate_deadbeat_random(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", write(tmp_path, DEADBEAT), "--signal", "random:seed=1",
                       "--horizon", 10)
    assert code == 0
    for r in rows(out)[2:]:
        assert abs(float(r["x_1"])) < 1e-12


def test_simulate_one_step_and_out_file(tmp_path, capsys):
    target = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate", write(tmp_path, EX1), "--signal", "const:1",
                       "--horizon", 1, "--out", target)
    assert code == 0 and out.startswith("final_norm=")
    assert len(rows(target.read_text())) == 2


def test_simulate_example2_and_explicit_state(tmp_path, capsys):
    inst = dict(ex2(3.5), w0=[0, 1, 0])
    code, out, err = run(capsys, "simulate", write(tmp_path, inst), "--signal", "const:1",
                         "--horizon", 30)
    assert code == 0
    assert list(rows(out)[0]) == ["t", "sigma", "x_prev", "x", "u_1", "norm"]
    assert "diverged=true" in err


def test_simulate_extended_initial_state(tmp_path, capsys):
    inst = dict(DEADBEAT, controller={"type": "none"}, w0=[0.0, 1.0])  # a command in flight
    code, out, _ = run(capsys, "simulate", write(tmp_path, inst), "--signal", "const:0", "--horizon", 3)
    table = rows(out)
    assert float(table[0]["u_1_1"]) == 1.0 and float(table[1]["x_1"]) == 1.0


def test_simulate_errors(tmp_path, capsys):
    path = write(tmp_path, EX1)
    code, _, err = run(capsys, "simulate", path, "--signal", "bogus", "--horizon", 3)
    assert code == 2 and "unknown signal" in err
    code, _, err = run(capsys, "simulate", path, "--horizon", 3)
    assert code == 2 and "signal" in err
    with pytest.raises(SystemExit) as exc:
        main(["simulate", path, "--signal", "const:0", "--horizon", "0"])
    assert exc.value.code == 2


@pytest.mark.parametrize("inst,verdict,code", [
    (ex2(1.1, 0, -0.5), "Stable", 0),
    (ex2(3.5, 0.3, -1.0), "Unstable", 3),
    ({"matrices": {"0": [[1, 0], [0, 1]]}}, "Undetermined", 4),
])
def test_jsr_exit_codes(tmp_path, capsys, inst, verdict, code):
    got, out, _ = run(capsys, "jsr", write(tmp_path, inst))
    rep = json.loads(out)
    assert got == code and rep["verdict"] == verdict
    assert {"lower", "upper", "witness", "converged", "verdict"} <= set(rep)
    if verdict == "Undetermined":
        assert rep["lower"] == rep["upper"] == 1.0


def test_jsr_rejects_nonpositive_eps(tmp_path):
    for eps in ["0", "-1e-3"]:
        with pytest.raises(SystemExit) as exc:
            main(["jsr", write(tmp_path, EX1), "--eps", eps])
        assert exc.value.code == 2


def test_decide_exit_codes(tmp_path, capsys):
    code, out, _ = run(capsys, "decide", write(tmp_path, {"matrices": {"0": [[0.5]]}}))
    assert code == 0 and json.loads(out)["growth"] == "UpperCertified"
    code, out, _ = run(capsys, "decide", write(tmp_path, ex2(3.5)), "--rate", 1)
    assert code == 3 and json.loads(out)["growth"] == "LowerCertified"
    pair = {"matrices": {"0": [[0, 1], [0, 0]], "1": [[0, 0], [1, 0]]}}
    code, out, _ = run(capsys, "decide", write(tmp_path, pair), "--rate", 0.5, "--budget", 2)
    assert code == 4 and json.loads(out)["growth"] == "Bracket"


def test_build_round_trip_is_bit_identical(tmp_path, capsys):
    src = write(tmp_path, ex2(2.0, 0.4, -1.5))
    built = tmp_path / "built.json"
    run(capsys, "build", src, "--out", built)
    _, a, _ = run(capsys, "jsr", src, "--deterministic", "--eps", "1e-4")
    _, b, _ = run(capsys, "jsr", built, "--deterministic", "--eps", "1e-4")
    assert json.loads(a) == json.loads(b)


def test_design_deadbeat(tmp_path, capsys):
    inst = {"plant": {"A": [[2]], "B": [[1]]}, "delays": [0, 1]}
    code, out, _ = run(capsys, "design", write(tmp_path, inst), "deadbeat")
    rep = json.loads(out)
    assert code == 0
    assert rep["gains"] == {"0": [[-2.0, -1.0]], "1": [[-4.0, -2.0]]}
    assert rep["settle_time"] == 2 and rep["certificate"]["verdict"] == "Stable"
    bad = {"plant": {"A": [[0]], "B": [[1]]}, "delays": [0, 1]}
    code, _, err = run(capsys, "design", write(tmp_path, bad), "deadbeat")
    assert code == 2 and "a != 0" in err
    code, _, err = run(capsys, "design", write(tmp_path, EX1), "deadbeat")
    assert code == 2 and "scalar" in err


def test_design_search_example2_regimes(tmp_path, capsys):
    grid = ["--k1=-1:1:11", "--k2=-2:0:21"]
    results = {}
    for a in (0.5, 1.1, 2.0, 4.0):
        inst = {"controller": {"type": "example2", "a": a, "b": 1}}
        code, out, _ = run(capsys, "design", write(tmp_path, inst), "search", *grid, "--deterministic")
        results[a] = (code, json.loads(out))
    # contracting plant: doing nothing already works
    code, rep = results[0.5]
    assert code == 0 and rep["found"]
    # mildly unstable: a memoryless gain suffices
    inst = {"controller": {"type": "example2", "a": 1.1, "b": 1}}
    code, out, _ = run(capsys, "design", write(tmp_path, inst), "search", "--k1", "0", "--k2=-1:0:11")
    assert code == 0 and json.loads(out)["controller"]["k1"] == 0.0
    # a = 2: only gains using the stored state stabilise
    code, rep = results[2.0]
    assert code == 0 and rep["found"] and rep["controller"]["k1"] != 0.0
    inst = {"controller": {"type": "example2", "a": 2.0, "b": 1}}
    code, out, _ = run(capsys, "design", write(tmp_path, inst), "search", "--k1", "0", "--k2=-2:0:21")
    assert code == 4 and not json.loads(out)["found"]
    # a > 3: no gain can work
    code, rep = results[4.0]
    assert code == 3 and not rep["found"] and rep["infeasible_bound"] > 1


def test_design_search_general_gain(tmp_path, capsys):
    inst = {"plant": {"A": [[1.2]], "B": [[1]]}, "delays": [0, 1]}
    code, out, _ = run(capsys, "design", write(tmp_path, inst), "search", "--random", 30,
                       "--seed", 4, "--deterministic")
    rep = json.loads(out)
    assert code in (0, 4) and rep["candidates"] == 30
    assert np.array(rep["controller"]["K"]).shape == (1, 2)


@pytest.mark.parametrize("inst,field", [
    ("{not json", "invalid JSON"),
    ({"plant": {"A": [[1, 0]], "B": [[1]]}, "delays": [0]}, "plant"),
    ({"plant": {"A": [[1]], "B": [[1]]}, "delays": [0, -1]}, "delays"),
    ({"plant": {"A": [[1]], "B": [[1]]}, "delays": [0, 1],
      "controller": {"type": "delay_dependent", "gains": {"0": [[1, 2]]}}}, "controller.gains"),
    ({"plant": {"A": [[1]], "B": [[1]]}, "delays": [0, 1],
      "controller": {"type": "delay_independent", "K": [[1, 2, 3]]}}, "controller.K"),
    ({"plant": {"A": [[1]], "B": [[1]]}, "delays": [0], "controller": {"type": "pid"}}, "controller.type"),
    ({"plant": {"A": [[1]], "B": [[1]]}, "delays": [0], "x0": [1, 2]}, "x0"),
    ({"controller": {"type": "example2", "b": 1}}, "controller.a"),
    ({"matrices": {"0": [[1, 2]]}}, "matrices"),
])
def test_parse_errors_name_the_field(tmp_path, capsys, inst, field):
    code, out, err = run(capsys, "build", write(tmp_path, inst))
    assert code == 2 and out == ""
    assert field in err


def test_missing_file(capsys):
    code, _, err = run(capsys, "jsr", "/nonexistent/instance.json")
    assert code == 2 and "cannot read" in err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "swidel", "jsr", write(tmp_path, ex2(3.5))],
                          capture_output=True, text=True)
    assert proc.returncode == 3
    assert json.loads(proc.stdout)["verdict"] == "Unstable"
