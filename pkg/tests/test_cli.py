import io
import json
import os
import subprocess
import sys

import pytest

from hypersc.cli import SCHEMA, dumps, render_text, run, to_jsonable


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


def report(*argv):
    code, text = call(*argv)
    return code, json.loads(text)


@pytest.fixture
def tree_file(tmp_path):
    doc = {"vertices": ["a", "b", "c", "d"], "edges": [["a", "b", 1], ["b", "c", 2], ["b", "d", "1/2"]]}
    p = tmp_path / "tree.json"
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture
def cycle_file(tmp_path):
    doc = {"vertices": list(range(12)), "edges": [[i, (i + 1) % 12, 1] for i in range(12)]}
    p = tmp_path / "c12.json"
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture
def presentation(tmp_path):
    def make(text):
        p = tmp_path / "pres.txt"
        p.write_text(text)
        return str(p)

    return make


def test_report_envelope(tree_file):
    code, r = report("delta", tree_file)
    assert code == 0
    assert r["schema"] == SCHEMA and r["status"] == "ok" and r["command"] == "delta"
    assert set(r) >= {"version", "inputs", "results", "warnings", "certified"}
    assert len(r["inputs"]["digest"]) == 64
    assert r["results"]["delta_four_point"] in (0, "0")


def test_exact_lengths_serialise_as_fractions(tree_file):
    code, r = report("gromov", tree_file, "a", "c", "d", "--exact")
    assert code == 0 and r["results"]["product"] == "1/2"


def test_check_failure_exit_one(presentation):
    code, r = report("sc-check", presentation("ab\naaabbb\n"), "--lambda", "1/6")
    assert code == 1 and r["status"] == "check-failed"
    code, r = report("sc-check", presentation("ab\naaabbb\n"), "--lambda", "1/2")
    assert code == 0


def test_input_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, r = report("delta", str(bad))
    assert code == 2 and r["status"] == "input-error" and r["error"]["code"] == "malformed"
    assert "hypersc:" in capsys.readouterr().err
    assert report("no-such-command")[0] == 2
    assert report("delta", str(tmp_path / "missing.json"))[0] == 2
    assert report()[0] == 2


def test_json_is_byte_identical(cycle_file):
    args = ("coneoff", cycle_file, "--delta", "--levels", "1")
    assert call(*args) == call(*args)
    assert call("rotation", "--model", "prism") == call("rotation", "--model", "prism")


def test_text_format(tree_file):
    code, text = call("delta", tree_file, "--format", "text")
    assert code == 0
    assert "status = \"ok\"" in text
    assert any(line.startswith("results.delta_four_point") for line in text.splitlines())


def test_digest_changes_with_input(tree_file, cycle_file):
    a = report("delta", tree_file)[1]["inputs"]["digest"]
    b = report("delta", cycle_file)[1]["inputs"]["digest"]
    assert a != b


def test_cone_plot(tmp_path):
    code, r = report("cone", "--rho", "2", "--grid", "500", "--levels", "2", "--plot-dir", str(tmp_path))
    assert code == 0
    figs = r["results"]["figures"]
    assert figs and all(os.path.getsize(f) > 0 for f in figs)


def test_cartan_hadamard_plot(tmp_path, cycle_file):
    code, r = report("cartan-hadamard", cycle_file, "--sigma", "3", "--plot-dir", str(tmp_path))
    assert code in (0, 1)
    assert os.path.isfile(tmp_path / "local_delta.png")


@pytest.mark.parametrize(
    "argv",
    [
        ("axes", "--word", "ab,aB"),
        ("invariant-a", "--word", "ab", "--word", "aB", "--delta", "1/100"),
        ("burnside-params", "--rho0", "1", "--delta0", "1", "--Delta0", "1", "--bold-delta", "1e-12"),
        ("gm-bounds", "--rho", "10", "--T", "100", "--distance", "10"),
        ("rotation", "--model", "torus", "--check", "axioms,fundamental"),
    ],
)
def test_commands_succeed(argv):
    code, r = report(*argv)
    assert code == 0, r


def test_graph_sc(tmp_path):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"vertices": [0, 1, 2], "edges": [[0, 1, "a"], [1, 2, "b"], [2, 0, "c"]]}))
    code, r = report("graph-sc", str(p), "--lambda", "1/6")
    assert code == 0 and r["results"]["girth"] == 3


def test_qc_strong_check(cycle_file):
    # the point 7 opposite the arc sees 0 and 2 at distance 5 with product 4
    code, r = report("qc", cycle_file, "--subset", "0,1,2", "--delta", "1")
    assert code == 0 and r["results"]["alpha"] == "1" and r["results"]["witness"][0] == 7
    code, r = report("qc", cycle_file, "--subset", "0,1,2", "--delta", "0")
    assert code == 1 and not r["results"]["strong"]["verdict"]


def test_to_jsonable_special_values():
    from fractions import Fraction

    import numpy as np

    assert to_jsonable(Fraction(3, 4)) == "3/4"
    assert to_jsonable(float("inf")) == "infinite"
    assert to_jsonable(np.int64(3)) == 3
    assert to_jsonable({2, 1}) == [1, 2]
    assert json.loads(dumps({"x": float("inf")})) == {"x": "infinite"}
    assert render_text({"a": {"b": 1}}).strip() == "a.b = 1"


def test_entry_point_subprocess(tree_file):
    exe = os.path.join(os.path.dirname(sys.executable), "hypersc")
    cmd = [exe] if os.path.exists(exe) else [sys.executable, "-m", "hypersc.cli"]
    out = subprocess.run(cmd + ["delta", tree_file], capture_output=True, text=True, check=False)
    assert out.returncode == 0
    assert json.loads(out.stdout)["status"] == "ok"
