import json
import pathlib

import pytest

from rclam.cli import main

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"
GOLDEN = pathlib.Path(__file__).resolve().parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_check_exit_codes(capsys):
    code, _ = run(capsys, "check", "--base", "nd", "--res", "w", "-e", "\\x. y")
    assert code == 1
    code, _ = run(capsys, "check", "--base", "nd", "--res", "none", "-e", "\\x. y")
    assert code == 0
    # usage errors are distinguished from negative verdicts
    code = main(["check", "--base", "nd", "--res", "w", "-e", "(\\x. y"])
    assert code == 2


def test_normalize_weakening_subtlety(capsys):
    code, out = run(capsys, "normalize", "--base", "nd", "--res", "w",
                    "-e", "(\\x. x (W[x] y)) z", "--trace")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("beta") and lines[1].startswith("omega3")
    assert lines[-1].endswith("z y")


def test_measure(capsys):
    code, out = run(capsys, "measure", "--base", "lj", "-e", "x")
    assert code == 0
    assert out.strip() == "size=1 cnorm=0 wnorm=1"


def test_type_and_untypeable(capsys):
    code, out = run(capsys, "type", "--base", "nd", "-e", "\\x. x")
    assert code == 0 and "a -> a" in out
    code, out = run(capsys, "type", "--base", "nd", "-e", "\\x. x x")
    assert code == 1


def test_sn_verdicts(capsys):
    code, out = run(capsys, "sn", "--base", "nd", "-e", "(\\x. x) y")
    assert code == 0 and "longest path 1" in out
    code, out = run(capsys, "sn", "--base", "nd", "-e", "(\\x. x x) (\\x. x x)")
    assert code == 1 and "cycle" in out


def test_translate(capsys):
    code, out = run(capsys, "translate", "--base", "lj",
                    "-e", "\\x. x (y :: ^z. z)")
    assert code == 0
    assert out.strip() == "\\x. (\\z. z) (x y)"


def test_itype_synthesize_then_check(capsys, tmp_path):
    code, out = run(capsys, "itype", "--base", "nd", "--res", "c",
                    "--synthesize", "C[x<a,b] (a b)")
    assert code == 0
    doc = json.loads(out)
    f = tmp_path / "d.json"
    f.write_text(json.dumps(doc))
    code, out = run(capsys, "itype", "--base", "nd", "--res", "c",
                    "--check", str(f))
    assert code == 0 and "valid" in out
    # damage the derivation: the checker pinpoints it
    doc["type"] = "p99"
    f.write_text(json.dumps(doc))
    code, out = run(capsys, "itype", "--base", "nd", "--res", "c",
                    "--check", str(f))
    assert code == 1


def test_corpus_files_run(capsys):
    code, _ = run(capsys, "check", "--base", "nd", "--res", "c",
                  str(CORPUS / "nd_contr_unused.rc"))
    assert code == 0
    code, _ = run(capsys, "check", "--base", "nd", "--res", "w",
                  str(CORPUS / "nd_contr_unused.rc"))
    assert code == 1
    code, _ = run(capsys, "normalize", "--base", "lj", "--res", "none",
                  str(CORPUS / "lj_garbage_collect.rc"))
    assert code == 0


GOLDEN_CASES = [
    ("check_ok.json", ["check", "--base", "lj", "--res", "cw", "--json",
                       "-e", "\\x. W[x] C[y<y1,y2] y1 (y2 :: ^z. z)"]),
    ("normalize_subtlety.json", ["normalize", "--base", "nd", "--res", "w",
                                 "--trace", "--json",
                                 "-e", "(\\x. x (W[x] y)) z"]),
    ("type_identity.json", ["type", "--base", "nd", "--json", "-e", "\\x. x"]),
    ("measure_var.json", ["measure", "--base", "lj", "--json", "-e", "x"]),
    ("sn_omega.json", ["sn", "--base", "nd", "--json",
                       "-e", "(\\x. x x) (\\x. x x)"]),
]


@pytest.mark.parametrize("name,argv", GOLDEN_CASES)
def test_json_golden(capsys, name, argv):
    _, out = run(capsys, *argv)
    expected = (GOLDEN / name).read_text()
    assert json.loads(out) == json.loads(expected)
    assert out == expected


def test_json_output_deterministic(capsys):
    argv = ["itype", "--base", "lj", "--res", "cw", "--json", "--synthesize",
            "\\x. W[x] C[y<y1,y2] y1 (y2 :: ^z. z)"]
    _, out1 = run(capsys, *argv)
    _, out2 = run(capsys, *argv)
    assert out1 == out2
