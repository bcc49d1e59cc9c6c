import json
import subprocess
import sys

import pytest

from recsub.cli import EXIT_BUDGET, EXIT_INPUT, EXIT_MISMATCH, EXIT_OK, RunConfig, main
from recsub.trees import tree_from_json, treeof
from recsub.syntax import Forall, FreeVar, Fun, Rec, Var

SHIFTY_TEXT = "forall x <= A. rec a. x -> forall y <= A. a"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, text, name="q.rsq"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_curated_corpus_all_engines(capsys, curated_path):
    code, out, _ = run(capsys, "check", str(curated_path), "--engine", "all", "--json")
    assert code == EXIT_OK
    records = json.loads(out)["results"]
    by_query = {}
    for r in records:
        assert set(r) >= {"query", "engine", "verdict", "witnessPath", "promotions", "assertions", "millis"}
        by_query.setdefault(r["query"], set()).add(r["verdict"])
    assert len(by_query) >= 20 and all(len(v) == 1 for v in by_query.values())


def test_rejected_files(capsys, curated_path):
    rejected = sorted((curated_path.parent / "rejected").glob("*.rsq"))
    assert len(rejected) >= 3
    for p in rejected:
        code, out, _ = run(capsys, "check", str(p), "--engine", "all", "--json")
        assert code == EXIT_INPUT
        assert json.loads(out)["error"] == "NonContractive"


def test_non_contractive(capsys, tmp_path):
    code, _, err = run(capsys, "check", write(tmp_path, "A <= A;\nrec a. a <= A;"))
    assert code == EXIT_INPUT and "NonContractive" in err


def test_reflexivity_automata(capsys, tmp_path):
    code, _, _ = run(capsys, "check", write(tmp_path, "A <= A;\nrec a. A -> a <= rec a. A -> a;"), "--engine", "automata")
    assert code == EXIT_OK


def test_exit_codes(capsys, tmp_path):
    f = write(tmp_path, "A <= A;\nB <= A;\nexpect yes: A <= B;")
    assert run(capsys, "check", f)[0] == EXIT_MISMATCH
    f = write(tmp_path, "A <= A;\nA -> A <= A;")
    assert run(capsys, "check", f)[0] == EXIT_MISMATCH
    f = write(tmp_path, "A <= A;\nexpect no: A -> A <= A;")
    assert run(capsys, "check", f)[0] == EXIT_OK
    f = write(tmp_path, "A <= A;\nrec a. A -> a == rec a. A -> A -> a;")
    assert run(capsys, "check", f, "--budget", "1")[0] == EXIT_BUDGET
    assert run(capsys, "check", write(tmp_path, "A <= ;"))[0] == EXIT_INPUT
    assert run(capsys, "check", str(tmp_path / "missing.rsq"))[0] == EXIT_INPUT
    assert run(capsys, "check", f, "--depth", "0")[0] == EXIT_INPUT


def test_strict_frees(capsys, tmp_path):
    f = write(tmp_path, "expect yes: Q <= Q;")
    code, _, err = run(capsys, "check", f)
    assert code == EXIT_INPUT and "'Q'" in err
    assert run(capsys, "check", f, "--no-strict-frees")[0] == EXIT_OK
    g = write(tmp_path, "expect no: P <= Q;", "g.rsq")
    assert run(capsys, "check", g, "--no-strict-frees", "--engine", "all")[0] == EXIT_OK


def test_explain(capsys, tmp_path):
    f = write(tmp_path, "A <= A;\nrec a. A -> a == rec a. A -> A -> a;")
    code, out, _ = run(capsys, "check", f, "--explain")
    assert code == EXIT_OK and "coinduction" in out


def test_check_json_deterministic(capsys, curated_path):
    a = run(capsys, "check", str(curated_path), "--engine", "all", "--json")[1]
    b = run(capsys, "check", str(curated_path), "--engine", "all", "--json")[1]
    assert a == b


def test_tree(capsys):
    code, out, _ = run(capsys, "tree", "rec a. A -> a", "--depth", "3")
    assert code == EXIT_OK and out.strip() == "A -> (A -> (‹cut› -> ‹cut›))"
    assert run(capsys, "tree", "A", "--depth", "10")[1].strip() == "A"
    oracle = run(capsys, "tree", SHIFTY_TEXT, "--depth", "6", "--json")[1]
    generated = run(capsys, "tree", SHIFTY_TEXT, "--depth", "6", "--json", "--engine", "automata")[1]
    assert oracle == generated
    shifty = Forall(FreeVar("A"), Rec(Fun(Var(1), Forall(FreeVar("A"), Var(1)))))
    assert tree_from_json(json.loads(oracle)["tree"]) is treeof(shifty, 6)
    assert run(capsys, "tree", "rec a. a")[0] == EXIT_INPUT
    assert run(capsys, "tree", "A ->")[0] == EXIT_INPUT


def test_tree_size_cap(capsys):
    code, _, err = run(capsys, "tree", "rec a. a -> a", "--depth", "40")
    assert code == EXIT_INPUT and "smaller --depth" in err


def test_automaton(capsys):
    code, out, _ = run(capsys, "automaton", "rec a. A -> a")
    assert code == EXIT_OK and out == "start q0\nq0 Fun L->q1 R->q0\nq1 FreeVar(A)\n"
    out = run(capsys, "automaton", SHIFTY_TEXT, "--dot")[1]
    assert out.startswith("digraph") and "Shift" in out
    data = json.loads(run(capsys, "automaton", SHIFTY_TEXT, "--json")[1])
    assert len(data["states"]) == 7


def test_fuzz(capsys):
    code, a, _ = run(capsys, "fuzz", "--seed", "1", "--count", "10", "--size-max", "4", "--json")
    assert code == EXIT_OK
    assert a == run(capsys, "fuzz", "--seed", "1", "--count", "10", "--size-max", "4", "--json")[1]
    report = json.loads(a)
    assert report["casesRun"] == 10 and report["disagreements"] == []
    code, out, _ = run(capsys, "fuzz", "--count", "0", "--json")
    assert code == EXIT_OK and json.loads(out)["casesRun"] == 0


def test_fuzz_parallel_matches_serial(capsys):
    serial = run(capsys, "fuzz", "--seed", "5", "--count", "200", "--json")[1]
    parallel = run(capsys, "fuzz", "--seed", "5", "--count", "200", "--json", "--jobs", "2")[1]
    assert serial == parallel


def test_bench_smoke(capsys):
    code, out, _ = run(capsys, "bench", "--sizes", "50,100", "--json")
    assert code == EXIT_OK
    data = json.loads(out)
    assert len(data["rows"]) == 2 and data["exponent"] is not None


def test_run_config_invariants():
    with pytest.raises(ValueError):
        RunConfig("check", depth=0)
    with pytest.raises(ValueError):
        RunConfig("check", budget=0)


def test_console_entry_point(curated_path):
    proc = subprocess.run([sys.executable, "-m", "recsub", "check", str(curated_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
