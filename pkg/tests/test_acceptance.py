"""Acceptance criteria.  Each test prints a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear without ``-s``)
or directly with ``python tests/test_acceptance.py``.
"""

import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

from recsub.automata import automataof, generate, subtype_automata
from recsub.bench import family, run_bench
from recsub.coinductive import check
from recsub.fuzz import random_type, run_fuzz
from recsub.parser import parse_query_file, parse_type, print_type
from recsub.syntax import GlobalEnv, Rec, Relation, SForall, SFun, SRec, SVar, unfold_rec
from recsub.trees import is_prefix_of, treeof
from recsub.verdict import No, Yes, YesToDepth

SEED, COUNT, SIZE_MAX = 42, 10_000, 12
CURATED = Path(__file__).resolve().parents[1] / "src" / "recsub" / "data" / "curated.rsq"


@pytest.fixture
def report_line(capsys):
    """Yield a dict; the test fills in ``name`` and ``detail``, the outcome is printed."""
    info = {"name": "?", "detail": ""}
    ok = False

    def done():
        nonlocal ok
        ok = True

    info["done"] = done
    yield info
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {info['name']}: {info['detail']}")


@pytest.fixture(scope="module")
def fuzz_run():
    cases = []
    t0 = time.perf_counter()
    report = run_fuzz(SEED, COUNT, SIZE_MAX, on_case=cases.append)
    return report, cases, time.perf_counter() - t0


def _random_types(n, seed):
    rng = random.Random(seed)
    return [random_type(rng, rng.randint(1, SIZE_MAX), ("A", "B", "C"), ()) for _ in range(n)]


def test_engine_agreement(fuzz_run, report_line):
    report_line["name"] = "engine agreement (10,000 instances, seed 42, sizeMax 12)"
    report, cases, seconds = fuzz_run
    mismatched = [
        c.index for c in cases
        if not c.budget_exceeded
        and c.verdicts["coinductive"].kind != c.verdicts["automata"].kind
    ]
    rate = report.budget_exceeded_count / COUNT
    report_line["detail"] = (f"{len(mismatched)} disagreements, budget exceeded {rate:.3%}, "
                             f"{seconds:.1f}s, {report.yes} yes / {report.no} no")
    assert report.cases_run == COUNT
    assert mismatched == []
    assert rate < 0.001
    assert seconds < 300
    report_line["done"]()


def test_oracle_consistency(fuzz_run, report_line):
    report_line["name"] = "oracle consistency at depth 64"
    _, cases, _ = fuzz_run
    violations = 0
    for c in cases:
        orc = c.verdicts["oracle"]
        for name in ("coinductive", "automata"):
            v = c.verdicts[name]
            if isinstance(v, No) and not isinstance(orc, No):
                violations += 1
            if isinstance(v, Yes) and not isinstance(orc, YesToDepth):
                violations += 1
    report_line["detail"] = f"{violations} violations over {len(cases)} instances"
    assert violations == 0
    report_line["done"]()


def test_generation_correctness(fuzz_run, report_line):
    report_line["name"] = "generate(automataof(t), 16) = treeof(t, 16)"
    _, cases, _ = fuzz_run
    types = [t for c in cases for t in (c.instance.left, c.instance.right)]
    types += [family(n) for n in range(10, 410, 7)] + [family(n, True) for n in range(10, 410, 7)]
    bad = sum(generate(automataof(t), 16) is not treeof(t, 16) for t in types)
    shifts = sum(automataof(t).shift_count > 0 for t in types)
    report_line["detail"] = f"{bad} violations over {len(types)} types ({shifts} with shift states)"
    assert bad == 0
    report_line["done"]()


def test_curated_corpus(report_line):
    report_line["name"] = "curated corpus with --engine all"
    qf = parse_query_file(CURATED.read_text())
    text = CURATED.read_text()
    proc = subprocess.run([sys.executable, "-m", "recsub", "check", str(CURATED), "--engine", "all"],
                          capture_output=True, text=True)
    rejected = sorted((CURATED.parent / "rejected").glob("*.rsq"))
    codes = [subprocess.run([sys.executable, "-m", "recsub", "check", str(p), "--engine", "all"],
                            capture_output=True, text=True).returncode for p in rejected]
    required = ["unrolling", "contravariance", "F-bounded promotion", "kernel rule"]
    report_line["detail"] = (f"{len(qf.queries)} queries, exit {proc.returncode}; "
                             f"{len(rejected)} non-contractive files rejected with exit codes {sorted(set(codes))}")
    assert len(qf.queries) + len(rejected) >= 20 and len(qf.queries) >= 20
    assert all(q.expected is not None for q in qf.queries)
    assert all(word in text for word in required)
    assert ("A", "A -> C") in [(n, print_type(b)) for n, b in qf.decls]
    assert proc.returncode == 0, proc.stdout
    assert rejected and all(c == 2 for c in codes)
    report_line["done"]()


def test_properties(fuzz_run, report_line):
    report_line["name"] = "properties (reflexivity, Eq => mutual Sub, unrolling invariance, monotonicity)"
    _, cases, _ = fuzz_run
    env = GlobalEnv([("A", None), ("B", None), ("C", None)])
    failures = {"reflexivity": 0, "eq-sub": 0, "unrolling": 0, "monotonicity": 0}

    for t in _random_types(1000, 101):
        for v in (check(env, t, t, Relation.SUB),
                  subtype_automata(env, automataof(t), automataof(t), Relation.SUB)):
            failures["reflexivity"] += not isinstance(v, Yes)

    eq_yes = 0
    for c in cases:
        i = c.instance
        if i.rel is Relation.EQ and isinstance(c.verdicts["coinductive"], Yes):
            eq_yes += 1
            for l, r in ((i.left, i.right), (i.right, i.left)):
                failures["eq-sub"] += not isinstance(check(i.env, l, r, Relation.SUB), Yes)

    unroll_cases = [c.instance for c in cases if isinstance(c.instance.left, Rec)][:1000]
    for i in unroll_cases:
        a = check(i.env, i.left, i.right, i.rel)
        b = check(i.env, unfold_rec(i.left), i.right, i.rel)
        failures["unrolling"] += a.kind != b.kind or treeof(i.left, 12) is not treeof(unfold_rec(i.left), 12)

    rng = random.Random(202)
    for t in _random_types(1000, 303):
        d = rng.randint(0, 24)
        failures["monotonicity"] += not is_prefix_of(treeof(t, d), treeof(t, d + 1))

    report_line["detail"] = (f"failures {failures}; {eq_yes} Eq-yes cases, "
                             f"{len(unroll_cases)} unrolling cases")
    assert len(unroll_cases) == 1000
    assert all(v == 0 for v in failures.values())
    report_line["done"]()


def test_complexity_smoke(report_line):
    report_line["name"] = "automata engine scaling on F(n), n in {50,100,200,400}"
    report = run_bench([50, 100, 200, 400])
    worst_ratio = max(b.seconds / a.seconds for a, b in zip(report.rows, report.rows[1:]))
    report_line["detail"] = (f"exponent {report.exponent:.2f}, slowest run {report.max_seconds:.4f}s, "
                             f"largest doubling ratio {worst_ratio:.1f}")
    assert report.exponent <= 4.5
    assert report.max_seconds <= 60
    assert worst_ratio <= 2 ** 4.5
    assert all(r.yes_verdict == "yes" and r.no_verdict == "no" for r in report.rows)
    report_line["done"]()


_IDENT_START = "abcxyzABCXYZ_"
_IDENT_REST = "abc019_'"


def _random_ident(rng):
    while True:
        s = rng.choice(_IDENT_START) + "".join(rng.choice(_IDENT_REST) for _ in range(rng.randint(0, 3)))
        if s not in ("rec", "forall"):
            return s


def _random_surface(rng, budget):
    if budget <= 1:
        return SVar(_random_ident(rng))
    k = rng.randrange(4)
    if k == 0:
        return SVar(_random_ident(rng))
    if k == 1:
        left = rng.randint(1, budget - 1)
        return SFun(_random_surface(rng, left), _random_surface(rng, budget - left))
    if k == 2 and budget >= 3:
        b = rng.randint(1, budget - 2)
        return SForall(_random_ident(rng), _random_surface(rng, b), _random_surface(rng, budget - 1 - b))
    return SRec(_random_ident(rng), _random_surface(rng, budget - 1))


def test_parser_round_trip(report_line):
    report_line["name"] = "parser round-trip on 10,000 random surface types"
    rng = random.Random(4242)
    failures = 0
    for _ in range(10_000):
        s = _random_surface(rng, rng.randint(1, 16))
        failures += parse_type(print_type(s)) != s
    report_line["detail"] = f"{failures} failures"
    assert failures == 0
    report_line["done"]()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
