from recsub.automata import automataof, generate, subtype_automata
from recsub.bench import BENCH_ENV, BenchReport, family, fit_exponent, run_bench
from recsub.coinductive import check
from recsub.syntax import Relation, is_well_formed, size
from recsub.trees import treeof


def test_family_shape():
    for n in (10, 50, 100, 200, 400):
        t = family(n)
        assert is_well_formed(t, BENCH_ENV)
        assert n - 7 < size(t) <= n
        assert automataof(t).shift_count > 0
    assert size(family(50, mutated=True)) == size(family(50))


def test_family_verdicts_agree_across_engines():
    for n in (10, 24, 50):
        t, u = family(n), family(n, mutated=True)
        for l, r, kind in ((t, t, "yes"), (t, u, "no")):
            assert check(BENCH_ENV, l, r, Relation.SUB).kind == kind
            assert subtype_automata(BENCH_ENV, automataof(l), automataof(r), Relation.SUB).kind == kind
        assert generate(automataof(u), 20) is treeof(u, 20)


def test_fit_exponent_recovers_known_slope():
    ns = [10, 20, 40, 80]
    assert abs(fit_exponent(ns, [n**3 * 1e-6 for n in ns]) - 3.0) < 1e-9


def test_smoke_run_and_json_round_trip():
    report = run_bench([50, 100], min_total=0.0)
    assert len(report.rows) == 2
    assert all(r.yes_verdict == "yes" and r.no_verdict == "no" for r in report.rows)
    again = BenchReport.from_json(report.to_json())
    assert again == report
    assert "fitted exponent" in report.table()
