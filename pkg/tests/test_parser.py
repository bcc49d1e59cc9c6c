import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recsub.parser import ParseError, parse_query_file, parse_type, print_type
from recsub.syntax import Relation, SForall, SFun, SRec, SVar

idents = st.from_regex(r"[A-Za-z_][A-Za-z0-9_']{0,3}", fullmatch=True).filter(
    lambda s: s not in {"rec", "forall"}
)
surface = st.recursive(
    idents.map(SVar),
    lambda sub: st.one_of(
        st.builds(SFun, sub, sub),
        st.builds(SForall, idents, sub, sub),
        st.builds(SRec, idents, sub),
    ),
    max_leaves=12,
)


def test_parse_examples():
    assert parse_type("rec a. a -> a") == SRec("a", SFun(SVar("a"), SVar("a")))
    assert parse_type("forall a <= a -> C. a") == SForall("a", SFun(SVar("a"), SVar("C")), SVar("a"))
    assert parse_type("A -> B -> C") == SFun(SVar("A"), SFun(SVar("B"), SVar("C")))


def test_binders_extend_right_and_bind_looser_than_arrow():
    assert parse_type("rec a. A -> a") == SRec("a", SFun(SVar("A"), SVar("a")))
    assert parse_type("A -> rec a. A -> a") == SFun(SVar("A"), SRec("a", SFun(SVar("A"), SVar("a"))))


def test_print_examples():
    assert print_type(SFun(SFun(SVar("A"), SVar("B")), SVar("C"))) == "(A -> B) -> C"
    assert print_type(SRec("a", SFun(SVar("A"), SVar("a")))) == "rec a. A -> a"
    assert print_type(SForall("a", SVar("A"), SFun(SVar("a"), SVar("a")))) == "forall a <= A. a -> a"


@settings(max_examples=500, deadline=None)
@given(surface)
def test_round_trip(s):
    assert parse_type(print_type(s)) == s


@pytest.mark.parametrize("text", ["", "A ->", "(A", "rec . A", "forall a A. a", "A B", "rec a a", "A -> )", "#x\nA $"])
def test_error_positions_inside_input(text):
    with pytest.raises(ParseError) as info:
        parse_type(text)
    pos = info.value.pos
    assert 0 <= pos.offset <= max(len(text) - 1, 0)
    line_start = text.rfind("\n", 0, pos.offset) + 1
    assert pos.line == text.count("\n", 0, pos.offset) + 1
    assert pos.column == pos.offset - line_start + 1


def test_query_file_examples():
    qf = parse_query_file("A <= A -> C; C <= C; A <= A -> C;")
    assert [d[0] for d in qf.decls] == ["A", "C"]
    assert len(qf.queries) == 1 and qf.queries[0].relation is Relation.SUB

    empty = parse_query_file("")
    assert empty.decls == () and empty.queries == ()

    qf = parse_query_file("A <= A;\nexpect yes: rec a. A -> a == A -> rec a. A -> a;")
    (q,) = qf.queries
    assert q.relation is Relation.EQ and q.expected is True


def test_query_file_comments_and_expect_no():
    qf = parse_query_file("# header\nA <= A; # trailing\nexpect no: A == A -> A;\nA -> A <= A -> A;\n")
    assert [q.expected for q in qf.queries] == [False, None]


def test_query_file_errors():
    with pytest.raises(ParseError):
        parse_query_file("A <= A")
    with pytest.raises(ParseError):
        parse_query_file("expect maybe: A <= A;")
    with pytest.raises(ParseError):
        parse_query_file("A;")
