import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import random_program
from signilp.logic import Atom, Clause, Compound, Const, ExampleSet, Var
from signilp.lptext import (DuplicateMetarule, InvalidRecall, ParseError, UnknownPlacemarker, dump, load,
                            parse_clauses, parse_examples, parse_metarules, parse_modes, parse_program,
                            serialize_examples, serialize_metarules, serialize_modes, serialize_program)
from signilp.mdie import ModeDecl, Placemarker
from signilp.mil import MetaAtom, Metarule

lower = st.sampled_from(["p1", "red", "stop", "a", "w_1", "octagon", "n1_d1"])
ints = st.integers(0, 999).map(Const)
variables = st.sampled_from(["A", "B", "X", "Y1", "_G"]).map(Var)
preds = st.sampled_from(["color", "shape", "has_word", "p", "q"])


def term_strategy():
    leaf = st.one_of(lower.map(Const), ints, variables)
    return st.recursive(leaf, lambda inner: st.builds(Compound, st.sampled_from(["f", "g"]),
                                                      st.lists(inner, min_size=1, max_size=2)), max_leaves=4)


atoms = st.builds(Atom, preds, st.lists(term_strategy(), max_size=3))
clauses = st.builds(Clause, atoms, st.lists(atoms, max_size=3))


class TestPrograms:
    def test_one_fact(self):
        prog = parse_program("color(p1,red).")
        assert len(prog) == 1 and prog.clauses[0].is_ground()

    def test_empty_text(self):
        assert len(parse_program("")) == 0

    def test_printed_spacing_is_accepted(self):
        c = parse_clauses("color(p1, red).")[0]
        assert c.head == Atom("color", [Const("p1"), Const("red")])

    def test_case_decides_variables(self):
        c = parse_clauses("p(X, x, 30, _y).")[0]
        assert c.head.args == (Var("X"), Const("x"), Const(30), Var("_y"))

    def test_comments_are_skipped(self):
        assert len(parse_program("% header\np(a). % trailing\n")) == 1

    def test_file_order_is_kept(self):
        text = "b(x). a(y) :- b(y). c(z)."
        assert [c.head.predicate for c in parse_program(text)] == ["b", "a", "c"]

    @pytest.mark.parametrize("bad", ["p(a", "p(a) :- .", "p(a),", "P(a).", "p(a) q(b).", "p(a) :- q(b)"])
    def test_malformed_input(self, bad):
        with pytest.raises(ParseError):
            parse_program(bad)

    def test_error_position(self):
        with pytest.raises(ParseError) as info:
            parse_program("color(p1,red).\ncolor(p1$,white).")
        assert (info.value.line, info.value.column) == (2, 9)
        assert info.value.found == "$"

    def test_generated_corpus_round_trips(self):
        rng = random.Random(11)
        for _ in range(50):
            _, _, cl = random_program(rng)
            text = serialize_program(cl)
            assert parse_clauses(text) == cl
            assert serialize_program(parse_clauses(text)) == text


@settings(max_examples=200, deadline=None)
@given(st.lists(clauses, max_size=5))
def test_clause_round_trip(cl):
    text = serialize_program(cl)
    assert parse_clauses(text) == cl
    assert serialize_program(parse_clauses(text)) == text


@settings(max_examples=200, deadline=None)
@given(st.lists(clauses, min_size=1, max_size=4), st.data())
def test_illegal_character_is_reported_near_injection(cl, data):
    text = serialize_program(cl)
    k = data.draw(st.integers(0, len(text)))
    broken = text[:k] + "$" + text[k:]
    with pytest.raises(ParseError) as info:
        parse_program(broken)
    assert 0 <= info.value.offset <= k + 1


ground_atoms = st.builds(Atom, preds, st.lists(st.one_of(lower.map(Const), ints), min_size=1, max_size=3))


@settings(max_examples=100, deadline=None)
@given(st.lists(ground_atoms, max_size=4), st.lists(ground_atoms, max_size=4))
def test_examples_round_trip(pos, neg):
    ex = ExampleSet(pos, neg)
    back = parse_examples(serialize_examples(ex))
    assert back.positives == pos and back.negatives == neg


def test_examples_must_be_pos_or_neg():
    with pytest.raises(ParseError):
        parse_examples("maybe(p(a)).")
    with pytest.raises(ParseError):
        parse_examples("pos(p(X)).")


class TestModes:
    def test_unbounded_body_mode(self):
        (m,) = parse_modes("modeb(*, colour(+sign,#colour)).")
        assert m.kind == "body" and m.recall is None
        assert m.args == (Placemarker("+", "sign"), Placemarker("#", "colour"))

    def test_head_mode(self):
        (m,) = parse_modes("modeh(1, traffic_sign(+sign,#class)).")
        assert m.kind == "head" and m.recall == 1 and m.predicate == "traffic_sign"

    def test_zero_recall(self):
        with pytest.raises(InvalidRecall):
            parse_modes("modeb(0, p(+t)).")

    def test_unknown_placemarker(self):
        with pytest.raises(UnknownPlacemarker):
            parse_modes("modeb(1, p(t)).")

    def test_directive_prefix(self):
        assert len(parse_modes(":- modeb(*, p(+t,-t)).")) == 1


placemarkers = st.builds(Placemarker, st.sampled_from("+-#"), st.sampled_from(["sign", "w", "int", "colour"]))
modes = st.builds(ModeDecl, st.sampled_from(["head", "body"]), st.one_of(st.none(), st.integers(1, 9)),
                  preds, st.lists(placemarkers, max_size=3).map(tuple))


@settings(max_examples=100, deadline=None)
@given(st.lists(modes, max_size=5))
def test_modes_round_trip(ms):
    assert parse_modes(serialize_modes(ms)) == ms


class TestMetarules:
    def test_chain(self):
        (m,) = parse_metarules("chain: P(x,y) :- Q(x,z), R(z,y).")
        assert m.name == "chain"
        assert m.head == MetaAtom("P", ("x", "y"))
        assert m.body == (MetaAtom("Q", ("x", "z")), MetaAtom("R", ("z", "y")))
        assert m.second_order_vars == ("P", "Q", "R")
        assert m.first_order_vars == ("x", "y", "z")

    def test_identify(self):
        (m,) = parse_metarules("identify: P(x,y) :- Q(x,y).")
        assert m.body == (MetaAtom("Q", ("x", "y")),)

    def test_duplicate_name(self):
        with pytest.raises(DuplicateMetarule):
            parse_metarules("r: P(x) :- Q(x).\nr: P(x,y) :- Q(y,x).")

    def test_order_annotation(self):
        (m,) = parse_metarules("chain: P(x,y) :- Q(x,z), R(z,y) @ P>Q, P>R.")
        assert m.order == (("P", "Q"), ("P", "R"))

    def test_bundled_set_is_parseable(self):
        from signilp.task import default_metarules
        names = [m.name for m in default_metarules()]
        assert names == ["identify", "inverse", "precon", "postcon", "chain", "recursion"]


fo = st.sampled_from(["x", "y", "z"])
meta_atoms = st.builds(MetaAtom, st.sampled_from(["P", "Q", "R", "edge"]), st.lists(fo, max_size=2).map(tuple))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(meta_atoms, st.lists(meta_atoms, min_size=1, max_size=3)), max_size=4))
def test_metarules_round_trip(specs):
    rules = [Metarule(f"m{i}", h, tuple(b)) for i, (h, b) in enumerate(specs)]
    assert parse_metarules(serialize_metarules(rules)) == rules


def test_files_round_trip(tmp_path):
    cl = parse_clauses("traffic_sign(A,stop_sign) :- has_word(A,B), closely_match(B,stop).")
    dump(tmp_path / "h.lp", "hypothesis", cl)
    assert load(tmp_path / "h.lp", "hypothesis").declarations == cl
    ex = ExampleSet([Atom("p", [Const("a")])], [Atom("p", [Const("b")])])
    dump(tmp_path / "e.ex", "examples", ex)
    back = load(tmp_path / "e.ex").declarations
    assert back.positives == ex.positives and back.negatives == ex.negatives
    text = (tmp_path / "h.lp").read_bytes()
    assert text.endswith(b".\n") and b"\r" not in text
